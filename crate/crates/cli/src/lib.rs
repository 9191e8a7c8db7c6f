//! Implementation of the `tssort` command.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use tssort::{
    run_matrix, Algorithm, ComparisonOutcome, EngineParams, ExperimentConfig, Method, RunsRule,
    SortSession,
};
use tssort_service::SessionStore;

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "tssort",
    version,
    about = "Noise-resistant probabilistic comparison sorting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a convergence experiment matrix and write curve CSVs plus a manifest.
    Simulate(SimulateArgs),
    /// Sort the lines of a file by answering pairwise questions on the terminal.
    Sort(SortArgs),
    /// Serve the session HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// List lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 32, 64, 128, 256, 512], value_parser = parse_length)]
    pub lengths: Vec<usize>,
    /// Noise levels in [0, 1], comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1], value_parser = parse_noise)]
    pub noise: Vec<f64>,
    /// Runs per cell [default: 128 for n <= 64, else 64].
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: Option<u32>,
    /// Methods, comma separated [default: all].
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Budget of probabilistic methods as a multiple of n*log2(n).
    #[arg(long, default_value_t = 1.0, value_parser = parse_multiplier)]
    pub budget_multiplier: f64,
}

#[derive(Debug, Args)]
pub struct SortArgs {
    /// UTF-8 file with one item label per line; blank lines are ignored.
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long, default_value_t = Algorithm::TsSortPartnerWover)]
    pub algorithm: Algorithm,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TCP port; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Directory holding one JSON file per session.
    #[arg(long)]
    pub data_dir: PathBuf,
}

fn parse_length(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(format!("expected an integer >= 2, got {s:?}")),
    }
}

fn parse_noise(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(p) if (0.0..=1.0).contains(&p) => Ok(p),
        _ => Err(format!("expected a probability in [0, 1], got {s:?}")),
    }
}

fn parse_multiplier(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(m) if m.is_finite() && m > 0.0 => Ok(m),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

pub fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sort(args) => cmd_sort(args),
        Command::Serve(args) => cmd_serve(args),
    }
}

pub fn experiment_config(args: &SimulateArgs) -> ExperimentConfig {
    ExperimentConfig {
        lengths: args.lengths.clone(),
        noise_levels: args.noise.clone(),
        runs: args
            .runs
            .map_or(RunsRule::ByLength, |r| RunsRule::Fixed(r as usize)),
        methods: if args.algorithms.is_empty() {
            Method::ALL.to_vec()
        } else {
            args.algorithms.clone()
        },
        base_seed: args.seed,
        budget_multiplier: args.budget_multiplier,
        params: EngineParams::default(),
    }
}

fn cmd_simulate(args: SimulateArgs) -> ExitCode {
    let config = experiment_config(&args);
    if let Err(err) = config.validate() {
        eprintln!("error: {err}");
        return ExitCode::from(EXIT_USAGE);
    }
    let report = match run_matrix(&config, &args.out) {
        Ok(report) => report,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let manifest = &report.manifest;
    for cell in &manifest.cells {
        println!(
            "{:<22} n={:<4} p={:<5} runs={:<4} {:?} {}",
            cell.algorithm.label(),
            cell.n,
            cell.noise,
            cell.runs,
            cell.status,
            cell.final_mean_mse
                .map_or_else(String::new, |m| format!("final_mse={m:.6}")),
        );
    }
    let failed: Vec<_> = manifest.failed_cells().collect();
    if failed.is_empty() {
        println!(
            "wrote {} cells to {}",
            manifest.cells.len(),
            args.out.display()
        );
        ExitCode::SUCCESS
    } else {
        for cell in failed {
            eprintln!(
                "failed: {} n={} p={}: {}",
                cell.algorithm,
                cell.n,
                cell.noise,
                cell.error.as_deref().unwrap_or("unknown error")
            );
        }
        ExitCode::from(EXIT_RUNTIME)
    }
}

/// Nonblank lines of `path`, trimmed.
pub fn read_items(path: &Path) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let items: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if items.len() < 2 {
        return Err(format!(
            "{} holds {} item(s); at least 2 are needed",
            path.display(),
            items.len()
        ));
    }
    Ok(items)
}

fn cmd_sort(args: SortArgs) -> ExitCode {
    let items = match read_items(&args.items) {
        Ok(items) => items,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let stdin = io::stdin();
    let stdout = io::stdout();
    match run_sort(&items, args.algorithm, stdin.lock(), stdout.lock()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

/// Interactive sort loop.
///
/// Each pair is answered with `1` (first is better), `2` (second is better),
/// `=` (draw) or `q` (stop). Anything else re-prompts. End of input acts as
/// `q`. Returns the final session after printing the ranking.
pub fn run_sort(
    items: &[String],
    algorithm: Algorithm,
    mut input: impl BufRead,
    mut output: impl Write,
) -> io::Result<SortSession> {
    let mut session = SortSession::new(items.len(), algorithm, EngineParams::default())
        .map_err(io::Error::other)?;
    let mut line = String::new();
    'pairs: while !session.is_finished() {
        let pair = session.next_pair().map_err(io::Error::other)?;
        let outcome = loop {
            write!(
                output,
                "[{}/{}] 1) {}   2) {}   (1/2/=/q): ",
                session.comparisons_done() + 1,
                session.budget(),
                items[pair.first],
                items[pair.second]
            )?;
            output.flush()?;
            line.clear();
            if input.read_line(&mut line)? == 0 {
                writeln!(output)?;
                break 'pairs;
            }
            match line.trim() {
                "1" => break ComparisonOutcome::FirstWins,
                "2" => break ComparisonOutcome::SecondWins,
                "=" => break ComparisonOutcome::Draw,
                "q" => break 'pairs,
                _ => writeln!(output, "please answer 1, 2, = or q")?,
            }
        };
        session
            .apply_outcome(pair, outcome)
            .map_err(io::Error::other)?;
    }
    write_ranking(&session, items, &mut output)?;
    Ok(session)
}

pub fn write_ranking(
    session: &SortSession,
    items: &[String],
    mut out: impl Write,
) -> io::Result<()> {
    writeln!(
        out,
        "after {} of {} comparisons:",
        session.comparisons_done(),
        session.budget()
    )?;
    writeln!(out, "rank\tlabel\tmu\tsigma\tscore")?;
    for row in session.ranking() {
        writeln!(
            out,
            "{}\t{}\t{:.4}\t{}\t{:.4}",
            row.rank,
            items[row.index],
            row.mu,
            row.sigma
                .map_or_else(|| "-".to_string(), |s| format!("{s:.4}")),
            row.score
        )?;
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let store = match SessionStore::open(&args.data_dir) {
        Ok(store) => Arc::new(store),
        Err(err) => {
            eprintln!("error: data dir {}: {err}", args.data_dir.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(err) => {
            eprintln!("error: cannot start runtime: {err}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    runtime.block_on(async move {
        let addr = SocketAddr::new(args.host, args.port);
        let listener = match tokio::net::TcpListener::bind(addr).await {
            Ok(l) => l,
            Err(err) => {
                eprintln!("error: cannot listen on {addr}: {err}");
                return ExitCode::from(EXIT_RUNTIME);
            }
        };
        let bound = listener.local_addr().map_or(addr, |a| a);
        println!("listening on http://{bound}");
        let _ = io::stdout().flush();
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match tssort_service::serve(listener, store, shutdown).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn answers_drive_the_session() {
        let items = labels(&["x", "y"]);
        let mut out = Vec::new();
        let s = run_sort(
            &items,
            Algorithm::TsSortPartnerWover,
            "1\n1\n".as_bytes(),
            &mut out,
        )
        .unwrap();
        assert!(s.is_finished());
        assert_eq!(s.current_order()[0], 0);
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("1\tx\t"));
    }

    #[test]
    fn malformed_answers_reprompt_without_spending_budget() {
        let items = labels(&["a", "b", "c"]);
        let mut out = Vec::new();
        let s = run_sort(
            &items,
            Algorithm::TsSortPartnerWover,
            "x\n\n3\n2\nq\n".as_bytes(),
            &mut out,
        )
        .unwrap();
        assert_eq!(s.comparisons_done(), 1);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.matches("please answer").count(), 3);
    }

    #[test]
    fn eof_and_quit_print_tie_order() {
        let items = labels(&["a", "b", "c"]);
        for input in ["", "q\n"] {
            let mut out = Vec::new();
            let s = run_sort(
                &items,
                Algorithm::EloSortPartner,
                input.as_bytes(),
                &mut out,
            )
            .unwrap();
            assert_eq!(s.comparisons_done(), 0);
            let text = String::from_utf8(out).unwrap();
            let ranked: Vec<&str> = text
                .lines()
                .skip_while(|l| !l.starts_with("rank"))
                .skip(1)
                .map(|l| l.split('\t').nth(1).unwrap())
                .collect();
            assert_eq!(ranked, ["a", "b", "c"]);
        }
    }

    #[test]
    fn draw_answer_uses_draw_update() {
        let items = labels(&["a", "b"]);
        let mut out = Vec::new();
        let s = run_sort(&items, Algorithm::TsSortDraw, "=\nq\n".as_bytes(), &mut out).unwrap();
        assert_eq!(s.history()[0].outcome, ComparisonOutcome::Draw);
    }

    #[test]
    fn item_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("items.txt");
        std::fs::write(&path, "alpha\n\n  beta \r\n\n").unwrap();
        assert_eq!(read_items(&path).unwrap(), ["alpha", "beta"]);
        std::fs::write(&path, "solo\n").unwrap();
        assert!(read_items(&path).is_err());
        assert!(read_items(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn flag_parsing() {
        let cli = Cli::try_parse_from([
            "tssort",
            "simulate",
            "--lengths",
            "8,16",
            "--noise",
            "0,0.25",
            "--algorithms",
            "merge,tssort_draw",
            "--seed",
            "7",
            "--out",
            "d",
        ])
        .unwrap();
        let Command::Simulate(args) = cli.command else {
            panic!()
        };
        let cfg = experiment_config(&args);
        assert_eq!(cfg.lengths, [8, 16]);
        assert_eq!(cfg.noise_levels, [0.0, 0.25]);
        assert_eq!(cfg.runs, RunsRule::ByLength);
        assert_eq!(cfg.methods.len(), 2);
        assert_eq!(cfg.base_seed, 7);

        for bad in [
            &["tssort", "simulate", "--noise", "1.5", "--out", "d"][..],
            &["tssort", "simulate", "--lengths", "1", "--out", "d"],
            &["tssort", "simulate", "--runs", "0", "--out", "d"],
            &["tssort", "simulate", "--algorithms", "heap", "--out", "d"],
            &["tssort", "simulate", "--bogus", "--out", "d"],
            &["tssort"],
        ] {
            assert!(Cli::try_parse_from(bad).is_err(), "{bad:?}");
        }
    }
}
