//! Seeded convergence experiments over list length, noise level and method.
//!
//! For each run index the shuffled input list and the noise stream are
//! derived from `(base_seed, n, noise, run)` only, so every method in a cell
//! starts from the same list. Results are written as one CSV per cell plus a
//! TOML manifest that is rewritten after every cell, so an interrupted matrix
//! leaves finished cells on disk and the rest marked `pending`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::{run_baseline_with, Baseline};
use crate::error::{Error, Result};
use crate::metrics::{squared_displacement, ConvergenceCurve};
use crate::noise::{NoisyComparator, RNG_ALGORITHM};
use crate::rating::{EloParams, TrueSkillParams};
use crate::session::{scaled_budget, Algorithm, EngineParams, SortSession};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// A sorting method under test: a classical baseline or a session strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Baseline(Baseline),
    Session(Algorithm),
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Baseline(Baseline::Bubble),
        Method::Baseline(Baseline::Merge),
        Method::Baseline(Baseline::Quick),
        Method::Session(Algorithm::EloSortPartner),
        Method::Session(Algorithm::TsSortDraw),
        Method::Session(Algorithm::TsSortWover),
        Method::Session(Algorithm::TsSortPartnerWover),
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Baseline(b) => b.label(),
            Method::Session(a) => a.label(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<Baseline>()
            .map(Method::Baseline)
            .or_else(|_| s.parse::<Algorithm>().map(Method::Session))
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.label().to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// How many runs to average per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunsRule {
    /// 128 runs for `n <= 64`, 64 otherwise.
    ByLength,
    Fixed(usize),
}

impl RunsRule {
    pub fn runs_for(self, n: usize) -> usize {
        match self {
            RunsRule::ByLength if n <= 64 => 128,
            RunsRule::ByLength => 64,
            RunsRule::Fixed(runs) => runs,
        }
    }

    fn describe(self) -> String {
        match self {
            RunsRule::ByLength => "128 if n <= 64 else 64".into(),
            RunsRule::Fixed(runs) => format!("fixed {runs}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub lengths: Vec<usize>,
    pub noise_levels: Vec<f64>,
    pub runs: RunsRule,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    /// Probabilistic methods stop after `ceil(multiplier * n * log2 n)`.
    pub budget_multiplier: f64,
    pub params: EngineParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            lengths: vec![8, 16, 32, 64, 128, 256, 512],
            noise_levels: vec![0.0, 0.1],
            runs: RunsRule::ByLength,
            methods: Method::ALL.to_vec(),
            base_seed: 0,
            budget_multiplier: 1.0,
            params: EngineParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.lengths.is_empty() || self.lengths.iter().any(|&n| n < 2) {
            return invalid(
                "lengths",
                format!("need lengths >= 2, got {:?}", self.lengths),
            );
        }
        if self.noise_levels.is_empty()
            || self.noise_levels.iter().any(|p| !(0.0..=1.0).contains(p))
        {
            return invalid(
                "noise_levels",
                format!("need values in [0, 1], got {:?}", self.noise_levels),
            );
        }
        if self.methods.is_empty() {
            return invalid("methods", "need at least one method".into());
        }
        if let RunsRule::Fixed(0) = self.runs {
            return invalid("runs", "need at least one run".into());
        }
        if !(self.budget_multiplier.is_finite() && self.budget_multiplier > 0.0) {
            return invalid(
                "budget_multiplier",
                format!("must be > 0, got {}", self.budget_multiplier),
            );
        }
        self.params.validate()
    }

    /// Every `(n, noise, method)` cell in run order.
    pub fn cells(&self) -> Vec<(usize, f64, Method)> {
        let mut cells = Vec::new();
        for &n in &self.lengths {
            for &noise in &self.noise_levels {
                for &method in &self.methods {
                    cells.push((n, noise, method));
                }
            }
        }
        cells
    }

    /// Comparison budget of probabilistic methods at length `n`.
    pub fn budget(&self, n: usize) -> usize {
        scaled_budget(n, self.budget_multiplier)
    }
}

/// Purpose of a derived seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedRole {
    Shuffle,
    Noise,
}

/// Noise level in permille, the integer used for seeding and file names.
pub fn noise_permille(noise: f64) -> u64 {
    (noise * 1000.0).round() as u64
}

/// First 8 bytes (little endian) of
/// `SHA-256("tssort-seed-v1" || base || n || permille || run || role)`,
/// integers as u64 little endian and role as one byte (0 shuffle, 1 noise).
pub fn derive_seed(base_seed: u64, n: usize, noise: f64, run: usize, role: SeedRole) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"tssort-seed-v1");
    hasher.update(base_seed.to_le_bytes());
    hasher.update((n as u64).to_le_bytes());
    hasher.update(noise_permille(noise).to_le_bytes());
    hasher.update((run as u64).to_le_bytes());
    hasher.update([match role {
        SeedRole::Shuffle => 0u8,
        SeedRole::Noise => 1,
    }]);
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"))
}

/// Fisher-Yates shuffle of `0..n`.
pub fn shuffled_list(n: usize, seed: u64) -> Vec<usize> {
    let mut list: Vec<usize> = (0..n).collect();
    list.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    list
}

/// MSE after every comparison of one run, plus the list it started from.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub initial: Vec<usize>,
    pub mse: Vec<f64>,
}

/// Executes run `run` of the cell `(n, noise, method)`.
pub fn run_single(
    config: &ExperimentConfig,
    n: usize,
    noise: f64,
    method: Method,
    run: usize,
) -> Result<RunTrace> {
    let initial = shuffled_list(
        n,
        derive_seed(config.base_seed, n, noise, run, SeedRole::Shuffle),
    );
    let noise_seed = derive_seed(config.base_seed, n, noise, run, SeedRole::Noise);
    let scale = n as f64;
    let mse = match method {
        Method::Baseline(baseline) => {
            let ranks: Vec<usize> = (0..n).collect();
            let mut comparator = NoisyComparator::from_ranks(&ranks, noise, noise_seed)?;
            let mut failure = None;
            let mut series = Vec::new();
            run_baseline_with(
                baseline,
                &initial,
                |x, y| match comparator.is_less(x, y) {
                    Ok(lt) => lt,
                    Err(e) => {
                        failure.get_or_insert(e);
                        false
                    }
                },
                |step| {
                    series.push(
                        squared_displacement(step.order_after.iter().copied().enumerate()) / scale,
                    )
                },
            )?;
            if let Some(err) = failure {
                return Err(err);
            }
            series
        }
        Method::Session(algorithm) => {
            let mut comparator = NoisyComparator::from_ranks(&initial, noise, noise_seed)?;
            let mut session =
                SortSession::with_budget(n, algorithm, config.params, config.budget(n))?;
            let mut series = Vec::with_capacity(session.budget());
            while !session.is_finished() {
                let pair = session.next_pair()?;
                let outcome = comparator.compare(pair.first, pair.second)?;
                session.apply_outcome(pair, outcome)?;
                // Best-first order, read back to front as the ascending list.
                let order = session.order();
                let ascending = (0..n).map(|pos| (pos, initial[order[n - 1 - pos]]));
                series.push(squared_displacement(ascending) / scale);
            }
            series
        }
    };
    Ok(RunTrace { initial, mse })
}

/// Aggregated result of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub curve: ConvergenceCurve,
    /// SHA-256 over the initial lists of all runs; equal across methods.
    pub shuffle_digest: String,
}

pub fn run_cell(
    config: &ExperimentConfig,
    n: usize,
    noise: f64,
    method: Method,
) -> Result<CellResult> {
    let runs = config.runs.runs_for(n);
    let traces = (0..runs)
        .into_par_iter()
        .map(|run| run_single(config, n, noise, method, run))
        .collect::<Result<Vec<_>>>()?;
    let mut hasher = Sha256::new();
    for trace in &traces {
        for &v in &trace.initial {
            hasher.update((v as u64).to_le_bytes());
        }
    }
    let series: Vec<Vec<f64>> = traces.into_iter().map(|t| t.mse).collect();
    Ok(CellResult {
        curve: ConvergenceCurve::from_runs(method.label(), n, noise, &series)?,
        shuffle_digest: hex::encode(hasher.finalize()),
    })
}

pub fn curve_file_name(method: Method, n: usize, noise: f64) -> String {
    format!(
        "{}_n{:04}_p{:04}.csv",
        method.label(),
        n,
        noise_permille(noise)
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Pending,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub algorithm: Method,
    pub n: usize,
    pub noise: f64,
    pub runs: usize,
    pub status: CellStatus,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_mean_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    pub lengths: Vec<usize>,
    pub noise_levels: Vec<f64>,
    pub runs: String,
    pub algorithms: Vec<Method>,
    /// Decimal string: TOML integers cannot hold every u64.
    pub base_seed: String,
    pub budget_multiplier: f64,
    pub trueskill: TrueSkillParams,
    pub elo: EloParams,
}

/// Experiment record written next to the curve files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub generator: String,
    pub rng_algorithm: String,
    pub seed_derivation: String,
    pub shuffle_algorithm: String,
    pub mse_normalization: String,
    pub std_kind: String,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
    pub complete: bool,
    pub config: ManifestConfig,
    pub cells: Vec<CellRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::io(&path, e))
    }

    fn store(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp: PathBuf = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Outcome of [`run_matrix`]: the final manifest and every finished curve.
#[derive(Debug, Clone)]
pub struct MatrixReport {
    pub manifest: Manifest,
    pub curves: Vec<ConvergenceCurve>,
}

/// Runs every `(n, noise, method)` cell and writes the results to `out_dir`.
///
/// A failing cell is recorded as `failed` in the manifest and the remaining
/// cells still run. Only I/O failures abort the matrix.
pub fn run_matrix(config: &ExperimentConfig, out_dir: &Path) -> Result<MatrixReport> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let started = Instant::now();

    let cells = config
        .cells()
        .into_iter()
        .map(|(n, noise, method)| CellRecord {
            algorithm: method,
            n,
            noise,
            runs: config.runs.runs_for(n),
            status: CellStatus::Pending,
            file: curve_file_name(method, n, noise),
            sha256: None,
            steps: None,
            final_mean_mse: None,
            shuffle_digest: None,
            wall_clock_ms: None,
            error: None,
        })
        .collect();
    let mut manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        generator: concat!("tssort ", env!("CARGO_PKG_VERSION")).into(),
        rng_algorithm: RNG_ALGORITHM.into(),
        seed_derivation:
            "u64 LE prefix of sha256(\"tssort-seed-v1\" | base_seed | n | round(noise*1000) | run | role), role 0=shuffle 1=noise"
                .into(),
        shuffle_algorithm: "Fisher-Yates (rand::seq::SliceRandom::shuffle)".into(),
        mse_normalization: "mean over the n positions of (value - position)^2".into(),
        std_kind: "population".into(),
        started_at: now_rfc3339(),
        finished_at: None,
        wall_clock_ms: None,
        complete: false,
        config: ManifestConfig {
            lengths: config.lengths.clone(),
            noise_levels: config.noise_levels.clone(),
            runs: config.runs.describe(),
            algorithms: config.methods.clone(),
            base_seed: config.base_seed.to_string(),
            budget_multiplier: config.budget_multiplier,
            trueskill: config.params.trueskill,
            elo: config.params.elo,
        },
        cells,
    };
    manifest.store(out_dir)?;

    let mut curves = Vec::new();
    for idx in 0..manifest.cells.len() {
        let (method, n, noise) = {
            let c = &manifest.cells[idx];
            (c.algorithm, c.n, c.noise)
        };
        let cell_start = Instant::now();
        let result = run_cell(config, n, noise, method);
        let record = &mut manifest.cells[idx];
        record.wall_clock_ms = Some(cell_start.elapsed().as_millis() as u64);
        match result {
            Ok(cell) => {
                let csv = cell.curve.to_csv();
                write_atomic(&out_dir.join(&record.file), csv.as_bytes())?;
                record.sha256 = Some(hex::encode(Sha256::digest(csv.as_bytes())));
                record.steps = Some(cell.curve.per_step.len());
                record.final_mean_mse = cell.curve.final_mean();
                record.shuffle_digest = Some(cell.shuffle_digest);
                record.status = CellStatus::Complete;
                curves.push(cell.curve);
            }
            Err(err) => {
                record.status = CellStatus::Failed;
                record.error = Some(err.to_string());
            }
        }
        manifest.store(out_dir)?;
    }

    let complete = manifest.failed_cells().next().is_none();
    manifest.complete = complete;
    manifest.finished_at = Some(now_rfc3339());
    manifest.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
    manifest.store(out_dir)?;
    Ok(MatrixReport { manifest, curves })
}
