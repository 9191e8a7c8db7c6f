//! Classical comparison sorts instrumented to expose their intermediate
//! arrangement after every comparison.
//!
//! Every variant performs a bounded number of comparisons whatever the
//! comparator answers, so noisy comparators cannot cause nontermination.
//!
//! * Bubble: `n - 1` full passes, no early exit.
//! * Merge: bottom-up. The arrangement during a merge is the concatenation,
//!   in block order, of finished blocks, the merged prefix, the unconsumed
//!   suffixes of both runs and the untouched tail.
//! * Quick: Lomuto partitioning around the last element, explicit stack.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating::ComparisonOutcome;
use crate::selection::PairChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Bubble,
    Merge,
    Quick,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Bubble, Baseline::Merge, Baseline::Quick];

    pub fn label(self) -> &'static str {
        match self {
            Baseline::Bubble => "bubble",
            Baseline::Merge => "merge",
            Baseline::Quick => "quick",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase();
        Baseline::ALL
            .into_iter()
            .find(|b| b.label() == wanted)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

/// Record of one comparison and the arrangement it left behind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTrace {
    /// 1-based.
    pub step_index: usize,
    /// The two compared values, in the order the comparator saw them.
    pub pair: PairChoice,
    /// [`ComparisonOutcome::FirstWins`] when the first value was judged greater.
    pub outcome: ComparisonOutcome,
    pub order_after: Vec<usize>,
}

/// Borrowed view handed to [`run_baseline_with`] observers.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub step_index: usize,
    pub pair: PairChoice,
    pub outcome: ComparisonOutcome,
    pub order_after: &'a [usize],
}

/// Runs `algorithm` on `initial` (a permutation of `0..n`) using only
/// `less(x, y)` ("is x < y") and returns one trace per comparison.
pub fn run_baseline(
    algorithm: Baseline,
    initial: &[usize],
    less: impl FnMut(usize, usize) -> bool,
) -> Result<Vec<StepTrace>> {
    let mut traces = Vec::new();
    run_baseline_with(algorithm, initial, less, |view| {
        traces.push(StepTrace {
            step_index: view.step_index,
            pair: view.pair,
            outcome: view.outcome,
            order_after: view.order_after.to_vec(),
        })
    })?;
    Ok(traces)
}

/// Streaming form of [`run_baseline`]; returns the comparison count.
pub fn run_baseline_with(
    algorithm: Baseline,
    initial: &[usize],
    less: impl FnMut(usize, usize) -> bool,
    on_step: impl FnMut(StepView<'_>),
) -> Result<usize> {
    crate::metrics::check_permutation(initial)?;
    let mut rec = Recorder {
        less,
        on_step,
        pending: None,
        steps: 0,
    };
    let mut list = initial.to_vec();
    match algorithm {
        Baseline::Bubble => bubble(&mut list, &mut rec),
        Baseline::Merge => merge(&mut list, &mut rec),
        Baseline::Quick => quick(&mut list, &mut rec),
    }
    rec.flush(&list);
    Ok(rec.steps)
}

/// Emits each step lazily, right before the next comparison or at the end,
/// so the reported arrangement includes any moves made without comparing.
struct Recorder<L, O> {
    less: L,
    on_step: O,
    pending: Option<(PairChoice, ComparisonOutcome)>,
    steps: usize,
}

impl<L, O> Recorder<L, O>
where
    L: FnMut(usize, usize) -> bool,
    O: FnMut(StepView<'_>),
{
    fn less(&mut self, current: &[usize], x: usize, y: usize) -> bool {
        self.flush(current);
        let lt = (self.less)(x, y);
        let outcome = if lt {
            ComparisonOutcome::SecondWins
        } else {
            ComparisonOutcome::FirstWins
        };
        self.pending = Some((
            PairChoice {
                first: x,
                second: y,
            },
            outcome,
        ));
        lt
    }

    fn flush(&mut self, current: &[usize]) {
        if let Some((pair, outcome)) = self.pending.take() {
            self.steps += 1;
            (self.on_step)(StepView {
                step_index: self.steps,
                pair,
                outcome,
                order_after: current,
            });
        }
    }
}

fn bubble<L, O>(list: &mut [usize], rec: &mut Recorder<L, O>)
where
    L: FnMut(usize, usize) -> bool,
    O: FnMut(StepView<'_>),
{
    let n = list.len();
    for pass in 0..n.saturating_sub(1) {
        for k in 0..(n - 1 - pass) {
            if !rec.less(list, list[k], list[k + 1]) {
                list.swap(k, k + 1);
            }
        }
    }
}

fn merge<L, O>(list: &mut [usize], rec: &mut Recorder<L, O>)
where
    L: FnMut(usize, usize) -> bool,
    O: FnMut(StepView<'_>),
{
    let n = list.len();
    let mut view = Vec::with_capacity(n);
    let mut merged = Vec::with_capacity(n);
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            if mid < hi {
                merged.clear();
                let (mut i, mut j) = (lo, mid);
                while i < mid && j < hi {
                    view.clear();
                    view.extend_from_slice(&list[..lo]);
                    view.extend_from_slice(&merged);
                    view.extend_from_slice(&list[i..mid]);
                    view.extend_from_slice(&list[j..hi]);
                    view.extend_from_slice(&list[hi..]);
                    if rec.less(&view, list[j], list[i]) {
                        merged.push(list[j]);
                        j += 1;
                    } else {
                        merged.push(list[i]);
                        i += 1;
                    }
                }
                merged.extend_from_slice(&list[i..mid]);
                merged.extend_from_slice(&list[j..hi]);
                list[lo..hi].copy_from_slice(&merged);
            }
            lo = hi;
        }
        width *= 2;
    }
}

fn quick<L, O>(list: &mut [usize], rec: &mut Recorder<L, O>)
where
    L: FnMut(usize, usize) -> bool,
    O: FnMut(StepView<'_>),
{
    let mut stack = vec![(0, list.len())];
    while let Some((lo, hi)) = stack.pop() {
        if hi - lo < 2 {
            continue;
        }
        let pivot = list[hi - 1];
        let mut store = lo;
        for k in lo..hi - 1 {
            if rec.less(list, list[k], pivot) {
                list.swap(store, k);
                store += 1;
            }
        }
        list.swap(store, hi - 1);
        stack.push((store + 1, hi));
        stack.push((lo, store));
    }
}
