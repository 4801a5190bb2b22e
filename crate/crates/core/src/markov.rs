//! Exact pair-state chain for small populations (source holding 1).
//!
//! The chain lives on `(k_t, k_{t+1})` with `k_{t+1} >= 1`. It has no notion of
//! the stored counts an adversary may plant, so it describes runs from round 1
//! on; the first round of a trial is always executed per agent.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duel::binomial_pmf_row;
use crate::dynamics::{expected_next_fraction, flip_probs};
use crate::error::{FetError, Result};
use crate::protocol::{run_trials, Backend, Preset, SimConfig};
use crate::stats::{mean, std_error};

pub const MAX_KERNEL_N: u64 = 256;
pub const MAX_EXACT_CHECK_N: u64 = 64;
/// Transition probabilities below this are dropped; the dropped mass is kept per row.
pub const PRUNE_BELOW: f64 = 1e-15;
pub const SOLVER_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 1_000_000;

pub const CHAIN_NOTE: &str =
    "pair-state chain on (k_t, k_t1) with the source holding 1; adversarial stored counts are not represented, trials reach the chain after one agent-level round";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairState {
    pub k_t: u32,
    pub k_t1: u32,
}

/// Distribution of `k_{t+2}` for one pair state, as sparse `(count, probability)` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub entries: Vec<(u32, f64)>,
    pub pruned_mass: f64,
}

impl KernelRow {
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|&(k, p)| f64::from(k) * p).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub n: u32,
    pub ell: u32,
    /// Row of `(k_t, k_t1)` at index `k_t · n + k_t1 - 1`.
    pub rows: Vec<KernelRow>,
}

impl Kernel {
    pub fn index(&self, s: PairState) -> usize {
        s.k_t as usize * self.n as usize + s.k_t1 as usize - 1
    }

    pub fn state(&self, index: usize) -> PairState {
        let n = self.n as usize;
        PairState {
            k_t: (index / n) as u32,
            k_t1: (index % n + 1) as u32,
        }
    }

    pub fn row(&self, s: PairState) -> &KernelRow {
        &self.rows[self.index(s)]
    }

    pub fn absorbing(&self) -> PairState {
        PairState {
            k_t: self.n,
            k_t1: self.n,
        }
    }

    pub fn total_pruned_mass(&self) -> f64 {
        self.rows.iter().map(|r| r.pruned_mass).sum()
    }
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn build_row(k_t: u32, k_t1: u32, n: u32, ell: u32) -> Result<KernelRow> {
    let nf = f64::from(n);
    let fp = flip_probs(f64::from(k_t) / nf, f64::from(k_t1) / nf, ell)?;
    let keep = binomial_pmf_row(u64::from(k_t1 - 1), fp.p_keep_one.clamp(0.0, 1.0))?;
    let gain = binomial_pmf_row(u64::from(n - k_t1), fp.p_gain_one.clamp(0.0, 1.0))?;
    let mut entries = Vec::new();
    let mut pruned_mass = 0.0;
    for (i, p) in convolve(&keep, &gain).into_iter().enumerate() {
        if p < PRUNE_BELOW {
            pruned_mass += p;
        } else {
            entries.push((i as u32 + 1, p));
        }
    }
    Ok(KernelRow { entries, pruned_mass })
}

/// Transition kernel for every pair `(k_t, k_t1)` with `k_t ∈ 0..=n`, `k_t1 ∈ 1..=n`.
pub fn build_kernel(n: u64, ell: u32) -> Result<Kernel> {
    if n > MAX_KERNEL_N {
        return Err(FetError::Usage(format!("exact kernel is capped at n = {MAX_KERNEL_N}, got {n}")));
    }
    if n < 1 || ell == 0 {
        return Err(FetError::Usage("kernel needs n >= 1 and ell >= 1".into()));
    }
    let n = n as u32;
    let rows = (0..(n as usize + 1) * n as usize)
        .into_par_iter()
        .map(|idx| {
            let k_t = (idx / n as usize) as u32;
            let k_t1 = (idx % n as usize + 1) as u32;
            build_row(k_t, k_t1, n, ell)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Kernel { n, ell, rows })
}

/// States with no positive-probability path to `(n, n)`.
pub fn non_absorbing_states(kernel: &Kernel) -> Vec<PairState> {
    let len = kernel.rows.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); len];
    for (i, row) in kernel.rows.iter().enumerate() {
        let s = kernel.state(i);
        for &(k2, p) in &row.entries {
            if p > 0.0 {
                preds[kernel.index(PairState { k_t: s.k_t1, k_t1: k2 })].push(i);
            }
        }
    }
    let mut seen = vec![false; len];
    let start = kernel.index(kernel.absorbing());
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(j) = queue.pop_front() {
        for &i in &preds[j] {
            if !seen[i] {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    (0..len).filter(|&i| !seen[i]).map(|i| kernel.state(i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionTimes {
    pub n: u32,
    pub ell: u32,
    /// Expected rounds to reach `(n, n)`, indexed like [`Kernel::rows`].
    pub times: Vec<f64>,
    pub sweeps: usize,
    pub residual: f64,
}

impl AbsorptionTimes {
    pub fn get(&self, s: PairState) -> f64 {
        self.times[s.k_t as usize * self.n as usize + s.k_t1 as usize - 1]
    }
}

fn residual(kernel: &Kernel, h: &[f64], absorbing: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in kernel.rows.iter().enumerate() {
        if i == absorbing {
            continue;
        }
        let k_t1 = kernel.state(i).k_t1 as usize;
        let base = k_t1 * kernel.n as usize;
        let rhs: f64 = 1.0 + row.entries.iter().map(|&(k2, p)| p * h[base + k2 as usize - 1]).sum::<f64>();
        worst = worst.max((h[i] - rhs).abs());
    }
    let scale = h.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
    worst / scale
}

/// Expected hitting times of `(n, n)` by Gauss–Seidel on `h = 1 + P h`, `h(n, n) = 0`.
pub fn absorption_times(kernel: &Kernel) -> Result<AbsorptionTimes> {
    let bad = non_absorbing_states(kernel);
    if !bad.is_empty() {
        return Err(FetError::NotAbsorbing {
            states: bad.iter().map(|s| (s.k_t, s.k_t1)).collect(),
        });
    }
    let absorbing = kernel.index(kernel.absorbing());
    let mut h = vec![0.0; kernel.rows.len()];
    let mut res = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        // Sweep from high counts down: most mass flows towards consensus.
        for i in (0..kernel.rows.len()).rev() {
            if i == absorbing {
                continue;
            }
            let k_t1 = kernel.state(i).k_t1 as usize;
            let base = k_t1 * kernel.n as usize;
            let mut acc = 1.0;
            let mut self_p = 0.0;
            for &(k2, p) in &kernel.rows[i].entries {
                let j = base + k2 as usize - 1;
                if j == i {
                    self_p += p;
                } else {
                    acc += p * h[j];
                }
            }
            h[i] = acc / (1.0 - self_p);
        }
        if sweep % 8 == 0 || sweep == MAX_SWEEPS {
            res = residual(kernel, &h, absorbing);
            if res <= SOLVER_TOLERANCE {
                return Ok(AbsorptionTimes {
                    n: kernel.n,
                    ell: kernel.ell,
                    times: h,
                    sweeps: sweep,
                    residual: res,
                });
            }
        }
    }
    Err(FetError::NoConvergence {
        residual: res,
        iterations: MAX_SWEEPS,
    })
}

/// Law of `k_1` after one agent-level round from the `all_wrong` preset
/// (source holding 1, every other agent 0 with stored count 0): an agent adopts
/// 1 as soon as its compared half contains a 1.
pub fn all_wrong_first_round(n: u64, ell: u32) -> Result<Vec<(u64, f64)>> {
    let p = 1.0 - (1.0 - 1.0 / n as f64).powi(ell as i32);
    Ok(binomial_pmf_row(n - 1, p)?
        .into_iter()
        .enumerate()
        .map(|(j, w)| (j as u64 + 1, w))
        .collect())
}

/// Expected consensus round from the `all_wrong` preset.
pub fn expected_time_from_all_wrong(times: &AbsorptionTimes) -> Result<f64> {
    let first = all_wrong_first_round(u64::from(times.n), times.ell)?;
    Ok(first
        .iter()
        .map(|&(k1, w)| w * times.get(PairState { k_t: 1, k_t1: k1 as u32 }))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDefect {
    pub state: PairState,
    pub row_sum_error: f64,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEstimate {
    pub backend: Backend,
    pub trials: u64,
    pub converged: u64,
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    /// `|mean - expected| <= 3 · std_error`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactCheckReport {
    pub note: String,
    pub n: u64,
    pub ell: u32,
    pub seed: u64,
    pub pruned_mass: f64,
    pub max_row_sum_error: f64,
    pub max_mean_error: f64,
    /// Rows whose sum or mean disagrees with the expectation map.
    pub defective_rows: Vec<RowDefect>,
    pub expected_time: Option<f64>,
    pub agent_level: Option<BackendEstimate>,
    pub aggregate: Option<BackendEstimate>,
    /// The two backends' means agree within 3 combined standard errors.
    pub backends_agree: Option<bool>,
    pub pass: bool,
}

pub const ROW_SUM_TOLERANCE: f64 = 1e-10;
pub const ROW_MEAN_TOLERANCE: f64 = 1e-9;

/// Rows of `kernel` whose mass (including pruned mass) is not 1 or whose mean
/// differs from `n · g(k_t/n, k_t1/n)`.
pub fn validate_rows(kernel: &Kernel) -> Result<(Vec<RowDefect>, f64, f64)> {
    let n = u64::from(kernel.n);
    let nf = n as f64;
    let checked: Vec<RowDefect> = kernel
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let s = kernel.state(i);
            let g = expected_next_fraction(f64::from(s.k_t) / nf, f64::from(s.k_t1) / nf, n, kernel.ell)?;
            Ok(RowDefect {
                state: s,
                row_sum_error: (row.sum() + row.pruned_mass - 1.0).abs(),
                mean_error: (row.mean() - nf * g).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let max_sum = checked.iter().fold(0.0f64, |m, d| m.max(d.row_sum_error));
    let max_mean = checked.iter().fold(0.0f64, |m, d| m.max(d.mean_error));
    let bad = checked
        .into_iter()
        .filter(|d| !(d.row_sum_error <= ROW_SUM_TOLERANCE && d.mean_error <= ROW_MEAN_TOLERANCE))
        .collect();
    Ok((bad, max_sum, max_mean))
}

fn estimate(n: u64, ell: u32, backend: Backend, trials: u32, seed: u64, expected: f64) -> Result<BackendEstimate> {
    let mut cfg = SimConfig::new(n, ell);
    cfg.backend = backend;
    cfg.preset = Preset::AllWrong;
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.max_rounds = 1_000_000;
    let times: Vec<f64> = run_trials(&cfg)?
        .iter()
        .filter_map(|t| t.converged_round.map(|r| r as f64))
        .collect();
    let m = mean(&times);
    let se = std_error(&times);
    Ok(BackendEstimate {
        backend,
        trials: u64::from(trials),
        converged: times.len() as u64,
        mean: m,
        std_error: se,
        ci95: (m - 1.96 * se, m + 1.96 * se),
        pass: times.len() == trials as usize && (m - expected).abs() <= 3.0 * se,
    })
}

/// Validate `kernel` row by row, then compare both backends' Monte-Carlo
/// hitting times from `all_wrong` with the kernel's expectation. Simulation is
/// skipped when the kernel itself is defective.
pub fn exact_check_with_kernel(kernel: &Kernel, trials: u32, seed: u64) -> Result<ExactCheckReport> {
    let n = u64::from(kernel.n);
    let (defective_rows, max_row_sum_error, max_mean_error) = validate_rows(kernel)?;
    let mut report = ExactCheckReport {
        note: CHAIN_NOTE.to_string(),
        n,
        ell: kernel.ell,
        seed,
        pruned_mass: kernel.total_pruned_mass(),
        max_row_sum_error,
        max_mean_error,
        defective_rows,
        expected_time: None,
        agent_level: None,
        aggregate: None,
        backends_agree: None,
        pass: false,
    };
    if !report.defective_rows.is_empty() {
        return Ok(report);
    }
    let expected = expected_time_from_all_wrong(&absorption_times(kernel)?)?;
    let a = estimate(n, kernel.ell, Backend::AgentLevel, trials, seed, expected)?;
    let b = estimate(n, kernel.ell, Backend::Aggregate, trials, seed ^ 0x5eed, expected)?;
    let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let agree = (a.mean - b.mean).abs() <= 3.0 * combined;
    report.pass = a.pass && b.pass && agree;
    report.expected_time = Some(expected);
    report.agent_level = Some(a);
    report.aggregate = Some(b);
    report.backends_agree = Some(agree);
    Ok(report)
}

/// [`exact_check_with_kernel`] on a freshly built kernel; `n <= 64`.
pub fn simulate_exact_check(n: u64, ell: u32, trials: u32, seed: u64) -> Result<ExactCheckReport> {
    if n > MAX_EXACT_CHECK_N {
        return Err(FetError::Usage(format!("exact check is capped at n = {MAX_EXACT_CHECK_N}, got {n}")));
    }
    exact_check_with_kernel(&build_kernel(n, ell)?, trials, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTime {
    pub k_t: u32,
    pub k_t1: u32,
    pub expected_rounds: f64,
}

/// Summary emitted by the `chain` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub note: String,
    pub n: u64,
    pub ell: u32,
    pub states: usize,
    pub pruned_mass: f64,
    pub max_row_sum_error: f64,
    pub max_mean_error: f64,
    pub solver_sweeps: usize,
    pub solver_residual: f64,
    pub expected_time_from_all_wrong: f64,
    pub from: Option<StateTime>,
    pub absorption_times: Vec<StateTime>,
}

pub fn chain_report(n: u64, ell: u32, from: Option<PairState>) -> Result<ChainReport> {
    let kernel = build_kernel(n, ell)?;
    if let Some(s) = from {
        if u64::from(s.k_t) > n || u64::from(s.k_t1) > n || s.k_t1 == 0 {
            return Err(FetError::Usage(format!("state ({}, {}) is outside the chain", s.k_t, s.k_t1)));
        }
    }
    let (_, max_row_sum_error, max_mean_error) = validate_rows(&kernel)?;
    let times = absorption_times(&kernel)?;
    let entry = |s: PairState| StateTime {
        k_t: s.k_t,
        k_t1: s.k_t1,
        expected_rounds: times.get(s),
    };
    Ok(ChainReport {
        note: CHAIN_NOTE.to_string(),
        n,
        ell,
        states: kernel.rows.len(),
        pruned_mass: kernel.total_pruned_mass(),
        max_row_sum_error,
        max_mean_error,
        solver_sweeps: times.sweeps,
        solver_residual: times.residual,
        expected_time_from_all_wrong: expected_time_from_all_wrong(&times)?,
        from: from.map(entry),
        absorption_times: (0..kernel.rows.len()).map(|i| entry(kernel.state(i))).collect(),
    })
}
