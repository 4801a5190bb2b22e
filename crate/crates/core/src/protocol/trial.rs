//! Whole runs: one agent-level round from the adversarial state, then the
//! selected backend until consensus is reached and confirmed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::agent::{count_ones, step_agent_level};
use super::aggregate::step_aggregate_counts;
use super::config::{Backend, SimConfig};
use super::init::{init_adversarial, InitialCondition};
use super::rng::{lane, round_rng, AGGREGATE_LANE, INIT_ROUND};
use crate::domains::{classify, classify_yellow, DomainLabel, GridPoint, YellowLabel};
use crate::error::{FetError, Result};
use crate::stats::quantile;

/// Rounds simulated after the first all-correct round to confirm it persists.
pub const PERSISTENCE_ROUNDS: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub round: u64,
    pub x_t: f64,
    /// Label of the pair `(x_t, x_{t+1})`.
    pub domain: DomainLabel,
    pub yellow_label: YellowLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub n: u64,
    /// Count of 1-opinions per simulated round, one more entry than `rows`.
    pub counts: Vec<u64>,
    pub rows: Vec<TrajectoryRow>,
    /// First round of the final all-correct stretch, if it starts within `max_rounds`.
    pub converged_round: Option<u64>,
}

impl Trajectory {
    /// Visits per domain label over all rows.
    pub fn domain_visits(&self) -> BTreeMap<DomainLabel, u64> {
        let mut m = BTreeMap::new();
        for r in &self.rows {
            *m.entry(r.domain).or_insert(0) += 1;
        }
        m
    }
}

/// Label every consecutive pair of `counts`.
pub fn label_rows(counts: &[u64], config: &SimConfig) -> Vec<TrajectoryRow> {
    let n = config.n;
    let constants = config.analysis_constants();
    counts
        .windows(2)
        .enumerate()
        .map(|(t, w)| {
            let p = GridPoint::from_counts(w[0], w[1], n);
            let (domain, yellow_label) = match &constants {
                Some(k) => (classify(&p, k), classify_yellow(&p, k.delta)),
                None => (DomainLabel::Unclassified, YellowLabel::OutsideYellowPrime),
            };
            TrajectoryRow {
                round: t as u64,
                x_t: p.x_t,
                domain,
                yellow_label,
            }
        })
        .collect()
}

/// Start of the final stretch of `target` values, if the last entry is `target`.
fn final_run_start(counts: &[u64], target: u64) -> Option<u64> {
    if counts.last() != Some(&target) {
        return None;
    }
    let wrong = counts.iter().rposition(|&k| k != target);
    Some(wrong.map_or(0, |i| i as u64 + 1))
}

/// Run one trial from `initial`. Trial `trial` uses its own random streams.
pub fn run_trial(config: &SimConfig, initial: &InitialCondition, trial: u32) -> Result<Trajectory> {
    config.validate()?;
    let n = config.n;
    if initial.n() != n {
        return Err(FetError::Usage(format!(
            "initial condition has {} agents, config has n = {n}",
            initial.n()
        )));
    }
    let target = if config.source_bit() { n } else { 0 };
    let mut pop = initial.agents.clone();
    let mut counts = vec![count_ones(&pop)];
    // The stored counts of a fresh state are arbitrary, so the first round is
    // always executed per agent.
    pop = step_agent_level(&pop, config.ell, config.rule, &round_rng(config.seed, trial, 0));
    counts.push(count_ones(&pop));

    loop {
        let t = counts.len() as u64 - 1;
        if let Some(start) = final_run_start(&counts, target) {
            if t - start >= PERSISTENCE_ROUNDS {
                break;
            }
        }
        if t > config.max_rounds {
            break;
        }
        let base = round_rng(config.seed, trial, t as u32);
        let next = match config.backend {
            Backend::AgentLevel => {
                pop = step_agent_level(&pop, config.ell, config.rule, &base);
                count_ones(&pop)
            }
            Backend::Aggregate => {
                let mut rng = lane(&base, AGGREGATE_LANE);
                step_aggregate_counts(counts[t as usize - 1], counts[t as usize], n, config.ell, config.source_opinion, &mut rng)?
            }
        };
        counts.push(next);
    }

    let converged_round = final_run_start(&counts, target).filter(|&s| s <= config.max_rounds);
    Ok(Trajectory {
        n,
        rows: label_rows(&counts, config),
        counts,
        converged_round,
    })
}

/// Initial condition of trial `trial` for the config's preset.
pub fn trial_initial_condition(config: &SimConfig, trial: u32) -> Result<InitialCondition> {
    init_adversarial(&config.preset, config, &mut round_rng(config.seed, trial, INIT_ROUND))
}

/// `config.trials` independent trials, in trial order.
pub fn run_trials(config: &SimConfig) -> Result<Vec<Trajectory>> {
    config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &trial_initial_condition(config, trial)?, trial))
        .collect()
}

/// Aggregate-backend path from a planted pair of counts (source holding
/// `config.source_opinion`). Round `r` of the path draws from stream
/// `(trial, r)`; `stop` sees the path so far and ends it by returning `true`.
/// At most `config.max_rounds` steps are taken.
pub fn aggregate_path<F>(config: &SimConfig, trial: u32, k_t: u64, k_t1: u64, mut stop: F) -> Result<Vec<u64>>
where
    F: FnMut(&[u64]) -> bool,
{
    let mut path = vec![k_t, k_t1];
    for step in 0..config.max_rounds {
        if stop(&path) {
            break;
        }
        let r = (step + 1) as u32;
        let mut rng = lane(&round_rng(config.seed, trial, r), AGGREGATE_LANE);
        let l = path.len();
        path.push(step_aggregate_counts(path[l - 2], path[l - 1], config.n, config.ell, config.source_opinion, &mut rng)?);
    }
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub trial: u32,
    pub converged_round: Option<u64>,
    pub rounds_simulated: u64,
    pub domain_visits: BTreeMap<DomainLabel, u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub config: SimConfig,
    pub converged_trials: u64,
    pub converged_fraction: f64,
    /// Quantiles of `converged_round` over converged trials, keyed `q50`, `q90`, `q99`, `max`.
    pub quantiles: BTreeMap<String, f64>,
    pub domain_visits: BTreeMap<DomainLabel, u64>,
    pub trials: Vec<TrialSummary>,
}

pub fn summarize(config: &SimConfig, trajectories: &[Trajectory]) -> SimulationSummary {
    let times: Vec<f64> = trajectories
        .iter()
        .filter_map(|t| t.converged_round.map(|r| r as f64))
        .collect();
    let mut quantiles = BTreeMap::new();
    if !times.is_empty() {
        for (key, q) in [("q50", 0.5), ("q90", 0.9), ("q99", 0.99), ("max", 1.0)] {
            quantiles.insert(key.to_string(), quantile(&times, q));
        }
    }
    let mut total = BTreeMap::new();
    let trials = trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let visits = t.domain_visits();
            for (k, v) in &visits {
                *total.entry(*k).or_insert(0) += v;
            }
            TrialSummary {
                trial: i as u32,
                converged_round: t.converged_round,
                rounds_simulated: t.rows.len() as u64,
                domain_visits: visits,
            }
        })
        .collect();
    SimulationSummary {
        config: config.clone(),
        converged_trials: times.len() as u64,
        converged_fraction: times.len() as f64 / trajectories.len().max(1) as f64,
        quantiles,
        domain_visits: total,
        trials,
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "round,x_t,domain,yellow_label";

pub fn trajectory_csv(t: &Trajectory) -> String {
    let mut s = String::with_capacity(32 * (t.rows.len() + 1));
    s.push_str(TRAJECTORY_CSV_HEADER);
    s.push('\n');
    for r in &t.rows {
        let _ = writeln!(s, "{},{},{},{}", r.round, r.x_t, r.domain, r.yellow_label);
    }
    s
}

/// Write `trial_<k>.csv` per trajectory and `summary.json` into `dir`.
pub fn write_simulation_outputs(config: &SimConfig, trajectories: &[Trajectory], dir: &Path) -> Result<SimulationSummary> {
    std::fs::create_dir_all(dir)?;
    for (k, t) in trajectories.iter().enumerate() {
        std::fs::write(dir.join(format!("trial_{k}.csv")), trajectory_csv(t))?;
    }
    let summary = summarize(config, trajectories);
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}
