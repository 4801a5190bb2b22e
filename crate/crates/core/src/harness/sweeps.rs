use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Lemma, LemmaReport, ReportParams, SweepParams, Verdict};
use crate::domains::YellowLabel;
use crate::error::{FetError, Result};
use crate::protocol::{run_trial, trial_initial_condition, Preset, SimConfig, Trajectory};
use crate::stats::{ols, quantile, r_squared};

/// Exponent of `ln n` in the convergence-time bound.
pub const SCALING_EXPONENT: f64 = 2.5;
/// Smallest accepted `R²` of the log-log fit.
pub const MIN_R2: f64 = 0.9;

/// Per-preset quantiles inside a sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetStat {
    pub trials: u64,
    pub finished: u64,
    pub quantile50: f64,
    pub quantile99: f64,
}

/// One population size of a sweep. Times are rounds; quantiles are over the
/// trials that finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub ell: u32,
    pub trials: u64,
    pub finished: u64,
    pub quantile50: f64,
    pub quantile99: f64,
    pub max: f64,
    /// `ln^{5/2} n`.
    pub scale: f64,
    /// Raw times, sorted, so every quantile can be recomputed.
    pub times: Vec<u64>,
    pub per_preset: BTreeMap<String, PresetStat>,
    /// Rounds spent in B1 ∪ B0 per trial: median and 99% quantile.
    pub b_dwell: Option<(f64, f64)>,
}

/// `ln q99 = intercept + slope · ln ln n` by least squares, plus the
/// smallest `C` with `q99 <= C ln^{5/2} n` at every `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `R²` of the best line with slope fixed at 5/2.
    pub r2_fixed_slope: f64,
    pub fit_c: f64,
    /// Share of all trials finishing within `fit_c · ln^{5/2} n`.
    pub within_fit: f64,
}

pub fn scaling_fit(rows: &[SweepRow]) -> ScalingFit {
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln().ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.quantile99.ln()).collect();
    let lf = ols(&x, &y);
    let fixed_intercept = crate::stats::mean(&y) - SCALING_EXPONENT * crate::stats::mean(&x);
    let fit_c = rows
        .iter()
        .map(|r| r.quantile99 / r.scale)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: u64 = rows.iter().map(|r| r.trials).sum();
    let within: usize = rows
        .iter()
        .map(|r| r.times.iter().filter(|&&t| t as f64 <= fit_c * r.scale).count())
        .sum();
    ScalingFit {
        slope: lf.slope,
        intercept: lf.intercept,
        r2: if rows.len() < 2 { f64::NAN } else { lf.r2 },
        r2_fixed_slope: r_squared(&x, &y, SCALING_EXPONENT, fixed_intercept),
        fit_c,
        within_fit: within as f64 / total.max(1) as f64,
    }
}

fn q(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        quantile(values, p)
    }
}

fn presets(params: &SweepParams) -> Result<Vec<Preset>> {
    if params.presets.is_empty() || params.n_list.is_empty() {
        return Err(FetError::Config("sweep needs at least one n and one preset".into()));
    }
    if params.trials == 0 || params.trials >= 1 << 24 || params.presets.len() >= 256 {
        return Err(FetError::Config("sweep trials must lie in 1..2^24 with fewer than 256 presets".into()));
    }
    params.presets.iter().map(|s| s.parse()).collect()
}

/// Runs every preset at every `n`; `measure` maps a trajectory to a time
/// (`None` = did not finish) and an optional B-area dwell.
fn sweep<F>(params: &SweepParams, seed: u64, measure: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&Trajectory) -> (Option<u64>, Option<u64>) + Sync,
{
    let presets = presets(params)?;
    let mut rows = Vec::new();
    for &n in &params.n_list {
        let mut base = SimConfig::with_c_sample(n, params.c_sample);
        base.delta = params.delta;
        base.seed = seed;
        base.max_rounds = params.max_rounds;
        base.trials = params.trials;
        let mut times = Vec::new();
        let mut dwell = Vec::new();
        let mut per_preset = BTreeMap::new();
        for (pi, preset) in presets.iter().enumerate() {
            let mut cfg = base.clone();
            cfg.preset = preset.clone();
            cfg.validate()?;
            let out = (0..params.trials)
                .into_par_iter()
                .map(|i| {
                    let id = ((pi as u32) << 24) | i;
                    Ok(measure(&run_trial(&cfg, &trial_initial_condition(&cfg, id)?, id)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let t: Vec<u64> = out.iter().filter_map(|o| o.0).collect();
            let tf: Vec<f64> = t.iter().map(|&v| v as f64).collect();
            per_preset.insert(
                preset.to_string(),
                PresetStat {
                    trials: u64::from(params.trials),
                    finished: t.len() as u64,
                    quantile50: q(&tf, 0.5),
                    quantile99: q(&tf, 0.99),
                },
            );
            times.extend(t);
            dwell.extend(out.iter().filter_map(|o| o.1.map(|d| d as f64)));
        }
        times.sort_unstable();
        let tf: Vec<f64> = times.iter().map(|&v| v as f64).collect();
        rows.push(SweepRow {
            n,
            ell: base.ell,
            trials: u64::from(params.trials) * presets.len() as u64,
            finished: times.len() as u64,
            quantile50: q(&tf, 0.5),
            quantile99: q(&tf, 0.99),
            max: tf.last().copied().unwrap_or(f64::NAN),
            scale: (n as f64).ln().powf(SCALING_EXPONENT),
            times,
            per_preset,
            b_dwell: (!dwell.is_empty()).then(|| (q(&dwell, 0.5), q(&dwell, 0.99))),
        });
    }
    Ok(rows)
}

fn report_params(params: &SweepParams, rows: &[SweepRow], seed: u64) -> ReportParams {
    ReportParams {
        n_list: params.n_list.clone(),
        ell_list: rows.iter().map(|r| r.ell).collect(),
        delta: params.delta,
        c_sample: params.c_sample,
        trials: params.trials,
        max_rounds: params.max_rounds,
        seed,
        epsilon: None,
    }
}

/// Rounds from the first pair inside Yellow' until the first pair outside
/// it, and the number of rows labelled B1 or B0 in between.
fn yellow_escape(traj: &Trajectory) -> (Option<u64>, Option<u64>) {
    let inside = |l: YellowLabel| l != YellowLabel::OutsideYellowPrime;
    let Some(t0) = traj.rows.iter().position(|r| inside(r.yellow_label)) else {
        return (Some(0), Some(0));
    };
    match traj.rows[t0..].iter().position(|r| !inside(r.yellow_label)) {
        Some(d) => {
            let b = traj.rows[t0..t0 + d]
                .iter()
                .filter(|r| matches!(r.yellow_label, YellowLabel::B1 | YellowLabel::B0))
                .count() as u64;
            (Some(d as u64), Some(b))
        }
        None => (None, None),
    }
}

/// Escape time from Yellow' starting at the given presets; PASS iff the
/// log-log fit of the 99% quantile has `R² >= 0.9` and slope at most 5/2.
pub fn verify_yellow(params: &SweepParams, seed: u64) -> Result<LemmaReport> {
    let rows = sweep(params, seed, yellow_escape)?;
    let fit = scaling_fit(&rows);
    let verdict = Verdict::from_bool(fit.r2 >= MIN_R2 && fit.slope <= SCALING_EXPONENT);
    let notes = vec![
        "escape time = rounds from the first pair in Yellow' to the first pair outside it".into(),
        format!("fit: ln q99 against ln ln n; PASS needs R^2 >= {MIN_R2} and slope <= {SCALING_EXPONENT}"),
        "b_dwell = rounds labelled B1 or B0 before escape (median, 99% quantile)".into(),
    ];
    Ok(LemmaReport {
        lemma: Lemma::Yellow,
        parameters: report_params(params, &rows, seed),
        points: Vec::new(),
        sweep: rows,
        fit: Some(fit),
        analytic: Vec::new(),
        probes: Vec::new(),
        notes,
        verdict,
        runtime: Default::default(),
    })
}

/// Convergence time from every preset; PASS iff every trial converges
/// within `max_rounds`, at least 99% finish within `C ln^{5/2} n` for the
/// fitted `C`, and the log-log fit of the 99% quantile has `R² >= 0.9`.
pub fn verify_convergence(params: &SweepParams, seed: u64) -> Result<LemmaReport> {
    let rows = sweep(params, seed, |t| (t.converged_round, None))?;
    let fit = scaling_fit(&rows);
    let all_converged = rows.iter().all(|r| r.finished == r.trials);
    let verdict = Verdict::from_bool(all_converged && fit.within_fit >= 0.99 && fit.r2 >= MIN_R2);
    let notes = vec![
        "convergence time = first round of the final all-correct stretch".into(),
        format!("fit: ln q99 against ln ln n; PASS needs every trial converged, within_fit >= 0.99 and R^2 >= {MIN_R2}"),
    ];
    Ok(LemmaReport {
        lemma: Lemma::Convergence,
        parameters: report_params(params, &rows, seed),
        points: Vec::new(),
        sweep: rows,
        fit: Some(fit),
        analytic: Vec::new(),
        probes: Vec::new(),
        notes,
        verdict,
        runtime: Default::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: u64, q99: f64, times: Vec<u64>) -> SweepRow {
        SweepRow {
            n,
            ell: 1,
            trials: times.len() as u64,
            finished: times.len() as u64,
            quantile50: q99,
            quantile99: q99,
            max: q99,
            scale: (n as f64).ln().powf(SCALING_EXPONENT),
            times,
            per_preset: BTreeMap::new(),
            b_dwell: None,
        }
    }

    #[test]
    fn exact_power_law_fits() {
        let rows: Vec<SweepRow> = [1u64 << 10, 1 << 12, 1 << 14]
            .into_iter()
            .map(|n| {
                let q = 2.0 * (n as f64).ln().powf(2.5);
                row(n, q, vec![q as u64])
            })
            .collect();
        let f = scaling_fit(&rows);
        assert!((f.slope - 2.5).abs() < 1e-9);
        assert!((f.r2 - 1.0).abs() < 1e-9);
        assert!((f.fit_c - 2.0).abs() < 1e-9);
        assert_eq!(f.within_fit, 1.0);
    }

    #[test]
    fn flat_quantiles_have_undefined_r2() {
        let rows: Vec<SweepRow> = [1u64 << 10, 1 << 12].into_iter().map(|n| row(n, 20.0, vec![20])).collect();
        assert!(scaling_fit(&rows).r2.is_nan());
    }

    #[test]
    fn small_yellow_sweep_runs() {
        let p = SweepParams {
            n_list: vec![256, 512],
            trials: 8,
            presets: vec!["yellow_center".into()],
            ..SweepParams::default()
        };
        let r = verify_yellow(&p, 3).unwrap();
        assert_eq!(r.sweep.len(), 2);
        assert!(r.sweep.iter().all(|s| s.finished == 8));
    }
}
