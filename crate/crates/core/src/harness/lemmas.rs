use std::collections::BTreeMap;

use rayon::prelude::*;

use super::analytic::cyan_expectation;
use super::{plant, point_stat, whp_threshold, LemmaReport, Lemma, PointParams, PointStat, Probe, ReportParams, Verdict};
use crate::domains::{classify, DomainLabel, GridPoint};
use crate::dynamics::AnalysisConstants;
use crate::error::{FetError, Result};
use crate::protocol::{aggregate_path, run_trial, trial_initial_condition, Preset, SimConfig};

const MAX_TRIALS: u32 = 1 << 24;

/// Stream id of trial `trial` at planted point `point`.
fn trial_id(point: usize, trial: u32) -> u32 {
    ((point as u32) << 24) | trial
}

fn sim_config(params: &PointParams, seed: u64, source_opinion: u8) -> Result<SimConfig> {
    if params.trials == 0 || params.trials >= MAX_TRIALS {
        return Err(FetError::Config(format!("trials must lie in 1..{MAX_TRIALS}")));
    }
    let mut c = SimConfig::with_c_sample(params.n, params.c_sample);
    c.delta = params.delta;
    c.seed = seed;
    c.max_rounds = params.max_rounds;
    c.source_opinion = source_opinion;
    c.trials = params.trials;
    c.validate()?;
    Ok(c)
}

fn report_params(params: &PointParams, ell: u32, seed: u64, epsilon: f64) -> ReportParams {
    ReportParams {
        n_list: vec![params.n],
        ell_list: vec![ell],
        delta: params.delta,
        c_sample: params.c_sample,
        trials: params.trials,
        max_rounds: params.max_rounds,
        seed,
        epsilon: Some(epsilon),
    }
}

/// A planted state together with the source opinion it is run under.
struct Planted {
    label: DomainLabel,
    point: GridPoint,
    source_opinion: u8,
}

impl Planted {
    fn new(k_t: u64, k_t1: u64, label: DomainLabel, k: &AnalysisConstants) -> Result<Planted> {
        Ok(Planted {
            label,
            point: plant(k_t, k_t1, k, label)?,
            source_opinion: 1,
        })
    }

    /// Reflection of `self`, run with the source holding 0.
    fn mirrored(&self, k: &AnalysisConstants) -> Result<Planted> {
        let (k_t, k_t1, n) = self.point.counts().expect("planted on grid");
        let label = self.label.mirror();
        Ok(Planted {
            label,
            point: plant(n - k_t, n - k_t1, k, label)?,
            source_opinion: 0,
        })
    }

    fn counts(&self) -> (u64, u64) {
        let (a, b, _) = self.point.counts().expect("planted on grid");
        (a, b)
    }
}

/// Run one aggregate round from each planted point; `ok(planted, k_{t+2})`
/// decides success.
fn one_round_points<F>(
    params: &PointParams,
    seed: u64,
    epsilon: f64,
    points: &[Planted],
    ok: F,
) -> Result<Vec<PointStat>>
where
    F: Fn(&Planted, u64, u64) -> bool + Sync,
{
    let threshold = whp_threshold(params.n, epsilon, u64::from(params.trials));
    points
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            let mut cfg = sim_config(params, seed, p.source_opinion)?;
            cfg.max_rounds = 1;
            let (k_t, k_t1) = p.counts();
            let failures = (0..params.trials)
                .into_par_iter()
                .map(|i| {
                    let path = aggregate_path(&cfg, trial_id(idx, i), k_t, k_t1, |_| false)?;
                    Ok(!ok(p, path[1], path[2]))
                })
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&f| f)
                .count() as u64;
            let trials = u64::from(params.trials);
            let verdict = Verdict::from_bool(failures as f64 / trials as f64 <= threshold);
            Ok(point_stat(p.label, p.source_opinion, &p.point, trials, failures, threshold, verdict))
        })
        .collect()
}

fn finish(lemma: Lemma, parameters: ReportParams, points: Vec<PointStat>, notes: Vec<String>) -> LemmaReport {
    let verdict = Verdict::from_bool(!points.is_empty() && points.iter().all(|p| p.verdict.passed()));
    LemmaReport {
        lemma,
        parameters,
        points,
        sweep: Vec::new(),
        fit: None,
        analytic: Vec::new(),
        probes: Vec::new(),
        notes,
        verdict,
        runtime: Default::default(),
    }
}

fn count_at(n: u64, x: f64) -> u64 {
    ((x * n as f64).round() as u64).min(n)
}

/// One round from Green1 (and a mirrored Green0 point) must put every
/// non-source agent on the source's opinion.
pub fn verify_green(params: &PointParams, seed: u64, epsilon: f64) -> Result<LemmaReport> {
    let k = AnalysisConstants::new(params.n, params.delta, params.c_sample)?;
    let n = params.n;
    let needed = ((2.0 / (params.delta * params.delta)) * k.log_n()).ceil() as u32;
    if k.ell < needed {
        return Err(FetError::Usage(format!(
            "green check needs ell >= ceil((2/delta^2) ln n) = {needed}, got ell = {}",
            k.ell
        )));
    }
    let step = (params.delta * n as f64).ceil() as u64;
    let base = Planted::new(count_at(n, 0.2), count_at(n, 0.5), DomainLabel::Green1, &k)?;
    let mirror = base.mirrored(&k)?;
    let k_b = count_at(n, 0.1);
    let points = vec![
        base,
        Planted::new(k_b, k_b + step, DomainLabel::Green1, &k)?,
        Planted::new(count_at(n, 0.4), count_at(n, 0.75), DomainLabel::Green1, &k)?,
        Planted::new(0, n, DomainLabel::Green1, &k)?,
        mirror,
    ];
    let stats = one_round_points(params, seed, epsilon, &points, |p, _, k2| {
        k2 == if p.source_opinion == 1 { n } else { 0 }
    })?;
    let notes = vec![format!(
        "one aggregate round per trial; failure = some non-source agent not on the source opinion; ell = {} >= {needed}",
        k.ell
    )];
    Ok(finish(Lemma::Green, report_params(params, k.ell, seed, epsilon), stats, notes))
}

/// One round from Purple1 (and a mirrored Purple0 point) must land in Green.
pub fn verify_purple(params: &PointParams, seed: u64, epsilon: f64) -> Result<LemmaReport> {
    let k = AnalysisConstants::new(params.n, params.delta, params.c_sample)?;
    let n = params.n;
    let nf = n as f64;
    let delta_n = params.delta * nf;
    let x_hi = 0.5 - 3.0 * params.delta;

    let example = Planted::new(count_at(n, 0.1), count_at(n, 0.1 + params.delta / 2.0), DomainLabel::Purple1, &k)?;
    // Smallest x_t allowed, with x_{t+1} in the middle of its range.
    let kb = (nf * k.inv_log_n()).ceil() as u64;
    let kb_lo = ((1.0 - k.lambda_n) * kb as f64).ceil();
    let kb_hi = kb as f64 + delta_n;
    let boundary = Planted::new(kb, ((kb_lo + kb_hi) / 2.0).floor() as u64, DomainLabel::Purple1, &k)?;
    // Slowest corner: largest x_t, smallest x_{t+1}.
    let kc = ((x_hi * nf).ceil() as u64).saturating_sub(1);
    let slow = Planted::new(kc, ((1.0 - k.lambda_n) * kc as f64).ceil() as u64, DomainLabel::Purple1, &k)?;
    let mirror = example.mirrored(&k)?;
    let points = vec![example, boundary, slow, mirror];

    let stats = one_round_points(params, seed, epsilon, &points, |p, k1, k2| {
        let want = if p.source_opinion == 1 { DomainLabel::Green1 } else { DomainLabel::Green0 };
        classify(&GridPoint::from_counts(k1, k2, n), &k) == want
    })?;
    let notes = vec!["one aggregate round per trial; failure = next pair not in Green of the source's side".into()];
    Ok(finish(Lemma::Purple, report_params(params, k.ell, seed, epsilon), stats, notes))
}

/// Rounds until a path leaves `label`, with the label entered; `None` if it
/// never leaves within `max_rounds`.
fn exit_of(path: &[u64], n: u64, k: &AnalysisConstants, label: DomainLabel) -> Option<(u64, DomainLabel)> {
    let last = path.len() - 2;
    let l = classify(&GridPoint::from_counts(path[last], path[last + 1], n), k);
    (l != label).then_some((last as u64, l))
}

/// Red1 points sit in the middle of the non-empty part of the domain:
/// `x_t ∈ (x_lo, x_hi)` with `x_lo = (1/ln n)/(1-λ)` and
/// `x_hi = min(δ/λ, 1/2 - 3δ)`.
fn red_points(k: &AnalysisConstants) -> Result<Vec<Planted>> {
    let nf = k.n as f64;
    let x_lo = k.inv_log_n() / (1.0 - k.lambda_n);
    let x_hi = (k.delta / k.lambda_n).min(0.5 - 3.0 * k.delta);
    if x_lo >= x_hi {
        return Err(FetError::Domain(format!(
            "Red1 is empty at n = {}, delta = {}: need {x_lo} < x_t < {x_hi}",
            k.n, k.delta
        )));
    }
    let mut points = Vec::new();
    for frac in [0.25, 0.5, 0.75] {
        let kt = ((x_lo + frac * (x_hi - x_lo)) * nf).round() as u64;
        let lo = (((kt as f64) - k.delta * nf).max(nf * k.inv_log_n())).ceil() as u64;
        let hi = ((1.0 - k.lambda_n) * kt as f64).ceil() as u64 - 1;
        if lo > hi {
            return Err(FetError::Domain(format!("no Red1 grid point with k_t = {kt} at n = {}", k.n)));
        }
        points.push(Planted::new(kt, (lo + hi) / 2, DomainLabel::Red1, k)?);
    }
    let mirror = points[1].mirrored(k)?;
    points.push(mirror);
    Ok(points)
}

/// From Red1 (and mirrored Red0) points, every trial must leave Red within
/// `ln^{1/2+2δ} n` rounds into a domain other than Yellow or Red.
pub fn verify_red(params: &PointParams, seed: u64, epsilon: f64) -> Result<LemmaReport> {
    let k = AnalysisConstants::new(params.n, params.delta, params.c_sample)?;
    let n = params.n;
    let bound = k.log_n().powf(0.5 + 2.0 * params.delta);
    let points = red_points(&k)?;
    let trials = u64::from(params.trials);
    let mut stats = Vec::new();
    for (idx, p) in points.iter().enumerate() {
        let cfg = sim_config(params, seed, p.source_opinion)?;
        let (k_t, k_t1) = p.counts();
        let exits = (0..params.trials)
            .into_par_iter()
            .map(|i| {
                let path = aggregate_path(&cfg, trial_id(idx, i), k_t, k_t1, |path| {
                    exit_of(path, n, &k, p.label).is_some()
                })?;
                Ok(exit_of(&path, n, &k, p.label))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut times = BTreeMap::new();
        let mut targets = BTreeMap::new();
        let mut failures = 0;
        for e in &exits {
            match e {
                Some((t, l)) => {
                    *times.entry(*t).or_insert(0) += 1;
                    *targets.entry(*l).or_insert(0) += 1;
                    let bad_target = matches!(l, DomainLabel::Yellow | DomainLabel::Red1 | DomainLabel::Red0);
                    if (*t as f64) >= bound || bad_target {
                        failures += 1;
                    }
                }
                None => failures += 1,
            }
        }
        let verdict = Verdict::from_bool(failures == 0);
        let mut s = point_stat(p.label, p.source_opinion, &p.point, trials, failures, 0.0, verdict);
        s.exit_times = times;
        s.exit_targets = targets;
        stats.push(s);
    }
    let notes = vec![format!(
        "failure = no exit within ln^(1/2+2 delta) n = {bound:.4} rounds, or exit into Yellow or Red; every trial must succeed"
    )];
    Ok(finish(Lemma::Red, report_params(params, k.ell, seed, epsilon), stats, notes))
}

/// Share of one-round trials from `(k_t, k_t1)` whose next count satisfies `ok`.
fn probe<F>(name: &str, description: &str, cfg: &SimConfig, stream: usize, k_t: u64, k_t1: u64, ok: F) -> Result<Probe>
where
    F: Fn(u64) -> bool + Sync,
{
    let mut cfg = cfg.clone();
    cfg.max_rounds = 1;
    let successes = (0..cfg.trials)
        .into_par_iter()
        .map(|i| Ok(ok(aggregate_path(&cfg, trial_id(stream, i), k_t, k_t1, |_| false)?[2])))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count() as u64;
    let trials = u64::from(cfg.trials);
    Ok(Probe {
        name: name.into(),
        description: description.into(),
        k_t,
        k_t1,
        trials,
        successes,
        success_fraction: successes as f64 / trials as f64,
    })
}

/// Cyan check: full runs from the cyan corner must leave Cyan1 within
/// `ln n / ln ln n` rounds into Green1 or Purple1, and the expectation bound
/// must hold on the small-`x_{t+1}` part of Cyan1. The γ-threshold branches
/// are reported as probes only.
pub fn verify_cyan(params: &PointParams, seed: u64, epsilon: f64) -> Result<LemmaReport> {
    let k = AnalysisConstants::new(params.n, params.delta, params.c_sample)?;
    let n = params.n;
    let mut cfg = sim_config(params, seed, 1)?;
    cfg.preset = Preset::CyanCorner;
    let bound = k.log_n() / k.log_n().ln();

    let outcomes = (0..params.trials)
        .into_par_iter()
        .map(|i| {
            let traj = run_trial(&cfg, &trial_initial_condition(&cfg, i)?, i)?;
            let t0 = traj.rows.iter().position(|r| r.domain == DomainLabel::Cyan1);
            let exit = t0.and_then(|t0| {
                traj.rows[t0..]
                    .iter()
                    .find(|r| r.domain != DomainLabel::Cyan1)
                    .map(|r| (r.round - t0 as u64, r.domain))
            });
            Ok((traj.converged_round.is_some(), exit))
        })
        .collect::<Result<Vec<_>>>()?;

    let corner = GridPoint::from_counts(1, 1, n);
    let mut times = BTreeMap::new();
    let mut targets = BTreeMap::new();
    let mut failures = 0u64;
    let (mut converged, mut converged_good) = (0u64, 0u64);
    for (conv, exit) in &outcomes {
        let good_target = matches!(exit, Some((_, DomainLabel::Green1 | DomainLabel::Purple1)));
        if let Some((t, l)) = exit {
            *times.entry(*t).or_insert(0) += 1;
            *targets.entry(*l).or_insert(0) += 1;
        }
        if !matches!(exit, Some((t, _)) if (*t as f64) < bound) || !good_target {
            failures += 1;
        }
        if *conv {
            converged += 1;
            converged_good += u64::from(good_target);
        }
    }
    let trials = u64::from(params.trials);
    let threshold = whp_threshold(n, epsilon, trials);
    let target_share = if converged == 0 { 0.0 } else { converged_good as f64 / converged as f64 };
    let sim_ok = failures as f64 / trials as f64 <= threshold && target_share >= 0.99;
    let mut stat = point_stat(DomainLabel::Cyan1, 1, &corner, trials, failures, threshold, Verdict::from_bool(sim_ok));
    stat.exit_times = times;
    stat.exit_targets = targets;

    let analytic = cyan_expectation(&k)?;

    let k_mid = (n as f64 / f64::from(k.ell)).floor() as u64 + 1;
    let k_gamma = (k.gamma * n as f64).floor() as u64 + 1;
    let gamma_count = k.gamma * n as f64;
    let probes = vec![
        probe(
            "cyan_intermediate",
            "x_t = 1/n, x_{t+1} just above 1/l: share of trials with x_{t+2} > gamma",
            &cfg,
            1,
            1,
            k_mid,
            |k2| k2 as f64 > gamma_count,
        )?,
        probe(
            "cyan_large",
            "x_t = 1/n, x_{t+1} just above gamma: share of trials with x_{t+2} > 1/2",
            &cfg,
            2,
            1,
            k_gamma,
            |k2| 2 * k2 > n,
        )?,
    ];

    let verdict = Verdict::from_bool(sim_ok && analytic.verdict.passed());
    let notes = vec![
        format!(
            "simulation: {trials} runs from the cyan corner; failure = no exit from Cyan1 within ln n / ln ln n = {bound:.4} rounds or exit outside Green1 and Purple1"
        ),
        format!(
            "exits into Green1 or Purple1 among {converged} converged runs: {converged_good} ({target_share:.4}); required >= 0.99"
        ),
        format!(
            "probes are informational; gamma n = {gamma_count:.3}, so the gamma branch sits a few agents above zero at this n"
        ),
    ];
    Ok(LemmaReport {
        lemma: Lemma::Cyan,
        parameters: report_params(params, k.ell, seed, epsilon),
        points: vec![stat],
        sweep: Vec::new(),
        fit: None,
        analytic: vec![analytic],
        probes,
        notes,
        verdict,
        runtime: Default::default(),
    })
}
