//! Acceptance criteria 1–8. Each test writes one `criterion N: PASS|FAIL`
//! line to stderr (uncaptured) before asserting.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use fet_core::domains::{audit_partition, classify, DomainLabel, GridPoint};
use fet_core::duel::{binomial_pmf_row, exact_duel, hoeffding_duel_bound, underdog_lower_bound};
use fet_core::dynamics::{expected_next_fraction, next_fraction_variance, AnalysisConstants};
use fet_core::harness::{
    analytic_suite, run_and_emit, verify_convergence, verify_cyan, verify_green, verify_purple, verify_red, Lemma,
    PointParams, SweepParams, VerifyConfig,
};
use fet_core::markov::simulate_exact_check;
use fet_core::protocol::agent::count_ones;
use fet_core::protocol::rng::{lane, round_rng, AGGREGATE_LANE};
use fet_core::protocol::{population_at_pair, step_agent_level, step_aggregate_counts, Rule};
use fet_core::stats::{mean, tv_distance};
use fet_core::Verdict;

const SEED: u64 = 20_240_601;

// Criterion 1.
const C1_SEED: u64 = 20_240_602;
const C1_N: u64 = 64;
const C1_ELL: u32 = 8;
const C1_TRIALS: u32 = 100_000;
const C1_MAX_TV: f64 = 0.02;
const C1_MAX_SE: f64 = 3.0;
// Criterion 2.
const C2_N: u64 = 16;
const C2_ELL: u32 = 4;
const C2_TRIALS: u32 = 100_000;
const C2_REL_TOL: f64 = 0.03;
// Criterion 3.
const C3_MAX_K: u64 = 64;
const C3_ABS_TOL: f64 = 1e-12;
const C3_UNDERDOG_MIN_K: u64 = 30;
// Criterion 4.
const C4_N: u64 = 1 << 12;
const C4_DELTA: f64 = 0.05;
const C4_ELLS: [u32; 3] = [64, 128, 256];
const C4_C_SAMPLE: f64 = 3.0;
// Criterion 6.
const C6_MIN_CYAN_TARGET: f64 = 0.99;
// Criterion 8.
const C8_N: u64 = 128;
const C8_DELTA: f64 = 0.05;

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion}: {verdict} ({detail})");
}

/// 20 pair states covering every label that is non-empty at n = 64 (Red is
/// empty there), spread evenly through each label's grid points.
fn criterion1_states() -> Vec<(u64, u64, DomainLabel)> {
    let k = AnalysisConstants::with_ell(C1_N, 0.05, C1_ELL).unwrap();
    let mut by_label: BTreeMap<DomainLabel, Vec<(u64, u64)>> = BTreeMap::new();
    for a in 1..=C1_N {
        for b in 1..=C1_N {
            let l = classify(&GridPoint::from_counts(a, b, C1_N), &k);
            by_label.entry(l).or_default().push((a, b));
        }
    }
    let quota = [
        (DomainLabel::Green1, 3),
        (DomainLabel::Green0, 3),
        (DomainLabel::Purple1, 2),
        (DomainLabel::Purple0, 2),
        (DomainLabel::Cyan1, 3),
        (DomainLabel::Cyan0, 2),
        (DomainLabel::Yellow, 5),
    ];
    let mut out = Vec::new();
    for (label, m) in quota {
        let pts = &by_label[&label];
        for i in 0..m {
            let (a, b) = pts[(2 * i + 1) * pts.len() / (2 * m)];
            out.push((a, b, label));
        }
    }
    out
}

fn histogram(samples: &[u64], n: u64) -> Vec<u64> {
    let mut h = vec![0u64; n as usize + 1];
    for &s in samples {
        h[s as usize] += 1;
    }
    h
}

#[test]
fn criterion_1_backend_equivalence() {
    let states = criterion1_states();
    assert_eq!(states.len(), 20);
    let labels: std::collections::BTreeSet<_> = states.iter().map(|s| s.2).collect();
    let mut worst_tv: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let mut failures = Vec::new();
    for (j, &(k_t, k_t1, label)) in states.iter().enumerate() {
        let ids: Vec<u32> = (0..C1_TRIALS).map(|i| ((j as u32) << 20) | i).collect();
        let agent: Vec<u64> = ids
            .par_iter()
            .map(|&id| {
                let pop = population_at_pair(k_t, k_t1, C1_N, C1_ELL, &round_rng(C1_SEED, id, 0)).unwrap();
                count_ones(&step_agent_level(&pop, C1_ELL, Rule::Fet, &round_rng(C1_SEED, id, 1)))
            })
            .collect();
        let aggregate: Vec<u64> = ids
            .par_iter()
            .map(|&id| {
                let mut rng = lane(&round_rng(C1_SEED + 1, id, 1), AGGREGATE_LANE);
                step_aggregate_counts(k_t, k_t1, C1_N, C1_ELL, 1, &mut rng).unwrap()
            })
            .collect();
        let tv = tv_distance(&histogram(&agent, C1_N), &histogram(&aggregate, C1_N));
        let nf = C1_N as f64;
        let expected = nf * expected_next_fraction(k_t as f64 / nf, k_t1 as f64 / nf, C1_N, C1_ELL).unwrap();
        let se = nf * next_fraction_variance(k_t, k_t1, C1_N, C1_ELL).unwrap().sqrt() / f64::from(C1_TRIALS).sqrt();
        let z = |xs: &[u64]| {
            let m = mean(&xs.iter().map(|&v| v as f64).collect::<Vec<_>>());
            if se == 0.0 {
                if m == expected { 0.0 } else { f64::INFINITY }
            } else {
                (m - expected).abs() / se
            }
        };
        let (za, zb) = (z(&agent), z(&aggregate));
        worst_tv = worst_tv.max(tv);
        worst_z = worst_z.max(za).max(zb);
        if !(tv < C1_MAX_TV && za <= C1_MAX_SE && zb <= C1_MAX_SE) {
            failures.push(format!("({k_t},{k_t1}) {label}: tv={tv:.4} z_agent={za:.2} z_aggregate={zb:.2}"));
        }
    }
    let pass = failures.is_empty();
    report(
        1,
        pass,
        &format!(
            "20 states over {} labels; max TV {worst_tv:.4} < {C1_MAX_TV}; max |mean - n g| {worst_z:.2} SE <= {C1_MAX_SE}",
            labels.len()
        ),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_2_exact_chain() {
    let r = simulate_exact_check(C2_N, C2_ELL, C2_TRIALS, SEED).unwrap();
    let expected = r.expected_time.expect("kernel rows valid");
    let a = r.agent_level.as_ref().unwrap();
    let rel = (a.mean - expected).abs() / expected;
    let pass = a.converged == u64::from(C2_TRIALS) && rel <= C2_REL_TOL;
    report(
        2,
        pass,
        &format!(
            "exact {expected:.4} rounds; agent-level mean {:.4} over {} runs; relative error {rel:.4} <= {C2_REL_TOL}",
            a.mean, a.trials
        ),
    );
    assert!(pass);
}

fn grid_21() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) * 0.05).collect()
}

#[test]
fn criterion_3_duel() {
    let grid = grid_21();
    let results: Vec<(u64, f64, u64, u64, u64)> = (1..=C3_MAX_K)
        .into_par_iter()
        .map(|k| {
            let mut worst: f64 = 0.0;
            let (mut bound_checks, mut hoeffding_bad, mut underdog_bad) = (0, 0, 0);
            for &p in &grid {
                let a = binomial_pmf_row(k, p).unwrap();
                for &q in &grid {
                    let b = binomial_pmf_row(k, q).unwrap();
                    let (mut lt, mut eq, mut gt) = (0.0, 0.0, 0.0);
                    for (i, &ai) in a.iter().enumerate() {
                        for (j, &bj) in b.iter().enumerate() {
                            match i.cmp(&j) {
                                std::cmp::Ordering::Less => lt += ai * bj,
                                std::cmp::Ordering::Equal => eq += ai * bj,
                                std::cmp::Ordering::Greater => gt += ai * bj,
                            }
                        }
                    }
                    let d = exact_duel(k, p, q).unwrap();
                    worst = worst.max((d.p_lt - lt).abs()).max((d.p_eq - eq).abs()).max((d.p_gt - gt).abs());
                    if p < q {
                        bound_checks += 1;
                        if d.p_lt < hoeffding_duel_bound(k, p, q).unwrap() {
                            hoeffding_bad += 1;
                        }
                        if k >= C3_UNDERDOG_MIN_K && d.p_gt < underdog_lower_bound(k, p, q).unwrap() {
                            underdog_bad += 1;
                        }
                    }
                }
            }
            (k, worst, bound_checks, hoeffding_bad, underdog_bad)
        })
        .collect();
    let worst = results.iter().fold(0.0f64, |m, r| m.max(r.1));
    let checks: u64 = results.iter().map(|r| r.2).sum();
    let hb: u64 = results.iter().map(|r| r.3).sum();
    let ub: u64 = results.iter().map(|r| r.4).sum();
    let pass = worst <= C3_ABS_TOL && hb == 0 && ub == 0;
    report(
        3,
        pass,
        &format!(
            "1 <= k <= {C3_MAX_K}: max deviation from enumeration {worst:.2e} <= {C3_ABS_TOL:e}; {checks} ordered pairs, Hoeffding violations {hb}, underdog violations {ub}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_analytic_claims() {
    let r = analytic_suite(C4_N, C4_DELTA, &C4_ELLS, C4_C_SAMPLE).unwrap();
    let detail: Vec<String> = r
        .checks
        .iter()
        .map(|c| format!("{} {}/{} violations", c.name, c.violations, c.evaluated))
        .collect();
    let pass = r.verdict.passed();
    report(4, pass, &detail.join("; "));
    assert!(pass, "{:#?}", r.checks);
}

#[test]
fn criterion_5_convergence_scaling() {
    let params = SweepParams {
        n_list: vec![1 << 10, 1 << 11, 1 << 12, 1 << 13],
        delta: 0.05,
        c_sample: 3.0,
        trials: 200,
        ..SweepParams::default()
    };
    assert_eq!(params.presets, ["all_wrong_max_counters", "yellow_center", "cyan_corner"]);
    let r = verify_convergence(&params, SEED).unwrap();
    let fit = r.fit.as_ref().unwrap();
    let trials: u64 = r.sweep.iter().map(|s| s.trials).sum();
    let converged: u64 = r.sweep.iter().map(|s| s.finished).sum();
    let share = converged as f64 / trials as f64;
    let q99: Vec<String> = r.sweep.iter().map(|s| format!("{}", s.quantile99)).collect();
    let pass = share >= 0.99 && fit.r2 >= 0.9;
    report(
        5,
        pass,
        &format!(
            "converged {converged}/{trials}; q99 by n = [{}]; fit C = {:.4}, slope {:.3}, R^2 = {:.4} (need >= 0.9)",
            q99.join(", "),
            fit.fit_c,
            fit.slope,
            fit.r2
        ),
    );
    assert!(pass, "log-log fit of q99 against ln ln n has R^2 = {}", fit.r2);
}

#[test]
fn criterion_6_lemma_suite() {
    let cfg = VerifyConfig::default();
    let green = verify_green(&cfg.green, SEED, cfg.epsilon).unwrap();
    let purple = verify_purple(&cfg.purple, SEED + 1, cfg.epsilon).unwrap();
    let red = verify_red(&cfg.red, SEED + 2, cfg.epsilon).unwrap();
    let cyan = verify_cyan(&cfg.cyan, SEED + 3, cfg.epsilon).unwrap();

    let red_bad_target: u64 = red
        .points
        .iter()
        .flat_map(|p| p.exit_targets.iter())
        .filter(|(l, _)| matches!(l, DomainLabel::Yellow | DomainLabel::Red1 | DomainLabel::Red0))
        .map(|(_, c)| *c)
        .sum();
    let cp = &cyan.points[0];
    let cyan_good: u64 = cp
        .exit_targets
        .iter()
        .filter(|(l, _)| matches!(l, DomainLabel::Green1 | DomainLabel::Purple1))
        .map(|(_, c)| *c)
        .sum();
    let cyan_share = cyan_good as f64 / cp.trials as f64;
    let verdicts = [&green, &purple, &red, &cyan].map(|r| (r.lemma.name(), r.verdict));
    let pass = verdicts.iter().all(|v| v.1 == Verdict::Pass) && red_bad_target == 0 && cyan_share >= C6_MIN_CYAN_TARGET;
    let shown: Vec<String> = verdicts.iter().map(|(l, v)| format!("{l} {}", v.as_str())).collect();
    report(
        6,
        pass,
        &format!(
            "{}; Red exits into Yellow or Red: {red_bad_target}; Cyan exits into Green1 or Purple1: {cyan_share:.4}",
            shown.join(", ")
        ),
    );
    assert!(pass);
}

/// Small but complete configuration for the determinism check.
fn reduced_config() -> VerifyConfig {
    let d = VerifyConfig::default();
    let small = |p: PointParams| PointParams { trials: 300, ..p };
    let sweep = |p: SweepParams| SweepParams {
        n_list: vec![256, 512],
        trials: 20,
        ..p
    };
    VerifyConfig {
        seed: 7,
        green: small(PointParams { n: 1024, ..d.green }),
        purple: small(d.purple),
        red: small(d.red),
        cyan: small(PointParams { n: 1024, ..d.cyan }),
        yellow: sweep(d.yellow),
        convergence: sweep(d.convergence),
        ..d
    }
}

fn read_dir_sorted(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_7_determinism() {
    let cfg = reduced_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_and_emit(&Lemma::ALL, &cfg, a.path()).unwrap();
    run_and_emit(&Lemma::ALL, &cfg, b.path()).unwrap();
    let fa = read_dir_sorted(a.path());
    let fb = read_dir_sorted(b.path());
    let pass = fa.len() == 13 && fa == fb;
    report(7, pass, &format!("{} files compared byte for byte", fa.len()));
    assert!(pass);
}

#[test]
fn criterion_8_partition_audit() {
    let k = AnalysisConstants::new(C8_N, C8_DELTA, 3.0).unwrap();
    let r = audit_partition(&k);
    let corner_ok = r.absorbing_corner == DomainLabel::Cyan0 && r.cyan_corner == DomainLabel::Cyan1;
    let total = (C8_N + 1) * (C8_N + 1);
    let pass = r.total_points == total
        && r.covered_points + r.uncovered_count == total
        && corner_ok
        && r.mirror_consistent;
    report(
        8,
        pass,
        &format!(
            "{} points, {} covered, {} uncovered, {} multiply covered; (1,1) -> {}, (1/n,1/n) -> {}",
            r.total_points,
            r.covered_points,
            r.uncovered_count,
            r.multiply_covered_count,
            r.absorbing_corner,
            r.cyan_corner
        ),
    );
    assert!(pass);
}
