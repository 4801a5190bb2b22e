//! Deterministic checks of inequalities over `g` and `f` on fixed grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Verdict;
use crate::domains::{classify, DomainLabel, GridPoint};
use crate::dynamics::{expected_next_fraction, fixed_point_f, gap_strictly_increasing, AnalysisConstants};
use crate::error::Result;

/// Outcome of one inequality over a grid. `worst_margin` is the smallest
/// value of `lhs - rhs` seen (negative means violated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimCheck {
    pub name: String,
    pub statement: String,
    pub evaluated: u64,
    pub violations: u64,
    pub worst_margin: f64,
    pub worst_point: Option<(f64, f64)>,
    pub verdict: Verdict,
}

impl ClaimCheck {
    fn from_margins(name: &str, statement: &str, margins: Vec<((f64, f64), f64)>, strict: bool) -> ClaimCheck {
        let violations = margins
            .iter()
            .filter(|(_, m)| if strict { *m <= 0.0 } else { *m < 0.0 })
            .count() as u64;
        let worst = margins
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1));
        ClaimCheck {
            name: name.into(),
            statement: statement.into(),
            evaluated: margins.len() as u64,
            violations,
            worst_margin: worst.map_or(f64::NAN, |w| w.1),
            worst_point: worst.map(|w| w.0),
            verdict: Verdict::from_bool(violations == 0 && !margins.is_empty()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub n: u64,
    pub delta: f64,
    pub ells: Vec<u32>,
    pub checks: Vec<ClaimCheck>,
    pub verdict: Verdict,
}

/// Points `lo, lo + step, …` not exceeding `hi` (with a small slack for rounding).
fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let m = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=m).map(|i| lo + i as f64 * step).collect()
}

/// `y ↦ g(x, y) - y` strictly increasing on a 10⁻³ grid over `[x, x + 1/√ℓ]`,
/// for `x` on a 0.01 grid over `[1/3, 2/3]`. The margin is 1 or -1.
pub fn gap_monotonicity(n: u64, ells: &[u32]) -> Result<ClaimCheck> {
    let xs: Vec<f64> = (34..=66).map(|i| f64::from(i) / 100.0).collect();
    let jobs: Vec<(u32, f64)> = ells.iter().flat_map(|&l| xs.iter().map(move |&x| (l, x))).collect();
    let margins = jobs
        .par_iter()
        .map(|&(ell, x)| Ok(((x, f64::from(ell)), if gap_strictly_increasing(x, ell, n, 1e-3)? { 1.0 } else { -1.0 })))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClaimCheck::from_margins(
        "gap_monotonicity",
        "y -> g(x,y) - y strictly increasing on [x, x + 1/sqrt(l)], x in [1/3, 2/3]",
        margins,
        false,
    ))
}

/// Domain of `f` sampled with the given step: `[1/2 + 4/n, 1/2 + 4δ]`.
fn f_domain(n: u64, delta: f64, step: f64) -> Vec<f64> {
    grid(0.5 + 4.0 / n as f64, 0.5 + 4.0 * delta, step)
}

/// `g(x, f(x)) <= f(x) + 1e-10`.
pub fn fixed_point_bound(n: u64, delta: f64, ells: &[u32]) -> Result<ClaimCheck> {
    let margins = f_jobs(n, delta, ells)
        .par_iter()
        .map(|&(ell, x)| {
            let f = fixed_point_f(x, ell, n, delta)?.value;
            Ok(((x, f64::from(ell)), f + 1e-10 - expected_next_fraction(x, f, n, ell)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClaimCheck::from_margins("fixed_point_bound", "g(x, f(x)) <= f(x)", margins, false))
}

/// `f(x) - 1/2 > (1 + 1/(width·α·√ℓ)) (x - 1/2)`; `width` is 4 for the
/// form used downstream and 2 for the sharper intermediate form.
pub fn fixed_point_growth(n: u64, delta: f64, ells: &[u32], alpha: f64, width: f64) -> Result<ClaimCheck> {
    let margins = f_jobs(n, delta, ells)
        .par_iter()
        .map(|&(ell, x)| {
            let f = fixed_point_f(x, ell, n, delta)?.value;
            let rhs = (1.0 + 1.0 / (width * alpha * f64::from(ell).sqrt())) * (x - 0.5);
            Ok(((x, f64::from(ell)), (f - 0.5) - rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClaimCheck::from_margins(
        &format!("fixed_point_growth_{width}alpha"),
        &format!("f(x) - 1/2 > (1 + 1/({width} alpha sqrt(l))) (x - 1/2), alpha = {alpha}"),
        margins,
        true,
    ))
}

fn f_jobs(n: u64, delta: f64, ells: &[u32]) -> Vec<(u32, f64)> {
    let xs = f_domain(n, delta, 0.005);
    ells.iter().flat_map(|&l| xs.iter().map(move |&x| (l, x))).collect()
}

/// `E[x_{t+2}] >= K x_{t+1} ln n - 1/n` over every grid point labelled Cyan1
/// with `0 < x_{t+1} <= 1/ℓ` and `x_t < 1/ln n`.
pub fn cyan_expectation(constants: &AnalysisConstants) -> Result<ClaimCheck> {
    let n = constants.n;
    let ell = constants.ell;
    let nf = n as f64;
    let max_k1 = (nf / f64::from(ell)).floor() as u64;
    let max_k0 = ((nf * constants.inv_log_n()).ceil() as u64).min(n);
    let rows: Vec<Vec<((f64, f64), f64)>> = (1..=max_k1)
        .into_par_iter()
        .map(|k1| {
            let mut out = Vec::new();
            for k0 in 0..=max_k0 {
                let p = GridPoint::from_counts(k0, k1, n);
                if p.x_t >= constants.inv_log_n() || classify(&p, constants) != DomainLabel::Cyan1 {
                    continue;
                }
                let e = expected_next_fraction(p.x_t, p.x_t1, n, ell)?;
                let rhs = constants.cyan_k * p.x_t1 * constants.log_n() - 1.0 / nf;
                out.push(((p.x_t, p.x_t1), e - rhs));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(ClaimCheck::from_margins(
        "cyan_expectation",
        "E[x_{t+2}] >= K x_{t+1} ln n - 1/n on Cyan1 with 0 < x_{t+1} <= 1/l",
        rows.into_iter().flatten().collect(),
        false,
    ))
}

/// Every analytic check at `(n, δ)`; the cyan check uses `ℓ = ⌈c ln n⌉`.
pub fn analytic_suite(n: u64, delta: f64, ells: &[u32], c_sample: f64) -> Result<AnalyticReport> {
    let k = AnalysisConstants::new(n, delta, c_sample)?;
    let checks = vec![
        gap_monotonicity(n, ells)?,
        fixed_point_bound(n, delta, ells)?,
        fixed_point_growth(n, delta, ells, k.alpha, 4.0)?,
        fixed_point_growth(n, delta, ells, k.alpha, 2.0)?,
        cyan_expectation(&k)?,
    ];
    let verdict = Verdict::from_bool(checks.iter().all(|c| c.verdict.passed()));
    Ok(AnalyticReport {
        n,
        delta,
        ells: ells.to_vec(),
        checks,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = grid(0.34, 0.66, 0.01);
        assert_eq!(g.len(), 33);
        assert!((g[32] - 0.66).abs() < 1e-12);
    }

    #[test]
    fn cyan_corner_is_evaluated() {
        let k = AnalysisConstants::new(1 << 12, 0.05, 3.0).unwrap();
        let c = cyan_expectation(&k).unwrap();
        assert!(c.evaluated > 1000);
        assert_eq!(c.violations, 0);
        let n = 4096.0;
        let e = expected_next_fraction(1.0 / n, 1.0 / n, 4096, k.ell).unwrap();
        assert!(e >= k.cyan_k * k.log_n() / n - 1.0 / n);
    }

    #[test]
    fn margins_count_violations() {
        let c = ClaimCheck::from_margins("t", "t", vec![((0.0, 0.0), 1.0), ((1.0, 0.0), -0.5)], false);
        assert_eq!(c.violations, 1);
        assert_eq!(c.worst_point, Some((1.0, 0.0)));
        assert_eq!(c.verdict, Verdict::Fail);
    }
}
