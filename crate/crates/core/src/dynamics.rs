//! The deterministic layer: per-agent flip probabilities, the expectation map
//! `g(x, y) = E[x_{t+2} | x_t = x, x_{t+1} = y]` and its fixed point in `y`.

use serde::{Deserialize, Serialize};

use crate::domains::GridPoint;
use crate::duel::{exact_duel, CONVERSE_ALPHA};
use crate::error::{check_probability, domain, FetError, Result};

/// Probability that a non-source agent holds opinion 1 after the next update,
/// split by its current opinion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipProbs {
    /// For agents currently holding 1: `P(B_ℓ(x_{t+1}) >= B_ℓ(x_t))`.
    pub p_keep_one: f64,
    /// For agents currently holding 0: `P(B_ℓ(x_{t+1}) > B_ℓ(x_t))`.
    pub p_gain_one: f64,
}

impl FlipProbs {
    /// The tie probability, `p_keep_one - p_gain_one`.
    pub fn p_tie(&self) -> f64 {
        self.p_keep_one - self.p_gain_one
    }
}

/// Constants of the domain analysis for a population of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConstants {
    pub n: u64,
    /// Margin `δ ∈ (0, 1/2)`.
    pub delta: f64,
    /// `λ_n = 1 / ln(n)^(1/2 + δ)`.
    pub lambda_n: f64,
    /// `γ = (1 - 1/e) e^{-2c} / 2`.
    pub gamma: f64,
    /// `K = c e^{-2c} / 2`.
    pub cyan_k: f64,
    pub alpha: f64,
    /// The `c` in `ℓ = ⌈c ln n⌉`.
    pub c_sample: f64,
    pub ell: u32,
}

/// `ℓ = ⌈c ln n⌉`, at least 1.
pub fn sample_size_for(c_sample: f64, n: u64) -> u32 {
    ((c_sample * (n as f64).ln()).ceil() as u32).max(1)
}

impl AnalysisConstants {
    pub fn new(n: u64, delta: f64, c_sample: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return domain(format!("delta = {delta} must lie in (0, 1/2)"));
        }
        if c_sample.is_nan() || c_sample <= 0.0 {
            return domain(format!("c_sample = {c_sample} must be positive"));
        }
        let log_n = (n as f64).ln();
        let lambda_n = 1.0 / log_n.powf(0.5 + delta);
        if !(lambda_n > 0.0 && lambda_n < 1.0) {
            return domain(format!(
                "lambda_n = {lambda_n} is outside (0, 1) for n = {n}; need ln n > 1"
            ));
        }
        let e2c = (-2.0 * c_sample).exp();
        Ok(AnalysisConstants {
            n,
            delta,
            lambda_n,
            gamma: (1.0 - (-1.0f64).exp()) * e2c / 2.0,
            cyan_k: c_sample * e2c / 2.0,
            alpha: CONVERSE_ALPHA,
            c_sample,
            ell: sample_size_for(c_sample, n),
        })
    }

    /// Same constants but with an explicit sample size; `c_sample` becomes
    /// `ℓ / ln n`.
    pub fn with_ell(n: u64, delta: f64, ell: u32) -> Result<Self> {
        let c = f64::from(ell) / (n as f64).ln();
        let mut k = Self::new(n, delta, c)?;
        k.ell = ell;
        Ok(k)
    }

    pub fn log_n(&self) -> f64 {
        (self.n as f64).ln()
    }

    /// The Cyan threshold `1 / ln n`.
    pub fn inv_log_n(&self) -> f64 {
        1.0 / self.log_n()
    }
}

/// Flip probabilities at `(x_t, x_{t+1})` for per-half sample size `ell`.
pub fn flip_probs(x_t: f64, x_t1: f64, ell: u32) -> Result<FlipProbs> {
    // p_lt of the duel (x_t, x_t1) is P(B(x_t) < B(x_t1)) = P(B(x_t1) > B(x_t)).
    let d = exact_duel(u64::from(ell), x_t, x_t1)?;
    Ok(FlipProbs {
        p_keep_one: d.p_lt + d.p_eq,
        p_gain_one: d.p_lt,
    })
}

/// `g(x, y) = P(B_ℓ(y) > B_ℓ(x)) + y P(B_ℓ(y) = B_ℓ(x)) + (1 - P(B_ℓ(y) >= B_ℓ(x))) / n`,
/// the conditional mean of `x_{t+2}` when the source holds 1.
pub fn expected_next_fraction(x_t: f64, x_t1: f64, n: u64, ell: u32) -> Result<f64> {
    if n == 0 {
        return domain("population must be non-empty");
    }
    let d = exact_duel(u64::from(ell), x_t, x_t1)?;
    let g = d.p_lt + x_t1 * d.p_eq + (1.0 - (d.p_lt + d.p_eq)).max(0.0) / n as f64;
    Ok(g.clamp(0.0, 1.0))
}

/// Variance of `x_{t+2}` given the pair of counts, from the independent-Bernoulli
/// representation (source fixed at 1).
pub fn next_fraction_variance(k_t: u64, k_t1: u64, n: u64, ell: u32) -> Result<f64> {
    if k_t > n || k_t1 > n || k_t1 == 0 {
        return domain(format!("counts ({k_t}, {k_t1}) invalid for n = {n} with a 1-source"));
    }
    let nf = n as f64;
    let fp = flip_probs(k_t as f64 / nf, k_t1 as f64 / nf, ell)?;
    let keepers = (k_t1 - 1) as f64;
    let gainers = (n - k_t1) as f64;
    let var = keepers * fp.p_keep_one * (1.0 - fp.p_keep_one)
        + gainers * fp.p_gain_one * (1.0 - fp.p_gain_one);
    Ok(var / (nf * nf))
}

/// Result of [`fixed_point_f`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub value: f64,
    /// `true` when `value` solves `y = g(x, y)`; `false` when the interval
    /// holds no root and `value = x + 1/√ℓ`.
    pub is_root: bool,
}

const BISECTION_TOL: f64 = 1e-12;

/// `f(x)`: the root of `y = g(x, y)` on `[x, x + 1/√ℓ]`, or the right end of
/// that interval when `g(x, x + 1/√ℓ) < x + 1/√ℓ`.
///
/// Defined for `x ∈ [1/2 + 4/n, 1/2 + 4δ]` only. The root is bracketed by
/// `g(x, x) < x` and found by bisection to `1e-12`; the returned point always
/// satisfies `g(x, f(x)) <= f(x)` because bisection keeps the left end on the
/// negative side of `g(x, ·) - ·`.
pub fn fixed_point_f(x: f64, ell: u32, n: u64, delta: f64) -> Result<FixedPoint> {
    check_probability("x", x)?;
    if n == 0 || ell == 0 {
        return domain("n and ell must be positive");
    }
    let lo_x = 0.5 + 4.0 / n as f64;
    let hi_x = 0.5 + 4.0 * delta;
    if x < lo_x || x > hi_x {
        return domain(format!("f is defined on [{lo_x}, {hi_x}], got x = {x}"));
    }
    let h = |y: f64| -> Result<f64> { Ok(expected_next_fraction(x, y, n, ell)? - y) };
    let right = x + 1.0 / f64::from(ell).sqrt();
    if right > 1.0 {
        return Err(FetError::Domain(format!(
            "interval [x, x + 1/sqrt(ell)] = [{x}, {right}] leaves [0, 1]"
        )));
    }
    if h(right)? < 0.0 {
        return Ok(FixedPoint {
            value: right,
            is_root: false,
        });
    }
    let (mut lo, mut hi) = (x, right);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if h(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FixedPoint {
        value: lo,
        is_root: true,
    })
}

/// `|x_{t+1} - x_t|`.
pub fn speed(point: &GridPoint) -> f64 {
    (point.x_t1 - point.x_t).abs()
}

/// Whether `y ↦ g(x, y) - y` is strictly increasing on the grid
/// `x, x + step, …` up to `x + 1/√ℓ`.
pub fn gap_strictly_increasing(x: f64, ell: u32, n: u64, step: f64) -> Result<bool> {
    let right = (x + 1.0 / f64::from(ell).sqrt()).min(1.0);
    let steps = ((right - x) / step).floor() as usize;
    let mut prev = expected_next_fraction(x, x, n, ell)? - x;
    for i in 1..=steps {
        let y = x + i as f64 * step;
        let cur = expected_next_fraction(x, y, n, ell)? - y;
        if cur <= prev {
            return Ok(false);
        }
        prev = cur;
    }
    Ok(true)
}
