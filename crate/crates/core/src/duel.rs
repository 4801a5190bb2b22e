//! Competitions between two binomial draws.
//!
//! For `k` tosses of a `p`-coin and a `q`-coin, [`exact_duel`] returns the
//! probabilities that the `p`-coin shows fewer, equally many or more heads. All
//! flip rates of the protocol are expressed through this triple.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, domain, Result};
use crate::normal::phi;

/// Berry–Esseen constant used by [`underdog_lower_bound`].
pub const BERRY_ESSEEN_C: f64 = 0.4748;

/// Constant of the upper bound on the favourite coin's win probability when
/// both coins lie in `[1/3, 2/3]`; any bound on `1 / (q(1-p))` works, and 9 is
/// the one used throughout.
pub const CONVERSE_ALPHA: f64 = 9.0;

/// `(P(B_k(p) < B_k(q)), P(B_k(p) = B_k(q)), P(B_k(p) > B_k(q)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuelProbs {
    pub p_lt: f64,
    pub p_eq: f64,
    pub p_gt: f64,
}

impl DuelProbs {
    /// `P(B_k(p) <= B_k(q))`.
    pub fn p_le(&self) -> f64 {
        self.p_lt + self.p_eq
    }

    /// The triple for the swapped duel `(q, p)`.
    pub fn swapped(&self) -> DuelProbs {
        DuelProbs {
            p_lt: self.p_gt,
            p_eq: self.p_eq,
            p_gt: self.p_lt,
        }
    }

    pub fn total(&self) -> f64 {
        self.p_lt + self.p_eq + self.p_gt
    }
}

// Stirling-series remainder `ln(n!) - ln(sqrt(2πn) (n/e)^n)`, after C. Loader,
// "Fast and accurate computation of binomial probabilities" (2000).
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        // n is integral here; ln(n!) by direct summation is accurate to a few ulp.
        let ln_fact: f64 = (2..=n as u64).map(|j| (j as f64).ln()).sum();
        return ln_fact - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

// Deviance term `x ln(x/np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

fn pmf_unchecked(k: u64, p: f64, i: u64) -> f64 {
    let q = 1.0 - p;
    if p == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if i == k { 1.0 } else { 0.0 };
    }
    let n = k as f64;
    if i == 0 {
        if k == 0 {
            return 1.0;
        }
        let lc = if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
        return lc.exp();
    }
    if i == k {
        let lc = if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
        return lc.exp();
    }
    let x = i as f64;
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + x.ln() + (-x / n).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `P(B_k(p) = i) = C(k, i) p^i (1 - p)^(k - i)`, computed in log space with
/// Loader's saddle-point expansion (relative error near machine precision).
pub fn binomial_pmf(k: u64, p: f64, i: u64) -> Result<f64> {
    check_probability("p", p)?;
    if i > k {
        return domain(format!("outcome {i} exceeds sample count {k}"));
    }
    Ok(pmf_unchecked(k, p, i))
}

/// The whole pmf row `[P(B_k(p) = 0), …, P(B_k(p) = k)]`.
pub fn binomial_pmf_row(k: u64, p: f64) -> Result<Vec<f64>> {
    check_probability("p", p)?;
    Ok((0..=k).map(|i| pmf_unchecked(k, p, i)).collect())
}

/// Exact `P(B_k(p) < B_k(q))`, `P(=)` and `P(>)` for independent draws.
///
/// Each term is a product of a pmf value and a tail sum of the other pmf, so
/// the cost is `O(k)`; the three fields are accumulated independently, which
/// keeps `p_lt + p_eq + p_gt = 1` a genuine check rather than a definition.
pub fn exact_duel(k: u64, p: f64, q: f64) -> Result<DuelProbs> {
    if k == 0 {
        return domain("duel needs at least one toss (k >= 1)");
    }
    check_probability("p", p)?;
    check_probability("q", q)?;
    let a = binomial_pmf_row(k, p)?;
    let b = binomial_pmf_row(k, q)?;
    let len = a.len();

    // above_b[i] = P(B_k(q) > i), summed from the top to keep small tails exact.
    let mut above_b = vec![0.0; len];
    let mut above_a = vec![0.0; len];
    for i in (0..len - 1).rev() {
        above_b[i] = above_b[i + 1] + b[i + 1];
        above_a[i] = above_a[i + 1] + a[i + 1];
    }

    let mut p_lt = 0.0;
    let mut p_eq = 0.0;
    let mut p_gt = 0.0;
    for i in 0..len {
        p_lt += a[i] * above_b[i];
        p_eq += a[i] * b[i];
        p_gt += b[i] * above_a[i];
    }
    Ok(DuelProbs { p_lt, p_eq, p_gt })
}

fn check_ordered(p: f64, q: f64) -> Result<()> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    if p >= q {
        return domain(format!("bound requires p < q, got p = {p}, q = {q}"));
    }
    Ok(())
}

/// Hoeffding lower bound `1 - exp(-k (q - p)^2 / 2)` on `P(B_k(p) < B_k(q))`.
pub fn hoeffding_duel_bound(k: u64, p: f64, q: f64) -> Result<f64> {
    check_ordered(p, q)?;
    let d = q - p;
    Ok(-(-0.5 * k as f64 * d * d).exp_m1())
}

/// Berry–Esseen lower bound on the underdog's win probability
/// `P(B_k(p) > B_k(q))` for `p < q`:
///
/// `max(0, 1 - Φ(√k (q - p) / σ) - C / (σ √k))`, `σ = √(p(1-p) + q(1-q))`.
///
/// When `σ = 0` (`p = 0`, `q = 1`) the underdog cannot win and the bound is 0.
pub fn underdog_lower_bound(k: u64, p: f64, q: f64) -> Result<f64> {
    check_ordered(p, q)?;
    if k == 0 {
        return domain("bound needs k >= 1");
    }
    let sigma = (p * (1.0 - p) + q * (1.0 - q)).sqrt();
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let rk = (k as f64).sqrt();
    let bound = 1.0 - phi(rk * (q - p) / sigma) - BERRY_ESSEEN_C / (sigma * rk);
    Ok(bound.max(0.0))
}

/// Advantage of the better coin given that the two counts differ by `d`:
///
/// `((q(1-p))^d - (p(1-q))^d) / ((q(1-p))^d + (p(1-q))^d)`.
///
/// Evaluated through the ratio `r = p(1-q) / (q(1-p)) <= 1` as
/// `(1 - r^d) / (1 + r^d)` so that large `d` cannot underflow.
pub fn advantage(d: u64, p: f64, q: f64) -> Result<f64> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    if d == 0 {
        return domain("advantage needs a lead d >= 1");
    }
    if p > q {
        return domain(format!("advantage requires p <= q, got p = {p}, q = {q}"));
    }
    let fav = q * (1.0 - p);
    let dog = p * (1.0 - q);
    if fav == 0.0 {
        // fav >= dog, so both vanish: p = q ∈ {0, 1}.
        return domain(format!("advantage undefined at p = q = {p} (zero denominator)"));
    }
    let r = (dog / fav).powi(d.min(i32::MAX as u64) as i32);
    Ok((1.0 - r) / (1.0 + r))
}
