//! Aggregate backend: given the counts of two consecutive rounds, agents update
//! independently, so the next count is the source plus two binomials.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::config::SimConfig;
use crate::dynamics::flip_probs;
use crate::error::{domain, Result};

fn binomial<R: Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> u64 {
    if trials == 0 {
        return 0;
    }
    Binomial::new(trials, p.clamp(0.0, 1.0))
        .expect("clamped probability is valid")
        .sample(rng)
}

/// Next count of 1-opinions given `k_t` and `k_t1`, with the source holding
/// `source_opinion`.
pub fn step_aggregate_counts<R: Rng + ?Sized>(
    k_t: u64,
    k_t1: u64,
    n: u64,
    ell: u32,
    source_opinion: u8,
    rng: &mut R,
) -> Result<u64> {
    if k_t > n || k_t1 > n {
        return domain(format!("counts ({k_t}, {k_t1}) exceed n = {n}"));
    }
    if source_opinion == 0 {
        // Mirror through the centre so the source holds 1.
        return Ok(n - step_aggregate_counts(n - k_t, n - k_t1, n, ell, 1, rng)?);
    }
    if k_t1 == 0 {
        return domain("k_t1 = 0 is impossible while the source holds 1");
    }
    let nf = n as f64;
    let fp = flip_probs(k_t as f64 / nf, k_t1 as f64 / nf, ell)?;
    let keep = binomial(k_t1 - 1, fp.p_keep_one, rng);
    let gain = binomial(n - k_t1, fp.p_gain_one, rng);
    Ok(1 + keep + gain)
}

/// Count `x · n` when `x` is a multiple of `1/n` (within `1e-9`).
pub fn grid_count(x: f64, n: u64) -> Result<u64> {
    let scaled = x * n as f64;
    let k = scaled.round();
    if !(0.0..=n as f64).contains(&k) || (scaled - k).abs() > 1e-9 {
        return domain(format!("{x} is not on the grid of step 1/{n}"));
    }
    Ok(k as u64)
}

/// Fraction-valued form of [`step_aggregate_counts`]; inputs must lie on the grid.
pub fn step_aggregate<R: Rng + ?Sized>(x_t: f64, x_t1: f64, config: &SimConfig, rng: &mut R) -> Result<f64> {
    let n = config.n;
    let k = step_aggregate_counts(
        grid_count(x_t, n)?,
        grid_count(x_t1, n)?,
        n,
        config.ell,
        config.source_opinion,
        rng,
    )?;
    Ok(k as f64 / n as f64)
}
