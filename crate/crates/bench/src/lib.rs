//! Inputs shared by the benchmarks.

use fet_core::protocol::{AgentState, SimConfig};

/// Population of `n` agents with the source at index 0 and roughly half the
/// others holding 1, stored counts spread over `0..=ell`.
pub fn mixed_population(n: u64, ell: u32) -> Vec<AgentState> {
    (0..n)
        .map(|i| {
            if i == 0 {
                AgentState::source(true)
            } else {
                AgentState::new(i % 2 == 0, (i % (u64::from(ell) + 1)) as u32)
            }
        })
        .collect()
}

/// Config with `ℓ = ⌈3 ln n⌉` and default everything else.
pub fn default_config(n: u64) -> SimConfig {
    SimConfig::with_c_sample(n, 3.0)
}
