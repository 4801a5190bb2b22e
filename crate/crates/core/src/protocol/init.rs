//! Adversarial initial configurations.
//!
//! Presets are generated for a source holding 1 and mirrored (opinions
//! flipped, stored counts `c ↦ ℓ - c`) when the source holds 0. Agent 0 is the
//! source; the 1-holders are the lowest-indexed agents, which loses nothing
//! since sampling is uniform.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use super::agent::{count_ones, AgentState};
use super::config::SimConfig;
use crate::error::{FetError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    /// Every non-source agent wrong, stored counts 0.
    AllWrong,
    /// Every non-source agent wrong, stored counts `ℓ`.
    AllWrongMaxCounters,
    /// `1 + ⌈(n - 1)/2⌉` correct agents, random stored counts.
    HalfHalf,
    /// `round(n/2)` correct agents, random stored counts.
    YellowCenter,
    /// Only the source correct, stored counts `ℓ`.
    CyanCorner,
    /// `max(1, round(x0 · n))` correct agents, random stored counts.
    Fraction(f64),
    /// Full state; agent 0 is the source.
    Explicit { opinions: Vec<bool>, counters: Vec<u32> },
}

impl Preset {
    pub const NAMED: [&'static str; 5] = [
        "all_wrong",
        "all_wrong_max_counters",
        "half_half",
        "yellow_center",
        "cyan_corner",
    ];
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::AllWrong => f.write_str("all_wrong"),
            Preset::AllWrongMaxCounters => f.write_str("all_wrong_max_counters"),
            Preset::HalfHalf => f.write_str("half_half"),
            Preset::YellowCenter => f.write_str("yellow_center"),
            Preset::CyanCorner => f.write_str("cyan_corner"),
            Preset::Fraction(x) => write!(f, "fraction({x})"),
            Preset::Explicit { .. } => f.write_str("explicit"),
        }
    }
}

impl FromStr for Preset {
    type Err = FetError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "all_wrong" => Preset::AllWrong,
            "all_wrong_max_counters" => Preset::AllWrongMaxCounters,
            "half_half" => Preset::HalfHalf,
            "yellow_center" => Preset::YellowCenter,
            "cyan_corner" => Preset::CyanCorner,
            "explicit" => {
                return Err(FetError::Usage(
                    "the explicit preset needs a full state vector (config keys opinions and counters)".into(),
                ))
            }
            _ => {
                let x = s
                    .strip_prefix("fraction(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| FetError::Usage(format!("unknown preset {s:?}")))?;
                if !(0.0..=1.0).contains(&x) {
                    return Err(FetError::Usage(format!("fraction({x}) must lie in [0, 1]")));
                }
                Preset::Fraction(x)
            }
        })
    }
}

impl Serialize for Preset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Per-agent state at round 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialCondition {
    pub agents: Vec<AgentState>,
}

impl InitialCondition {
    pub fn ones(&self) -> u64 {
        count_ones(&self.agents)
    }

    pub fn n(&self) -> u64 {
        self.agents.len() as u64
    }
}

fn with_ones<F: FnMut() -> u32>(n: u64, ones: u64, mut counter: F) -> Vec<AgentState> {
    (0..n)
        .map(|i| {
            if i == 0 {
                AgentState::source(true)
            } else {
                AgentState::new(i < ones, counter())
            }
        })
        .collect()
}

/// Build the round-0 configuration of `preset`.
pub fn init_adversarial(preset: &Preset, config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<InitialCondition> {
    config.validate()?;
    let n = config.n;
    let ell = config.ell;
    let mut random_counter = || rng.random_range(0..=ell);
    let agents = match preset {
        Preset::AllWrong => with_ones(n, 1, || 0),
        Preset::AllWrongMaxCounters | Preset::CyanCorner => with_ones(n, 1, || ell),
        Preset::HalfHalf => with_ones(n, 1 + (n - 1).div_ceil(2), &mut random_counter),
        Preset::YellowCenter => with_ones(n, ((n as f64 / 2.0).round() as u64).max(1), &mut random_counter),
        Preset::Fraction(x) => with_ones(n, ((x * n as f64).round() as u64).clamp(1, n), &mut random_counter),
        Preset::Explicit { opinions, counters } => {
            if opinions.len() as u64 != n || counters.len() as u64 != n {
                return Err(FetError::Usage(format!("explicit state must list {n} agents")));
            }
            if opinions[0] != config.source_bit() {
                return Err(FetError::Usage("agent 0 is the source and must hold source_opinion".into()));
            }
            if let Some(c) = counters.iter().find(|&&c| c > ell) {
                return Err(FetError::Usage(format!("stored count {c} exceeds ell = {ell}")));
            }
            let agents = opinions
                .iter()
                .zip(counters)
                .enumerate()
                .map(|(i, (&o, &c))| AgentState {
                    opinion: o,
                    prev_count: c,
                    is_source: i == 0,
                })
                .collect();
            return Ok(InitialCondition { agents });
        }
    };
    let agents = if config.source_bit() {
        agents
    } else {
        agents
            .into_iter()
            .map(|a| AgentState {
                opinion: !a.opinion,
                prev_count: if a.is_source { 0 } else { ell - a.prev_count },
                is_source: a.is_source,
            })
            .collect()
    };
    Ok(InitialCondition { agents })
}
