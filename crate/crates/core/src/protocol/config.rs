use std::path::Path;

use serde::{Deserialize, Serialize};

use super::init::Preset;
use crate::dynamics::{sample_size_for, AnalysisConstants};
use crate::error::{FetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Every agent samples and updates individually.
    AgentLevel,
    /// The next count is drawn from its two-binomial law given the last two counts.
    Aggregate,
}

/// Update rule run by non-source agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `2ℓ` samples split into a fresh half and a stored half.
    Fet,
    /// `ℓ` samples compared with the previous round's full count.
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub n: u64,
    pub ell: u32,
    pub delta: f64,
    /// 0 or 1.
    pub source_opinion: u8,
    pub max_rounds: u64,
    pub seed: u64,
    pub backend: Backend,
    pub rule: Rule,
    pub preset: Preset,
    pub trials: u32,
}

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_C_SAMPLE: f64 = 3.0;
pub const DEFAULT_MAX_ROUNDS: u64 = 10_000;

impl SimConfig {
    /// Defaults: δ = 0.05, source opinion 1, 10⁴ rounds, seed 0, aggregate
    /// backend, FET rule, `all_wrong_max_counters`, one trial.
    pub fn new(n: u64, ell: u32) -> Self {
        SimConfig {
            n,
            ell,
            delta: DEFAULT_DELTA,
            source_opinion: 1,
            max_rounds: DEFAULT_MAX_ROUNDS,
            seed: 0,
            backend: Backend::Aggregate,
            rule: Rule::Fet,
            preset: Preset::AllWrongMaxCounters,
            trials: 1,
        }
    }

    /// `ℓ = ⌈c ln n⌉`.
    pub fn with_c_sample(n: u64, c_sample: f64) -> Self {
        Self::new(n, sample_size_for(c_sample, n))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FetError::Config(m));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if self.ell == 0 || u64::from(self.ell) > self.n {
            return bad(format!("ell = {} must lie in 1..={}", self.ell, self.n));
        }
        if self.n >= u64::from(u32::MAX) {
            return bad(format!("n = {} exceeds the supported population size", self.n));
        }
        if self.source_opinion > 1 {
            return bad(format!("source_opinion = {} must be 0 or 1", self.source_opinion));
        }
        if self.max_rounds == 0 || self.max_rounds >= u64::from(u32::MAX) {
            return bad(format!("max_rounds = {} must lie in 1..{}", self.max_rounds, u32::MAX));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return bad(format!("delta = {} must lie in (0, 1/2)", self.delta));
        }
        if self.rule == Rule::Naive && self.backend == Backend::Aggregate {
            return bad("the naive rule only runs on the agent_level backend".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Preset::Explicit { opinions, counters } = &self.preset {
            if opinions.len() as u64 != self.n || counters.len() as u64 != self.n {
                return bad(format!(
                    "explicit preset needs {} opinions and counters, got {} and {}",
                    self.n,
                    opinions.len(),
                    counters.len()
                ));
            }
        }
        Ok(())
    }

    pub fn source_bit(&self) -> bool {
        self.source_opinion == 1
    }

    /// Analysis constants for labelling, or `None` when `n` is too small for
    /// them to be defined.
    pub fn analysis_constants(&self) -> Option<AnalysisConstants> {
        AnalysisConstants::with_ell(self.n, self.delta, self.ell).ok()
    }

    /// Parse the flat TOML config format. `ell` or `c_sample` must be given
    /// (`ell` wins when both are).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| FetError::Config(e.to_string()))?;
        raw.into_config()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: u64,
    ell: Option<u32>,
    c_sample: Option<f64>,
    delta: Option<f64>,
    source_opinion: Option<u8>,
    max_rounds: Option<u64>,
    seed: Option<u64>,
    backend: Option<Backend>,
    rule: Option<Rule>,
    preset: Option<String>,
    trials: Option<u32>,
    /// Only for `preset = "explicit"`: 0/1 per agent, agent 0 is the source.
    opinions: Option<Vec<u8>>,
    counters: Option<Vec<u32>>,
}

impl RawConfig {
    fn into_config(self) -> Result<SimConfig> {
        let ell = match (self.ell, self.c_sample) {
            (Some(ell), _) => ell,
            (None, Some(c)) if c > 0.0 => sample_size_for(c, self.n),
            (None, Some(c)) => return Err(FetError::Config(format!("c_sample = {c} must be positive"))),
            (None, None) => return Err(FetError::Config("one of ell or c_sample is required".into())),
        };
        let mut cfg = SimConfig::new(self.n, ell);
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(s) = self.source_opinion {
            cfg.source_opinion = s;
        }
        if let Some(m) = self.max_rounds {
            cfg.max_rounds = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = self.backend {
            cfg.backend = b;
        }
        if let Some(r) = self.rule {
            cfg.rule = r;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.preset = match (self.preset.as_deref(), self.opinions, self.counters) {
            (Some("explicit"), Some(ops), Some(cs)) => Preset::Explicit {
                opinions: ops.iter().map(|&o| o != 0).collect(),
                counters: cs,
            },
            (Some("explicit"), _, _) => {
                return Err(FetError::Config("preset \"explicit\" needs opinions and counters".into()))
            }
            (_, Some(_), _) | (_, _, Some(_)) => {
                return Err(FetError::Config("opinions/counters are only valid with preset \"explicit\"".into()))
            }
            (Some(name), None, None) => name.parse()?,
            (None, None, None) => cfg.preset,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
