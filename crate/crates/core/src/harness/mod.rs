//! Statistical checks of the per-domain behaviour and of the convergence-time
//! scaling, with CSV/JSON emission.
//!
//! A "with high probability" statement is checked as
//! `failures / trials <= n^{-ε} + 3σ` with `σ = sqrt(p₀(1 - p₀) / trials)`,
//! `p₀ = n^{-ε}`. Planted states are built from integer counts and
//! re-classified before use; a mismatch aborts the check.

pub mod analytic;
mod lemmas;
mod sweeps;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domains::{classify, DomainLabel, GridPoint};
use crate::dynamics::AnalysisConstants;
use crate::error::{FetError, Result};
use crate::stats::wilson_interval;

pub use analytic::{analytic_suite, AnalyticReport, ClaimCheck};
pub use lemmas::{verify_cyan, verify_green, verify_purple, verify_red};
pub use sweeps::{verify_convergence, verify_yellow, ScalingFit, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    Green,
    Purple,
    Red,
    Cyan,
    Yellow,
    Convergence,
}

impl Lemma {
    pub const ALL: [Lemma; 6] = [
        Lemma::Green,
        Lemma::Purple,
        Lemma::Red,
        Lemma::Cyan,
        Lemma::Yellow,
        Lemma::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::Green => "green",
            Lemma::Purple => "purple",
            Lemma::Red => "red",
            Lemma::Cyan => "cyan",
            Lemma::Yellow => "yellow",
            Lemma::Convergence => "convergence",
        }
    }

    pub fn parse(s: &str) -> Result<Lemma> {
        Lemma::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| FetError::Usage(format!("unknown lemma {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        }
    }
}

/// Parameters of a single-point check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointParams {
    pub n: u64,
    pub delta: f64,
    pub c_sample: f64,
    pub trials: u32,
    pub max_rounds: u64,
}

/// Parameters of a scaling sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub n_list: Vec<u64>,
    pub delta: f64,
    pub c_sample: f64,
    pub trials: u32,
    pub max_rounds: u64,
    pub presets: Vec<String>,
}

impl Default for PointParams {
    fn default() -> Self {
        PointParams {
            n: 4096,
            delta: 0.05,
            c_sample: 3.0,
            trials: 10_000,
            max_rounds: 10_000,
        }
    }
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            n_list: vec![1 << 10, 1 << 11, 1 << 12, 1 << 13],
            delta: 0.05,
            c_sample: 3.0,
            trials: 200,
            max_rounds: 10_000,
            presets: vec![
                "all_wrong_max_counters".into(),
                "yellow_center".into(),
                "cyan_corner".into(),
            ],
        }
    }
}

/// Configuration of `verify`; every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Exponent `ε` of the failure budget `n^{-ε}`.
    pub epsilon: f64,
    pub green: PointParams,
    pub purple: PointParams,
    pub red: PointParams,
    pub cyan: PointParams,
    pub yellow: SweepParams,
    pub convergence: SweepParams,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 1,
            epsilon: 1.0,
            // A one-round Green exit needs ℓ >= (2/δ²) ln n.
            green: PointParams {
                delta: 0.2,
                c_sample: 50.0,
                ..PointParams::default()
            },
            purple: PointParams {
                n: 1 << 15,
                delta: 0.1,
                ..PointParams::default()
            },
            // At 2^16 with δ = 0.05, Red1 spans x ∈ (0.12, 0.19).
            red: PointParams {
                n: 1 << 16,
                ..PointParams::default()
            },
            cyan: PointParams::default(),
            yellow: SweepParams {
                presets: vec!["yellow_center".into()],
                ..SweepParams::default()
            },
            convergence: SweepParams::default(),
        }
    }
}

impl VerifyConfig {
    /// Keys missing from `text` keep the values of [`VerifyConfig::default`],
    /// table by table.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg_err = |e: &dyn std::fmt::Display| FetError::Config(e.to_string());
        let user: toml::Table = toml::from_str(text).map_err(|e| cfg_err(&e))?;
        let mut merged = toml::Table::try_from(VerifyConfig::default()).map_err(|e| cfg_err(&e))?;
        merge(&mut merged, user);
        merged.try_into().map_err(|e| cfg_err(&e))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Outcome of repeated trials from one planted state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStat {
    pub label: DomainLabel,
    pub source_opinion: u8,
    pub k_t: u64,
    pub k_t1: u64,
    pub point_x: f64,
    pub point_y: f64,
    pub trials: u64,
    pub failures: u64,
    pub failure_fraction: f64,
    /// Wilson 95% interval of the failure fraction.
    pub failure_ci95: (f64, f64),
    /// Largest failure fraction accepted.
    pub threshold: f64,
    /// `-ln(failure_fraction) / ln n`; absent when no trial failed.
    pub empirical_exponent: Option<f64>,
    /// Same exponent computed from the upper end of the Wilson interval.
    pub exponent_lower_bound: f64,
    /// Rounds until the state left its domain, by count (multi-round checks only).
    pub exit_times: BTreeMap<u64, u64>,
    /// Domain entered on exit, by count (multi-round checks only).
    pub exit_targets: BTreeMap<DomainLabel, u64>,
    pub verdict: Verdict,
}

/// Diagnostics reported alongside a verdict without entering it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub description: String,
    pub k_t: u64,
    pub k_t1: u64,
    pub trials: u64,
    pub successes: u64,
    pub success_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub n_list: Vec<u64>,
    pub ell_list: Vec<u32>,
    pub delta: f64,
    pub c_sample: f64,
    pub trials: u32,
    pub max_rounds: u64,
    pub seed: u64,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: Lemma,
    pub parameters: ReportParams,
    pub points: Vec<PointStat>,
    pub sweep: Vec<SweepRow>,
    pub fit: Option<ScalingFit>,
    pub analytic: Vec<ClaimCheck>,
    pub probes: Vec<Probe>,
    pub notes: Vec<String>,
    pub verdict: Verdict,
    /// Wall-clock time; kept out of emitted files so they are reproducible.
    #[serde(skip)]
    pub runtime: Duration,
}

impl LemmaReport {
    /// CSV in the lemma (`point_x,…`) or sweep (`n,…`) layout.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if self.sweep.is_empty() {
            s.push_str(POINT_CSV_HEADER);
            s.push('\n');
            for p in &self.points {
                let _ = writeln!(s, "{},{},{},{},{}", p.point_x, p.point_y, p.trials, p.failures, p.verdict.as_str());
            }
        } else {
            s.push_str(SWEEP_CSV_HEADER);
            s.push('\n');
            let (c, r2) = self.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.fit_c, f.r2));
            for r in &self.sweep {
                let _ = writeln!(s, "{},{},{},{},{}", r.n, r.quantile50, r.quantile99, c, r2);
            }
        }
        s
    }
}

pub const POINT_CSV_HEADER: &str = "point_x,point_y,trials,failures,verdict";
pub const SWEEP_CSV_HEADER: &str = "n,quantile50,quantile99,fit_C,fit_r2";

/// Output format of [`emit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Write `<lemma>.csv` or `<lemma>.json` into `dir`; returns the path written.
pub fn emit(report: &LemmaReport, format: Format, dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let (path, body) = match format {
        Format::Csv => (dir.join(format!("{}.csv", report.lemma.name())), report.to_csv()),
        Format::Json => (
            dir.join(format!("{}.json", report.lemma.name())),
            serde_json::to_string_pretty(report)? + "\n",
        ),
    };
    std::fs::write(&path, body)?;
    Ok(path)
}

/// Run one check.
pub fn run_lemma(lemma: Lemma, config: &VerifyConfig) -> Result<LemmaReport> {
    let start = std::time::Instant::now();
    let mut report = match lemma {
        Lemma::Green => verify_green(&config.green, config.seed, config.epsilon),
        Lemma::Purple => verify_purple(&config.purple, config.seed.wrapping_add(1), config.epsilon),
        Lemma::Red => verify_red(&config.red, config.seed.wrapping_add(2), config.epsilon),
        Lemma::Cyan => verify_cyan(&config.cyan, config.seed.wrapping_add(3), config.epsilon),
        Lemma::Yellow => verify_yellow(&config.yellow, config.seed.wrapping_add(4)),
        Lemma::Convergence => verify_convergence(&config.convergence, config.seed.wrapping_add(5)),
    }?;
    report.runtime = start.elapsed();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub seed: u64,
    pub verdicts: BTreeMap<String, Verdict>,
}

/// Run `lemmas` in order, writing CSV and JSON for each plus `summary.json`.
pub fn run_and_emit(lemmas: &[Lemma], config: &VerifyConfig, dir: &Path) -> Result<Vec<LemmaReport>> {
    let mut reports = Vec::new();
    let mut verdicts = BTreeMap::new();
    for &l in lemmas {
        let r = run_lemma(l, config)?;
        emit(&r, Format::Csv, dir)?;
        emit(&r, Format::Json, dir)?;
        verdicts.insert(l.name().to_string(), r.verdict);
        reports.push(r);
    }
    let summary = VerifySummary {
        seed: config.seed,
        verdicts,
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(reports)
}

/// Largest failure fraction accepted for `trials` trials at population `n`.
pub fn whp_threshold(n: u64, epsilon: f64, trials: u64) -> f64 {
    let p0 = (n as f64).powf(-epsilon);
    p0 + 3.0 * (p0 * (1.0 - p0) / trials as f64).sqrt()
}

/// Grid point `(k_t, k_t1)` after checking it carries `expected`.
pub(crate) fn plant(k_t: u64, k_t1: u64, constants: &AnalysisConstants, expected: DomainLabel) -> Result<GridPoint> {
    let n = constants.n;
    if k_t > n || k_t1 > n {
        return Err(FetError::Domain(format!("planted counts ({k_t}, {k_t1}) exceed n = {n}")));
    }
    let p = GridPoint::from_counts(k_t, k_t1, n);
    let got = classify(&p, constants);
    if got != expected {
        return Err(FetError::Domain(format!(
            "planted point ({k_t}, {k_t1})/{n} is {got}, expected {expected}; the domain may be empty for n = {n}, delta = {}",
            constants.delta
        )));
    }
    Ok(p)
}

/// Assemble a [`PointStat`] from raw counts.
pub(crate) fn point_stat(
    label: DomainLabel,
    source_opinion: u8,
    point: &GridPoint,
    trials: u64,
    failures: u64,
    threshold: f64,
    verdict: Verdict,
) -> PointStat {
    let (k_t, k_t1, n) = point.counts().expect("planted points are on the grid");
    let ln_n = (n as f64).ln();
    let frac = failures as f64 / trials as f64;
    let ci = wilson_interval(failures, trials, 1.96);
    PointStat {
        label,
        source_opinion,
        k_t,
        k_t1,
        point_x: point.x_t,
        point_y: point.x_t1,
        trials,
        failures,
        failure_fraction: frac,
        failure_ci95: ci,
        threshold,
        empirical_exponent: (failures > 0).then(|| -frac.ln() / ln_n),
        exponent_lower_bound: -ci.1.ln() / ln_n,
        exit_times: BTreeMap::new(),
        exit_targets: BTreeMap::new(),
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let c = VerifyConfig::from_toml_str("seed = 5\n[red]\ntrials = 10\n").unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.red.trials, 10);
        assert_eq!(c.red.n, 1 << 16);
        assert_eq!(c.green.c_sample, 50.0);
        assert!(VerifyConfig::from_toml_str("sed = 5").is_err());
        assert!(VerifyConfig::from_toml_str("[red]\ntrails = 5").is_err());
    }

    #[test]
    fn threshold_shape() {
        let t = whp_threshold(4096, 1.0, 2000);
        let p0: f64 = 1.0 / 4096.0;
        assert!((t - (p0 + 3.0 * (p0 * (1.0 - p0) / 2000.0).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn lemma_names() {
        for l in Lemma::ALL {
            assert_eq!(Lemma::parse(l.name()).unwrap(), l);
        }
        assert!(Lemma::parse("blue").is_err());
    }

    #[test]
    fn planting_rejects_wrong_domain() {
        let k = AnalysisConstants::new(1000, 0.1, 3.0).unwrap();
        assert!(plant(200, 500, &k, DomainLabel::Green1).is_ok());
        assert!(plant(500, 500, &k, DomainLabel::Green1).is_err());
    }
}
