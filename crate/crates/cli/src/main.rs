use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use fet_core::domains::{audit_partition, classify, classify_yellow, GridPoint};
use fet_core::duel::{exact_duel, hoeffding_duel_bound, underdog_lower_bound};
use fet_core::dynamics::{expected_next_fraction, fixed_point_f, flip_probs, speed, AnalysisConstants};
use fet_core::harness::{run_and_emit, Lemma, VerifyConfig};
use fet_core::markov::{chain_report, PairState};
use fet_core::protocol::trial::{summarize, write_simulation_outputs};
use fet_core::protocol::run_trials;
use fet_core::{Preset, SimConfig};

#[derive(Parser)]
#[command(name = "fet", version, about = "Follow-the-Emerging-Trend bit-dissemination workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact probabilities for Binomial(k, p) against Binomial(k, q).
    Duel {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        /// Also print the Hoeffding and underdog bounds (needs p < q).
        #[arg(long)]
        bounds: bool,
    },
    /// Expectation map, flip probabilities and speed at (x_t, x_{t+1}).
    Dynamics {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        ell: u32,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
    /// Domain label of (x_t, x_{t+1}).
    Classify {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 3.0)]
        c_sample: f64,
    },
    /// Coverage audit of the domain partition over the full grid.
    Audit {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 3.0)]
        c_sample: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run trials from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        trials: Option<u32>,
        /// Directory for per-trial CSVs and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact pair-state chain and absorption times (n <= 256).
    Chain {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        ell: u32,
        /// Starting pair as K_T,K_T1.
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistical checks of the domain lemmas and convergence scaling.
    Verify {
        #[arg(long, value_enum)]
        lemma: LemmaArg,
        /// TOML file; omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LemmaArg {
    Green,
    Purple,
    Red,
    Cyan,
    Yellow,
    Convergence,
    All,
}

impl LemmaArg {
    fn lemmas(self) -> Vec<Lemma> {
        match self {
            LemmaArg::Green => vec![Lemma::Green],
            LemmaArg::Purple => vec![Lemma::Purple],
            LemmaArg::Red => vec![Lemma::Red],
            LemmaArg::Cyan => vec![Lemma::Cyan],
            LemmaArg::Yellow => vec![Lemma::Yellow],
            LemmaArg::Convergence => vec![Lemma::Convergence],
            LemmaArg::All => Lemma::ALL.to_vec(),
        }
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn parse_pair(s: &str) -> Result<PairState> {
    let Some((a, b)) = s.split_once(',') else {
        bail!("--from expects K_T,K_T1, got {s:?}");
    };
    Ok(PairState {
        k_t: a.trim().parse()?,
        k_t1: b.trim().parse()?,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Duel { k, p, q, bounds } => {
            let d = exact_duel(k, p, q)?;
            let mut out = json!({ "k": k, "p": p, "q": q, "p_lt": d.p_lt, "p_eq": d.p_eq, "p_gt": d.p_gt });
            if bounds {
                if p < q {
                    out["hoeffding_lower_bound_p_lt"] = json!(hoeffding_duel_bound(k, p, q)?);
                    out["underdog_lower_bound_p_gt"] = json!(underdog_lower_bound(k, p, q)?);
                } else {
                    bail!("--bounds needs p < q");
                }
            }
            print_json(&out)
        }
        Command::Dynamics { x, y, n, ell, delta } => {
            let point = GridPoint::new(x, y);
            let mut out = json!({
                "x_t": x,
                "x_t1": y,
                "n": n,
                "ell": ell,
                "g": expected_next_fraction(x, y, n, ell)?,
                "flip_probs": flip_probs(x, y, ell)?,
                "speed": speed(&point),
            });
            if let Ok(f) = fixed_point_f(x, ell, n, delta) {
                out["f"] = json!(f);
            }
            print_json(&out)
        }
        Command::Classify { x, y, n, delta, c_sample } => {
            let k = AnalysisConstants::new(n, delta, c_sample)?;
            let point = GridPoint::snapped(x, y, n);
            print_json(&json!({
                "x_t": point.x_t,
                "x_t1": point.x_t1,
                "label": classify(&point, &k),
                "yellow_label": classify_yellow(&point, delta),
            }))
        }
        Command::Audit { n, delta, c_sample, out } => {
            let report = audit_partition(&AnalysisConstants::new(n, delta, c_sample)?);
            write_json(&out, &report)?;
            print_json(&json!({
                "total_points": report.total_points,
                "covered_points": report.covered_points,
                "uncovered_count": report.uncovered_count,
                "multiply_covered_count": report.multiply_covered_count,
                "out": out,
            }))
        }
        Command::Simulate { config, preset, trials, out } => {
            let mut cfg = SimConfig::from_file(&config)?;
            if let Some(p) = preset {
                cfg.preset = p.parse::<Preset>()?;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let trajectories = run_trials(&cfg)?;
            let summary = match out {
                Some(dir) => write_simulation_outputs(&cfg, &trajectories, &dir)?,
                None => summarize(&cfg, &trajectories),
            };
            print_json(&summary)
        }
        Command::Chain { n, ell, from, out } => {
            let from = from.as_deref().map(parse_pair).transpose()?;
            let report = chain_report(n, ell, from)?;
            write_json(&out, &report)?;
            print_json(&json!({
                "n": report.n,
                "ell": report.ell,
                "states": report.states,
                "expected_time_from_all_wrong": report.expected_time_from_all_wrong,
                "from": report.from,
                "out": out,
            }))
        }
        Command::Verify { lemma, config, out } => {
            let cfg = match config {
                Some(path) => VerifyConfig::from_file(&path)?,
                None => VerifyConfig::default(),
            };
            let reports = run_and_emit(&lemma.lemmas(), &cfg, &out)?;
            for r in &reports {
                println!("{} {}", r.lemma.name(), r.verdict.as_str());
                eprintln!("{}: {:.2?}", r.lemma.name(), r.runtime);
            }
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
