//! Simulation and verification workbench for the *Follow the Emerging Trend*
//! (FET) protocol, a self-stabilizing bit-dissemination rule for the passive
//! PULL model.
//!
//! Every non-source agent samples `2ℓ` opinions per round, splits them into two
//! halves, and compares the count of 1s in the fresh half with the count it
//! stored from the previous round: a rising count makes it adopt 1, a falling
//! count makes it adopt 0, a tie leaves it unchanged.
//!
//! The crate is organised bottom-up:
//!
//! * [`duel`]: exact and bounded probabilities for comparisons between two
//!   binomial draws, the quantity every flip rate is built from;
//! * [`dynamics`]: flip probabilities, the expectation map `g(x, y)` and its
//!   fixed point `f(x)`;
//! * [`domains`]: the partition of the pair grid `(x_t, x_{t+1})` into
//!   Green/Purple/Red/Cyan/Yellow regions and the A/B/C split of the Yellow box;
//! * [`protocol`]: agent-level and aggregate simulators with adversarial
//!   initial states;
//! * [`markov`]: the exact pair-state kernel and absorption times for small `n`;
//! * [`harness`]: per-domain statistical checks and scaling sweeps.

pub mod domains;
pub mod duel;
pub mod dynamics;
mod error;
pub mod harness;
pub mod markov;
pub mod normal;
pub mod protocol;
pub mod stats;

pub use domains::{classify, classify_yellow, DomainLabel, GridPoint, YellowLabel};
pub use duel::{exact_duel, DuelProbs};
pub use dynamics::{expected_next_fraction, flip_probs, AnalysisConstants, FlipProbs};
pub use error::{FetError, Result};
pub use harness::{LemmaReport, Verdict, VerifyConfig};
pub use protocol::{Backend, InitialCondition, Preset, SimConfig, Trajectory};
