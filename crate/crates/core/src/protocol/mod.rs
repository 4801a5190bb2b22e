//! Simulation backends.
//!
//! Agents are indexed `0..n` with agent 0 the source. Sampling is uniform with
//! replacement over all `n` agents, the sampler included.

pub mod agent;
pub mod aggregate;
pub mod config;
pub mod init;
pub mod rng;
pub mod trial;

pub use agent::{agent_round, population_at_pair, step_agent_level, AgentState};
pub use aggregate::{step_aggregate, step_aggregate_counts};
pub use config::{Backend, Rule, SimConfig};
pub use init::{init_adversarial, InitialCondition, Preset};
pub use trial::{aggregate_path, run_trial, run_trials, trial_initial_condition, Trajectory, TrajectoryRow};
