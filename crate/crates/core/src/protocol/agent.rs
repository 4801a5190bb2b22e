//! Agent-level execution of the update rule.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Rule;
use super::rng::lane;
use crate::error::{domain, Result};

/// Internal state of one agent between rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub opinion: bool,
    /// Count of 1s in the stored half-sample `S''` of the previous round.
    pub prev_count: u32,
    pub is_source: bool,
}

impl AgentState {
    pub fn new(opinion: bool, prev_count: u32) -> Self {
        AgentState {
            opinion,
            prev_count,
            is_source: false,
        }
    }

    pub fn source(opinion: bool) -> Self {
        AgentState {
            opinion,
            prev_count: 0,
            is_source: true,
        }
    }
}

/// The comparison step from counts: `c' > c''` adopts 1, `c' < c''` adopts 0,
/// a tie keeps the opinion. `fresh_count` becomes the stored count.
pub fn fet_update(state: AgentState, compare_count: u32, fresh_count: u32) -> AgentState {
    if state.is_source {
        return state;
    }
    let opinion = match compare_count.cmp(&state.prev_count) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => state.opinion,
    };
    AgentState {
        opinion,
        prev_count: fresh_count,
        is_source: false,
    }
}

/// One update of a single agent from its two observed half-samples.
///
/// `s_prime` is compared against the stored count; the count of `s_second` is
/// stored for the next round.
pub fn agent_round(state: AgentState, s_prime: &[bool], s_second: &[bool], ell: u32) -> Result<AgentState> {
    let ell_len = ell as usize;
    if s_prime.len() != ell_len || s_second.len() != ell_len {
        return domain(format!(
            "half-samples must hold exactly {ell} bits, got {} and {}",
            s_prime.len(),
            s_second.len()
        ));
    }
    if state.prev_count > ell {
        return domain(format!("stored count {} exceeds ell = {ell}", state.prev_count));
    }
    let count = |s: &[bool]| s.iter().filter(|&&b| b).count() as u32;
    Ok(fet_update(state, count(s_prime), count(s_second)))
}

/// The single-sample rule: `ℓ` samples compared with the previous round's count.
pub fn naive_update(state: AgentState, count: u32) -> AgentState {
    fet_update(state, count, count)
}

const PAR_MIN_AGENTS: usize = 4096;

/// Number of 1s among `k` uniform draws (with replacement, self included)
/// from `opinions`.
fn sample_ones(opinions: &[bool], k: u32, rng: &mut ChaCha8Rng) -> u32 {
    let n = opinions.len() as u32;
    (0..k).filter(|_| opinions[rng.random_range(0..n) as usize]).count() as u32
}

/// One synchronous round: every agent reads the pre-round opinions.
///
/// Agent `i` draws from the window `i` of `round_base`. The `2ℓ` draws are
/// i.i.d., so taking the first `ℓ` as `S'` is a uniformly random split.
pub fn step_agent_level(pop: &[AgentState], ell: u32, rule: Rule, round_base: &ChaCha8Rng) -> Vec<AgentState> {
    let opinions: Vec<bool> = pop.iter().map(|a| a.opinion).collect();
    let update = |(i, a): (usize, &AgentState)| {
        if a.is_source {
            return *a;
        }
        let mut rng = lane(round_base, i as u64);
        match rule {
            Rule::Fet => {
                let c_prime = sample_ones(&opinions, ell, &mut rng);
                let c_second = sample_ones(&opinions, ell, &mut rng);
                fet_update(*a, c_prime, c_second)
            }
            Rule::Naive => naive_update(*a, sample_ones(&opinions, ell, &mut rng)),
        }
    };
    if pop.len() >= PAR_MIN_AGENTS {
        pop.par_iter().enumerate().map(update).collect()
    } else {
        pop.iter().enumerate().map(update).collect()
    }
}

pub fn count_ones(pop: &[AgentState]) -> u64 {
    pop.iter().filter(|a| a.opinion).count() as u64
}

/// Population at round `t + 1` of a run with `k_t` ones at round `t` and
/// `k_t1` ones at round `t + 1`, source (agent 0) holding 1.
///
/// Stored counts are produced by letting every agent sample `ℓ` opinions from
/// a round-`t` population with `k_t` ones, so the result is a faithful
/// agent-level state for the pair `(k_t / n, k_t1 / n)`.
pub fn population_at_pair(k_t: u64, k_t1: u64, n: u64, ell: u32, base: &ChaCha8Rng) -> Result<Vec<AgentState>> {
    if k_t > n || k_t1 > n || k_t1 == 0 {
        return domain(format!("pair ({k_t}, {k_t1}) is not a 1-source state for n = {n}"));
    }
    let previous: Vec<bool> = (0..n).map(|i| i < k_t).collect();
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                return AgentState::source(true);
            }
            let mut rng = lane(base, i);
            AgentState::new(i < k_t1, sample_ones(&previous, ell, &mut rng))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::rng::round_rng;

    fn bits(ones: usize, len: usize) -> Vec<bool> {
        (0..len).map(|i| i < ones).collect()
    }

    #[test]
    fn update_rule_examples() {
        let s = AgentState::new(false, 1);
        let next = agent_round(s, &bits(2, 3), &bits(0, 3), 3).unwrap();
        assert_eq!(next, AgentState::new(true, 0));

        let s = AgentState::new(true, 2);
        for fresh in 0..=3 {
            let next = agent_round(s, &bits(2, 3), &bits(fresh, 3), 3).unwrap();
            assert!(next.opinion);
            assert_eq!(next.prev_count, fresh as u32);
        }

        let s = AgentState::new(true, 3);
        assert!(!agent_round(s, &bits(1, 3), &bits(1, 3), 3).unwrap().opinion);
    }

    #[test]
    fn source_is_unchanged() {
        let s = AgentState::source(false);
        assert_eq!(agent_round(s, &bits(3, 3), &bits(3, 3), 3).unwrap(), s);
    }

    #[test]
    fn malformed_samples_rejected() {
        let s = AgentState::new(false, 0);
        assert!(agent_round(s, &bits(1, 2), &bits(1, 3), 3).is_err());
        assert!(agent_round(AgentState::new(false, 4), &bits(1, 3), &bits(1, 3), 3).is_err());
    }

    #[test]
    fn all_ones_is_absorbing() {
        let mut pop: Vec<AgentState> = (0..50).map(|i| AgentState::new(true, (i % 9) as u32)).collect();
        pop[0] = AgentState::source(true);
        for r in 0..5 {
            pop = step_agent_level(&pop, 8, Rule::Fet, &round_rng(1, 0, r));
            assert_eq!(count_ones(&pop), 50);
        }
    }

    #[test]
    fn step_is_deterministic() {
        let mut pop: Vec<AgentState> = (0..40).map(|i| AgentState::new(i % 3 == 0, (i % 5) as u32)).collect();
        pop[0] = AgentState::source(true);
        let a = step_agent_level(&pop, 4, Rule::Fet, &round_rng(3, 2, 1));
        let b = step_agent_level(&pop, 4, Rule::Fet, &round_rng(3, 2, 1));
        assert_eq!(a, b);
    }

    #[test]
    fn pair_population_shape() {
        let pop = population_at_pair(5, 7, 20, 4, &round_rng(0, 0, 0)).unwrap();
        assert_eq!(count_ones(&pop), 7);
        assert!(pop[0].is_source && pop[0].opinion);
        assert!(pop.iter().all(|a| a.prev_count <= 4));
        assert!(population_at_pair(5, 0, 20, 4, &round_rng(0, 0, 0)).is_err());
    }
}
