//! Multi-objective normal-form games and SER/ESR evaluation of mixed profiles.
//!
//! A [`Monfg`] stores one payoff vector per joint action for every agent. The
//! catalogue games share a single vector between both agents, but games loaded
//! from text files may give each agent its own payoffs.

mod catalogue;
mod format;
mod utility;

pub use catalogue::{CATALOGUE_IDS, game_catalogue};
pub use format::{parse_game, read_game_file};
pub use utility::{LinearUtility, Utility, UtilityFn};

use crate::error::{Result, invalid};

/// Probability vectors must sum to one within this tolerance.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// A finite multi-objective normal-form game.
#[derive(Clone, Debug, PartialEq)]
pub struct Monfg {
    name: String,
    action_labels: Vec<Vec<String>>,
    num_objectives: usize,
    /// `payoffs[agent][joint_index * C + c]`.
    payoffs: Vec<Vec<f64>>,
}

impl Monfg {
    /// Builds a game where every agent receives the same payoff vector.
    ///
    /// `cells` is indexed by the row-major joint action index (see
    /// [`Monfg::joint_index`]).
    pub fn shared(
        name: impl Into<String>,
        action_labels: Vec<Vec<String>>,
        num_objectives: usize,
        cells: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = action_labels.len();
        Self::with_agent_payoffs(name, action_labels, num_objectives, vec![cells; n])
    }

    /// Builds a game with a separate payoff map per agent.
    pub fn with_agent_payoffs(
        name: impl Into<String>,
        action_labels: Vec<Vec<String>>,
        num_objectives: usize,
        per_agent_cells: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if action_labels.len() < 2 {
            return Err(invalid("a game needs at least two agents"));
        }
        if num_objectives < 2 {
            return Err(invalid("a multi-objective game needs at least two objectives"));
        }
        if action_labels.iter().any(|a| a.is_empty()) {
            return Err(invalid("every agent needs at least one action"));
        }
        if per_agent_cells.len() != action_labels.len() {
            return Err(invalid("one payoff map per agent is required"));
        }
        let num_cells: usize = action_labels.iter().map(Vec::len).product();
        let mut payoffs = Vec::with_capacity(per_agent_cells.len());
        for (agent, cells) in per_agent_cells.into_iter().enumerate() {
            if cells.len() != num_cells {
                return Err(invalid(format!(
                    "agent {} has {} payoff cells, expected {num_cells}",
                    agent + 1,
                    cells.len()
                )));
            }
            let mut flat = Vec::with_capacity(num_cells * num_objectives);
            for (i, cell) in cells.into_iter().enumerate() {
                if cell.len() != num_objectives {
                    return Err(invalid(format!(
                        "payoff cell {i} of agent {} has {} components, expected {num_objectives}",
                        agent + 1,
                        cell.len()
                    )));
                }
                if cell.iter().any(|v| !v.is_finite()) {
                    return Err(invalid(format!("payoff cell {i} is not finite")));
                }
                flat.extend(cell);
            }
            payoffs.push(flat);
        }
        Ok(Monfg {
            name: name.into(),
            action_labels,
            num_objectives,
            payoffs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_agents(&self) -> usize {
        self.action_labels.len()
    }

    pub fn num_objectives(&self) -> usize {
        self.num_objectives
    }

    pub fn num_actions(&self, agent: usize) -> usize {
        self.action_labels[agent].len()
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.action_labels.iter().map(Vec::len).collect()
    }

    pub fn action_labels(&self, agent: usize) -> &[String] {
        &self.action_labels[agent]
    }

    pub fn action_index(&self, agent: usize, label: &str) -> Option<usize> {
        self.action_labels[agent].iter().position(|l| l == label)
    }

    pub fn num_joint_actions(&self) -> usize {
        self.action_labels.iter().map(Vec::len).product()
    }

    /// Whether every agent receives the same payoff vector in every cell.
    pub fn is_shared(&self) -> bool {
        self.payoffs.windows(2).all(|w| w[0] == w[1])
    }

    /// Row-major index of a joint action (the last agent varies fastest).
    pub fn joint_index(&self, actions: &[usize]) -> Result<usize> {
        if actions.len() != self.num_agents() {
            return Err(invalid(format!(
                "joint action has {} entries, game has {} agents",
                actions.len(),
                self.num_agents()
            )));
        }
        let mut idx = 0;
        for (agent, (&a, labels)) in actions.iter().zip(&self.action_labels).enumerate() {
            if a >= labels.len() {
                return Err(invalid(format!("action {a} out of range for agent {}", agent + 1)));
            }
            idx = idx * labels.len() + a;
        }
        Ok(idx)
    }

    /// Inverse of [`Monfg::joint_index`].
    pub fn joint_action(&self, mut index: usize) -> Vec<usize> {
        let mut actions = vec![0; self.num_agents()];
        for (slot, labels) in actions.iter_mut().zip(&self.action_labels).rev() {
            *slot = index % labels.len();
            index /= labels.len();
        }
        actions
    }

    /// Payoff vector received by `agent` under a joint action.
    pub fn payoff(&self, agent: usize, actions: &[usize]) -> Result<&[f64]> {
        if agent >= self.num_agents() {
            return Err(invalid(format!("agent index {agent} out of range")));
        }
        let idx = self.joint_index(actions)?;
        Ok(self.cell(agent, idx))
    }

    /// Payoff vector by row-major cell index, without bounds checks on the
    /// agent count.
    pub fn cell(&self, agent: usize, joint_index: usize) -> &[f64] {
        let c = self.num_objectives;
        &self.payoffs[agent][joint_index * c..(joint_index + 1) * c]
    }

    /// Two-player convenience accessor indexed from `agent`'s point of view:
    /// `own` is that agent's action, `other` the opponent's.
    pub fn payoff_2p(&self, agent: usize, own: usize, other: usize) -> &[f64] {
        debug_assert_eq!(self.num_agents(), 2);
        let idx = if agent == 0 {
            own * self.num_actions(1) + other
        } else {
            other * self.num_actions(1) + own
        };
        self.cell(agent, idx)
    }

    fn check_profile(&self, profile: &MixedStrategyProfile, agent: usize) -> Result<()> {
        if agent >= self.num_agents() {
            return Err(invalid(format!("agent index {agent} out of range")));
        }
        if profile.strategies.len() != self.num_agents() {
            return Err(invalid(format!(
                "profile has {} strategies, game has {} agents",
                profile.strategies.len(),
                self.num_agents()
            )));
        }
        for (i, (s, labels)) in profile.strategies.iter().zip(&self.action_labels).enumerate() {
            if s.len() != labels.len() {
                return Err(invalid(format!(
                    "strategy of agent {} has {} entries, expected {}",
                    i + 1,
                    s.len(),
                    labels.len()
                )));
            }
        }
        Ok(())
    }
}

/// One mixed strategy (probability vector) per agent.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MixedStrategyProfile {
    strategies: Vec<Vec<f64>>,
}

impl MixedStrategyProfile {
    pub fn new(strategies: Vec<Vec<f64>>) -> Result<Self> {
        for (i, s) in strategies.iter().enumerate() {
            check_probability_vector(s).map_err(|e| invalid(format!("strategy of agent {}: {e}", i + 1)))?;
        }
        Ok(MixedStrategyProfile { strategies })
    }

    /// Point-mass profile on a joint action.
    pub fn pure(action_counts: &[usize], actions: &[usize]) -> Result<Self> {
        if action_counts.len() != actions.len() {
            return Err(invalid("action count and joint action lengths differ"));
        }
        let strategies = action_counts
            .iter()
            .zip(actions)
            .map(|(&n, &a)| {
                if a >= n {
                    return Err(invalid(format!("action {a} out of range ({n} actions)")));
                }
                let mut s = vec![0.0; n];
                s[a] = 1.0;
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MixedStrategyProfile { strategies })
    }

    pub fn uniform(action_counts: &[usize]) -> Self {
        MixedStrategyProfile {
            strategies: action_counts.iter().map(|&n| vec![1.0 / n as f64; n]).collect(),
        }
    }

    pub fn strategies(&self) -> &[Vec<f64>] {
        &self.strategies
    }

    pub fn strategy(&self, agent: usize) -> &[f64] {
        &self.strategies[agent]
    }

    /// Replaces one agent's strategy, keeping the others.
    pub fn with_strategy(&self, agent: usize, strategy: Vec<f64>) -> Result<Self> {
        check_probability_vector(&strategy)?;
        let mut strategies = self.strategies.clone();
        *strategies
            .get_mut(agent)
            .ok_or_else(|| invalid(format!("agent index {agent} out of range")))? = strategy;
        Ok(MixedStrategyProfile { strategies })
    }
}

pub(crate) fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(invalid("empty probability vector"));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(invalid(format!("probabilities must be finite and nonnegative: {p:?}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(invalid(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Joint probability of every cell under `profile`, in row-major order.
fn joint_probabilities(game: &Monfg, profile: &MixedStrategyProfile) -> Vec<f64> {
    let mut probs = vec![1.0];
    for s in &profile.strategies {
        probs = probs.iter().flat_map(|&p| s.iter().map(move |&q| p * q)).collect();
    }
    debug_assert_eq!(probs.len(), game.num_joint_actions());
    probs
}

/// Expected payoff vector of `agent` under a joint mixed strategy.
pub fn expected_payoff(game: &Monfg, profile: &MixedStrategyProfile, agent: usize) -> Result<Vec<f64>> {
    game.check_profile(profile, agent)?;
    let mut out = vec![0.0; game.num_objectives()];
    for (idx, p) in joint_probabilities(game, profile).into_iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(game.cell(agent, idx)) {
            *o += p * v;
        }
    }
    Ok(out)
}

/// Scalarised expected returns: the utility of the expected payoff vector.
pub fn ser_utility(game: &Monfg, profile: &MixedStrategyProfile, agent: usize, u: &UtilityFn) -> Result<f64> {
    Ok(u.eval(&expected_payoff(game, profile, agent)?))
}

/// Expected scalarised returns: the expected utility of per-cell payoffs.
///
/// Only used for reporting; none of the learners optimise it.
pub fn esr_utility(game: &Monfg, profile: &MixedStrategyProfile, agent: usize, u: &UtilityFn) -> Result<f64> {
    game.check_profile(profile, agent)?;
    Ok(joint_probabilities(game, profile)
        .into_iter()
        .enumerate()
        .filter(|&(_, p)| p > 0.0)
        .map(|(idx, p)| p * u.eval(game.cell(agent, idx)))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform2() -> MixedStrategyProfile {
        MixedStrategyProfile::uniform(&[2, 2])
    }

    #[test]
    fn expected_payoff_game4_uniform() {
        let g = game_catalogue(4).unwrap();
        assert_eq!(expected_payoff(&g, &uniform2(), 0).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn expected_payoff_pure_cell() {
        let g = game_catalogue(1).unwrap();
        let p = MixedStrategyProfile::pure(&[2, 2], &[0, 1]).unwrap();
        assert_eq!(expected_payoff(&g, &p, 0).unwrap(), vec![3.0, 1.0]);
        for idx in 0..g.num_joint_actions() {
            let a = g.joint_action(idx);
            let p = MixedStrategyProfile::pure(&g.action_counts(), &a).unwrap();
            assert_eq!(expected_payoff(&g, &p, 1).unwrap(), g.cell(1, idx));
        }
    }

    #[test]
    fn ser_caption_values() {
        let g2 = game_catalogue(2).unwrap();
        let u = [UtilityFn::SumOfSquares, UtilityFn::Product];
        let ll = MixedStrategyProfile::pure(&[2, 2], &[0, 0]).unwrap();
        let mm = MixedStrategyProfile::pure(&[2, 2], &[1, 1]).unwrap();
        assert_eq!(ser_utility(&g2, &ll, 0, &u[0]).unwrap(), 17.0);
        assert_eq!(ser_utility(&g2, &ll, 1, &u[1]).unwrap(), 4.0);
        assert_eq!(ser_utility(&g2, &mm, 0, &u[0]).unwrap(), 13.0);
        assert_eq!(ser_utility(&g2, &mm, 1, &u[1]).unwrap(), 6.0);

        let g3 = game_catalogue(3).unwrap();
        let rr = MixedStrategyProfile::pure(&[3, 3], &[2, 2]).unwrap();
        assert_eq!(ser_utility(&g3, &rr, 0, &u[0]).unwrap(), 10.0);
        assert_eq!(ser_utility(&g3, &rr, 1, &u[1]).unwrap(), 3.0);

        let g4 = game_catalogue(4).unwrap();
        assert_eq!(ser_utility(&g4, &uniform2(), 0, &u[0]).unwrap(), 8.0);
        assert_eq!(ser_utility(&g4, &uniform2(), 1, &u[1]).unwrap(), 4.0);
    }

    #[test]
    fn esr_values() {
        let g1 = game_catalogue(1).unwrap();
        let lm = MixedStrategyProfile::pure(&[2, 2], &[0, 1]).unwrap();
        assert_eq!(esr_utility(&g1, &lm, 0, &UtilityFn::SumOfSquares).unwrap(), 10.0);

        // Enumerated: u1 over cells = 16, 8, 8, 16; u2 = 0, 4, 4, 0.
        let g4 = game_catalogue(4).unwrap();
        assert_eq!(
            esr_utility(&g4, &uniform2(), 0, &UtilityFn::SumOfSquares).unwrap(),
            12.0
        );
        assert_eq!(esr_utility(&g4, &uniform2(), 1, &UtilityFn::Product).unwrap(), 2.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = game_catalogue(3).unwrap();
        let p = uniform2();
        assert!(expected_payoff(&g, &p, 0).is_err());
        assert!(expected_payoff(&game_catalogue(1).unwrap(), &p, 2).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(MixedStrategyProfile::new(vec![vec![0.5, 0.6], vec![1.0]]).is_err());
        assert!(MixedStrategyProfile::new(vec![vec![-0.1, 1.1], vec![1.0]]).is_err());
        assert!(MixedStrategyProfile::new(vec![vec![0.3, 0.7], vec![1.0]]).is_ok());
    }

    #[test]
    fn joint_index_round_trip() {
        let g = game_catalogue(5).unwrap();
        for idx in 0..g.num_joint_actions() {
            assert_eq!(g.joint_index(&g.joint_action(idx)).unwrap(), idx);
        }
        assert!(g.joint_index(&[3, 0]).is_err());
    }
}
