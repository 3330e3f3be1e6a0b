//! Best responses and Nash-equilibrium certificates under SER for two-player
//! MONFGs, plus distances to reference outcomes.

use serde::Serialize;

use crate::error::{Result, invalid};
use crate::game::{MixedStrategyProfile, Monfg, UtilityFn, check_probability_vector};
use crate::harness::OutcomeDistribution;

pub const DEFAULT_RESOLUTION: f64 = 0.01;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
const REFINEMENT_HALVINGS: usize = 3;

/// Expected payoff of each own action against a fixed opponent strategy.
fn action_values(game: &Monfg, opponent: &[f64], agent: usize) -> Vec<Vec<f64>> {
    (0..game.num_actions(agent))
        .map(|a| {
            let mut v = vec![0.0; game.num_objectives()];
            for (b, pb) in opponent.iter().enumerate() {
                for (o, p) in v.iter_mut().zip(game.payoff_2p(agent, a, b)) {
                    *o += pb * p;
                }
            }
            v
        })
        .collect()
}

fn ser_of(rows: &[Vec<f64>], x: &[f64], u: &UtilityFn) -> f64 {
    let mut v = vec![0.0; rows[0].len()];
    for (xa, r) in x.iter().zip(rows) {
        for (o, p) in v.iter_mut().zip(r) {
            *o += xa * p;
        }
    }
    u.eval(&v)
}

/// Visits every point of the simplex grid with `m` steps per unit.
fn for_each_grid_point(n: usize, m: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, n: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if buf.len() + 1 == n {
            buf.push(left);
            f(buf);
            buf.pop();
            return;
        }
        for k in 0..=left {
            buf.push(k);
            rec(buf, n, left - k, f);
            buf.pop();
        }
    }
    rec(&mut Vec::with_capacity(n), n, m, f);
}

fn check_two_player(game: &Monfg) -> Result<()> {
    if game.num_agents() != 2 {
        return Err(invalid("equilibrium search supports two-player games only"));
    }
    Ok(())
}

/// Grid search over `agent`'s mixed strategies at the given step, followed by
/// pairwise mass-exchange refinement with three halvings of the step.
pub fn best_response_value(
    game: &Monfg,
    opponent_strategy: &[f64],
    agent: usize,
    u: &UtilityFn,
    resolution: f64,
) -> Result<(Vec<f64>, f64)> {
    check_two_player(game)?;
    if agent > 1 {
        return Err(invalid(format!("agent index {agent} out of range")));
    }
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(invalid(format!("resolution must lie in (0, 0.5], got {resolution}")));
    }
    if opponent_strategy.len() != game.num_actions(1 - agent) {
        return Err(invalid("opponent strategy has the wrong length"));
    }
    check_probability_vector(opponent_strategy)?;
    let rows = action_values(game, opponent_strategy, agent);
    let n = rows.len();
    let m = (1.0 / resolution - 1e-9).ceil() as usize;

    let mut best = (vec![0.0; n], f64::NEG_INFINITY);
    let mut x = vec![0.0; n];
    for_each_grid_point(n, m, &mut |k| {
        for (xi, ki) in x.iter_mut().zip(k) {
            *xi = *ki as f64 / m as f64;
        }
        let v = ser_of(&rows, &x, u);
        if v > best.1 {
            best = (x.clone(), v);
        }
    });

    let mut step = 1.0 / m as f64;
    for _ in 0..REFINEMENT_HALVINGS {
        step *= 0.5;
        loop {
            let mut improved = false;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let delta = step.min(best.0[j]);
                    if delta <= 0.0 {
                        continue;
                    }
                    let mut cand = best.0.clone();
                    cand[i] += delta;
                    cand[j] -= delta;
                    let v = ser_of(&rows, &cand, u);
                    if v > best.1 + 1e-15 {
                        best = (cand, v);
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    Ok(best)
}

/// Best SER over `agent`'s pure strategies, computed exactly.
pub fn best_pure_response_value(
    game: &Monfg,
    opponent_strategy: &[f64],
    agent: usize,
    u: &UtilityFn,
) -> Result<(usize, f64)> {
    check_two_player(game)?;
    let rows = action_values(game, opponent_strategy, agent);
    Ok(rows
        .iter()
        .enumerate()
        .map(|(a, r)| (a, u.eval(r)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeCertificate {
    pub profile: MixedStrategyProfile,
    /// Largest SER gain from a unilateral mixed deviation found by the search.
    pub epsilon: f64,
    /// Largest SER gain from a unilateral pure deviation (exact).
    pub pure_epsilon: f64,
    /// Per-agent gains from mixed deviations.
    pub agent_epsilon: Vec<f64>,
    pub is_pure: bool,
    pub search_resolution: f64,
    pub tolerance: f64,
    /// `epsilon ≤ tolerance`.
    pub is_ne: bool,
    /// `pure_epsilon ≤ tolerance`: no profitable pure deviation.
    pub is_pure_deviation_ne: bool,
}

pub fn verify_ne(
    game: &Monfg,
    profile: &MixedStrategyProfile,
    utilities: &[UtilityFn],
    tolerance: f64,
) -> Result<NeCertificate> {
    verify_ne_at(game, profile, utilities, tolerance, DEFAULT_RESOLUTION)
}

pub fn verify_ne_at(
    game: &Monfg,
    profile: &MixedStrategyProfile,
    utilities: &[UtilityFn],
    tolerance: f64,
    resolution: f64,
) -> Result<NeCertificate> {
    check_two_player(game)?;
    if utilities.len() != 2 {
        return Err(invalid("one utility per agent is required"));
    }
    if profile.strategies().len() != 2 {
        return Err(invalid("profile must hold two strategies"));
    }
    let mut agent_epsilon = Vec::with_capacity(2);
    let mut pure_epsilon: f64 = 0.0;
    for agent in 0..2 {
        let own = profile.strategy(agent);
        let opp = profile.strategy(1 - agent);
        if own.len() != game.num_actions(agent) {
            return Err(invalid("profile does not match the game"));
        }
        let rows = action_values(game, opp, agent);
        let current = ser_of(&rows, own, &utilities[agent]);
        let (_, br) = best_response_value(game, opp, agent, &utilities[agent], resolution)?;
        let (_, pure) = best_pure_response_value(game, opp, agent, &utilities[agent])?;
        agent_epsilon.push((br.max(pure) - current).max(0.0));
        pure_epsilon = pure_epsilon.max((pure - current).max(0.0));
    }
    let epsilon = agent_epsilon.iter().copied().fold(0.0, f64::max);
    let is_pure = profile
        .strategies()
        .iter()
        .all(|s| s.iter().filter(|&&p| p > 0.0).count() == 1);
    Ok(NeCertificate {
        profile: profile.clone(),
        epsilon,
        pure_epsilon,
        agent_epsilon,
        is_pure,
        search_resolution: resolution,
        tolerance,
        is_ne: epsilon <= tolerance,
        is_pure_deviation_ne: pure_epsilon <= tolerance,
    })
}

/// Pure profiles at which no agent gains by switching to another pure
/// action; SER values are computed exactly.
pub fn enumerate_pure_ne(game: &Monfg, utilities: &[UtilityFn]) -> Result<Vec<(usize, usize)>> {
    check_two_player(game)?;
    if utilities.len() != 2 {
        return Err(invalid("one utility per agent is required"));
    }
    let mut out = Vec::new();
    for a in 0..game.num_actions(0) {
        for b in 0..game.num_actions(1) {
            let stable = |agent: usize, own: usize, other: usize| {
                let current = utilities[agent].eval(game.payoff_2p(agent, own, other));
                (0..game.num_actions(agent)).all(|d| utilities[agent].eval(game.payoff_2p(agent, d, other)) <= current)
            };
            if stable(0, a, b) && stable(1, b, a) {
                out.push((a, b));
            }
        }
    }
    Ok(out)
}

/// Pure profiles that also survive mixed deviations found by
/// [`best_response_value`] at the given resolution.
pub fn enumerate_pure_ne_mixed_checked(
    game: &Monfg,
    utilities: &[UtilityFn],
    tolerance: f64,
    resolution: f64,
) -> Result<Vec<(usize, usize)>> {
    let counts = game.action_counts();
    let mut out = Vec::new();
    for (a, b) in enumerate_pure_ne(game, utilities)? {
        let profile = MixedStrategyProfile::pure(&counts, &[a, b])?;
        if verify_ne_at(game, &profile, utilities, tolerance, resolution)?.is_ne {
            out.push((a, b));
        }
    }
    Ok(out)
}

/// Total-variation distance `½ Σ |d − r|`.
pub fn outcome_proximity(dist: &OutcomeDistribution, reference: &OutcomeDistribution) -> Result<f64> {
    if dist.shape() != reference.shape() {
        return Err(invalid(format!(
            "outcome shapes differ: {:?} vs {:?}",
            dist.shape(),
            reference.shape()
        )));
    }
    Ok(0.5
        * dist
            .matrix
            .iter()
            .flatten()
            .zip(reference.matrix.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Named reference outcomes for a game: point masses on its pure equilibria;
/// for the catalogue games without equilibria, the outcomes the learners are
/// expected to approach (joint uniform play for game 4, alternation between
/// (L,M) and (R,M) for game 5).
pub fn reference_outcomes(game: &Monfg, catalogue_id: Option<u32>) -> Result<Vec<(String, OutcomeDistribution)>> {
    let (r, c) = (game.num_actions(0), game.num_actions(1));
    let label = |a: usize, b: usize| format!("({},{})", game.action_labels(0)[a], game.action_labels(1)[b]);
    let utilities = [UtilityFn::for_agent(0), UtilityFn::for_agent(1)];
    let mut out: Vec<(String, OutcomeDistribution)> = enumerate_pure_ne(game, &utilities)?
        .into_iter()
        .map(|(a, b)| (label(a, b), OutcomeDistribution::point_mass(r, c, a, b)))
        .collect();
    match catalogue_id {
        Some(4) => out.push((
            "uniform".into(),
            OutcomeDistribution::from_matrix(vec![vec![1.0 / (r * c) as f64; c]; r])?,
        )),
        Some(5) => {
            let mut m = vec![vec![0.0; c]; r];
            m[0][1] = 0.5;
            m[2][1] = 0.5;
            out.push(("(L,M)|(R,M)".into(), OutcomeDistribution::from_matrix(m)?));
        }
        _ => {}
    }
    Ok(out)
}
