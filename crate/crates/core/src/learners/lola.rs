//! Opponent-shaping learners built on DiCE objectives: full-information
//! MO-LOLA and the opponent-modelling variant LOLAM.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::critic::{MoQTable, QKey};
use crate::error::{Result, invalid};
use crate::game::{Monfg, UtilityFn};
use crate::policy::{PolicyKind, PolicyParams, log_prob_exprs};

use super::dice::{RolloutBatch, dice_objective, exact_batch, sample_batch};
use super::graph::Graph;
use super::step_model::{StepModel, gp_lookahead};
use super::{Algorithm, Experience, Learner, LearnerConfig, initial_policy};

/// How rollout batches are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rollouts {
    /// `B` sampled trajectories of length `K`.
    Sampled,
    /// Every single-step joint action weighted by its probability.
    Exact,
}

fn make_batch<F>(
    own: &[f64],
    opponent: &[f64],
    config: &LearnerConfig,
    mode: Rollouts,
    payoff: F,
    rng: &mut (impl Rng + ?Sized),
) -> Result<RolloutBatch>
where
    F: Fn(usize, usize) -> Vec<f64>,
{
    match mode {
        Rollouts::Sampled => sample_batch(own, opponent, config.rollout_length, config.rollout_batch, payoff, rng),
        Rollouts::Exact => Ok(exact_batch(own, opponent, payoff)),
    }
}

fn values_to_probs(kind: PolicyKind, theta: Vec<f64>) -> Result<Vec<f64>> {
    Ok(PolicyParams::new(kind, theta)?.probabilities())
}

/// Everything MO-LOLA may read: the game, both agents' parameters and both
/// utilities.
#[derive(Clone, Debug)]
pub struct FullInformation<'a> {
    pub game: &'a Monfg,
    /// Index of the updating agent.
    pub agent: usize,
    pub own: &'a PolicyParams,
    pub opponent: &'a PolicyParams,
    pub own_utility: &'a UtilityFn,
    pub opponent_utility: &'a UtilityFn,
}

/// MO-LOLA gradient for `info.agent`. The opponent's parameters are advanced
/// `lookahead` times by ascending its own DiCE objective; each inner step is
/// an expression of the updating agent's parameters, so the final gradient
/// includes the shaping terms.
pub fn molola_gradient(
    info: &FullInformation<'_>,
    config: &LearnerConfig,
    mode: Rollouts,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Vec<f64>> {
    let game = info.game;
    if game.num_agents() != 2 || info.agent > 1 {
        return Err(invalid("MO-LOLA supports two-agent games only"));
    }
    let (me, them) = (info.agent, 1 - info.agent);
    let mut g = Graph::new();
    let th1 = g.params(info.own.theta());
    let own_logp = log_prob_exprs(&mut g, info.own.kind(), &th1);
    let own_probs = info.own.probabilities();
    let mut th2 = g.params(info.opponent.theta());
    let kind2 = info.opponent.kind();

    for _ in 0..config.lookahead {
        let opp_probs = values_to_probs(kind2, g.values(&th2))?;
        // The opponent's objective, seen from the opponent's side.
        let batch = make_batch(
            &opp_probs,
            &own_probs,
            config,
            mode,
            |b, a| game.payoff_2p(them, b, a).to_vec(),
            rng,
        )?;
        let opp_logp = log_prob_exprs(&mut g, kind2, &th2);
        let j2 = dice_objective(
            &mut g,
            &batch,
            &opp_logp,
            &own_logp,
            info.opponent_utility,
            config.gamma,
        )?;
        let grad2 = g.grad(j2, &th2);
        th2 = th2
            .iter()
            .zip(&grad2)
            .map(|(&t, &d)| {
                let step = g.scale(d, config.alpha_in);
                g.add(t, step)
            })
            .collect();
    }

    let opp_probs = values_to_probs(kind2, g.values(&th2))?;
    let batch = make_batch(
        &own_probs,
        &opp_probs,
        config,
        mode,
        |a, b| game.payoff_2p(me, a, b).to_vec(),
        rng,
    )?;
    let opp_logp = log_prob_exprs(&mut g, kind2, &th2);
    let j1 = dice_objective(&mut g, &batch, &own_logp, &opp_logp, info.own_utility, config.gamma)?;
    let grad = g.grad(j1, &th1);
    Ok(g.values(&grad))
}

/// One MO-LOLA step for `info.agent`: `θ ← θ + α_θ ∇J`.
pub fn molola_update(
    info: &FullInformation<'_>,
    config: &LearnerConfig,
    rng: &mut (impl Rng + ?Sized),
) -> Result<PolicyParams> {
    let grad = molola_gradient(info, config, Rollouts::Sampled, rng)?;
    let mut next = info.own.clone();
    next.ascend(&grad, config.alpha_theta)?;
    Ok(next)
}

/// LOLAM gradient against an estimated opponent. `model` predicts the
/// opponent's learning steps; `payoff` is the agent's own learned payoff
/// table.
#[allow(clippy::too_many_arguments)]
pub fn lolam_gradient(
    policy: &PolicyParams,
    opponent_estimate: &PolicyParams,
    model: Option<&crate::gp::GpModel>,
    payoff: &MoQTable,
    config: &LearnerConfig,
    u: &UtilityFn,
    mode: Rollouts,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Vec<f64>> {
    let (theta2, jac) = match model {
        Some(m) if config.lookahead > 0 => gp_lookahead(
            m,
            policy.theta(),
            opponent_estimate.theta(),
            config.lookahead,
            config.alpha_in,
        ),
        _ => (
            opponent_estimate.theta().to_vec(),
            DMatrix::zeros(opponent_estimate.theta().len(), policy.theta().len()),
        ),
    };
    let kind2 = opponent_estimate.kind();
    let opp_probs = values_to_probs(kind2, theta2.clone())?;
    let batch = make_batch(
        &policy.probabilities(),
        &opp_probs,
        config,
        mode,
        |a, b| payoff.get(QKey::Joint(a, b)).map(<[f64]>::to_vec).unwrap_or_default(),
        rng,
    )?;
    let mut g = Graph::new();
    let th1 = g.params(policy.theta());
    let th2 = g.params(&theta2);
    let l1 = log_prob_exprs(&mut g, policy.kind(), &th1);
    let l2 = log_prob_exprs(&mut g, kind2, &th2);
    let j = dice_objective(&mut g, &batch, &l1, &l2, u, config.gamma)?;
    let wrt: Vec<_> = th1.iter().chain(&th2).copied().collect();
    let grads = g.grad(j, &wrt);
    let vals = g.values(&grads);
    let (g1, g2) = vals.split_at(th1.len());
    let mut grad = g1.to_vec();
    if config.shape_through_gp {
        let shaped = jac.transpose() * DVector::from_column_slice(g2);
        for (a, s) in grad.iter_mut().zip(shaped.iter()) {
            *a += s;
        }
    }
    Ok(grad)
}

#[derive(Debug)]
pub struct Lolam {
    config: LearnerConfig,
    policy: PolicyParams,
    /// Payoffs observed for each joint action (α = 1: last observation).
    payoffs: MoQTable,
    steps: StepModel,
    utility: UtilityFn,
}

impl Lolam {
    pub fn new(
        config: LearnerConfig,
        own_actions: usize,
        opponent_actions: usize,
        objectives: usize,
        utility: UtilityFn,
    ) -> Result<Self> {
        Ok(Lolam {
            payoffs: MoQTable::joint_action(own_actions, opponent_actions, objectives, 1.0)?,
            steps: StepModel::new(&config, opponent_actions, PolicyKind::Sigmoid)?,
            policy: initial_policy(PolicyKind::Sigmoid, own_actions),
            config,
            utility,
        })
    }

    pub fn step_model(&self) -> &StepModel {
        &self.steps
    }
}

impl Learner for Lolam {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Lolam
    }

    fn policy(&self) -> &PolicyParams {
        &self.policy
    }

    fn observe(&mut self, e: &Experience) -> Result<()> {
        self.payoffs
            .q_update(QKey::Joint(e.own_action, e.opponent_action), &e.payoff)?;
        self.steps.observe(e.opponent_action)
    }

    fn end_episode(&mut self, rng: &mut dyn RngCore) -> Result<()> {
        if self.steps.frequencies().total() == 0 {
            return Err(invalid("episode contained no interactions"));
        }
        let estimate = self.steps.close_window(self.policy.theta())?;
        let model = if self.config.lookahead > 0 {
            self.steps.fit()
        } else {
            None
        };
        let grad = lolam_gradient(
            &self.policy,
            &estimate.params,
            model.as_ref(),
            &self.payoffs,
            &self.config,
            &self.utility,
            Rollouts::Sampled,
            rng,
        )?;
        self.policy.ascend(&grad, self.config.alpha_theta)
    }
}
