//! Actor-critic learners: plain AC, AC with opponent modelling (ACOM), and
//! AC with opponent modelling and learning awareness (ACOLAM).

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::critic::{MoQTable, QKey};
use crate::error::{Result, invalid};
use crate::game::UtilityFn;
use crate::gp::GpModel;
use crate::policy::{PolicyKind, PolicyParams};

use super::step_model::{StepModel, gp_lookahead};
use super::{Algorithm, Experience, Learner, LearnerConfig, initial_policy};

/// `J(θ) = u(Σ_a π(a|θ) r_a)` and its gradient
/// `[Σ_a ∇π(a|θ) r_a]ᵀ ∇u(v)`.
pub fn marginal_objective(policy: &PolicyParams, rows: &[Vec<f64>], u: &UtilityFn) -> (f64, Vec<f64>) {
    let probs = policy.probabilities();
    let c = rows[0].len();
    let mut v = vec![0.0; c];
    for (p, r) in probs.iter().zip(rows) {
        for (vi, ri) in v.iter_mut().zip(r) {
            *vi += p * ri;
        }
    }
    let du = u.grad(&v);
    let dpi = policy.grad_probabilities();
    let grad = (0..policy.theta().len())
        .map(|j| {
            dpi.iter()
                .zip(rows)
                .map(|(dp, r)| dp[j] * r.iter().zip(&du).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        })
        .collect();
    (u.eval(&v), grad)
}

/// AC objective `u(Σ_a π(a|θ) Q(a))` over an own-action table.
pub fn ac_objective(policy: &PolicyParams, q: &MoQTable, u: &UtilityFn) -> Result<(f64, Vec<f64>)> {
    let rows = (0..policy.num_actions())
        .map(|a| q.get(QKey::Own(a)).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    Ok(marginal_objective(policy, &rows, u))
}

/// ACOM objective `u(Σ_a π₁(a|θ₁) Σ_b π̂₂(b) Q(a, b))` with `π̂₂` held fixed.
pub fn acom_objective(policy: &PolicyParams, q: &MoQTable, opponent: &[f64], u: &UtilityFn) -> Result<(f64, Vec<f64>)> {
    q.expected_return_estimate(&policy.probabilities(), Some(opponent))?;
    Ok(marginal_objective(policy, &q.rows_against(opponent), u))
}

/// ACOLAM gradient: the opponent estimate is advanced along the GP's
/// predicted steps before the ACOM objective is differentiated. With
/// `shape`, the gradient also flows through the lookahead's dependence on
/// own parameters. Without a model this is the ACOM gradient at `θ̂₂`.
pub fn acolam_gradient(
    policy: &PolicyParams,
    q: &MoQTable,
    opponent_estimate: &PolicyParams,
    model: Option<&GpModel>,
    config: &LearnerConfig,
    u: &UtilityFn,
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
    let lookahead = PolicyParams::new(opponent_estimate.kind(), theta2)?;
    let pi2 = lookahead.probabilities();
    let (_, mut grad) = acom_objective(policy, q, &pi2, u)?;
    if config.shape_through_gp {
        let (_, g2) = marginal_objective(&lookahead, &q.columns_against(&policy.probabilities()), u);
        let shaped = jac.transpose() * DVector::from_vec(g2);
        for (g, s) in grad.iter_mut().zip(shaped.iter()) {
            *g += s;
        }
    }
    Ok(grad)
}

#[derive(Debug)]
pub struct ActorCritic {
    config: LearnerConfig,
    policy: PolicyParams,
    q: MoQTable,
    utility: UtilityFn,
    seen: usize,
}

impl ActorCritic {
    pub fn new(config: LearnerConfig, own_actions: usize, objectives: usize, utility: UtilityFn) -> Result<Self> {
        Ok(ActorCritic {
            q: MoQTable::own_action(own_actions, objectives, config.alpha_q)?,
            policy: initial_policy(PolicyKind::Softmax, own_actions),
            config,
            utility,
            seen: 0,
        })
    }

    pub fn critic(&self) -> &MoQTable {
        &self.q
    }
}

impl Learner for ActorCritic {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Ac
    }

    fn policy(&self) -> &PolicyParams {
        &self.policy
    }

    fn observe(&mut self, e: &Experience) -> Result<()> {
        self.q.q_update(QKey::Own(e.own_action), &e.payoff)?;
        self.seen += 1;
        Ok(())
    }

    fn end_episode(&mut self, _rng: &mut dyn RngCore) -> Result<()> {
        if self.seen == 0 {
            return Err(invalid("episode contained no interactions"));
        }
        self.seen = 0;
        let (_, grad) = ac_objective(&self.policy, &self.q, &self.utility)?;
        self.policy.ascend(&grad, self.config.alpha_theta)
    }
}

#[derive(Debug)]
pub struct Acom {
    config: LearnerConfig,
    policy: PolicyParams,
    q: MoQTable,
    model: crate::opponent::FrequencyModel,
    utility: UtilityFn,
}

impl Acom {
    pub fn new(
        config: LearnerConfig,
        own_actions: usize,
        opponent_actions: usize,
        objectives: usize,
        utility: UtilityFn,
    ) -> Result<Self> {
        Ok(Acom {
            q: MoQTable::joint_action(own_actions, opponent_actions, objectives, config.alpha_q)?,
            model: crate::opponent::FrequencyModel::new(opponent_actions, config.window, PolicyKind::Softmax)?,
            policy: initial_policy(PolicyKind::Softmax, own_actions),
            config,
            utility,
        })
    }

    pub fn critic(&self) -> &MoQTable {
        &self.q
    }
}

impl Learner for Acom {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Acom
    }

    fn policy(&self) -> &PolicyParams {
        &self.policy
    }

    fn observe(&mut self, e: &Experience) -> Result<()> {
        self.q
            .q_update(QKey::Joint(e.own_action, e.opponent_action), &e.payoff)?;
        self.model.observe(e.opponent_action)
    }

    fn end_episode(&mut self, _rng: &mut dyn RngCore) -> Result<()> {
        if self.model.total() == 0 {
            return Err(invalid("episode contained no interactions"));
        }
        let pi2 = self.model.estimate_policy()?;
        self.model.reset();
        let (_, grad) = acom_objective(&self.policy, &self.q, &pi2, &self.utility)?;
        self.policy.ascend(&grad, self.config.alpha_theta)
    }
}

#[derive(Debug)]
pub struct Acolam {
    config: LearnerConfig,
    policy: PolicyParams,
    q: MoQTable,
    steps: StepModel,
    utility: UtilityFn,
}

impl Acolam {
    pub fn new(
        config: LearnerConfig,
        own_actions: usize,
        opponent_actions: usize,
        objectives: usize,
        utility: UtilityFn,
    ) -> Result<Self> {
        Ok(Acolam {
            q: MoQTable::joint_action(own_actions, opponent_actions, objectives, config.alpha_q)?,
            steps: StepModel::new(&config, opponent_actions, PolicyKind::Softmax)?,
            policy: initial_policy(PolicyKind::Softmax, own_actions),
            config,
            utility,
        })
    }

    pub fn step_model(&self) -> &StepModel {
        &self.steps
    }
}

impl Learner for Acolam {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Acolam
    }

    fn policy(&self) -> &PolicyParams {
        &self.policy
    }

    fn observe(&mut self, e: &Experience) -> Result<()> {
        self.q
            .q_update(QKey::Joint(e.own_action, e.opponent_action), &e.payoff)?;
        self.steps.observe(e.opponent_action)
    }

    fn end_episode(&mut self, _rng: &mut dyn RngCore) -> Result<()> {
        if self.steps.frequencies().total() == 0 {
            return Err(invalid("episode contained no interactions"));
        }
        let estimate = self.steps.close_window(self.policy.theta())?;
        let model = if self.config.lookahead > 0 {
            self.steps.fit()
        } else {
            None
        };
        if model.is_none() && self.config.lookahead > 0 {
            debug!("no step model yet; taking the ACOM step");
        }
        let grad = acolam_gradient(
            &self.policy,
            &self.q,
            &estimate.params,
            model.as_ref(),
            &self.config,
            &self.utility,
        )?;
        self.policy.ascend(&grad, self.config.alpha_theta)
    }
}
