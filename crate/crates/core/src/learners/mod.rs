//! The five learning algorithms and the shared configuration.
//!
//! No-information learners ([`ActorCritic`], [`Acom`], [`Acolam`], [`Lolam`])
//! implement [`Learner`] and only ever see their own action, the opponent's
//! action and their own payoff. The full-information MO-LOLA update lives in
//! [`lola::molola_update`] and needs both agents' parameters and utilities.

pub mod actor_critic;
pub mod dice;
pub mod graph;
pub mod lola;
pub mod step_model;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, invalid};
use crate::game::{Monfg, UtilityFn};
use crate::gp::{DEFAULT_EVIDENCE_ITERS, DEFAULT_NOISE, KernelKind};
use crate::policy::{PolicyKind, PolicyParams};

pub use actor_critic::{Acolam, Acom, ActorCritic};
pub use lola::{Lolam, molola_update};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ac,
    Acom,
    Acolam,
    #[serde(rename = "lola")]
    MoLola,
    Lolam,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ac,
        Algorithm::Acom,
        Algorithm::Acolam,
        Algorithm::MoLola,
        Algorithm::Lolam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ac => "ac",
            Algorithm::Acom => "acom",
            Algorithm::Acolam => "acolam",
            Algorithm::MoLola => "lola",
            Algorithm::Lolam => "lolam",
        }
    }

    /// Needs the opponent's true parameters and utility.
    pub fn full_information(self) -> bool {
        self == Algorithm::MoLola
    }

    /// Maintains an opponent model built from a window of interactions.
    pub fn uses_opponent_model(self) -> bool {
        matches!(self, Algorithm::Acom | Algorithm::Acolam | Algorithm::Lolam)
    }

    pub fn policy_kind(self) -> PolicyKind {
        match self {
            Algorithm::Ac | Algorithm::Acom | Algorithm::Acolam => PolicyKind::Softmax,
            Algorithm::MoLola | Algorithm::Lolam => PolicyKind::Sigmoid,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ac" => Ok(Algorithm::Ac),
            "acom" => Ok(Algorithm::Acom),
            "acolam" => Ok(Algorithm::Acolam),
            "lola" | "molola" | "mo-lola" => Ok(Algorithm::MoLola),
            "lolam" => Ok(Algorithm::Lolam),
            other => Err(invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub alpha_theta: f64,
    pub alpha_q: f64,
    pub alpha_in: f64,
    pub lookahead: usize,
    pub rollout_length: usize,
    pub rollout_batch: usize,
    pub gamma: f64,
    /// Let the outer gradient flow through the GP's dependence on own parameters.
    pub shape_through_gp: bool,
    /// Maximum number of learning-step observations kept for the GP (H).
    pub history: usize,
    /// Interactions per opponent-model window (w).
    pub window: usize,
    pub kernel: KernelKind,
    /// Starting noise variance of the step GP.
    pub gp_noise: f64,
    /// Treat the noise variance as an evidence hyperparameter.
    pub learn_gp_noise: bool,
    pub evidence_iters: usize,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        let (alpha_theta, alpha_q, alpha_in) = match algorithm {
            Algorithm::Ac => (0.05, 0.05, 0.05),
            Algorithm::Acom => (0.05, 1.0, 0.05),
            Algorithm::Acolam => (0.05, 1.0, 0.05),
            Algorithm::MoLola | Algorithm::Lolam => (0.1, 1.0, 0.2),
        };
        LearnerConfig {
            algorithm,
            alpha_theta,
            alpha_q,
            alpha_in,
            lookahead: 1,
            rollout_length: 1,
            rollout_batch: 64,
            gamma: 1.0,
            shape_through_gp: true,
            history: 50,
            window: 100,
            kernel: KernelKind::MultiTask,
            gp_noise: DEFAULT_NOISE,
            learn_gp_noise: false,
            evidence_iters: DEFAULT_EVIDENCE_ITERS,
        }
    }

    pub fn with_lookahead(mut self, lookahead: usize) -> Self {
        self.lookahead = lookahead;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be a nonnegative finite number, got {v}"
                )))
            }
        };
        positive("alpha_theta", self.alpha_theta)?;
        positive("alpha_in", self.alpha_in)?;
        positive("gamma", self.gamma)?;
        positive("gp_noise", self.gp_noise)?;
        if !(self.alpha_q > 0.0 && self.alpha_q <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_q must lie in (0, 1], got {}",
                self.alpha_q
            )));
        }
        if self.rollout_length == 0 || self.rollout_batch == 0 || self.history == 0 || self.window == 0 {
            return Err(Error::InvalidConfig(
                "rollout length, batch, history and window must be positive".into(),
            ));
        }
        if self.algorithm.uses_opponent_model() && self.lookahead > 0 && self.alpha_in == 0.0 {
            return Err(Error::InvalidConfig(
                "alpha_in must be positive when learning steps are estimated".into(),
            ));
        }
        Ok(())
    }
}

/// One interaction as seen by a no-information learner.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub own_action: usize,
    pub opponent_action: usize,
    pub payoff: Vec<f64>,
}

/// A learner that only sees its own interactions. Policies stay frozen
/// between calls to [`Learner::end_episode`].
pub trait Learner: Send + fmt::Debug {
    fn algorithm(&self) -> Algorithm;
    fn policy(&self) -> &PolicyParams;
    fn observe(&mut self, experience: &Experience) -> Result<()>;
    fn end_episode(&mut self, rng: &mut dyn RngCore) -> Result<()>;
}

/// Builds the no-information learner for `agent`. Only the game's shape
/// (action counts, objective count) is read.
pub fn build_learner(
    config: &LearnerConfig,
    game: &Monfg,
    agent: usize,
    utility: UtilityFn,
) -> Result<Box<dyn Learner>> {
    config.validate()?;
    if game.num_agents() != 2 || agent > 1 {
        return Err(invalid("learners support two-agent games only"));
    }
    let own = game.num_actions(agent);
    let opp = game.num_actions(1 - agent);
    let c = game.num_objectives();
    Ok(match config.algorithm {
        Algorithm::Ac => Box::new(ActorCritic::new(config.clone(), own, c, utility)?),
        Algorithm::Acom => Box::new(Acom::new(config.clone(), own, opp, c, utility)?),
        Algorithm::Acolam => Box::new(Acolam::new(config.clone(), own, opp, c, utility)?),
        Algorithm::Lolam => Box::new(Lolam::new(config.clone(), own, opp, c, utility)?),
        Algorithm::MoLola => {
            return Err(Error::InvalidConfig(
                "MO-LOLA needs full information and is driven by molola_update".into(),
            ));
        }
    })
}

/// Policy parameters every learner starts from: the uniform policy.
pub fn initial_policy(kind: PolicyKind, num_actions: usize) -> PolicyParams {
    PolicyParams::uniform(kind, num_actions)
}
