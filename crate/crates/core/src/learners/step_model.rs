//! Opponent-learning-step model shared by the lookahead learners: window
//! frequencies become parameter estimates, successive estimates become step
//! observations, and a GP over those observations predicts future steps.

use log::warn;
use nalgebra::DMatrix;

use crate::error::Result;
use crate::gp::{GpModel, Kernel, KernelKind, fit};
use crate::opponent::{FrequencyModel, StepHistory, estimate_step};
use crate::policy::{PolicyKind, PolicyParams};

use super::LearnerConfig;

#[derive(Clone, Debug)]
pub struct StepModel {
    frequencies: FrequencyModel,
    history: StepHistory,
    alpha_in: f64,
    /// Own parameters and opponent estimate at the previous window close.
    last: Option<(Vec<f64>, Vec<f64>)>,
    kind: KernelKind,
    noise: f64,
    learn_noise: bool,
    evidence_iters: usize,
    /// Kernel carried over from the previous fit; `noise` is carried over
    /// too when it is learned.
    kernel: Option<Kernel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowEstimate {
    pub probabilities: Vec<f64>,
    pub params: PolicyParams,
}

impl StepModel {
    pub fn new(config: &LearnerConfig, opponent_actions: usize, assumed: PolicyKind) -> Result<Self> {
        Ok(StepModel {
            frequencies: FrequencyModel::new(opponent_actions, config.window, assumed)?,
            history: StepHistory::new(config.history),
            alpha_in: config.alpha_in,
            last: None,
            kind: config.kernel,
            noise: config.gp_noise,
            learn_noise: config.learn_gp_noise,
            evidence_iters: config.evidence_iters,
            kernel: None,
        })
    }

    pub fn observe(&mut self, opponent_action: usize) -> Result<()> {
        self.frequencies.observe(opponent_action)
    }

    pub fn history(&self) -> &StepHistory {
        &self.history
    }

    pub fn frequencies(&self) -> &FrequencyModel {
        &self.frequencies
    }

    /// Estimates the opponent from the finished window, records the step
    /// since the previous window (paired with the own parameters in force
    /// then), and starts a new window.
    pub fn close_window(&mut self, own_theta: &[f64]) -> Result<WindowEstimate> {
        let probabilities = self.frequencies.estimate_policy()?;
        let params = self.frequencies.estimate_params()?;
        if let Some((own_prev, hat_prev)) = self.last.take() {
            let step = estimate_step(&hat_prev, params.theta(), self.alpha_in)?;
            self.history.push(own_prev, hat_prev, step)?;
        }
        self.last = Some((own_theta.to_vec(), params.theta().to_vec()));
        self.frequencies.reset();
        Ok(WindowEstimate { probabilities, params })
    }

    /// GP over the recorded steps, or `None` while fewer than two steps are
    /// known or when fitting fails.
    pub fn fit(&mut self) -> Option<GpModel> {
        if self.history.len() < 2 {
            return None;
        }
        match self.try_fit() {
            Ok(model) => {
                self.kernel = Some(model.kernel().clone());
                self.noise = model.noise();
                Some(model)
            }
            Err(e) => {
                warn!("opponent step model unavailable this episode: {e}");
                None
            }
        }
    }

    fn try_fit(&self) -> Result<GpModel> {
        let inputs = self.history.inputs();
        let targets = self.history.targets();
        let kernel = match &self.kernel {
            Some(k) => k.clone(),
            None => Kernel::default_for(self.kind, inputs[0].len(), targets[0].len())?,
        };
        let model = fit(kernel, self.noise, &inputs, &targets)?;
        if self.learn_noise {
            model.optimize_evidence_with_noise(self.evidence_iters)
        } else {
            model.optimize_evidence(self.evidence_iters)
        }
    }
}

/// Advances the opponent estimate `lookahead` times along the GP posterior
/// mean, `θ′₂ ← θ′₂ + α_in μ(θ₁, θ′₂)`, and returns the final `θ′₂` together
/// with its Jacobian w.r.t. `θ₁`.
pub fn gp_lookahead(
    model: &GpModel,
    own_theta: &[f64],
    opponent_theta: &[f64],
    lookahead: usize,
    alpha_in: f64,
) -> (Vec<f64>, DMatrix<f64>) {
    let d1 = own_theta.len();
    let t = opponent_theta.len();
    let mut theta2 = opponent_theta.to_vec();
    let mut jac = DMatrix::zeros(t, d1);
    for _ in 0..lookahead {
        let x: Vec<f64> = own_theta.iter().chain(&theta2).copied().collect();
        let mean = model.posterior_mean(&x);
        let g = model.posterior_mean_input_gradient(&x);
        let g1 = g.columns(0, d1);
        let g2 = g.columns(d1, t);
        jac = &jac + (g1 + g2 * &jac) * alpha_in;
        for (th, m) in theta2.iter_mut().zip(&mean) {
            *th += alpha_in * m;
        }
    }
    (theta2, jac)
}
