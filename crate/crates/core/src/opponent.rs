//! Opponent policy reconstruction from action frequencies and estimation of
//! the opponent's learning step.

use std::collections::VecDeque;

use crate::error::{Error, Result, invalid};
use crate::policy::{PolicyKind, PolicyParams};

/// Pseudo-count added to every action when some action was never observed.
pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// Counts of the opponent's actions within the current estimation window.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyModel {
    window: usize,
    counts: Vec<usize>,
    assumed_kind: PolicyKind,
    smoothing: f64,
}

impl FrequencyModel {
    pub fn new(num_actions: usize, window: usize, assumed_kind: PolicyKind) -> Result<Self> {
        if window == 0 {
            return Err(invalid("window must hold at least one interaction"));
        }
        if num_actions < 2 {
            return Err(invalid("opponent needs at least two actions"));
        }
        Ok(FrequencyModel {
            window,
            counts: vec![0; num_actions],
            assumed_kind,
            smoothing: DEFAULT_SMOOTHING,
        })
    }

    pub fn with_smoothing(mut self, smoothing: f64) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn assumed_kind(&self) -> PolicyKind {
        self.assumed_kind
    }

    pub fn observe(&mut self, opponent_action: usize) -> Result<()> {
        if self.total() >= self.window {
            return Err(invalid(format!("window of {} interactions is full", self.window)));
        }
        *self
            .counts
            .get_mut(opponent_action)
            .ok_or_else(|| invalid(format!("opponent action {opponent_action} out of range")))? += 1;
        Ok(())
    }

    /// Starts a new estimation window.
    pub fn reset(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
    }

    /// Empirical action distribution of the current window. When an action
    /// has not been seen every count receives the smoothing pseudo-count.
    pub fn estimate_policy(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyWindow);
        }
        let eps = if self.counts.contains(&0) { self.smoothing } else { 0.0 };
        let denom = total as f64 + eps * self.counts.len() as f64;
        Ok(self.counts.iter().map(|&c| (c as f64 + eps) / denom).collect())
    }

    /// Estimated opponent parameters under the assumed parameterisation.
    pub fn estimate_params(&self) -> Result<PolicyParams> {
        invert_to_params(&self.estimate_policy()?, self.assumed_kind)
    }
}

/// Recovers policy parameters reproducing `probs`.
pub fn invert_to_params(probs: &[f64], kind: PolicyKind) -> Result<PolicyParams> {
    PolicyParams::from_probabilities(probs, kind)
}

/// `Δ̂ = (θ̂ₜ₊₁ − θ̂ₜ) / α_in`.
pub fn estimate_step(previous: &[f64], next: &[f64], alpha_in: f64) -> Result<Vec<f64>> {
    if !(alpha_in > 0.0) {
        return Err(invalid(format!("alpha_in must be positive, got {alpha_in}")));
    }
    if previous.len() != next.len() {
        return Err(invalid("parameter vectors differ in length"));
    }
    Ok(previous.iter().zip(next).map(|(p, n)| (n - p) / alpha_in).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSample {
    pub own_theta: Vec<f64>,
    pub opponent_theta: Vec<f64>,
    pub step: Vec<f64>,
}

impl StepSample {
    /// GP input: own parameters followed by the estimated opponent parameters.
    pub fn input(&self) -> Vec<f64> {
        self.own_theta.iter().chain(&self.opponent_theta).copied().collect()
    }
}

/// The most recent `capacity` learning-step observations, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct StepHistory {
    capacity: usize,
    entries: VecDeque<StepSample>,
}

impl StepHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        StepHistory {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, own_theta: Vec<f64>, opponent_theta: Vec<f64>, step: Vec<f64>) -> Result<()> {
        if step.len() != opponent_theta.len() {
            return Err(invalid("step and opponent parameters differ in length"));
        }
        if let Some(first) = self.entries.front()
            && (first.own_theta.len() != own_theta.len() || first.opponent_theta.len() != opponent_theta.len())
        {
            return Err(invalid("history entry shape changed"));
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(StepSample {
            own_theta,
            opponent_theta,
            step,
        });
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = &StepSample> {
        self.entries.iter()
    }

    /// Training inputs ⟨θ₁, θ̂₂⟩.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(StepSample::input).collect()
    }

    /// Training targets Δ̂₂.
    pub fn targets(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.step.clone()).collect()
    }
}
