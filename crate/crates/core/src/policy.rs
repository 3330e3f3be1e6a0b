//! Parameterised categorical policies.
//!
//! Two parameterisations are supported. `Softmax` keeps one logit per action.
//! `Sigmoid` is a stick-breaking chain with one parameter per cut:
//! `P(a₁) = σ(θ₁)`, `P(a₂) = (1 − σ(θ₁))σ(θ₂)`, ..., and the last action
//! takes the remaining mass. With two actions it is a plain sigmoid.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, invalid};
use crate::learners::graph::{Graph, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Softmax,
    Sigmoid,
}

impl PolicyKind {
    /// Number of parameters needed for `num_actions` actions.
    pub fn param_len(self, num_actions: usize) -> usize {
        match self {
            PolicyKind::Softmax => num_actions,
            PolicyKind::Sigmoid => num_actions - 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    kind: PolicyKind,
    theta: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_finite(theta: &[f64]) -> Result<()> {
    if theta.iter().all(|t| t.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericDomain(format!("non-finite policy parameters {theta:?}")))
    }
}

impl PolicyParams {
    pub fn new(kind: PolicyKind, theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(invalid("policy needs at least one parameter"));
        }
        check_finite(&theta)?;
        Ok(PolicyParams { kind, theta })
    }

    pub fn zeros(kind: PolicyKind, num_actions: usize) -> Self {
        assert!(num_actions >= 2, "policies need at least two actions");
        PolicyParams {
            kind,
            theta: vec![0.0; kind.param_len(num_actions)],
        }
    }

    /// Parameters of the uniform policy. For stick-breaking chains with more
    /// than two actions these are not all zero.
    pub fn uniform(kind: PolicyKind, num_actions: usize) -> Self {
        Self::from_probabilities(&vec![1.0 / num_actions as f64; num_actions], kind)
            .expect("uniform distribution is strictly positive")
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn num_actions(&self) -> usize {
        match self.kind {
            PolicyKind::Softmax => self.theta.len(),
            PolicyKind::Sigmoid => self.theta.len() + 1,
        }
    }

    /// Replaces the parameters, rejecting non-finite values.
    pub fn set_theta(&mut self, theta: Vec<f64>) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(invalid("parameter length changed"));
        }
        check_finite(&theta)?;
        self.theta = theta;
        Ok(())
    }

    /// `θ ← θ + step · direction`.
    pub fn ascend(&mut self, direction: &[f64], step: f64) -> Result<()> {
        let next = self.theta.iter().zip(direction).map(|(t, d)| t + step * d).collect();
        self.set_theta(next)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        match self.kind {
            PolicyKind::Softmax => {
                let m = self.theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = self.theta.iter().map(|t| (t - m).exp()).collect();
                let z: f64 = e.iter().sum();
                e.into_iter().map(|x| x / z).collect()
            }
            PolicyKind::Sigmoid => {
                let mut probs = Vec::with_capacity(self.num_actions());
                let mut remaining = 1.0;
                for &t in &self.theta {
                    let s = sigmoid(t);
                    probs.push(remaining * s);
                    remaining *= 1.0 - s;
                }
                probs.push(remaining);
                probs
            }
        }
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probabilities(), rng)
    }

    /// `∇_θ log π(action | θ)`.
    pub fn grad_log_prob(&self, action: usize) -> Vec<f64> {
        match self.kind {
            PolicyKind::Softmax => {
                let mut g: Vec<f64> = self.probabilities().into_iter().map(|p| -p).collect();
                g[action] += 1.0;
                g
            }
            PolicyKind::Sigmoid => self
                .theta
                .iter()
                .enumerate()
                .map(|(k, &t)| match k.cmp(&action) {
                    std::cmp::Ordering::Less => -sigmoid(t),
                    std::cmp::Ordering::Equal => 1.0 - sigmoid(t),
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect(),
        }
    }

    /// Jacobian `∂π(a)/∂θ_k`, one row per action.
    pub fn grad_probabilities(&self) -> Vec<Vec<f64>> {
        let probs = self.probabilities();
        match self.kind {
            PolicyKind::Softmax => (0..probs.len())
                .map(|a| {
                    probs
                        .iter()
                        .enumerate()
                        .map(|(k, &pk)| probs[a] * (if a == k { 1.0 } else { 0.0 } - pk))
                        .collect()
                })
                .collect(),
            PolicyKind::Sigmoid => probs
                .iter()
                .enumerate()
                .map(|(a, &pa)| self.grad_log_prob(a).into_iter().map(|g| pa * g).collect())
                .collect(),
        }
    }

    /// Inverse of [`PolicyParams::probabilities`]. Softmax parameters are
    /// centred to zero mean; stick-breaking parameters are the logits of the
    /// conditional stick probabilities.
    pub fn from_probabilities(probs: &[f64], kind: PolicyKind) -> Result<Self> {
        if probs.len() < 2 {
            return Err(invalid("need at least two action probabilities"));
        }
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(invalid(format!(
                "probabilities must be strictly positive to invert: {probs:?}"
            )));
        }
        let theta = match kind {
            PolicyKind::Softmax => {
                let logs: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
                let mean = logs.iter().sum::<f64>() / logs.len() as f64;
                logs.into_iter().map(|l| l - mean).collect()
            }
            PolicyKind::Sigmoid => (0..probs.len() - 1)
                .map(|k| {
                    let rest: f64 = probs[k + 1..].iter().sum();
                    (probs[k] / rest).ln()
                })
                .collect(),
        };
        PolicyParams::new(kind, theta)
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let r: f64 = rng.r#gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    // Rounding left a sliver above the cumulative sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Log-probability of every action as graph expressions of `theta`.
pub fn log_prob_exprs(graph: &mut Graph, kind: PolicyKind, theta: &[NodeId]) -> Vec<NodeId> {
    match kind {
        PolicyKind::Softmax => {
            let m = theta.iter().map(|&t| graph.value(t)).fold(f64::NEG_INFINITY, f64::max);
            let shift = graph.constant(m);
            let exps: Vec<NodeId> = theta
                .iter()
                .map(|&t| {
                    let d = graph.sub(t, shift);
                    graph.exp(d)
                })
                .collect();
            let z = graph.sum(&exps);
            let log_z = graph.ln(z);
            let lse = graph.add(log_z, shift);
            theta.iter().map(|&t| graph.sub(t, lse)).collect()
        }
        PolicyKind::Sigmoid => {
            let mut out = Vec::with_capacity(theta.len() + 1);
            let mut prefix: Option<NodeId> = None;
            for &t in theta {
                // ln σ(t) = −softplus(−t); ln(1 − σ(t)) = −softplus(t)
                let neg_t = graph.neg(t);
                let sp = graph.softplus(neg_t);
                let log_s = graph.neg(sp);
                out.push(match prefix {
                    Some(p) => graph.add(p, log_s),
                    None => log_s,
                });
                let sp_pos = graph.softplus(t);
                let log_rest = graph.neg(sp_pos);
                prefix = Some(match prefix {
                    Some(p) => graph.add(p, log_rest),
                    None => log_rest,
                });
            }
            out.push(prefix.expect("at least one parameter"));
            out
        }
    }
}
