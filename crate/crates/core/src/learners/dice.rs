//! Rollout batches and DiCE surrogate objectives for two-agent MONFGs.
//!
//! Everything is written from the perspective of the learning agent: index 0
//! of a joint action is the agent's own action, index 1 the opponent's.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result, invalid};
use crate::game::UtilityFn;
use crate::learners::graph::{Graph, NodeId};
use crate::policy::sample_index;

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutStep {
    /// `[own, opponent]`.
    pub actions: [usize; 2],
    pub payoff: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
}

/// Weighted trajectories; weights sum to one. Sampled batches merge
/// identical trajectories and weight them by their empirical frequency, which
/// leaves the estimator unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBatch {
    pub rollouts: Vec<(Rollout, f64)>,
    pub num_samples: usize,
}

impl RolloutBatch {
    /// Weighted mean of `Σ_k γᵏ pᵏ`.
    pub fn mean_return(&self, gamma: f64) -> Vec<f64> {
        let c = self.rollouts[0].0.steps[0].payoff.len();
        let mut out = vec![0.0; c];
        for (r, w) in &self.rollouts {
            let mut disc = 1.0;
            for s in &r.steps {
                for (o, p) in out.iter_mut().zip(&s.payoff) {
                    *o += w * disc * p;
                }
                disc *= gamma;
            }
        }
        out
    }
}

/// Draws `batch` trajectories of `length` simultaneous plays.
pub fn sample_batch<R, F>(
    own: &[f64],
    opponent: &[f64],
    length: usize,
    batch: usize,
    payoff: F,
    rng: &mut R,
) -> Result<RolloutBatch>
where
    R: Rng + ?Sized,
    F: Fn(usize, usize) -> Vec<f64>,
{
    if length == 0 || batch == 0 {
        return Err(invalid("rollouts need a positive length and batch size"));
    }
    let mut counts: BTreeMap<Vec<[usize; 2]>, usize> = BTreeMap::new();
    for _ in 0..batch {
        let traj: Vec<[usize; 2]> = (0..length)
            .map(|_| [sample_index(own, rng), sample_index(opponent, rng)])
            .collect();
        *counts.entry(traj).or_default() += 1;
    }
    let rollouts = counts
        .into_iter()
        .map(|(traj, n)| (make_rollout(&traj, &payoff), n as f64 / batch as f64))
        .collect();
    Ok(RolloutBatch {
        rollouts,
        num_samples: batch,
    })
}

/// Every single-step joint action weighted by its probability. The resulting
/// objective has the exact expectation and exact derivatives.
pub fn exact_batch<F>(own: &[f64], opponent: &[f64], payoff: F) -> RolloutBatch
where
    F: Fn(usize, usize) -> Vec<f64>,
{
    let mut rollouts = Vec::with_capacity(own.len() * opponent.len());
    for (a, pa) in own.iter().enumerate() {
        for (b, pb) in opponent.iter().enumerate() {
            rollouts.push((make_rollout(&[[a, b]], &payoff), pa * pb));
        }
    }
    RolloutBatch {
        rollouts,
        num_samples: 0,
    }
}

fn make_rollout<F: Fn(usize, usize) -> Vec<f64>>(traj: &[[usize; 2]], payoff: &F) -> Rollout {
    Rollout {
        steps: traj
            .iter()
            .map(|&[a, b]| RolloutStep {
                actions: [a, b],
                payoff: payoff(a, b),
            })
            .collect(),
    }
}

/// `u(Σ_traj w Σ_k γᵏ □(a^{≤k}) pᵏ)` where the magic box covers the sampled
/// actions of both agents up to step `k`. `own_logp` and `opp_logp` hold the
/// log-probability expression of every action.
pub fn dice_objective(
    graph: &mut Graph,
    batch: &RolloutBatch,
    own_logp: &[NodeId],
    opp_logp: &[NodeId],
    u: &UtilityFn,
    gamma: f64,
) -> Result<NodeId> {
    let c = batch
        .rollouts
        .first()
        .and_then(|(r, _)| r.steps.first())
        .map(|s| s.payoff.len())
        .ok_or_else(|| invalid("rollout batch is empty"))?;
    let mut terms: Vec<Vec<NodeId>> = vec![Vec::new(); c];
    for (rollout, w) in &batch.rollouts {
        let mut taus = Vec::new();
        let mut disc = *w;
        for step in &rollout.steps {
            let [a, b] = step.actions;
            let (la, lb) = (
                *own_logp.get(a).ok_or_else(|| invalid("own action out of range"))?,
                *opp_logp.get(b).ok_or_else(|| invalid("opponent action out of range"))?,
            );
            taus.push(la);
            taus.push(lb);
            let mb = graph.magic_box(&taus);
            for (t, p) in terms.iter_mut().zip(&step.payoff) {
                if *p != 0.0 {
                    t.push(graph.scale(mb, disc * p));
                }
            }
            disc *= gamma;
        }
    }
    let v: Vec<NodeId> = terms
        .iter()
        .map(|t| {
            if t.is_empty() {
                graph.constant(0.0)
            } else {
                graph.sum(t)
            }
        })
        .collect();
    Ok(u.build(graph, &v))
}

/// First-order gradient (one node per parameter) or, for order 2, the
/// row-major Hessian obtained by differentiating the gradient expressions.
pub fn dice_gradient(graph: &mut Graph, objective: NodeId, wrt: &[NodeId], order: usize) -> Result<Vec<NodeId>> {
    match order {
        1 => Ok(graph.grad(objective, wrt)),
        2 => {
            let first = graph.grad(objective, wrt);
            let mut out = Vec::with_capacity(wrt.len() * wrt.len());
            for g in first {
                out.extend(graph.grad(g, wrt));
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!("derivatives of order {order}"))),
    }
}
