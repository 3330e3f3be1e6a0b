use std::fmt;
use std::sync::Arc;

use crate::learners::graph::{Graph, NodeId};

/// A monotonically increasing utility over payoff vectors.
///
/// Implementations supply the value, its gradient, and a differentiable
/// expression so the utility can sit at the top of a DiCE objective.
pub trait Utility: Send + Sync + fmt::Debug {
    fn eval(&self, payoff: &[f64]) -> f64;
    fn grad(&self, payoff: &[f64]) -> Vec<f64>;
    fn build(&self, graph: &mut Graph, payoff: &[NodeId]) -> NodeId;
}

#[derive(Clone, Debug)]
pub enum UtilityFn {
    /// `u(p) = Σ p_c²`, the row player's utility.
    SumOfSquares,
    /// `u(p) = Π p_c`, the column player's utility.
    Product,
    Custom(Arc<dyn Utility>),
}

impl UtilityFn {
    /// The utility assigned to `agent` in the benchmark experiments.
    pub fn for_agent(agent: usize) -> UtilityFn {
        if agent == 0 {
            UtilityFn::SumOfSquares
        } else {
            UtilityFn::Product
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            UtilityFn::SumOfSquares => p.iter().map(|x| x * x).sum(),
            UtilityFn::Product => p.iter().product(),
            UtilityFn::Custom(u) => u.eval(p),
        }
    }

    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        match self {
            UtilityFn::SumOfSquares => p.iter().map(|x| 2.0 * x).collect(),
            UtilityFn::Product => (0..p.len())
                .map(|c| p.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, x)| x).product())
                .collect(),
            UtilityFn::Custom(u) => u.grad(p),
        }
    }

    pub fn build(&self, graph: &mut Graph, p: &[NodeId]) -> NodeId {
        match self {
            UtilityFn::SumOfSquares => {
                let squares: Vec<NodeId> = p.iter().map(|&x| graph.mul(x, x)).collect();
                graph.sum(&squares)
            }
            UtilityFn::Product => {
                let mut acc = p[0];
                for &x in &p[1..] {
                    acc = graph.mul(acc, x);
                }
                acc
            }
            UtilityFn::Custom(u) => u.build(graph, p),
        }
    }
}

/// `u(p) = Σ w_c p_c` with nonnegative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearUtility {
    weights: Vec<f64>,
}

impl LinearUtility {
    pub fn new(weights: Vec<f64>) -> crate::Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(crate::error::invalid(
                "linear utility weights must be finite and nonnegative",
            ));
        }
        Ok(LinearUtility { weights })
    }

    pub fn into_utility(self) -> UtilityFn {
        UtilityFn::Custom(Arc::new(self))
    }
}

impl Utility for LinearUtility {
    fn eval(&self, payoff: &[f64]) -> f64 {
        self.weights.iter().zip(payoff).map(|(w, p)| w * p).sum()
    }

    fn grad(&self, _payoff: &[f64]) -> Vec<f64> {
        self.weights.clone()
    }

    fn build(&self, graph: &mut Graph, payoff: &[NodeId]) -> NodeId {
        let terms: Vec<NodeId> = self
            .weights
            .iter()
            .zip(payoff)
            .map(|(&w, &p)| graph.scale(p, w))
            .collect();
        graph.sum(&terms)
    }
}
