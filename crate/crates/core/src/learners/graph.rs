//! Differentiable scalar expression graph.
//!
//! Nodes are evaluated eagerly when created. [`Graph::grad`] performs reverse
//! accumulation by appending new nodes to the same graph, so a gradient is
//! itself an expression and can be differentiated again. This is what lets
//! the DiCE objectives produce second-order terms through an opponent's
//! anticipated update.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    StopGradient,
    Sum(Vec<NodeId>),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: f64,
    /// Whether any parameter reaches this node through differentiable edges.
    live: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn stable_softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value
    }

    pub fn values(&self, ids: &[NodeId]) -> Vec<f64> {
        ids.iter().map(|&id| self.value(id)).collect()
    }

    fn push(&mut self, op: Op, value: f64) -> NodeId {
        let live = match &op {
            Op::Const | Op::StopGradient => false,
            Op::Param => true,
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                self.nodes[a.0].live || self.nodes[b.0].live
            }
            Op::Neg(a) | Op::Exp(a) | Op::Ln(a) | Op::Sigmoid(a) | Op::Softplus(a) => self.nodes[a.0].live,
            Op::Sum(xs) => xs.iter().any(|x| self.nodes[x.0].live),
        };
        self.nodes.push(Node { op, value, live });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.push(Op::Const, value)
    }

    /// A differentiable leaf.
    pub fn param(&mut self, value: f64) -> NodeId {
        self.push(Op::Param, value)
    }

    pub fn params(&mut self, values: &[f64]) -> Vec<NodeId> {
        values.iter().map(|&v| self.param(v)).collect()
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) - self.value(b);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) * self.value(b);
        self.push(Op::Mul(a, b), v)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) / self.value(b);
        self.push(Op::Div(a, b), v)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = -self.value(a);
        self.push(Op::Neg(a), v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).exp();
        self.push(Op::Exp(a), v)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).ln();
        self.push(Op::Ln(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = stable_sigmoid(self.value(a));
        self.push(Op::Sigmoid(a), v)
    }

    /// `ln(1 + e^a)`.
    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let v = stable_softplus(self.value(a));
        self.push(Op::Softplus(a), v)
    }

    /// Passes the value through and blocks every derivative.
    pub fn stop_gradient(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        self.push(Op::StopGradient, v)
    }

    pub fn sum(&mut self, xs: &[NodeId]) -> NodeId {
        match xs {
            [] => self.constant(0.0),
            [x] => *x,
            _ => {
                let v = xs.iter().map(|&x| self.value(x)).sum();
                self.push(Op::Sum(xs.to_vec()), v)
            }
        }
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let k = self.constant(c);
        self.mul(a, k)
    }

    /// The DiCE magic box `exp(τ − ⊥(τ))` with `τ` the sum of the given
    /// log-probabilities. Its value is exactly one; its derivatives
    /// reproduce score-function estimators of any order.
    pub fn magic_box(&mut self, log_probs: &[NodeId]) -> NodeId {
        let tau = self.sum(log_probs);
        let frozen = self.stop_gradient(tau);
        let diff = self.sub(tau, frozen);
        self.exp(diff)
    }

    /// Reverse-mode derivative of `output` with respect to each node in `wrt`,
    /// returned as new nodes of this graph.
    pub fn grad(&mut self, output: NodeId, wrt: &[NodeId]) -> Vec<NodeId> {
        let mut adj: Vec<Option<NodeId>> = vec![None; output.0 + 1];
        if self.nodes[output.0].live {
            adj[output.0] = Some(self.constant(1.0));
        }
        for i in (0..=output.0).rev() {
            let Some(g) = adj[i] else { continue };
            let node = NodeId(i);
            let op = self.nodes[i].op.clone();
            match op {
                Op::Const | Op::Param | Op::StopGradient => {}
                Op::Add(a, b) => {
                    self.accumulate(&mut adj, a, g);
                    self.accumulate(&mut adj, b, g);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut adj, a, g);
                    if self.nodes[b.0].live {
                        let d = self.neg(g);
                        self.accumulate(&mut adj, b, d);
                    }
                }
                Op::Mul(a, b) => {
                    if self.nodes[a.0].live {
                        let d = self.mul(g, b);
                        self.accumulate(&mut adj, a, d);
                    }
                    if self.nodes[b.0].live {
                        let d = self.mul(g, a);
                        self.accumulate(&mut adj, b, d);
                    }
                }
                Op::Div(a, b) => {
                    if self.nodes[a.0].live {
                        let d = self.div(g, b);
                        self.accumulate(&mut adj, a, d);
                    }
                    if self.nodes[b.0].live {
                        let q = self.div(node, b);
                        let gq = self.mul(g, q);
                        let d = self.neg(gq);
                        self.accumulate(&mut adj, b, d);
                    }
                }
                Op::Neg(a) => {
                    if self.nodes[a.0].live {
                        let d = self.neg(g);
                        self.accumulate(&mut adj, a, d);
                    }
                }
                Op::Exp(a) => {
                    if self.nodes[a.0].live {
                        let d = self.mul(g, node);
                        self.accumulate(&mut adj, a, d);
                    }
                }
                Op::Ln(a) => {
                    if self.nodes[a.0].live {
                        let d = self.div(g, a);
                        self.accumulate(&mut adj, a, d);
                    }
                }
                Op::Sigmoid(a) => {
                    if self.nodes[a.0].live {
                        let one = self.constant(1.0);
                        let rest = self.sub(one, node);
                        let slope = self.mul(node, rest);
                        let d = self.mul(g, slope);
                        self.accumulate(&mut adj, a, d);
                    }
                }
                Op::Softplus(a) => {
                    if self.nodes[a.0].live {
                        let s = self.sigmoid(a);
                        let d = self.mul(g, s);
                        self.accumulate(&mut adj, a, d);
                    }
                }
                Op::Sum(xs) => {
                    for x in xs {
                        self.accumulate(&mut adj, x, g);
                    }
                }
            }
        }
        wrt.iter()
            .map(|w| match adj.get(w.0).copied().flatten() {
                Some(g) => g,
                None => self.constant(0.0),
            })
            .collect()
    }

    fn accumulate(&mut self, adj: &mut [Option<NodeId>], target: NodeId, d: NodeId) {
        if !self.nodes[target.0].live {
            return;
        }
        adj[target.0] = Some(match adj[target.0] {
            None => d,
            Some(prev) => self.add(prev, d),
        });
    }
}
