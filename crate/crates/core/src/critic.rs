//! Multi-objective action-value tables with the stateless Q-update.

use crate::error::{Result, invalid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QScope {
    /// One vector per own action.
    OwnAction,
    /// One vector per (own action, opponent action) pair.
    JointAction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QKey {
    Own(usize),
    Joint(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoQTable {
    scope: QScope,
    own_actions: usize,
    opponent_actions: usize,
    num_objectives: usize,
    alpha_q: f64,
    values: Vec<Vec<f64>>,
}

impl MoQTable {
    pub fn own_action(num_actions: usize, num_objectives: usize, alpha_q: f64) -> Result<Self> {
        Self::build(QScope::OwnAction, num_actions, 1, num_objectives, alpha_q)
    }

    pub fn joint_action(
        own_actions: usize,
        opponent_actions: usize,
        num_objectives: usize,
        alpha_q: f64,
    ) -> Result<Self> {
        Self::build(
            QScope::JointAction,
            own_actions,
            opponent_actions,
            num_objectives,
            alpha_q,
        )
    }

    fn build(
        scope: QScope,
        own_actions: usize,
        opponent_actions: usize,
        num_objectives: usize,
        alpha_q: f64,
    ) -> Result<Self> {
        if !(alpha_q > 0.0 && alpha_q <= 1.0) {
            return Err(invalid(format!("alpha_q must lie in (0, 1], got {alpha_q}")));
        }
        Ok(MoQTable {
            scope,
            own_actions,
            opponent_actions,
            num_objectives,
            alpha_q,
            values: vec![vec![0.0; num_objectives]; own_actions * opponent_actions],
        })
    }

    pub fn scope(&self) -> QScope {
        self.scope
    }

    pub fn alpha_q(&self) -> f64 {
        self.alpha_q
    }

    fn slot(&self, key: QKey) -> Result<usize> {
        match (self.scope, key) {
            (QScope::OwnAction, QKey::Own(a)) if a < self.own_actions => Ok(a),
            (QScope::JointAction, QKey::Joint(a, b)) if a < self.own_actions && b < self.opponent_actions => {
                Ok(a * self.opponent_actions + b)
            }
            _ => Err(invalid(format!("key {key:?} does not fit a {:?} table", self.scope))),
        }
    }

    pub fn get(&self, key: QKey) -> Result<&[f64]> {
        Ok(&self.values[self.slot(key)?])
    }

    /// `Q(key) ← Q(key) + α_Q (p − Q(key))`.
    pub fn q_update(&mut self, key: QKey, payoff: &[f64]) -> Result<()> {
        if payoff.len() != self.num_objectives {
            return Err(invalid(format!(
                "payoff has {} components, table stores {}",
                payoff.len(),
                self.num_objectives
            )));
        }
        let slot = self.slot(key)?;
        let alpha = self.alpha_q;
        for (q, p) in self.values[slot].iter_mut().zip(payoff) {
            *q += alpha * (p - *q);
        }
        Ok(())
    }

    /// Σ_a π₁(a) Q(a) for marginal tables, Σ_a Σ_b π₁(a) π₂(b) Q(a, b) for
    /// joint tables.
    pub fn expected_return_estimate(&self, own: &[f64], opponent: Option<&[f64]>) -> Result<Vec<f64>> {
        if own.len() != self.own_actions {
            return Err(invalid("own policy length does not match the table"));
        }
        let mut out = vec![0.0; self.num_objectives];
        match (self.scope, opponent) {
            (QScope::OwnAction, None) => {
                for (p, q) in own.iter().zip(&self.values) {
                    for (o, v) in out.iter_mut().zip(q) {
                        *o += p * v;
                    }
                }
            }
            (QScope::JointAction, Some(opp)) => {
                if opp.len() != self.opponent_actions {
                    return Err(invalid("opponent policy length does not match the table"));
                }
                for (a, pa) in own.iter().enumerate() {
                    for (b, pb) in opp.iter().enumerate() {
                        let w = pa * pb;
                        for (o, v) in out.iter_mut().zip(&self.values[a * self.opponent_actions + b]) {
                            *o += w * v;
                        }
                    }
                }
            }
            (scope, _) => {
                return Err(invalid(format!(
                    "{scope:?} table needs {} opponent policy",
                    if scope == QScope::OwnAction { "no" } else { "an" }
                )));
            }
        }
        Ok(out)
    }

    /// Row `a` of a joint table marginalised over the opponent policy, i.e.
    /// `Σ_b π₂(b) Q(a, b)` for every own action `a`.
    pub(crate) fn rows_against(&self, opp: &[f64]) -> Vec<Vec<f64>> {
        (0..self.own_actions)
            .map(|a| {
                let mut v = vec![0.0; self.num_objectives];
                for (b, pb) in opp.iter().enumerate() {
                    for (o, q) in v.iter_mut().zip(&self.values[a * self.opponent_actions + b]) {
                        *o += pb * q;
                    }
                }
                v
            })
            .collect()
    }

    /// Column `b` of a joint table marginalised over the own policy.
    pub(crate) fn columns_against(&self, own: &[f64]) -> Vec<Vec<f64>> {
        (0..self.opponent_actions)
            .map(|b| {
                let mut v = vec![0.0; self.num_objectives];
                for (a, pa) in own.iter().enumerate() {
                    for (o, q) in v.iter_mut().zip(&self.values[a * self.opponent_actions + b]) {
                        *o += pa * q;
                    }
                }
                v
            })
            .collect()
    }
}
