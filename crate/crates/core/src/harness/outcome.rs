use serde::{Deserialize, Serialize};

use crate::error::{Result, invalid};

/// Relative frequencies of joint actions, `matrix[a1][a2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub matrix: Vec<Vec<f64>>,
    /// First and last episode (0-based, inclusive) of the window.
    pub window: [usize; 2],
    pub trials: usize,
}

impl OutcomeDistribution {
    /// A distribution not tied to any run, e.g. a reference outcome.
    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self> {
        if matrix.is_empty() || matrix[0].is_empty() || matrix.iter().any(|r| r.len() != matrix[0].len()) {
            return Err(invalid("outcome matrix must be a nonempty rectangle"));
        }
        if matrix.iter().flatten().any(|v| !(*v >= 0.0)) {
            return Err(invalid("outcome frequencies must be nonnegative"));
        }
        let total: f64 = matrix.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("outcome frequencies sum to {total}")));
        }
        Ok(OutcomeDistribution {
            matrix,
            window: [0, 0],
            trials: 0,
        })
    }

    pub fn point_mass(rows: usize, cols: usize, a1: usize, a2: usize) -> Self {
        let mut matrix = vec![vec![0.0; cols]; rows];
        matrix[a1][a2] = 1.0;
        OutcomeDistribution {
            matrix,
            window: [0, 0],
            trials: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.matrix.len(), self.matrix.first().map_or(0, Vec::len))
    }

    pub fn get(&self, a1: usize, a2: usize) -> f64 {
        self.matrix[a1][a2]
    }

    /// Marginal action frequencies of agent `agent`.
    pub fn marginal(&self, agent: usize) -> Vec<f64> {
        let (r, c) = self.shape();
        if agent == 0 {
            self.matrix.iter().map(|row| row.iter().sum()).collect()
        } else {
            (0..c).map(|j| (0..r).map(|i| self.matrix[i][j]).sum()).collect()
        }
    }
}

/// A recorded joint action.
pub type JointAction = (u16, u16);

/// Joint-action frequencies over the final `⌈fraction · episodes⌉` episodes
/// of every trial. `trials[t][e]` lists the joint actions of episode `e`.
pub fn outcome_distribution(
    trials: &[Vec<Vec<JointAction>>],
    shape: (usize, usize),
    window_fraction: f64,
) -> Result<OutcomeDistribution> {
    if trials.is_empty() || trials.iter().any(Vec::is_empty) {
        return Err(invalid("no episodes were logged"));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(invalid(format!(
            "window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    let episodes = trials[0].len();
    if trials.iter().any(|t| t.len() != episodes) {
        return Err(invalid("trials logged different episode counts"));
    }
    let span = window_len(episodes, window_fraction);
    let start = episodes - span;
    let mut counts = vec![vec![0u64; shape.1]; shape.0];
    let mut total = 0u64;
    for trial in trials {
        for &(a, b) in trial[start..].iter().flatten() {
            let cell = counts
                .get_mut(a as usize)
                .and_then(|r| r.get_mut(b as usize))
                .ok_or_else(|| invalid(format!("joint action ({a}, {b}) outside the game")))?;
            *cell += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(invalid("the window contains no interactions"));
    }
    Ok(OutcomeDistribution {
        matrix: counts
            .into_iter()
            .map(|r| r.into_iter().map(|c| c as f64 / total as f64).collect())
            .collect(),
        window: [start, episodes - 1],
        trials: trials.len(),
    })
}

/// Number of final episodes covered by `fraction`.
pub fn window_len(episodes: usize, fraction: f64) -> usize {
    // Guard against 0.1 · 3000 = 300.00000000000006 rounding up.
    let raw = fraction * episodes as f64;
    let n = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (n as usize).clamp(1, episodes)
}
