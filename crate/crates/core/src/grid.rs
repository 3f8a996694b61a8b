//! Uniform time grids anchored at `t = 0`.
//!
//! Every integrator in this crate launches trajectories from the time origin
//! in each direction separately, so grids always contain `t = 0` exactly and
//! are stored as signed multiples of the step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("grid span must satisfy t_min <= 0 <= t_max, got [{0}, {1}]")]
    DoesNotContainOrigin(f64, f64),
    #[error("grid has no steps")]
    Empty,
}

/// A uniform grid `{ k·dt : -n_neg <= k <= n_pos }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    dt: f64,
    n_neg: usize,
    n_pos: usize,
}

impl TimeGrid {
    /// Grid over `[t_min, t_max]` containing 0; the bounds are rounded to the
    /// nearest multiple of `dt`.
    pub fn span(t_min: f64, t_max: f64, dt: f64) -> Result<Self, GridError> {
        if !(dt > 0.0) {
            return Err(GridError::NonPositiveStep(dt));
        }
        if t_min > 0.0 || t_max < 0.0 {
            return Err(GridError::DoesNotContainOrigin(t_min, t_max));
        }
        let n_neg = (-t_min / dt).round() as usize;
        let n_pos = (t_max / dt).round() as usize;
        if n_neg + n_pos == 0 {
            return Err(GridError::Empty);
        }
        Ok(Self { dt, n_neg, n_pos })
    }

    /// Forward-only grid `[0, t_max]`.
    pub fn forward(t_max: f64, dt: f64) -> Result<Self, GridError> {
        Self::span(0.0, t_max, dt)
    }

    /// Symmetric grid `[-t_max, t_max]`.
    pub fn symmetric(t_max: f64, dt: f64) -> Result<Self, GridError> {
        Self::span(-t_max, t_max, dt)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n_neg + self.n_pos + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `t = 0`.
    pub fn zero_index(&self) -> usize {
        self.n_neg
    }

    pub fn steps_backward(&self) -> usize {
        self.n_neg
    }

    pub fn steps_forward(&self) -> usize {
        self.n_pos
    }

    pub fn time(&self, index: usize) -> f64 {
        (index as isize - self.n_neg as isize) as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// True when the grid covers `[-T, T]` with the same number of steps on
    /// each side.
    pub fn is_symmetric_about_zero(&self) -> bool {
        self.n_neg == self.n_pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_grid_contains_exact_zero_and_mirrors() {
        let g = TimeGrid::symmetric(2.0, 0.1).unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g.time(g.zero_index()), 0.0);
        for i in 0..g.len() {
            assert_eq!(g.time(i), -g.time(g.len() - 1 - i));
        }
    }

    #[test]
    fn rejects_grids_missing_the_origin() {
        assert!(TimeGrid::span(0.5, 2.0, 0.1).is_err());
        assert!(TimeGrid::span(-1.0, -0.5, 0.1).is_err());
        assert!(TimeGrid::span(0.0, 1.0, -0.1).is_err());
    }
}
