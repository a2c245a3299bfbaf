use crate::error::{Error, Result};

/// Uniform grid `t_i = i · dt`, `i = 0..=n_steps`, on `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidParameter { name: "t_end", reason: "must be positive and finite" });
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter { name: "n_steps", reason: "must be at least 1" });
        }
        Ok(TimeGrid { t_end, n_steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    /// `t_i`; the last node is exactly `t_end`.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps { self.t_end } else { i as f64 * self.dt() }
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i > self.n_steps {
            Err(Error::StepOutOfRange { index: i, n_steps: self.n_steps })
        } else {
            Ok(())
        }
    }
}
