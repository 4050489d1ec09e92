use crate::error::{Error, Result};

/// Discretization grid: times in years, starting at zero, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t: Vec<f64>,
}

impl TimeGrid {
    /// Builds a grid from explicit times. Requires `t[0] == 0`, strictly
    /// increasing values, and at least two points.
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.len() < 2 {
            return Err(Error::invalid("time grid needs at least 2 points"));
        }
        if t[0] != 0.0 {
            return Err(Error::invalid(format!(
                "time grid must start at 0, got {}",
                t[0]
            )));
        }
        for (k, w) in t.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::invalid(format!(
                    "time grid not strictly increasing at index {}: {} -> {}",
                    k + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(TimeGrid { t })
    }

    /// Uniform grid with `steps` equal steps covering `[0, horizon]`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be > 0, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        let t = (0..=steps)
            .map(|k| horizon * k as f64 / steps as f64)
            .collect();
        Ok(TimeGrid { t })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees >= 2 points
    }

    /// Number of steps (`len() - 1`).
    pub fn steps(&self) -> usize {
        self.t.len() - 1
    }

    pub fn dt(&self, step: usize) -> f64 {
        self.t[step + 1] - self.t[step]
    }

    pub fn horizon(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Grid restricted to every `factor`-th point (used for refinement
    /// studies on a shared underlying path). Requires `steps()` divisible by
    /// `factor`.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "cannot subsample {} steps by factor {}",
                self.steps(),
                factor
            )));
        }
        Ok(TimeGrid {
            t: self.t.iter().copied().step_by(factor).collect(),
        })
    }
}
