//! Smooth cutoff equal to 1 on the unit cube and 0 at the box boundary.
//!
//! Per axis the profile is 1 on `[-1, 1]`, 0 at `|x| = 1 + margin`, and a
//! seventh-degree smoothstep in between (three vanishing derivatives at both
//! ends, so the blend is C^3). The full cutoff is the product over axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cutoff {
    dim: usize,
    margin: f64,
}

/// `35 u^4 - 84 u^5 + 70 u^6 - 20 u^7`: 0 at 0, 1 at 1, C^3 at both ends.
fn smoothstep7(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * u * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)))
}

impl Cutoff {
    pub fn new(dim: usize, margin: f64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::config("cutoff dimension must be at least 1"));
        }
        if !margin.is_finite() || margin <= 0.0 {
            return Err(Error::config("cutoff margin must be finite and > 0"));
        }
        Ok(Cutoff { dim, margin })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Point evaluation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut w = 1.0;
        for &xi in x {
            let a = xi.abs();
            if a <= 1.0 {
                continue;
            }
            w *= smoothstep7((1.0 + self.margin - a) / self.margin);
            if w == 0.0 {
                break;
            }
        }
        w
    }

    /// Nodal values on a grid (the grid extent must cover the cube).
    pub fn field(&self, grid: &Grid) -> Result<Field> {
        if grid.dim() != self.dim {
            return Err(Error::config(format!(
                "cutoff is {}-dimensional, grid is {}-dimensional",
                self.dim,
                grid.dim()
            )));
        }
        Field::from_fn(grid.clone(), "cutoff", |x| self.eval(x))
    }
}
