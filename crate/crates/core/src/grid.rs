//! Tensor-product grids and nodal scalar fields.
//!
//! A [`Grid`] is a uniform tensor grid on a closed box, the same number of
//! points on every axis. Nodal values are stored flat in lexicographic order
//! with **axis 0 fastest**:
//!
//! ```text
//! index(i_0, ..., i_{d-1}) = i_0 + m*(i_1 + m*(i_2 + ...))
//! ```
//!
//! The default box is the ambient domain `[-1-delta, 1+delta]^d` with margin
//! `delta = 0.25`, so the unit cube `[-1,1]^d` sits strictly inside. Layer
//! domains of deep draws use the cube itself (margin 0 through [`Grid::cube`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default margin of the ambient box around the unit cube.
pub const DEFAULT_MARGIN: f64 = 0.25;

/// Relative snap tolerance (in cell units) used by nodal interpolation.
const NODE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    /// Closed interval per axis, `extent[k] = [lo_k, hi_k]`.
    extent: Vec<[f64; 2]>,
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, extent: Vec<[f64; 2]>) -> Result<Self> {
        if dim < 1 {
            return Err(Error::config("grid dimension must be at least 1"));
        }
        if points_per_axis < 3 {
            return Err(Error::config(format!(
                "grid needs at least 3 points per axis, got {points_per_axis}"
            )));
        }
        if extent.len() != dim {
            return Err(Error::config(format!(
                "extent has {} axes but dim = {dim}",
                extent.len()
            )));
        }
        for (k, iv) in extent.iter().enumerate() {
            if !iv[0].is_finite() || !iv[1].is_finite() || iv[0] >= iv[1] {
                return Err(Error::config(format!(
                    "extent on axis {k} must be a finite interval [lo, hi] with lo < hi, got {iv:?}"
                )));
            }
        }
        let n = (points_per_axis as u128).checked_pow(dim as u32);
        match n {
            Some(n) if n <= 1 << 28 => {}
            _ => {
                return Err(Error::config(format!(
                    "grid with {points_per_axis}^{dim} nodes is too large"
                )))
            }
        }
        Ok(Grid {
            dim,
            points_per_axis,
            extent,
        })
    }

    /// Ambient box `[-1-margin, 1+margin]^d`.
    pub fn ambient(dim: usize, points_per_axis: usize, margin: f64) -> Result<Self> {
        if !margin.is_finite() || margin < 0.0 {
            return Err(Error::config("grid margin must be finite and >= 0"));
        }
        Grid::new(dim, points_per_axis, vec![[-1.0 - margin, 1.0 + margin]; dim])
    }

    /// Unit cube `[-1,1]^d`.
    pub fn cube(dim: usize, points_per_axis: usize) -> Result<Self> {
        Grid::new(dim, points_per_axis, vec![[-1.0, 1.0]; dim])
    }

    /// Same box on every axis.
    pub fn uniform(dim: usize, points_per_axis: usize, interval: [f64; 2]) -> Result<Self> {
        Grid::new(dim, points_per_axis, vec![interval; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn extent(&self) -> &[[f64; 2]] {
        &self.extent
    }

    /// Grid spacing on axis `k`.
    pub fn spacing(&self, k: usize) -> f64 {
        let [lo, hi] = self.extent[k];
        (hi - lo) / (self.points_per_axis - 1) as f64
    }

    /// Total node count `m^d`.
    pub fn n_nodes(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Volume of the box.
    pub fn volume(&self) -> f64 {
        self.extent.iter().map(|iv| iv[1] - iv[0]).product()
    }

    /// Coordinate of node `i` on axis `k`.
    pub fn coord(&self, k: usize, i: usize) -> f64 {
        let [lo, hi] = self.extent[k];
        if i + 1 == self.points_per_axis {
            hi
        } else {
            lo + i as f64 * self.spacing(k)
        }
    }

    /// Flat index of a multi-index (axis 0 fastest).
    pub fn index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim);
        let mut idx = 0usize;
        for k in (0..self.dim).rev() {
            idx = idx * self.points_per_axis + multi[k];
        }
        idx
    }

    /// Multi-index of a flat index, written into `out`.
    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for k in 0..self.dim {
            out[k] = idx % self.points_per_axis;
            idx /= self.points_per_axis;
        }
    }

    /// Coordinates of the node with flat index `idx`, written into `out`.
    pub fn node(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for k in 0..self.dim {
            let i = rem % self.points_per_axis;
            rem /= self.points_per_axis;
            out[k] = self.coord(k, i);
        }
    }

    /// Trapezoidal quadrature weight of the node with flat index `idx`
    /// (half weight on boundary nodes, per axis).
    pub fn quad_weight(&self, idx: usize) -> f64 {
        let mut w = 1.0;
        let mut rem = idx;
        for k in 0..self.dim {
            let i = rem % self.points_per_axis;
            rem /= self.points_per_axis;
            let mut wk = self.spacing(k);
            if i == 0 || i + 1 == self.points_per_axis {
                wk *= 0.5;
            }
            w *= wk;
        }
        w
    }

    /// True when both grids describe the same box discretization within 1e-12.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.points_per_axis == other.points_per_axis
            && self
                .extent
                .iter()
                .zip(&other.extent)
                .all(|(a, b)| (a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12)
    }
}

/// Scalar field sampled on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    provenance: String,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::config(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "field value at flat index {pos} is {}",
                values[pos]
            )));
        }
        Ok(Field {
            grid,
            values,
            provenance: provenance.into(),
        })
    }

    pub fn constant(grid: Grid, value: f64, provenance: impl Into<String>) -> Result<Self> {
        let n = grid.n_nodes();
        Field::new(grid, vec![value; n], provenance)
    }

    /// Sample a function on every node.
    pub fn from_fn(
        grid: Grid,
        provenance: impl Into<String>,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut x = vec![0.0; grid.dim()];
        let mut values = Vec::with_capacity(grid.n_nodes());
        for idx in 0..grid.n_nodes() {
            grid.node(idx, &mut x);
            values.push(f(&x));
        }
        Field::new(grid, values, provenance)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn set_provenance(&mut self, provenance: impl Into<String>) {
        self.provenance = provenance.into();
    }

    /// Apply `f` to every value, re-validating finiteness.
    pub fn map(&self, provenance: impl Into<String>, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            provenance,
        )
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(
        &self,
        other: &Field,
        provenance: impl Into<String>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Field> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::config("zip_with requires fields on the same grid"));
        }
        Field::new(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            provenance,
        )
    }

    /// Multilinear interpolation at `x`.
    ///
    /// Exact at grid nodes (queries snap to a node when within 1e-9 of a cell
    /// boundary, in cell units). Points outside the extent by more than the
    /// snap tolerance raise [`Error::OutOfDomain`].
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let d = self.grid.dim();
        if x.len() != d {
            return Err(Error::config(format!(
                "eval point has {} coordinates, field is {d}-dimensional",
                x.len()
            )));
        }
        let m = self.grid.points_per_axis();
        let mut base = [0usize; 16];
        let mut frac = [0.0f64; 16];
        if d > 16 {
            return Err(Error::config("eval supports at most 16 dimensions"));
        }
        for k in 0..d {
            let [lo, hi] = self.grid.extent()[k];
            let h = self.grid.spacing(k);
            let u = (x[k] - lo) / h;
            let rounded = u.round();
            let u = if (u - rounded).abs() <= NODE_SNAP { rounded } else { u };
            if u < 0.0 || u > (m - 1) as f64 {
                return Err(Error::OutOfDomain {
                    point: x.to_vec(),
                    axis: k,
                });
            }
            let _ = hi;
            let mut i = u.floor() as usize;
            if i >= m - 1 {
                i = m - 2;
            }
            base[k] = i;
            frac[k] = u - i as f64;
        }
        let mut acc = 0.0;
        let mut multi = [0usize; 16];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    multi[k] = base[k] + 1;
                } else {
                    w *= 1.0 - frac[k];
                    multi[k] = base[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[self.grid.index(&multi[..d])];
            }
        }
        Ok(acc)
    }
}
