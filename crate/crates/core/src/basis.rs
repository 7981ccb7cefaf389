//! Tensor series bases with Matérn-type spectral weights.
//!
//! Two families on a per-axis interval of length `L` (default the unit cube):
//!
//! ```text
//! tensor-cosine:          phi_0 = sqrt(1/L),  phi_m(x) = sqrt(2/L) cos(m pi (x-lo)/L)
//! tensor-sine-dirichlet:  psi_m(x) = sqrt(2/L) sin(m pi (x-lo)/L),  m >= 1
//! ```
//!
//! tensored over axes. Both are exactly orthonormal under the trapezoidal
//! inner product for truncations `J <= m - 2`, because the trapezoid rule
//! integrates `cos(k pi y)` on `[0,1]` exactly for `0 < k < 2(m-1)`.
//!
//! Each mode `j` carries the eigenvalue `lambda_j = 1 + |j|^2`; the alpha-law
//! coefficient weights are `lambda_j^{-alpha/2}`, so a series draw has
//! coefficient variance `(1+|j|^2)^{-alpha}` and its RKHS norm is exactly
//! [`sobolev_norm_series`] with exponent alpha.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    TensorCosine,
    TensorSineDirichlet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BasisSpec {
    kind: BasisKind,
    dim: usize,
    trunc: usize,
    domain: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "BasisSpec", into = "BasisSpec")]
pub struct SeriesBasis {
    kind: BasisKind,
    dim: usize,
    /// Modes per axis.
    trunc: usize,
    domain: Vec<[f64; 2]>,
    /// Multi-indices sorted by (eigenvalue, lexicographic).
    modes: Vec<Vec<u32>>,
    /// `1 + |j|^2` per sorted mode.
    lambda: Vec<f64>,
}

impl TryFrom<BasisSpec> for SeriesBasis {
    type Error = Error;
    fn try_from(s: BasisSpec) -> Result<Self> {
        SeriesBasis::new(s.kind, s.dim, s.trunc, s.domain)
    }
}

impl From<SeriesBasis> for BasisSpec {
    fn from(b: SeriesBasis) -> Self {
        BasisSpec {
            kind: b.kind,
            dim: b.dim,
            trunc: b.trunc,
            domain: b.domain,
        }
    }
}

impl SeriesBasis {
    pub fn new(kind: BasisKind, dim: usize, trunc: usize, domain: Vec<[f64; 2]>) -> Result<Self> {
        if dim < 1 {
            return Err(Error::config("basis dimension must be at least 1"));
        }
        if trunc < 1 {
            return Err(Error::config("basis truncation must be at least 1"));
        }
        if domain.len() != dim {
            return Err(Error::config(format!(
                "basis domain has {} axes but dim = {dim}",
                domain.len()
            )));
        }
        for iv in &domain {
            if !iv[0].is_finite() || !iv[1].is_finite() || iv[0] >= iv[1] {
                return Err(Error::config(format!("invalid basis domain interval {iv:?}")));
            }
        }
        let per_axis: Vec<u32> = match kind {
            BasisKind::TensorCosine => (0..trunc as u32).collect(),
            BasisKind::TensorSineDirichlet => (1..=trunc as u32).collect(),
        };
        let mut modes: Vec<Vec<u32>> = Vec::with_capacity(trunc.pow(dim as u32));
        let mut current = vec![0usize; dim];
        loop {
            modes.push(current.iter().map(|&i| per_axis[i]).collect());
            let mut k = 0;
            loop {
                current[k] += 1;
                if current[k] < trunc {
                    break;
                }
                current[k] = 0;
                k += 1;
                if k == dim {
                    break;
                }
            }
            if k == dim {
                break;
            }
        }
        modes.sort_by(|a, b| {
            let la: u64 = a.iter().map(|&j| (j as u64) * (j as u64)).sum();
            let lb: u64 = b.iter().map(|&j| (j as u64) * (j as u64)).sum();
            la.cmp(&lb).then_with(|| a.cmp(b))
        });
        let lambda = modes
            .iter()
            .map(|m| 1.0 + m.iter().map(|&j| (j as f64) * (j as f64)).sum::<f64>())
            .collect();
        Ok(SeriesBasis {
            kind,
            dim,
            trunc,
            domain,
            modes,
            lambda,
        })
    }

    /// Basis on the unit cube `[-1,1]^dim`.
    pub fn cube(kind: BasisKind, dim: usize, trunc: usize) -> Result<Self> {
        SeriesBasis::new(kind, dim, trunc, vec![[-1.0, 1.0]; dim])
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn domain(&self) -> &[[f64; 2]] {
        &self.domain
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, k: usize) -> &[u32] {
        &self.modes[k]
    }

    /// Eigenvalue `1 + |j|^2` of the k-th sorted mode.
    pub fn lambda(&self, k: usize) -> f64 {
        self.lambda[k]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    /// Coefficient standard deviation of the alpha-law weights,
    /// `lambda_k^{-alpha/2}`.
    pub fn weight(&self, k: usize, alpha: f64) -> f64 {
        self.lambda[k].powf(-alpha / 2.0)
    }

    fn mode_1d(&self, axis: usize, j: u32, x: f64) -> f64 {
        let [lo, hi] = self.domain[axis];
        let len = hi - lo;
        match self.kind {
            BasisKind::TensorCosine => {
                if j == 0 {
                    (1.0 / len).sqrt()
                } else {
                    (2.0 / len).sqrt() * (j as f64 * std::f64::consts::PI * (x - lo) / len).cos()
                }
            }
            BasisKind::TensorSineDirichlet => {
                (2.0 / len).sqrt() * (j as f64 * std::f64::consts::PI * (x - lo) / len).sin()
            }
        }
    }

    /// Point evaluation of the k-th sorted mode.
    pub fn eval_mode(&self, k: usize, x: &[f64]) -> f64 {
        self.modes[k]
            .iter()
            .enumerate()
            .map(|(axis, &j)| self.mode_1d(axis, j, x[axis]))
            .product()
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::config(format!(
                "basis is {}-dimensional, grid is {}-dimensional",
                self.dim,
                grid.dim()
            )));
        }
        for (iv, gv) in self.domain.iter().zip(grid.extent()) {
            if (iv[0] - gv[0]).abs() > 1e-9 || (iv[1] - gv[1]).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "basis domain {iv:?} does not match grid extent {gv:?}"
                )));
            }
        }
        if grid.points_per_axis() < self.trunc + 2 {
            return Err(Error::config(format!(
                "grid has {} points per axis; truncation {} needs at least {} for discrete orthonormality",
                grid.points_per_axis(),
                self.trunc,
                self.trunc + 2
            )));
        }
        Ok(())
    }

    /// Per-axis table `tab[i * n_per_axis + col] = phi_{j(col)}(x_i)`.
    fn axis_table(&self, grid: &Grid, axis: usize) -> Vec<f64> {
        let m = grid.points_per_axis();
        let js: Vec<u32> = match self.kind {
            BasisKind::TensorCosine => (0..self.trunc as u32).collect(),
            BasisKind::TensorSineDirichlet => (1..=self.trunc as u32).collect(),
        };
        let mut tab = vec![0.0; m * self.trunc];
        for i in 0..m {
            let x = grid.coord(axis, i);
            for (col, &j) in js.iter().enumerate() {
                tab[i * self.trunc + col] = self.mode_1d(axis, j, x);
            }
        }
        tab
    }

    fn mode_col(&self, j: u32) -> usize {
        match self.kind {
            BasisKind::TensorCosine => j as usize,
            BasisKind::TensorSineDirichlet => (j - 1) as usize,
        }
    }

    /// Synthesize `sum_k coeffs[k] e_k` on the grid nodes.
    pub fn synthesize(&self, coeffs: &[f64], grid: &Grid) -> Result<Field> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::config(format!(
                "got {} coefficients for {} modes",
                coeffs.len(),
                self.n_modes()
            )));
        }
        self.check_grid(grid)?;
        let m = grid.points_per_axis();
        let j = self.trunc;
        // scatter sorted coefficients into a dense [J]^dim tensor, axis 0 fastest
        let mut data = vec![0.0; j.pow(self.dim as u32)];
        for (k, mode) in self.modes.iter().enumerate() {
            let mut idx = 0usize;
            for axis in (0..self.dim).rev() {
                idx = idx * j + self.mode_col(mode[axis]);
            }
            data[idx] = coeffs[k];
        }
        let mut shape = vec![j; self.dim];
        for axis in 0..self.dim {
            let tab = self.axis_table(grid, axis); // [m, J] row-major
            data = contract_axis(&data, &mut shape, axis, &tab, m, j);
        }
        Field::new(grid.clone(), data, "series synthesis")
    }

    /// Trapezoidal inner products `c_k = <field, e_k>`.
    pub fn analyze(&self, field: &Field) -> Result<Vec<f64>> {
        let grid = field.grid();
        self.check_grid(grid)?;
        let m = grid.points_per_axis();
        let j = self.trunc;
        let mut data = field.values().to_vec();
        let mut shape = vec![m; self.dim];
        for axis in 0..self.dim {
            // adjoint table with trapezoid weights: [J, m] row-major
            let tab = self.axis_table(grid, axis);
            let h = grid.spacing(axis);
            let mut adj = vec![0.0; j * m];
            for i in 0..m {
                let w = if i == 0 || i + 1 == m { 0.5 * h } else { h };
                for col in 0..j {
                    adj[col * m + i] = tab[i * j + col] * w;
                }
            }
            data = contract_axis(&data, &mut shape, axis, &adj, j, m);
        }
        // gather dense tensor into sorted mode order
        let mut coeffs = vec![0.0; self.n_modes()];
        for (k, mode) in self.modes.iter().enumerate() {
            let mut idx = 0usize;
            for axis in (0..self.dim).rev() {
                idx = idx * j + self.mode_col(mode[axis]);
            }
            coeffs[k] = data[idx];
        }
        Ok(coeffs)
    }

    /// `sqrt(sum lambda_k^s coeffs[k]^2)` for this basis's eigenvalue law.
    pub fn sobolev_norm(&self, coeffs: &[f64], s: f64) -> Result<f64> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::config(format!(
                "got {} coefficients for {} modes",
                coeffs.len(),
                self.n_modes()
            )));
        }
        sobolev_norm_series(&self.lambda, coeffs, s)
    }

    /// Projection onto the first `l` modes in eigenvalue order.
    pub fn project(&self, field: &Field, l: usize) -> Result<Field> {
        if l > self.n_modes() {
            return Err(Error::config(format!(
                "projection level {l} exceeds the {} available modes",
                self.n_modes()
            )));
        }
        let mut coeffs = self.analyze(field)?;
        for c in coeffs.iter_mut().skip(l) {
            *c = 0.0;
        }
        let mut out = self.synthesize(&coeffs, field.grid())?;
        out.set_provenance(format!("spectral projection l={l} of [{}]", field.provenance()));
        Ok(out)
    }
}

/// Spectral Sobolev norm `sqrt(sum lambda_j^s c_j^2)` for an arbitrary
/// eigenvalue sequence. With `s = 0` this is the Euclidean coefficient norm.
pub fn sobolev_norm_series(lambdas: &[f64], coeffs: &[f64], s: f64) -> Result<f64> {
    if lambdas.len() != coeffs.len() {
        return Err(Error::config(format!(
            "{} eigenvalues vs {} coefficients",
            lambdas.len(),
            coeffs.len()
        )));
    }
    let mut acc = 0.0;
    for (&l, &c) in lambdas.iter().zip(coeffs) {
        if l <= 0.0 {
            return Err(Error::config("eigenvalues must be positive"));
        }
        acc += l.powf(s) * c * c;
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite("sobolev norm accumulation".into()));
    }
    Ok(acc.sqrt())
}

/// Contract one tensor axis with a table `tab[row_out, col_in]` (row-major,
/// `n_out` rows). `shape` is updated in place.
fn contract_axis(
    data: &[f64],
    shape: &mut [usize],
    axis: usize,
    tab: &[f64],
    n_out: usize,
    n_in: usize,
) -> Vec<f64> {
    debug_assert_eq!(shape[axis], n_in);
    let inner: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; inner * n_out * outer];
    for o in 0..outer {
        for r in 0..n_out {
            let dst = (o * n_out + r) * inner;
            for c in 0..n_in {
                let t = tab[r * n_in + c];
                if t == 0.0 {
                    continue;
                }
                let src = (o * n_in + c) * inner;
                for q in 0..inner {
                    out[dst + q] += t * data[src + q];
                }
            }
        }
    }
    shape[axis] = n_out;
    out
}
