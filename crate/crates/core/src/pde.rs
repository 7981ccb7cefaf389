//! Elliptic forward maps on tensor grids.
//!
//! Two boundary value problems, both discretized with second-order central
//! stencils and solved matrix-free by Jacobi-preconditioned conjugate
//! gradients:
//!
//! ```text
//! divergence form:  div(f grad u) = g  on the box,  u = 0   on the boundary
//! absorption form:  (1/2) Lap u = f u  on the box,  u = h   on the boundary
//! ```
//!
//! The divergence-form flux `f du/dx` is discretized at half nodes with
//! arithmetic averaging, `f_{i+1/2} = (f_i + f_{i+1})/2`, which keeps the
//! operator symmetric positive definite and telescopes to an exact discrete
//! flux balance. The absorption-form matrix is an M-matrix for `f >= 0`, so
//! the discrete maximum principle `0 <= u <= max h` holds nodewise.
//!
//! The link functions pair the two problems with a log conductivity:
//! `f = k_min + exp(theta)` (divergence form) and `f = exp(theta)`
//! (absorption form).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::norms::{l2_norm, norms, sup_norm};

/// Relative residual tolerance of the inner solver.
pub const SOLVER_TOL: f64 = 1e-10;

/// Iteration cap multiplier: at most `50 * n_nodes` CG iterations.
pub const SOLVER_ITER_FACTOR: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Darcy,
    Schrodinger,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Final residual relative to the right-hand side norm.
    pub residual: f64,
}

/// Divergence-form problem data.
#[derive(Debug, Clone)]
pub struct DarcyConfig {
    grid: Grid,
    g: Field,
    g_min: f64,
    k_min: f64,
}

impl DarcyConfig {
    /// `g` must be single-signed with `min |g| >= g_min > 0` over the interior
    /// nodes (boundary values never enter the discrete system); the positive
    /// orientation is canonical, sign-flipped sources are accepted for
    /// manufactured benchmarks.
    pub fn new(grid: Grid, g: Field, g_min: f64, k_min: f64) -> Result<Self> {
        if !g.grid().compatible(&grid) {
            return Err(Error::config("source field must live on the problem grid"));
        }
        if !(g_min > 0.0) || !g_min.is_finite() {
            return Err(Error::config("g_min must be finite and > 0"));
        }
        if !(k_min > 0.0) || !k_min.is_finite() {
            return Err(Error::config("k_min must be finite and > 0"));
        }
        let lattice = Lattice::new(&grid);
        let interior = || lattice.interior.iter().map(|&i| g.values()[i]);
        let all_pos = interior().all(|v| v >= g_min);
        let all_neg = interior().all(|v| v <= -g_min);
        if !(all_pos || all_neg) {
            return Err(Error::config(format!(
                "source must be single-signed with |g| >= g_min = {g_min} on interior nodes"
            )));
        }
        Ok(DarcyConfig { grid, g, g_min, k_min })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn g(&self) -> &Field {
        &self.g
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }
}

/// Absorption-form problem data; `boundary` is a nodal field whose values on
/// boundary nodes provide the Dirichlet data.
#[derive(Debug, Clone)]
pub struct SchrodingerConfig {
    grid: Grid,
    boundary: Field,
    h_min: f64,
}

impl SchrodingerConfig {
    pub fn new(grid: Grid, boundary: Field, h_min: f64) -> Result<Self> {
        if !boundary.grid().compatible(&grid) {
            return Err(Error::config("boundary field must live on the problem grid"));
        }
        if !(h_min > 0.0) || !h_min.is_finite() {
            return Err(Error::config("h_min must be finite and > 0"));
        }
        let lattice = Lattice::new(&grid);
        for idx in 0..grid.n_nodes() {
            if !lattice.is_interior[idx] && boundary.values()[idx] < h_min {
                return Err(Error::config(format!(
                    "boundary data must satisfy h >= h_min = {h_min} (violated at node {idx})"
                )));
            }
        }
        Ok(SchrodingerConfig { grid, boundary, h_min })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> &Field {
        &self.boundary
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }
}

/// A fully specified forward map.
#[derive(Debug, Clone)]
pub enum ForwardConfig {
    Darcy(DarcyConfig),
    Schrodinger(SchrodingerConfig),
}

impl ForwardConfig {
    pub fn problem(&self) -> Problem {
        match self {
            ForwardConfig::Darcy(_) => Problem::Darcy,
            ForwardConfig::Schrodinger(_) => Problem::Schrodinger,
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            ForwardConfig::Darcy(c) => c.grid(),
            ForwardConfig::Schrodinger(c) => c.grid(),
        }
    }

    /// Map a log parameter to a coefficient field: `k_min + exp(theta)` for
    /// the divergence form, `exp(theta)` for the absorption form.
    pub fn link(&self, theta: &Field) -> Result<Field> {
        match self {
            ForwardConfig::Darcy(c) => {
                let k_min = c.k_min;
                theta.map("link: k_min + exp(theta)", |t| k_min + t.exp())
            }
            ForwardConfig::Schrodinger(_) => theta.map("link: exp(theta)", f64::exp),
        }
    }

    pub fn solve(&self, f: &Field) -> Result<(Field, SolveInfo)> {
        match self {
            ForwardConfig::Darcy(c) => solve_darcy(f, c),
            ForwardConfig::Schrodinger(c) => solve_schrodinger(f, c),
        }
    }

    /// `link` then `solve`.
    pub fn forward(&self, theta: &Field) -> Result<(Field, SolveInfo)> {
        self.solve(&self.link(theta)?)
    }
}

/// Forward model abstraction used by likelihoods: a PDE map or the identity
/// (`G(theta) = theta`), the linear debug mode with a conjugate oracle.
#[derive(Debug, Clone)]
pub enum ForwardModel {
    Pde(ForwardConfig),
    Identity,
}

impl ForwardModel {
    pub fn apply(&self, theta: &Field) -> Result<Field> {
        match self {
            ForwardModel::Pde(cfg) => Ok(cfg.forward(theta)?.0),
            ForwardModel::Identity => Ok(theta.clone()),
        }
    }
}

/// Interior/boundary bookkeeping for one grid.
struct Lattice {
    strides: Vec<usize>,
    is_interior: Vec<bool>,
    interior: Vec<usize>,
}

impl Lattice {
    fn new(grid: &Grid) -> Self {
        let d = grid.dim();
        let m = grid.points_per_axis();
        let mut strides = vec![1usize; d];
        for k in 1..d {
            strides[k] = strides[k - 1] * m;
        }
        let n = grid.n_nodes();
        let mut is_interior = vec![false; n];
        let mut interior = Vec::new();
        let mut multi = vec![0usize; d];
        for idx in 0..n {
            grid.multi_index(idx, &mut multi);
            if multi.iter().all(|&i| i > 0 && i + 1 < m) {
                is_interior[idx] = true;
                interior.push(idx);
            }
        }
        Lattice {
            strides,
            is_interior,
            interior,
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on the interior unknowns.
/// `apply` must evaluate the SPD operator into `out` on interior nodes;
/// work vectors keep boundary entries at zero.
fn pcg(
    lattice: &Lattice,
    n: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    context: &str,
) -> Result<(Vec<f64>, SolveInfo)> {
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        lattice.interior.iter().map(|&i| a[i] * b[i]).sum()
    };
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, SolveInfo { iterations: 0, residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    for &i in &lattice.interior {
        z[i] = r[i] / diag[i];
    }
    let mut p = z.clone();
    let mut rho = dot(&r, &z);
    let mut q = vec![0.0; n];
    let cap = SOLVER_ITER_FACTOR * n;
    let mut rel = 1.0;
    for it in 1..=cap {
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::SolverDiverged {
                context: format!("{context}: operator lost positive definiteness"),
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rho / pq;
        for &i in &lattice.interior {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= SOLVER_TOL {
            return Ok((x, SolveInfo { iterations: it, residual: rel }));
        }
        for &i in &lattice.interior {
            z[i] = r[i] / diag[i];
        }
        let rho_new = dot(&r, &z);
        let beta = rho_new / rho;
        rho = rho_new;
        for &i in &lattice.interior {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDiverged {
        context: context.to_string(),
        iterations: cap,
        residual: rel,
    })
}

/// Solve `div(f grad u) = g`, `u = 0` on the boundary.
///
/// Requires `f >= k_min` everywhere (the linked coefficient satisfies this by
/// construction).
pub fn solve_darcy(f: &Field, cfg: &DarcyConfig) -> Result<(Field, SolveInfo)> {
    let grid = cfg.grid();
    if !f.grid().compatible(grid) {
        return Err(Error::config("coefficient field must live on the problem grid"));
    }
    if f.values().iter().any(|&v| v < cfg.k_min()) {
        return Err(Error::config(format!(
            "coefficient must satisfy f >= k_min = {}",
            cfg.k_min()
        )));
    }
    let d = grid.dim();
    let n = grid.n_nodes();
    let lattice = Lattice::new(grid);
    let fv = f.values();
    let inv_h2: Vec<f64> = (0..d).map(|a| 1.0 / (grid.spacing(a) * grid.spacing(a))).collect();

    // operator A = -div(f grad .), SPD on interior unknowns
    let apply = |u: &[f64], out: &mut [f64]| {
        for &idx in &lattice.interior {
            let mut acc = 0.0;
            for a in 0..d {
                let s = lattice.strides[a];
                let f_plus = 0.5 * (fv[idx] + fv[idx + s]);
                let f_minus = 0.5 * (fv[idx] + fv[idx - s]);
                acc += inv_h2[a]
                    * (f_plus * (u[idx] - u[idx + s]) + f_minus * (u[idx] - u[idx - s]));
            }
            out[idx] = acc;
        }
    };
    let mut diag = vec![1.0; n];
    for &idx in &lattice.interior {
        let mut acc = 0.0;
        for a in 0..d {
            let s = lattice.strides[a];
            acc += inv_h2[a] * (fv[idx] + 0.5 * (fv[idx + s] + fv[idx - s]));
        }
        diag[idx] = acc;
    }
    let mut b = vec![0.0; n];
    for &idx in &lattice.interior {
        b[idx] = -cfg.g().values()[idx];
    }
    let (u, info) = pcg(&lattice, n, apply, &diag, &b, "divergence-form solve")?;
    Ok((Field::new(grid.clone(), u, "darcy solution")?, info))
}

/// Solve `(1/2) Lap u = f u`, `u = h` on the boundary. Requires `f >= 0`.
pub fn solve_schrodinger(f: &Field, cfg: &SchrodingerConfig) -> Result<(Field, SolveInfo)> {
    let grid = cfg.grid();
    if !f.grid().compatible(grid) {
        return Err(Error::config("potential field must live on the problem grid"));
    }
    if f.values().iter().any(|&v| v < 0.0) {
        return Err(Error::config("potential must be nonnegative"));
    }
    let d = grid.dim();
    let n = grid.n_nodes();
    let lattice = Lattice::new(grid);
    let fv = f.values();
    let hb = cfg.boundary().values();
    let inv_h2: Vec<f64> = (0..d).map(|a| 1.0 / (grid.spacing(a) * grid.spacing(a))).collect();

    // operator A = -(1/2) Lap + f on interior unknowns (boundary pinned to 0)
    let apply = |u: &[f64], out: &mut [f64]| {
        for &idx in &lattice.interior {
            let mut acc = fv[idx] * u[idx];
            for a in 0..d {
                let s = lattice.strides[a];
                acc += 0.5 * inv_h2[a] * (2.0 * u[idx] - u[idx + s] - u[idx - s]);
            }
            out[idx] = acc;
        }
    };
    let mut diag = vec![1.0; n];
    for &idx in &lattice.interior {
        diag[idx] = fv[idx] + inv_h2.iter().sum::<f64>();
    }
    // boundary data moves to the right-hand side
    let mut b = vec![0.0; n];
    for &idx in &lattice.interior {
        let mut acc = 0.0;
        for a in 0..d {
            let s = lattice.strides[a];
            if !lattice.is_interior[idx + s] {
                acc += 0.5 * inv_h2[a] * hb[idx + s];
            }
            if !lattice.is_interior[idx - s] {
                acc += 0.5 * inv_h2[a] * hb[idx - s];
            }
        }
        b[idx] = acc;
    }
    let (mut u, info) = pcg(&lattice, n, apply, &diag, &b, "absorption-form solve")?;
    for idx in 0..n {
        if !lattice.is_interior[idx] {
            u[idx] = hb[idx];
        }
    }
    Ok((Field::new(grid.clone(), u, "schrodinger solution")?, info))
}

/// Discrete flux balance of a divergence-form solution: returns
/// `(source integral, boundary flux)`, equal up to solver tolerance by
/// telescoping the flux-form equations over the interior.
pub fn darcy_flux_balance(f: &Field, u: &Field, cfg: &DarcyConfig) -> (f64, f64) {
    let grid = cfg.grid();
    let d = grid.dim();
    let lattice = Lattice::new(grid);
    let fv = f.values();
    let uv = u.values();
    let cell: f64 = (0..d).map(|a| grid.spacing(a)).product();
    let mut source = 0.0;
    for &idx in &lattice.interior {
        source += cfg.g().values()[idx] * cell;
    }
    let mut flux = 0.0;
    for &idx in &lattice.interior {
        for a in 0..d {
            let s = lattice.strides[a];
            let h = grid.spacing(a);
            let face = cell / h;
            if !lattice.is_interior[idx + s] {
                flux += 0.5 * (fv[idx] + fv[idx + s]) * (uv[idx + s] - uv[idx]) / h * face;
            }
            if !lattice.is_interior[idx - s] {
                flux += 0.5 * (fv[idx] + fv[idx - s]) * (uv[idx - s] - uv[idx]) / h * face;
            }
        }
    }
    (source, flux)
}

/// Inverse-continuity exponents of the two problems for integer Hölder order
/// `beta`: recovering the coefficient from the solution costs
/// `|theta - theta*| <= L' M^xi delta^zeta` over `C^beta` balls of radius `M`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StabilityExponents {
    pub xi: f64,
    pub zeta: f64,
}

impl StabilityExponents {
    pub fn for_problem(problem: Problem, beta: u32) -> Result<Self> {
        match problem {
            Problem::Darcy => {
                if beta < 2 {
                    return Err(Error::config(
                        "divergence-form stability needs integer beta >= 2",
                    ));
                }
                Ok(StabilityExponents {
                    xi: (beta * (beta + 1)) as f64,
                    zeta: (beta - 1) as f64 / (beta + 1) as f64,
                })
            }
            Problem::Schrodinger => {
                if beta < 1 {
                    return Err(Error::config("absorption-form stability needs beta >= 1"));
                }
                Ok(StabilityExponents {
                    xi: beta as f64 / 2.0 + 1.0,
                    zeta: beta as f64 / (beta as f64 + 2.0),
                })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioReport {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    pub skipped: usize,
}

/// Max over pairs of `||G(a) - G(b)||_L2 / ||a - b||_sup`, skipping pairs
/// closer than 1e-12 in sup norm. All fields must lie in the `C^beta` ball of
/// radius `ball`.
pub fn check_lipschitz(
    cfg: &ForwardConfig,
    pairs: &[(Field, Field)],
    beta: u32,
    ball: f64,
) -> Result<RatioReport> {
    let mut ratios = Vec::new();
    let mut skipped = 0;
    for (a, b) in pairs {
        for th in [a, b] {
            let r = norms(th, beta)?;
            if r.cbeta(beta) > ball {
                return Err(Error::config(format!(
                    "field outside the C^{beta} ball of radius {ball} (proxy {})",
                    r.cbeta(beta)
                )));
            }
        }
        let denom = sup_norm(&a.zip_with(b, "diff", |x, y| x - y)?);
        if denom < 1e-12 {
            skipped += 1;
            continue;
        }
        let ga = cfg.forward(a)?.0;
        let gb = cfg.forward(b)?.0;
        let num = l2_norm(&ga.zip_with(&gb, "gdiff", |x, y| x - y)?);
        ratios.push(num / denom);
    }
    let max_ratio = ratios.iter().cloned().fold(0.0f64, f64::max);
    Ok(RatioReport { max_ratio, ratios, skipped })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    pub skipped: usize,
    pub exponents: StabilityExponents,
}

/// Max over pairs of `||a - b||_L2 / ||G(a) - G(b)||_L2^zeta`, skipping pairs
/// with forward distance below 1e-8.
pub fn check_stability(
    cfg: &ForwardConfig,
    pairs: &[(Field, Field)],
    beta: u32,
    ball: f64,
) -> Result<StabilityReport> {
    let exponents = StabilityExponents::for_problem(cfg.problem(), beta)?;
    let mut ratios = Vec::new();
    let mut skipped = 0;
    for (a, b) in pairs {
        for th in [a, b] {
            let r = norms(th, beta)?;
            if r.cbeta(beta) > ball {
                return Err(Error::config(format!(
                    "field outside the C^{beta} ball of radius {ball} (proxy {})",
                    r.cbeta(beta)
                )));
            }
        }
        let ga = cfg.forward(a)?.0;
        let gb = cfg.forward(b)?.0;
        let denom = l2_norm(&ga.zip_with(&gb, "gdiff", |x, y| x - y)?);
        if denom < 1e-8 {
            skipped += 1;
            continue;
        }
        let num = l2_norm(&a.zip_with(b, "diff", |x, y| x - y)?);
        ratios.push(num / denom.powf(exponents.zeta));
    }
    let max_ratio = ratios.iter().cloned().fold(0.0f64, f64::max);
    Ok(StabilityReport { max_ratio, ratios, skipped, exponents })
}
