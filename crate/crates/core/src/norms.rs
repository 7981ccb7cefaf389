//! Discrete norms of nodal fields.
//!
//! `l2` is the trapezoidal quadrature norm, so `l2 <= sup * sqrt(volume)`
//! holds exactly on every grid. `holder[k]` is the maximum magnitude over the
//! grid of k-th order central differences, maximized over all multi-indices of
//! total order k; `holder[0]` is the sup norm. The Hölder proxy of order beta
//! used for prior conditioning is the sum of `holder[0..=beta]`, which
//! coincides with the classical `C^beta` norm layout in one dimension.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basis::SeriesBasis;
use crate::error::{Error, Result};
use crate::grid::Field;

/// Highest central-difference order with a stencil table below.
pub const MAX_HOLDER_ORDER: u32 = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub l2: f64,
    pub sup: f64,
    /// `holder[k]`: max k-th order central-difference magnitude, k = 0..=beta.
    pub holder: BTreeMap<u32, f64>,
    /// Spectral `H^{-1}` proxy, filled only by [`norms_with_basis`].
    pub dual_h1: Option<f64>,
}

impl NormReport {
    /// Hölder-ball proxy: sum of difference magnitudes of orders 0..=beta.
    pub fn cbeta(&self, beta: u32) -> f64 {
        (0..=beta).map(|k| self.holder.get(&k).copied().unwrap_or(0.0)).sum()
    }
}

/// Central-difference stencil for a given order: (node offsets, coefficients).
/// The divisor `h^order` is applied by the caller.
fn stencil(order: u32) -> (&'static [isize], &'static [f64]) {
    match order {
        1 => (&[-1, 1], &[-0.5, 0.5]),
        2 => (&[-1, 0, 1], &[1.0, -2.0, 1.0]),
        3 => (&[-2, -1, 1, 2], &[-0.5, 1.0, -1.0, 0.5]),
        4 => (&[-2, -1, 0, 1, 2], &[1.0, -4.0, 6.0, -4.0, 1.0]),
        _ => unreachable!("stencil orders are validated before use"),
    }
}

fn stencil_radius(order: u32) -> usize {
    match order {
        0 => 0,
        1 | 2 => 1,
        3 | 4 => 2,
        _ => unreachable!(),
    }
}

/// Apply the `order`-th central difference along `axis`, in place of a copy.
/// Returns the new values; entries within the consumed margin are stale and
/// must be skipped by the caller via the margins bookkeeping.
fn axis_difference(values: &[f64], field: &Field, axis: usize, order: u32) -> Vec<f64> {
    let grid = field.grid();
    let m = grid.points_per_axis();
    let d = grid.dim();
    let (offsets, coeffs) = stencil(order);
    let h = grid.spacing(axis);
    let hpow = h.powi(order as i32);
    let stride: isize = (0..axis).fold(1isize, |s, _| s * m as isize);
    let mut out = vec![0.0; values.len()];
    let mut multi = vec![0usize; d];
    let radius = stencil_radius(order);
    for idx in 0..values.len() {
        grid.multi_index(idx, &mut multi);
        let i = multi[axis];
        if i < radius || i + radius >= m {
            continue;
        }
        let mut acc = 0.0;
        for (off, c) in offsets.iter().zip(coeffs) {
            acc += c * values[(idx as isize + off * stride) as usize];
        }
        out[idx] = acc / hpow;
    }
    out
}

/// All compositions of `total` into `d` non-negative parts.
fn compositions(total: u32, d: usize) -> Vec<Vec<u32>> {
    fn rec(total: u32, d: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if d == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=total {
            prefix.push(first);
            rec(total - first, d - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, d, &mut Vec::new(), &mut out);
    out
}

/// Max |D^i f| over grid nodes where the full stencil of the multi-index
/// `orders` fits.
fn max_difference(field: &Field, orders: &[u32]) -> f64 {
    let grid = field.grid();
    let m = grid.points_per_axis();
    let d = grid.dim();
    let mut values = field.values().to_vec();
    for (axis, &r) in orders.iter().enumerate() {
        if r > 0 {
            values = axis_difference(&values, field, axis, r);
        }
    }
    let margins: Vec<usize> = orders.iter().map(|&r| stencil_radius(r)).collect();
    let mut multi = vec![0usize; d];
    let mut best = 0.0f64;
    for idx in 0..values.len() {
        grid.multi_index(idx, &mut multi);
        let interior = multi
            .iter()
            .zip(&margins)
            .all(|(&i, &r)| i >= r && i + r < m);
        if interior {
            best = best.max(values[idx].abs());
        }
    }
    best
}

/// Trapezoidal `L^2` norm.
pub fn l2_norm(field: &Field) -> f64 {
    let grid = field.grid();
    let mut acc = 0.0;
    for (idx, v) in field.values().iter().enumerate() {
        acc += grid.quad_weight(idx) * v * v;
    }
    acc.sqrt()
}

/// `L^2` norm against the uniform probability measure on the box
/// (trapezoidal norm divided by sqrt(volume)).
pub fn l2_mu_norm(field: &Field) -> f64 {
    l2_norm(field) / field.grid().volume().sqrt()
}

pub fn sup_norm(field: &Field) -> f64 {
    field.values().iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Full norm report with Hölder proxies up to order `beta`.
///
/// Requires `m >= 2*beta + 3` points per axis so the widest stencil has
/// interior room; larger beta than the stencil table supports is a
/// configuration error.
pub fn norms(field: &Field, beta: u32) -> Result<NormReport> {
    if beta > MAX_HOLDER_ORDER {
        return Err(Error::config(format!(
            "Hölder order {beta} exceeds the supported maximum {MAX_HOLDER_ORDER}"
        )));
    }
    let m = field.grid().points_per_axis();
    if m < (2 * beta + 3) as usize {
        return Err(Error::config(format!(
            "grid has {m} points per axis; Hölder order {beta} needs at least {}",
            2 * beta + 3
        )));
    }
    let sup = sup_norm(field);
    let mut holder = BTreeMap::new();
    holder.insert(0, sup);
    for k in 1..=beta {
        let mut best = 0.0f64;
        for comp in compositions(k, field.grid().dim()) {
            best = best.max(max_difference(field, &comp));
        }
        holder.insert(k, best);
    }
    Ok(NormReport {
        l2: l2_norm(field),
        sup,
        holder,
        dual_h1: None,
    })
}

/// Like [`norms`], additionally filling the spectral `H^{-1}` proxy
/// `sqrt(sum lambda_j^{-1} c_j^2)` from the supplied basis.
pub fn norms_with_basis(field: &Field, beta: u32, basis: &SeriesBasis) -> Result<NormReport> {
    let mut report = norms(field, beta)?;
    let coeffs = basis.analyze(field)?;
    report.dual_h1 = Some(basis.sobolev_norm(&coeffs, -1.0)?);
    Ok(report)
}
