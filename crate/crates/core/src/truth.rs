//! Ground-truth parameters for contraction experiments.
//!
//! Four kinds:
//!
//! ```text
//! smooth-bump:       theta*(x) = A prod_k w(x_k),  w a C-infinity bump on [-1,1]
//! gam-sum:           theta*(x) = F*(x_1 + ... + x_d),  F* a spline bump
//! wavelet-spike-gam: theta*(x) = F*(x_1 + ... + x_d),  F* = c psi~_{j,k0}
//! custom:            the composed field of a saved deep draw
//! ```
//!
//! Both gam kinds keep `F*` supported in `[-d, d]` and carry a depth-1
//! structure annotation: `d` identity first-layer components (one coordinate
//! each) feeding a final layer that applies `F*` to the rescaled sum. The
//! spike amplitude is `c = K 2^{-j(2 alpha + 1)/2}`, which keeps the
//! smoothness proxy `2^{j alpha} |<F*, psi~_{j,k0}>| = K 2^{-j/2}` inside the
//! radius-`K` ball.
//!
//! The smoothness proxy is the series Sobolev norm on the spectral scale the
//! priors use: for `smooth-bump` it is taken of `theta*` itself on the ambient
//! box (computed exactly from the factorized 1-D coefficients), for `gam-sum`
//! of the profile `F*` on `[-d, d]`, and for the spike it is the single
//! wavelet-coefficient form above. Scaled kinds are calibrated so the proxy
//! equals the requested radius; fields outside the unit cube are tapered by
//! the standard cutoff so every truth lies in the priors' support.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, SeriesBasis};
use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::io;
use crate::structure::{GraphSpec, Structure};
use crate::wavelet::{DaubechiesWavelet, DEFAULT_LEVEL, MAX_ORDER};

/// Largest spike level accepted; tables interpolate cleanly well past it.
pub const MAX_SPIKE_LEVEL: u32 = 10;

/// Quadrature slack allowed on the recomputed norm proxy.
pub const NORM_SLACK: f64 = 1.05;

/// Which ground truth to construct.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TruthKind {
    SmoothBump,
    GamSum,
    WaveletSpikeGam { level: u32 },
    CustomComposition { path: PathBuf },
}

/// Declarative truth description: kind, smoothness, ball radius, ambient
/// dimension. For `custom-composition` the smoothness and radius are
/// reporting metadata only; the saved draw is used as-is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    #[serde(flatten)]
    pub kind: TruthKind,
    pub alpha: f64,
    pub radius: f64,
    pub ambient_d: usize,
}

impl TruthSpec {
    pub fn validated(self) -> Result<Self> {
        if !self.alpha.is_finite() || self.alpha <= 0.5 {
            return Err(Error::config(format!(
                "truth smoothness alpha must be finite and > 1/2, got {}",
                self.alpha
            )));
        }
        if !self.radius.is_finite() || self.radius <= 0.0 {
            return Err(Error::config(format!(
                "truth radius must be finite and > 0, got {}",
                self.radius
            )));
        }
        if self.ambient_d == 0 || self.ambient_d > 4 {
            return Err(Error::config(format!(
                "truth builder supports ambient dimensions 1..=4, got {}",
                self.ambient_d
            )));
        }
        if let TruthKind::WaveletSpikeGam { level } = self.kind {
            let order = spike_order(self.alpha)?;
            let support = 2 * order - 1;
            if level > MAX_SPIKE_LEVEL {
                return Err(Error::config(format!(
                    "spike level {level} exceeds the cap {MAX_SPIKE_LEVEL}"
                )));
            }
            if (1u64 << level) < support as u64 {
                return Err(Error::config(format!(
                    "spike level {level} cannot fit the order-{order} wavelet \
                     (support width {support} needs 2^level >= {support})"
                )));
            }
        }
        Ok(self)
    }

    /// Whether this truth carries the additive-sum composition structure.
    pub fn is_gam(&self) -> bool {
        matches!(
            self.kind,
            TruthKind::GamSum | TruthKind::WaveletSpikeGam { .. }
        )
    }
}

/// Wavelet order for a spike of smoothness `alpha`: the smallest family with
/// at least `alpha` vanishing moments.
pub fn spike_order(alpha: f64) -> Result<usize> {
    let order = (alpha.ceil() as usize).max(2);
    if order > MAX_ORDER {
        return Err(Error::config(format!(
            "no wavelet family with {order} vanishing moments is available \
             (alpha = {alpha} needs order <= {MAX_ORDER})"
        )));
    }
    Ok(order)
}

/// The 1-D profile `F*` of a gam-type truth, evaluable in closed form.
#[derive(Clone, Debug)]
pub enum Profile {
    SplineBump {
        amplitude: f64,
        degree: usize,
        half_width: f64,
    },
    WaveletSpike {
        amplitude: f64,
        wavelet: DaubechiesWavelet,
        level: u32,
        shift: i64,
        half_width: f64,
    },
}

impl Profile {
    /// `F*(y)`; zero outside `[-half_width, half_width]`.
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Profile::SplineBump {
                amplitude,
                degree,
                half_width,
            } => {
                let u = (y + half_width) * (*degree as f64 + 1.0) / (2.0 * half_width);
                amplitude * bspline(*degree, u)
            }
            Profile::WaveletSpike {
                amplitude,
                wavelet,
                level,
                shift,
                half_width,
            } => {
                let u = (y + half_width) / (2.0 * half_width);
                amplitude * (2.0 * half_width).sqrt().recip() * wavelet.psi_jk(*level, *shift, u)
            }
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            Profile::SplineBump { amplitude, .. } => *amplitude,
            Profile::WaveletSpike { amplitude, .. } => *amplitude,
        }
    }
}

/// Cardinal B-spline of the given degree on `[0, degree + 1]`.
fn bspline(degree: usize, u: f64) -> f64 {
    if degree == 0 {
        return if (0.0..1.0).contains(&u) { 1.0 } else { 0.0 };
    }
    let p = degree as f64;
    (u / p) * bspline(degree - 1, u) + ((p + 1.0 - u) / p) * bspline(degree - 1, u - 1.0)
}

/// A constructed truth: the nodal field, the composition annotation when the
/// truth is compositional, the 1-D profile for gam kinds, and the computed
/// smoothness proxy.
#[derive(Clone, Debug)]
pub struct Truth {
    spec: TruthSpec,
    field: Field,
    structure: Option<Structure>,
    profile: Option<Profile>,
    proxy_norm: f64,
}

impl Truth {
    pub fn spec(&self) -> &TruthSpec {
        &self.spec
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    pub fn structure(&self) -> Option<&Structure> {
        self.structure.as_ref()
    }

    pub fn profile(&self) -> Option<&Profile> {
        self.profile.as_ref()
    }

    /// Series-Sobolev (or wavelet-coefficient) smoothness proxy of the truth.
    pub fn proxy_norm(&self) -> f64 {
        self.proxy_norm
    }
}

/// Builds the truth on the given ambient grid.
///
/// The grid must be a symmetric box `[-c, c]^d` with `c >= 1`; gam-type
/// fields are multiplied by the cutoff (width `c - 1`) so they vanish at the
/// box boundary. `custom-composition` loads a saved deep-draw directory whose
/// composed field must already live on a compatible grid.
pub fn build_truth(spec: &TruthSpec, grid: &Grid) -> Result<Truth> {
    let spec = spec.clone().validated()?;
    let (d, half_box) = symmetric_box(grid)?;
    if d != spec.ambient_d {
        return Err(Error::config(format!(
            "truth is {}-dimensional but the grid has dimension {d}",
            spec.ambient_d
        )));
    }
    let margin = half_box - 1.0;
    match &spec.kind {
        TruthKind::SmoothBump => build_smooth_bump(spec.clone(), grid, half_box),
        TruthKind::GamSum => {
            let degree = spec.alpha.ceil() as usize;
            let dd = d as f64;
            let raw = Profile::SplineBump {
                amplitude: 1.0,
                degree,
                half_width: dd,
            };
            let raw_norm = profile_proxy(&raw, dd, spec.alpha, 257, 64)?;
            let profile = Profile::SplineBump {
                amplitude: spec.radius / raw_norm,
                degree,
                half_width: dd,
            };
            finish_gam(spec, grid, margin, profile, None)
        }
        TruthKind::WaveletSpikeGam { level } => {
            let level = *level;
            let order = spike_order(spec.alpha)?;
            let wavelet = DaubechiesWavelet::new(order, DEFAULT_LEVEL)?;
            let positions = (1i64 << level) - (2 * order as i64 - 1);
            let shift = positions / 2;
            let amplitude =
                spec.radius * 2f64.powf(-(level as f64) * (2.0 * spec.alpha + 1.0) / 2.0);
            let proxy = amplitude * 2f64.powf(level as f64 * spec.alpha);
            let profile = Profile::WaveletSpike {
                amplitude,
                wavelet,
                level,
                shift,
                half_width: d as f64,
            };
            finish_gam(spec, grid, margin, profile, Some(proxy))
        }
        TruthKind::CustomComposition { path } => build_custom(spec.clone(), grid, path),
    }
}

/// Checks the preconditions of the wavelet-spike lower-bound setting: the
/// truth smoothness must be an integer exceeding `beta + d/2`.
pub fn validate_for_lower_bound(spec: &TruthSpec, beta: u32) -> Result<()> {
    if spec.alpha.fract() != 0.0 {
        return Err(Error::config(format!(
            "lower-bound runs need integer truth smoothness, got alpha = {}",
            spec.alpha
        )));
    }
    let floor = beta as f64 + spec.ambient_d as f64 / 2.0;
    if spec.alpha <= floor {
        return Err(Error::config(format!(
            "lower-bound runs need alpha > beta + d/2 = {floor}, got alpha = {}",
            spec.alpha
        )));
    }
    Ok(())
}

/// Depth-1 annotation of a gam truth: `d` identity components (one
/// coordinate each), then one final component applying `F*` to the sum.
pub fn gam_graph(d: usize) -> Result<GraphSpec> {
    GraphSpec::new(
        vec![d, d],
        vec![1, d],
        vec![
            (0..d).map(|k| vec![k]).collect(),
            vec![(0..d).collect::<Vec<_>>()],
        ],
    )
}

fn symmetric_box(grid: &Grid) -> Result<(usize, f64)> {
    let d = grid.dim();
    let [lo0, hi0] = grid.extent()[0];
    for (k, &[lo, hi]) in grid.extent().iter().enumerate() {
        if (lo + hi).abs() > 1e-12 || (lo - lo0).abs() > 1e-12 || (hi - hi0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "truth grids must be symmetric boxes [-c, c]^d, axis {k} is [{lo}, {hi}]"
            )));
        }
    }
    if hi0 < 1.0 {
        return Err(Error::config(format!(
            "truth grids must cover the unit cube, half-width is {hi0}"
        )));
    }
    Ok((d, hi0))
}

fn build_smooth_bump(spec: TruthSpec, grid: &Grid, half_box: f64) -> Result<Truth> {
    let d = spec.ambient_d;
    // 1-D coefficients of the bump factor; the d-dim proxy follows exactly
    // from the tensor factorization of both the bump and the basis. The
    // alpha-weighted tail of the bump decays slowly, so the factor is
    // resolved to 128 modes (relative truncation error around 2e-4 at
    // alpha = 3); dimension 4 drops to 24 modes to bound the tensor sum.
    let trunc = if d <= 3 { 128 } else { 24 };
    let line = Grid::uniform(1, 513, [-half_box, half_box])?;
    let basis1 = SeriesBasis::new(
        BasisKind::TensorCosine,
        1,
        trunc,
        vec![[-half_box, half_box]],
    )?;
    let bump_line = Field::from_fn(line, "bump factor", |x| bump(x[0]))?;
    let c1 = basis1.analyze(&bump_line)?;
    let raw_norm = tensor_sobolev_norm(&c1, d, spec.alpha);
    if !raw_norm.is_finite() || raw_norm == 0.0 {
        return Err(Error::NonFinite(format!(
            "smooth-bump norm proxy ({raw_norm})"
        )));
    }
    let a = spec.radius / raw_norm;
    let field = Field::from_fn(
        grid.clone(),
        format!(
            "smooth bump truth (alpha {}, radius {}, d {d})",
            spec.alpha, spec.radius
        ),
        |x| a * x.iter().map(|&xi| bump(xi)).product::<f64>(),
    )?;
    Ok(Truth {
        spec,
        field,
        structure: None,
        profile: None,
        proxy_norm: a * raw_norm,
    })
}

fn finish_gam(
    spec: TruthSpec,
    grid: &Grid,
    margin: f64,
    profile: Profile,
    proxy: Option<f64>,
) -> Result<Truth> {
    let d = spec.ambient_d;
    let cutoff = if margin > 0.0 {
        Some(Cutoff::new(d, margin)?)
    } else {
        None
    };
    let label = match &profile {
        Profile::SplineBump { degree, .. } => format!(
            "gam sum truth (spline degree {degree}, alpha {}, radius {}, d {d})",
            spec.alpha, spec.radius
        ),
        Profile::WaveletSpike { wavelet, level, .. } => format!(
            "wavelet spike truth (order {}, level {level}, alpha {}, radius {}, d {d})",
            wavelet.order(),
            spec.alpha,
            spec.radius
        ),
    };
    let field = Field::from_fn(grid.clone(), label, |x| {
        let w = cutoff.as_ref().map_or(1.0, |c| c.eval(x));
        if w == 0.0 {
            return 0.0;
        }
        w * profile.eval(x.iter().sum())
    })?;
    let proxy_norm = match proxy {
        Some(p) => p,
        None => spec.radius,
    };
    let structure = if spec.alpha > d as f64 / 2.0 {
        Some(Structure::new(
            gam_graph(d)?,
            vec![spec.alpha, spec.alpha],
        )?)
    } else {
        None
    };
    Ok(Truth {
        spec,
        field,
        structure,
        profile: Some(profile),
        proxy_norm,
    })
}

fn build_custom(spec: TruthSpec, grid: &Grid, path: &Path) -> Result<Truth> {
    let (structure, _layers, composed) = io::load_deep_draw(path)?;
    if !composed.grid().compatible(grid) {
        return Err(Error::config(format!(
            "saved composition lives on a different grid than the requested one \
             ({} vs {} points per axis)",
            composed.grid().points_per_axis(),
            grid.points_per_axis()
        )));
    }
    let basis = SeriesBasis::new(
        BasisKind::TensorCosine,
        grid.dim(),
        proxy_truncation(grid.dim()).min(grid.points_per_axis().saturating_sub(2)),
        grid.extent().to_vec(),
    )?;
    let coeffs = basis.analyze(&composed)?;
    let proxy_norm = basis.sobolev_norm(&coeffs, spec.alpha)?;
    Ok(Truth {
        spec,
        field: composed,
        structure: Some(structure),
        profile: None,
        proxy_norm,
    })
}

/// `exp(1 - 1/(1 - u^2))` on `(-1, 1)`, zero outside: a C-infinity bump
/// with peak value 1.
fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

fn proxy_truncation(d: usize) -> usize {
    match d {
        1 => 64,
        2 => 32,
        3 => 12,
        _ => 8,
    }
}

/// Series Sobolev norm of a profile on `[-half_width, half_width]`.
fn profile_proxy(
    profile: &Profile,
    half_width: f64,
    alpha: f64,
    points: usize,
    trunc: usize,
) -> Result<f64> {
    let grid = Grid::uniform(1, points, [-half_width, half_width])?;
    let basis = SeriesBasis::new(
        BasisKind::TensorCosine,
        1,
        trunc,
        vec![[-half_width, half_width]],
    )?;
    let field = Field::from_fn(grid, "profile", |x| profile.eval(x[0]))?;
    let coeffs = basis.analyze(&field)?;
    basis.sobolev_norm(&coeffs, alpha)
}

/// Sobolev norm of the d-fold tensor power of a 1-D coefficient sequence:
/// the square is `sum over (j_1..j_d) of (1 + |j|^2)^alpha prod c_{j_k}^2`.
fn tensor_sobolev_norm(c1: &[f64], d: usize, alpha: f64) -> f64 {
    let j_max = c1.len();
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let lambda = 1.0 + idx.iter().map(|&j| (j * j) as f64).sum::<f64>();
        let prod: f64 = idx.iter().map(|&j| c1[j] * c1[j]).product();
        total += lambda.powf(alpha) * prod;
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < j_max {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return total.sqrt();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{compose, DgpPriorConfig, DgpSampler};
    use crate::rng::{module_ids, StreamKey};
    use crate::structure::HyperpriorConfig;

    const AMBIENT_MARGIN: f64 = 0.25;

    fn gam_spec(d: usize) -> TruthSpec {
        TruthSpec {
            kind: TruthKind::GamSum,
            alpha: 3.0,
            radius: 1.0,
            ambient_d: d,
        }
    }

    /// 41 points on [-1.25, 1.25]: spacing 0.0625 is dyadic, so node
    /// coordinates (the origin in particular) are exact.
    fn dyadic_grid(d: usize) -> Grid {
        Grid::ambient(d, 41, AMBIENT_MARGIN).unwrap()
    }

    #[test]
    fn gam_sum_at_the_origin_equals_the_profile_value() {
        let grid = dyadic_grid(2);
        let truth = build_truth(&gam_spec(2), &grid).unwrap();
        let center = grid.index(&[20, 20]);
        let mut x = [f64::NAN; 2];
        grid.node(center, &mut x);
        assert_eq!(x, [0.0, 0.0]);
        let f0 = truth.profile().unwrap().eval(0.0);
        assert!(f0 > 0.0);
        assert_eq!(truth.field().values()[center], f0);
    }

    #[test]
    fn gam_truths_are_permutation_invariant() {
        let grid = dyadic_grid(2);
        for spec in [
            gam_spec(2),
            TruthSpec {
                kind: TruthKind::WaveletSpikeGam { level: 4 },
                alpha: 3.0,
                radius: 1.0,
                ambient_d: 2,
            },
        ] {
            let truth = build_truth(&spec, &grid).unwrap();
            let v = truth.field().values();
            for i in 0..41 {
                for j in 0..i {
                    assert_eq!(
                        v[grid.index(&[i, j])],
                        v[grid.index(&[j, i])],
                        "asymmetry at ({i},{j}) for {:?}",
                        spec.kind
                    );
                }
            }
        }
    }

    #[test]
    fn smooth_bump_is_supported_in_the_cube() {
        let grid = dyadic_grid(2);
        let spec = TruthSpec {
            kind: TruthKind::SmoothBump,
            alpha: 3.0,
            radius: 2.0,
            ambient_d: 2,
        };
        let truth = build_truth(&spec, &grid).unwrap();
        assert!(truth.structure().is_none());
        let v = truth.field().values();
        let center = grid.index(&[20, 20]);
        let mut x = [0.0; 2];
        for idx in 0..grid.n_nodes() {
            grid.node(idx, &mut x);
            if x.iter().any(|xi| xi.abs() >= 1.0) {
                assert_eq!(v[idx], 0.0, "support leak at {x:?}");
            }
            assert!(v[idx] <= v[center]);
        }
        assert!(v[center] > 0.0);
    }

    #[test]
    fn spike_coefficient_matches_the_prescribed_amplitude() {
        let spec = TruthSpec {
            kind: TruthKind::WaveletSpikeGam { level: 4 },
            alpha: 3.0,
            radius: 1.0,
            ambient_d: 2,
        };
        let truth = build_truth(&spec, &dyadic_grid(2)).unwrap();
        let profile = truth.profile().unwrap();
        let Profile::WaveletSpike {
            wavelet,
            level,
            shift,
            half_width,
            ..
        } = profile
        else {
            panic!("spike truth must carry a wavelet profile");
        };
        // Riemann quadrature on a dyadic y-grid aligned with the table.
        let steps = 1usize << 17;
        let dy = 2.0 * half_width / steps as f64;
        let mut inner = 0.0;
        for i in 0..steps {
            let y = -half_width + (i as f64 + 0.5) * dy;
            let u = (y + half_width) / (2.0 * half_width);
            let dual = (2.0 * half_width).sqrt().recip() * wavelet.psi_jk(*level, *shift, u);
            inner += profile.eval(y) * dual * dy;
        }
        let prescribed = 2f64.powf(-(*level as f64) * (2.0 * 3.0 + 1.0) / 2.0);
        assert!(
            (inner.abs() - prescribed).abs() < 1e-6,
            "spike coefficient {inner} differs from prescribed {prescribed}"
        );
        // Smoothness proxy of the spike stays inside the declared ball.
        let proxy = 2f64.powf(*level as f64 * 3.0) * inner.abs();
        assert!(proxy <= spec.radius * NORM_SLACK);
        assert!((truth.proxy_norm() - proxy).abs() < 1e-6);
    }

    #[test]
    fn norm_proxies_survive_a_refined_recomputation() {
        // gam-sum: profile proxy recomputed with a denser grid and a larger
        // truncation must stay within the quadrature slack of the radius.
        let truth = build_truth(&gam_spec(2), &dyadic_grid(2)).unwrap();
        let refined = profile_proxy(truth.profile().unwrap(), 2.0, 3.0, 513, 128).unwrap();
        assert!(refined <= 1.0 * NORM_SLACK, "refined proxy {refined}");
        assert!(refined >= 1.0 / NORM_SLACK, "refined proxy {refined}");

        // smooth bump: the calibration makes the tensor proxy hit the radius.
        let spec = TruthSpec {
            kind: TruthKind::SmoothBump,
            alpha: 3.0,
            radius: 1.5,
            ambient_d: 2,
        };
        let truth = build_truth(&spec, &dyadic_grid(2)).unwrap();
        assert!((truth.proxy_norm() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn factorized_bump_norm_matches_a_direct_two_dimensional_pass() {
        // Same truncation and per-axis resolution on both routes: the
        // tensor-factorized norm of the product bump must agree with
        // analyzing the 2-D field directly (the 2-D trapezoid coefficients
        // of a product field factorize exactly).
        let c = 1.0 + AMBIENT_MARGIN;
        let line = Grid::uniform(1, 129, [-c, c]).unwrap();
        let basis1 = SeriesBasis::new(BasisKind::TensorCosine, 1, 32, vec![[-c, c]]).unwrap();
        let factor = Field::from_fn(line, "factor", |x| bump(x[0])).unwrap();
        let c1 = basis1.analyze(&factor).unwrap();
        let expected = tensor_sobolev_norm(&c1, 2, 3.0);

        let plane = Grid::ambient(2, 129, AMBIENT_MARGIN).unwrap();
        let basis2 =
            SeriesBasis::new(BasisKind::TensorCosine, 2, 32, plane.extent().to_vec()).unwrap();
        let field2 = Field::from_fn(plane, "product bump", |x| bump(x[0]) * bump(x[1])).unwrap();
        let coeffs = basis2.analyze(&field2).unwrap();
        let direct = basis2.sobolev_norm(&coeffs, 3.0).unwrap();
        assert!(
            (direct - expected).abs() <= 1e-7 * expected,
            "direct {direct} vs factorized {expected}"
        );

        // Truncation honesty of the calibration: doubling the mode count
        // past the 128 modes used by the builder moves the weighted norm by
        // far less than the quadrature slack.
        let line = Grid::uniform(1, 1025, [-c, c]).unwrap();
        let basis1 = SeriesBasis::new(BasisKind::TensorCosine, 1, 256, vec![[-c, c]]).unwrap();
        let factor = Field::from_fn(line, "factor", |x| bump(x[0])).unwrap();
        let c1 = basis1.analyze(&factor).unwrap();
        let at_build = tensor_sobolev_norm(&c1[..128], 2, 3.0);
        let at_double = tensor_sobolev_norm(&c1, 2, 3.0);
        assert!(
            at_double <= at_build * NORM_SLACK,
            "tail beyond calibration: {at_build} -> {at_double}"
        );
    }

    #[test]
    fn gam_composition_reproduces_the_direct_evaluation() {
        let grid = dyadic_grid(2);
        let truth = build_truth(&gam_spec(2), &grid).unwrap();
        let profile = truth.profile().unwrap();
        let structure = truth.structure().unwrap();
        let scale = 1.0 + AMBIENT_MARGIN;

        let u0 = Field::from_fn(grid.clone(), "coordinate 0", |x| x[0] / scale).unwrap();
        let u1 = Field::from_fn(grid.clone(), "coordinate 1", |x| x[1] / scale).unwrap();
        let inner = Grid::cube(2, 129).unwrap();
        let h = inner.spacing(0);
        let final_layer = Field::from_fn(inner, "sum then profile", |y| {
            profile.eval(scale * (y[0] + y[1]))
        })
        .unwrap();
        let composed = compose(structure, &[vec![u0, u1], vec![final_layer]], &grid).unwrap();

        // Interpolation-error bound for the multilinear final layer:
        // (h^2/8) * sum of per-axis second-derivative sups.
        let mut d2_max: f64 = 0.0;
        let fd = 1e-4;
        for i in 0..=40_000 {
            let y = -2.0 + i as f64 * 1e-4;
            let d2 =
                (profile.eval(y + fd) - 2.0 * profile.eval(y) + profile.eval(y - fd)) / (fd * fd);
            d2_max = d2_max.max(d2.abs());
        }
        let bound = 2.0 * (h * h / 8.0) * 2.0 * scale * scale * d2_max;

        let mut x = [0.0; 2];
        let mut worst = 0.0f64;
        for idx in 0..grid.n_nodes() {
            grid.node(idx, &mut x);
            let direct = profile.eval(x[0] + x[1]);
            worst = worst.max((composed.values()[idx] - direct).abs());
        }
        assert!(
            worst <= bound,
            "composition error {worst} exceeds twice the interpolation bound {bound}"
        );
    }

    #[test]
    fn custom_composition_round_trips_a_saved_draw() {
        let graph = GraphSpec::new(vec![2], vec![1], vec![vec![vec![0]]]).unwrap();
        let hyper = HyperpriorConfig::new(2, 1, 3.0, 0, vec![(graph, 1.0)]).unwrap();
        let cfg = DgpPriorConfig::new(hyper, 2.0, 65, 0.25).unwrap();
        let sampler = DgpSampler::new(cfg, 500).unwrap();
        let mut rng = StreamKey::new(23, module_ids::EXPERIMENT).rng();
        let draw = sampler.sample(&mut rng).unwrap();

        let dir = tempfile::tempdir().unwrap();
        io::save_deep_draw(&draw, dir.path()).unwrap();

        let spec = TruthSpec {
            kind: TruthKind::CustomComposition {
                path: dir.path().to_path_buf(),
            },
            alpha: 3.0,
            radius: 1.0,
            ambient_d: 2,
        };
        let grid = Grid::ambient(2, 65, 0.25).unwrap();
        let truth = build_truth(&spec, &grid).unwrap();
        assert_eq!(truth.field().values(), draw.composed().values());
        assert_eq!(
            truth.structure().unwrap().graph(),
            draw.structure().graph()
        );
        assert!(truth.proxy_norm().is_finite());

        let other = Grid::ambient(2, 33, 0.25).unwrap();
        assert!(build_truth(&spec, &other).is_err());
    }

    #[test]
    fn constraint_violations_are_rejected() {
        // spike level too small for the support of the order-3 wavelet
        let spec = TruthSpec {
            kind: TruthKind::WaveletSpikeGam { level: 2 },
            alpha: 3.0,
            radius: 1.0,
            ambient_d: 2,
        };
        assert!(build_truth(&spec, &dyadic_grid(2)).is_err());

        // smoothness beyond the available vanishing moments
        let spec = TruthSpec {
            kind: TruthKind::WaveletSpikeGam { level: 6 },
            alpha: 6.0,
            radius: 1.0,
            ambient_d: 2,
        };
        assert!(build_truth(&spec, &dyadic_grid(2)).is_err());

        // asymmetric grid
        let spec = gam_spec(2);
        let skew = Grid::new(2, 33, vec![[-1.25, 1.25], [-1.0, 1.5]]).unwrap();
        assert!(build_truth(&spec, &skew).is_err());

        // lower-bound preset needs integer alpha above beta + d/2
        let spec = gam_spec(2);
        assert!(validate_for_lower_bound(&spec, 2).is_err());
        let ok = TruthSpec { alpha: 4.0, ..spec };
        validate_for_lower_bound(&ok, 2).unwrap();
        let frac = TruthSpec {
            alpha: 4.5,
            ..gam_spec(2)
        };
        assert!(validate_for_lower_bound(&frac, 2).is_err());
    }

    #[test]
    fn truth_specs_round_trip_through_json() {
        let spec = TruthSpec {
            kind: TruthKind::WaveletSpikeGam { level: 4 },
            alpha: 3.0,
            radius: 1.0,
            ambient_d: 2,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("wavelet-spike-gam"));
        let back: TruthSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
