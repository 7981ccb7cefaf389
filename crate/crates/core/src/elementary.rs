//! Elementary layer prior: a truncated Gaussian series, rescaled to the
//! contraction-rate radius and conditioned on norm constraints.
//!
//! An elementary draw on a `t`-dimensional box is
//!
//! ```text
//! Z(x)   = sum_j  xi_j lambda_j^(-alpha/2) e_j(x),     xi_j ~ N(0, 1) iid,
//! Z_n    = (sqrt(n) eps)^(-1) Z,   eps = n^(-alpha / (2 alpha + t)),
//! ```
//!
//! followed by rejection sampling against the layer constraints:
//!
//! * first and inner layers keep draws with `sup |Z_n| <= 1` and
//!   `||Z_n||_{C^beta} <= M0`,
//! * the final layer keeps draws with `||Z_n||_{C^beta} <= M0` only.
//!
//! A first layer lives on the ambient domain: the series is synthesized on
//! the active axes, broadcast along the remaining ones, and multiplied by
//! the ambient cutoff before the constraints are checked.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::SeriesBasis;
use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::norms::{norms, MAX_HOLDER_ORDER};

/// Default cap on rejection-sampling attempts per conditioned draw.
pub const DEFAULT_MAX_REJECTIONS: u32 = 10_000;

/// Contraction-rate parameters `(n, alpha, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub n: u64,
    pub alpha: f64,
    pub t: u32,
}

impl RateParams {
    pub fn new(n: u64, alpha: f64, t: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::config("sample size n must be at least 1"));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config(format!(
                "smoothness alpha must be positive and finite, got {alpha}"
            )));
        }
        if t < 1 {
            return Err(Error::config("layer dimension t must be at least 1"));
        }
        Ok(RateParams { n, alpha, t })
    }

    /// The rate `eps = n^(-alpha / (2 alpha + t))`.
    pub fn epsilon(&self) -> f64 {
        let expo = -self.alpha / (2.0 * self.alpha + self.t as f64);
        (self.n as f64).powf(expo)
    }

    /// The layer rescaling `(sqrt(n) eps)^(-1) = n^(-t / (2 (2 alpha + t)))`.
    pub fn rescale_factor(&self) -> f64 {
        1.0 / ((self.n as f64).sqrt() * self.epsilon())
    }
}

/// Position of a layer inside the composition, which decides the constraint set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    /// Ambient-domain layer: cutoff applied, sup and Holder constraints.
    First,
    /// Unit-cube layer feeding another layer: sup and Holder constraints.
    Inner,
    /// Outermost layer: Holder constraint only.
    Final,
}

impl LayerKind {
    /// Whether draws of this kind must stay inside the closed unit sup-ball.
    pub fn requires_unit_sup(&self) -> bool {
        matches!(self, LayerKind::First | LayerKind::Inner)
    }
}

/// Per-axis truncation used throughout: 32 modes per axis up to two
/// dimensions, 16 in three.
pub fn default_truncation(t: u32) -> usize {
    if t <= 2 {
        32
    } else {
        16
    }
}

/// Nodes per axis for layer synthesis grids: 129 / 65 / 33 for t = 1 / 2 / 3.
pub fn default_layer_points(t: u32) -> usize {
    match t {
        1 => 129,
        2 => 65,
        _ => 33,
    }
}

/// Everything needed to draw one conditioned elementary layer.
#[derive(Clone, Debug)]
pub struct ElementaryConfig {
    rate: RateParams,
    beta: u32,
    m0: f64,
    layer_kind: LayerKind,
    basis: SeriesBasis,
    grid: Grid,
    active_axes: Option<Vec<usize>>,
    cutoff: Option<Cutoff>,
    max_rejections: u32,
}

/// One sampled layer: series coefficients, the synthesized field on the
/// layer grid, and how many rejection-sampling attempts it took.
#[derive(Clone, Debug)]
pub struct LayerDraw {
    pub coeffs: Vec<f64>,
    pub field: Field,
    pub attempts: u32,
}

impl ElementaryConfig {
    /// Validates the pieces against each other.
    ///
    /// `active_axes`, when present, maps basis axis `k` to grid axis
    /// `active_axes[k]`; the series is constant along the remaining grid
    /// axes. When absent the basis must match the grid dimension.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rate: RateParams,
        beta: u32,
        m0: f64,
        layer_kind: LayerKind,
        basis: SeriesBasis,
        grid: Grid,
        active_axes: Option<Vec<usize>>,
        cutoff: Option<Cutoff>,
    ) -> Result<Self> {
        if beta < 1 || beta > MAX_HOLDER_ORDER {
            return Err(Error::config(format!(
                "Holder order beta must lie in 1..={MAX_HOLDER_ORDER}, got {beta}"
            )));
        }
        if !(m0.is_finite() && m0 >= 1.0) {
            return Err(Error::config(format!(
                "constraint radius M0 must be >= 1, got {m0}"
            )));
        }
        if basis.dim() != rate.t as usize {
            return Err(Error::config(format!(
                "basis dimension {} does not match layer dimension t = {}",
                basis.dim(),
                rate.t
            )));
        }
        match &active_axes {
            Some(axes) => {
                if axes.len() != basis.dim() {
                    return Err(Error::config(format!(
                        "active_axes has {} entries for a {}-dimensional basis",
                        axes.len(),
                        basis.dim()
                    )));
                }
                for window in axes.windows(2) {
                    if window[1] <= window[0] {
                        return Err(Error::config(
                            "active_axes must be strictly increasing",
                        ));
                    }
                }
                for (k, &axis) in axes.iter().enumerate() {
                    if axis >= grid.dim() {
                        return Err(Error::config(format!(
                            "active axis {axis} out of range for a {}-dimensional grid",
                            grid.dim()
                        )));
                    }
                    let dom = basis.domain()[k];
                    let ext = grid.extent()[axis];
                    if (dom[0] - ext[0]).abs() > 1e-9 || (dom[1] - ext[1]).abs() > 1e-9 {
                        return Err(Error::config(format!(
                            "basis axis {k} domain [{}, {}] does not match grid axis {axis} extent [{}, {}]",
                            dom[0], dom[1], ext[0], ext[1]
                        )));
                    }
                }
            }
            None => {
                if basis.dim() != grid.dim() {
                    return Err(Error::config(format!(
                        "basis dimension {} does not match grid dimension {} and no active_axes given",
                        basis.dim(),
                        grid.dim()
                    )));
                }
            }
        }
        if let Some(c) = &cutoff {
            if c.dim() != grid.dim() {
                return Err(Error::config(format!(
                    "cutoff dimension {} does not match grid dimension {}",
                    c.dim(),
                    grid.dim()
                )));
            }
        }
        if grid.points_per_axis() < 2 * beta as usize + 3 {
            return Err(Error::config(format!(
                "grid needs at least {} points per axis for beta = {beta} norms, has {}",
                2 * beta as usize + 3,
                grid.points_per_axis()
            )));
        }
        let cfg = ElementaryConfig {
            rate,
            beta,
            m0,
            layer_kind,
            basis,
            grid,
            active_axes,
            cutoff,
            max_rejections: DEFAULT_MAX_REJECTIONS,
        };
        // Dry run to surface any basis/grid mismatch (truncation headroom,
        // domain drift) at construction time rather than mid-chain.
        let zeros = vec![0.0; cfg.basis.n_modes()];
        cfg.basis.synthesize(&zeros, &cfg.synth_grid()?)?;
        Ok(cfg)
    }

    pub fn with_max_rejections(mut self, max_rejections: u32) -> Result<Self> {
        if max_rejections == 0 {
            return Err(Error::config("max_rejections must be at least 1"));
        }
        self.max_rejections = max_rejections;
        Ok(self)
    }

    pub fn rate(&self) -> RateParams {
        self.rate
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn layer_kind(&self) -> LayerKind {
        self.layer_kind
    }

    pub fn basis(&self) -> &SeriesBasis {
        self.basis_ref()
    }

    fn basis_ref(&self) -> &SeriesBasis {
        &self.basis
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn max_rejections(&self) -> u32 {
        self.max_rejections
    }

    /// Grid the series is synthesized on: the layer grid itself, or its
    /// restriction to the active axes.
    pub fn synth_grid(&self) -> Result<Grid> {
        match &self.active_axes {
            None => Ok(self.grid.clone()),
            Some(axes) => {
                let extent = axes.iter().map(|&a| self.grid.extent()[a]).collect();
                Grid::new(axes.len(), self.grid.points_per_axis(), extent)
            }
        }
    }

    /// Standard-normal mode coefficients, one per basis mode.
    pub fn sample_xis<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.basis.n_modes())
            .map(|_| StandardNormal.sample(rng))
            .collect()
    }

    /// Series coefficients `c_j = xi_j lambda_j^(-alpha/2)`.
    pub fn coeffs_from_xis(&self, xis: &[f64]) -> Result<Vec<f64>> {
        if xis.len() != self.basis.n_modes() {
            return Err(Error::config(format!(
                "expected {} mode variables, got {}",
                self.basis.n_modes(),
                xis.len()
            )));
        }
        Ok(xis
            .iter()
            .enumerate()
            .map(|(k, &xi)| xi * self.basis.weight(k, self.rate.alpha))
            .collect())
    }

    /// Synthesizes coefficients onto the layer grid, broadcasting along
    /// inactive axes. No cutoff, no rescaling.
    pub fn field_from_coeffs(&self, coeffs: &[f64]) -> Result<Field> {
        self.build_field(coeffs, false)
    }

    /// Same as [`field_from_coeffs`](Self::field_from_coeffs) but multiplied
    /// by the ambient cutoff when one is configured.
    pub fn layer_field_from_coeffs(&self, coeffs: &[f64]) -> Result<Field> {
        self.build_field(coeffs, true)
    }

    fn build_field(&self, coeffs: &[f64], with_cutoff: bool) -> Result<Field> {
        let synth_grid = self.synth_grid()?;
        let low = self.basis.synthesize(coeffs, &synth_grid)?;
        let mut values = match &self.active_axes {
            None => low.values().to_vec(),
            Some(axes) => {
                let mut out = vec![0.0; self.grid.n_nodes()];
                let mut multi = vec![0usize; self.grid.dim()];
                let mut sub = vec![0usize; axes.len()];
                for (idx, slot) in out.iter_mut().enumerate() {
                    self.grid.multi_index(idx, &mut multi);
                    for (k, &a) in axes.iter().enumerate() {
                        sub[k] = multi[a];
                    }
                    *slot = low.values()[synth_grid.index(&sub)];
                }
                out
            }
        };
        if with_cutoff {
            if let Some(c) = &self.cutoff {
                let mut x = vec![0.0; self.grid.dim()];
                for (idx, v) in values.iter_mut().enumerate() {
                    self.grid.node(idx, &mut x);
                    *v *= c.eval(&x);
                }
            }
        }
        Field::new(
            self.grid.clone(),
            values,
            format!(
                "elementary n={} alpha={} t={}",
                self.rate.n, self.rate.alpha, self.rate.t
            ),
        )
    }

    /// Unscaled series draw.
    pub fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LayerDraw> {
        let xis = self.sample_xis(rng);
        let coeffs = self.coeffs_from_xis(&xis)?;
        let field = self.field_from_coeffs(&coeffs)?;
        Ok(LayerDraw {
            coeffs,
            field,
            attempts: 1,
        })
    }

    /// Series draw scaled by `(sqrt(n) eps)^(-1)`.
    pub fn sample_rescaled<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LayerDraw> {
        let xis = self.sample_xis(rng);
        let coeffs = self.rescaled_coeffs(&xis)?;
        let field = self.field_from_coeffs(&coeffs)?;
        Ok(LayerDraw {
            coeffs,
            field,
            attempts: 1,
        })
    }

    /// Series coefficients of a rescaled draw with the given mode variables:
    /// `c_j = xi_j lambda_j^(-alpha/2) (sqrt(n) eps)^(-1)`. This is the
    /// reference Gaussian law pCN proposals mix toward.
    pub fn rescaled_coeffs(&self, xis: &[f64]) -> Result<Vec<f64>> {
        let factor = self.rate.rescale_factor();
        let mut coeffs = self.coeffs_from_xis(xis)?;
        for c in &mut coeffs {
            *c *= factor;
        }
        Ok(coeffs)
    }

    /// Whether a candidate layer field satisfies this layer's constraints.
    pub fn accepts(&self, field: &Field) -> Result<bool> {
        let report = norms(field, self.beta)?;
        if self.layer_kind.requires_unit_sup() && report.sup > 1.0 {
            return Ok(false);
        }
        Ok(report.cbeta(self.beta) <= self.m0)
    }

    /// Rejection-samples a rescaled draw until the layer constraints hold.
    ///
    /// The accepted draw is the rescaled draw itself (cutoff applied for
    /// first layers), bit for bit. Exhausting `max_rejections` attempts
    /// yields a rejection-budget error carrying the Laplace-smoothed
    /// acceptance estimate `1 / (attempts + 1)`.
    pub fn sample_conditioned<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LayerDraw> {
        for attempt in 1..=self.max_rejections {
            let xis = self.sample_xis(rng);
            let coeffs = self.rescaled_coeffs(&xis)?;
            let field = self.layer_field_from_coeffs(&coeffs)?;
            if self.accepts(&field)? {
                return Ok(LayerDraw {
                    coeffs,
                    field,
                    attempts: attempt,
                });
            }
        }
        Err(Error::RejectionBudget {
            attempts: self.max_rejections,
            acceptance_estimate: 1.0 / (self.max_rejections as f64 + 1.0),
            context: format!(
                "elementary layer (n={}, alpha={}, t={}, {:?})",
                self.rate.n, self.rate.alpha, self.rate.t, self.layer_kind
            ),
        })
    }

    /// Empirical acceptance fraction over `trials` independent rescaled
    /// draws. Used to size rejection budgets and to study how conditioning
    /// loosens as n grows.
    pub fn estimate_acceptance<R: Rng + ?Sized>(
        &self,
        trials: u32,
        rng: &mut R,
    ) -> Result<f64> {
        if trials == 0 {
            return Err(Error::config("acceptance estimate needs at least 1 trial"));
        }
        let mut accepted = 0u32;
        for _ in 0..trials {
            let xis = self.sample_xis(rng);
            let coeffs = self.rescaled_coeffs(&xis)?;
            let field = self.layer_field_from_coeffs(&coeffs)?;
            if self.accepts(&field)? {
                accepted += 1;
            }
        }
        Ok(accepted as f64 / trials as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;
    use crate::rng::{module_ids, StreamKey};

    const RATE_TOL: f64 = 1e-12;

    fn unit_config(n: u64, alpha: f64, trunc: usize, points: usize) -> ElementaryConfig {
        let rate = RateParams::new(n, alpha, 1).unwrap();
        let basis = SeriesBasis::cube(BasisKind::TensorCosine, 1, trunc).unwrap();
        let grid = Grid::cube(1, points).unwrap();
        ElementaryConfig::new(rate, 1, 2.0, LayerKind::Inner, basis, grid, None, None)
            .unwrap()
    }

    #[test]
    fn epsilon_rate_spot_values() {
        // 10000^(-1/4) = 0.1 and 81^(-1/3) = 0.23112042478...
        let r1 = RateParams::new(10_000, 1.0, 2).unwrap();
        assert!((r1.epsilon() - 0.1).abs() < RATE_TOL);
        let r2 = RateParams::new(81, 1.0, 1).unwrap();
        assert!((r2.epsilon() - 0.231120424783545).abs() < 1e-12);
    }

    #[test]
    fn epsilon_rate_monotonicity() {
        let base = RateParams::new(1000, 2.0, 1).unwrap();
        let more_data = RateParams::new(4000, 2.0, 1).unwrap();
        let higher_dim = RateParams::new(1000, 2.0, 3).unwrap();
        let smoother = RateParams::new(1000, 3.0, 1).unwrap();
        assert!(more_data.epsilon() < base.epsilon());
        assert!(higher_dim.epsilon() > base.epsilon());
        assert!(smoother.epsilon() < base.epsilon());
    }

    #[test]
    fn rescale_factor_matches_closed_form() {
        let rate = RateParams::new(500, 1.5, 2).unwrap();
        let expected = (500f64).powf(-2.0 / (2.0 * (2.0 * 1.5 + 2.0)));
        assert!((rate.rescale_factor() - expected).abs() < RATE_TOL);
    }

    #[test]
    fn zero_mode_variables_give_zero_field() {
        let cfg = unit_config(100, 2.0, 8, 33);
        let xis = vec![0.0; cfg.basis().n_modes()];
        let coeffs = cfg.coeffs_from_xis(&xis).unwrap();
        let field = cfg.field_from_coeffs(&coeffs).unwrap();
        assert!(field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rescaled_coefficients_scale_linearly() {
        let cfg = unit_config(400, 1.0, 8, 33);
        let mut rng_a = StreamKey::new(7, module_ids::ELEMENTARY).rng();
        let mut rng_b = StreamKey::new(7, module_ids::ELEMENTARY).rng();
        let raw = cfg.sample_raw(&mut rng_a).unwrap();
        let rescaled = cfg.sample_rescaled(&mut rng_b).unwrap();
        let factor = cfg.rate().rescale_factor();
        for (c_raw, c_scaled) in raw.coeffs.iter().zip(&rescaled.coeffs) {
            assert_eq!(*c_scaled, c_raw * factor);
        }
        for (v_raw, v_scaled) in raw.field.values().iter().zip(rescaled.field.values()) {
            assert!((v_scaled - v_raw * factor).abs() <= 1e-12 * v_raw.abs().max(1.0));
        }
    }

    #[test]
    fn raw_sampler_matches_series_covariance() {
        let cfg = unit_config(100, 2.0, 8, 33);
        let n_draws = 20_000usize;
        let node_a = 11usize;
        let node_b = 23usize;
        let x_a = [cfg.grid().coord(0, node_a)];
        let x_b = [cfg.grid().coord(0, node_b)];

        // Closed-form series covariance at the two nodes.
        let basis = cfg.basis();
        let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
        for k in 0..basis.n_modes() {
            let w2 = basis.weight(k, cfg.rate().alpha).powi(2);
            let ea = basis.eval_mode(k, &x_a);
            let eb = basis.eval_mode(k, &x_b);
            var_a += w2 * ea * ea;
            var_b += w2 * eb * eb;
            cov += w2 * ea * eb;
        }

        let mut rng = StreamKey::new(42, module_ids::ELEMENTARY).rng();
        let (mut sum_a, mut sum_b, mut sum_aa, mut sum_bb, mut sum_ab) =
            (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n_draws {
            let draw = cfg.sample_raw(&mut rng).unwrap();
            let va = draw.field.values()[node_a];
            let vb = draw.field.values()[node_b];
            sum_a += va;
            sum_b += vb;
            sum_aa += va * va;
            sum_bb += vb * vb;
            sum_ab += va * vb;
        }
        let nf = n_draws as f64;
        let mean_a = sum_a / nf;
        let mean_b = sum_b / nf;
        let sample_var_a = sum_aa / nf - mean_a * mean_a;
        let sample_var_b = sum_bb / nf - mean_b * mean_b;
        let sample_cov = sum_ab / nf - mean_a * mean_b;

        // Var of a sample variance of a Gaussian is 2 sigma^4 / N.
        let se_a = (2.0 / nf).sqrt() * var_a;
        let se_b = (2.0 / nf).sqrt() * var_b;
        let se_ab = ((var_a * var_b + cov * cov) / nf).sqrt();
        assert!(
            (sample_var_a - var_a).abs() <= 3.0 * se_a,
            "variance at node {node_a}: sample {sample_var_a}, series {var_a}"
        );
        assert!(
            (sample_var_b - var_b).abs() <= 3.0 * se_b,
            "variance at node {node_b}: sample {sample_var_b}, series {var_b}"
        );
        assert!(
            (sample_cov - cov).abs() <= 3.0 * se_ab,
            "covariance: sample {sample_cov}, series {cov}"
        );
    }

    #[test]
    fn conditioned_draws_satisfy_constraints() {
        let cfg = unit_config(1000, 3.0, 16, 33);
        let mut rng = StreamKey::new(5, module_ids::ELEMENTARY).rng();
        for _ in 0..20 {
            let draw = cfg.sample_conditioned(&mut rng).unwrap();
            assert!(draw.attempts >= 1);
            let report = norms(&draw.field, cfg.beta()).unwrap();
            assert!(report.sup <= 1.0);
            assert!(report.cbeta(cfg.beta()) <= cfg.m0());
        }
    }

    #[test]
    fn final_layer_skips_sup_constraint() {
        // Rough draws (low alpha, tiny n) essentially never fit in the unit
        // sup-ball, but a generous M0 lets the final-layer constraint pass.
        let rate = RateParams::new(2, 0.8, 1).unwrap();
        let basis = SeriesBasis::cube(BasisKind::TensorCosine, 1, 16).unwrap();
        let grid = Grid::cube(1, 33).unwrap();
        let cfg = ElementaryConfig::new(
            rate,
            1,
            60.0,
            LayerKind::Final,
            basis,
            grid,
            None,
            None,
        )
        .unwrap();
        let mut rng = StreamKey::new(11, module_ids::ELEMENTARY).rng();
        let draw = cfg.sample_conditioned(&mut rng).unwrap();
        let report = norms(&draw.field, 1).unwrap();
        assert!(report.cbeta(1) <= 60.0);
    }

    #[test]
    fn rejection_budget_error_reports_attempts() {
        // alpha barely above t/2 at n = 2 leaves the C^1 norm far above 1,
        // so acceptance is effectively impossible.
        let rate = RateParams::new(2, 0.8, 1).unwrap();
        let basis = SeriesBasis::cube(BasisKind::TensorCosine, 1, 32).unwrap();
        let grid = Grid::cube(1, 65).unwrap();
        let cfg = ElementaryConfig::new(
            rate,
            1,
            1.0,
            LayerKind::Inner,
            basis,
            grid,
            None,
            None,
        )
        .unwrap()
        .with_max_rejections(16)
        .unwrap();
        let mut rng = StreamKey::new(3, module_ids::ELEMENTARY).rng();
        match cfg.sample_conditioned(&mut rng) {
            Err(Error::RejectionBudget {
                attempts,
                acceptance_estimate,
                ..
            }) => {
                assert_eq!(attempts, 16);
                assert!(acceptance_estimate > 0.0 && acceptance_estimate < 0.1);
            }
            other => panic!("expected rejection-budget error, got {other:?}"),
        }
    }

    #[test]
    fn broadcast_layer_is_constant_along_inactive_axes() {
        let rate = RateParams::new(100, 2.0, 1).unwrap();
        let basis =
            SeriesBasis::new(BasisKind::TensorCosine, 1, 8, vec![[-1.25, 1.25]]).unwrap();
        let grid = Grid::ambient(2, 17, 0.25).unwrap();
        let cfg = ElementaryConfig::new(
            rate,
            1,
            4.0,
            LayerKind::First,
            basis,
            grid.clone(),
            Some(vec![0]),
            None,
        )
        .unwrap();
        let mut rng = StreamKey::new(9, module_ids::ELEMENTARY).rng();
        let draw = cfg.sample_raw(&mut rng).unwrap();
        for i in 0..grid.points_per_axis() {
            let reference = draw.field.values()[grid.index(&[i, 0])];
            for j in 1..grid.points_per_axis() {
                assert_eq!(draw.field.values()[grid.index(&[i, j])], reference);
            }
        }
    }

    #[test]
    fn first_layer_cutoff_vanishes_on_boundary() {
        let rate = RateParams::new(100, 2.0, 1).unwrap();
        let basis =
            SeriesBasis::new(BasisKind::TensorCosine, 1, 8, vec![[-1.25, 1.25]]).unwrap();
        let grid = Grid::ambient(2, 17, 0.25).unwrap();
        let cfg = ElementaryConfig::new(
            rate,
            1,
            4.0,
            LayerKind::First,
            basis,
            grid.clone(),
            Some(vec![0]),
            Some(Cutoff::new(2, 0.25).unwrap()),
        )
        .unwrap();
        let mut rng = StreamKey::new(9, module_ids::ELEMENTARY).rng();
        let xis = cfg.sample_xis(&mut rng);
        let coeffs = cfg.coeffs_from_xis(&xis).unwrap();
        let field = cfg.layer_field_from_coeffs(&coeffs).unwrap();
        let m = grid.points_per_axis();
        for i in 0..m {
            assert_eq!(field.values()[grid.index(&[i, 0])], 0.0);
            assert_eq!(field.values()[grid.index(&[i, m - 1])], 0.0);
            assert_eq!(field.values()[grid.index(&[0, i])], 0.0);
            assert_eq!(field.values()[grid.index(&[m - 1, i])], 0.0);
        }
    }

    #[test]
    fn identical_stream_keys_reproduce_draws() {
        let cfg = unit_config(1000, 3.0, 16, 33);
        let mut rng_a = StreamKey::new(77, module_ids::ELEMENTARY)
            .with_replicate(2)
            .with_layer(1)
            .rng();
        let mut rng_b = StreamKey::new(77, module_ids::ELEMENTARY)
            .with_replicate(2)
            .with_layer(1)
            .rng();
        let a = cfg.sample_conditioned(&mut rng_a).unwrap();
        let b = cfg.sample_conditioned(&mut rng_b).unwrap();
        assert_eq!(a.attempts, b.attempts);
        assert_eq!(a.coeffs, b.coeffs);
        assert_eq!(a.field.values(), b.field.values());
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let rate = RateParams::new(100, 2.0, 1).unwrap();
        let basis = SeriesBasis::cube(BasisKind::TensorCosine, 1, 8).unwrap();
        let grid = Grid::cube(1, 33).unwrap();

        let small_m0 = ElementaryConfig::new(
            rate,
            1,
            0.5,
            LayerKind::Inner,
            basis.clone(),
            grid.clone(),
            None,
            None,
        );
        assert!(matches!(small_m0, Err(Error::Config(_))));

        let bad_axis = ElementaryConfig::new(
            rate,
            1,
            2.0,
            LayerKind::First,
            basis.clone(),
            grid.clone(),
            Some(vec![3]),
            None,
        );
        assert!(matches!(bad_axis, Err(Error::Config(_))));

        let dim_mismatch = ElementaryConfig::new(
            rate,
            1,
            2.0,
            LayerKind::Inner,
            basis,
            Grid::cube(2, 33).unwrap(),
            None,
            None,
        );
        assert!(matches!(dim_mismatch, Err(Error::Config(_))));

        let bad_rate = RateParams::new(0, 1.0, 1);
        assert!(matches!(bad_rate, Err(Error::Config(_))));
        let bad_alpha = RateParams::new(10, -1.0, 1);
        assert!(matches!(bad_alpha, Err(Error::Config(_))));
    }

    #[test]
    fn acceptance_estimate_runs_and_bounds() {
        let cfg = unit_config(10_000, 3.0, 16, 33);
        let mut rng = StreamKey::new(21, module_ids::ELEMENTARY).rng();
        let frac = cfg.estimate_acceptance(200, &mut rng).unwrap();
        assert!((0.0..=1.0).contains(&frac));
        // At n = 10^4 with alpha = 3 the rescaled draws are small; most
        // should clear sup <= 1 and C^1 <= 2.
        assert!(frac > 0.5, "acceptance fraction {frac} unexpectedly low");
    }
}
