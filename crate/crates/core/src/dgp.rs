//! Deep Gaussian process draws: structure sampling, per-component
//! elementary draws, and their composition into one ambient field.
//!
//! A draw with structure `eta = (graph, alphas)` is
//!
//! ```text
//! theta = theta_q o ... o theta_0,
//! ```
//!
//! where component `j` of layer `i` is a conditioned elementary field on
//! `[-1,1]^{t_i}` reading the active coordinates `S_ij` of the previous
//! layer's output. Layer 0 lives on the ambient box with the cutoff
//! applied; inner components map into `[-1,1]` by their sup-norm
//! conditioning, so the composition is defined pointwise. Evaluation
//! clamps intermediates to `[-1,1]` and treats an overshoot beyond
//! [`CLAMP_TOL`] as a violated constraint.

use rand::Rng;

use crate::basis::{BasisKind, SeriesBasis};
use crate::cutoff::Cutoff;
use crate::elementary::{
    default_layer_points, default_truncation, ElementaryConfig, LayerDraw, LayerKind,
    RateParams, DEFAULT_MAX_REJECTIONS,
};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::structure::{HyperpriorConfig, Structure, StructureSampler};

/// How far an interpolated intermediate may overshoot the unit cube before
/// composition treats it as a constraint violation.
pub const CLAMP_TOL: f64 = 1e-9;

/// Prior over deep draws: hyperprior on structures plus the pieces shared
/// by every elementary layer.
#[derive(Clone, Debug)]
pub struct DgpPriorConfig {
    hyperprior: HyperpriorConfig,
    m0: f64,
    ambient_grid: Grid,
    cutoff: Cutoff,
    max_rejections: u32,
}

impl DgpPriorConfig {
    /// The ambient box is `[-(1+margin), 1+margin]^d` with `points` nodes
    /// per axis; observations live in the inner unit cube where the cutoff
    /// is exactly 1.
    pub fn new(
        hyperprior: HyperpriorConfig,
        m0: f64,
        points_per_axis: usize,
        margin: f64,
    ) -> Result<Self> {
        let d = hyperprior.ambient_d();
        let ambient_grid = Grid::ambient(d, points_per_axis, margin)?;
        let cutoff = Cutoff::new(d, margin)?;
        if !(m0.is_finite() && m0 >= 1.0) {
            return Err(Error::config(format!(
                "constraint radius M0 must be >= 1, got {m0}"
            )));
        }
        Ok(DgpPriorConfig {
            hyperprior,
            m0,
            ambient_grid,
            cutoff,
            max_rejections: DEFAULT_MAX_REJECTIONS,
        })
    }

    pub fn with_max_rejections(mut self, max_rejections: u32) -> Result<Self> {
        if max_rejections == 0 {
            return Err(Error::config("max_rejections must be at least 1"));
        }
        self.max_rejections = max_rejections;
        Ok(self)
    }

    pub fn hyperprior(&self) -> &HyperpriorConfig {
        &self.hyperprior
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn ambient_grid(&self) -> &Grid {
        &self.ambient_grid
    }

    pub fn cutoff(&self) -> &Cutoff {
        &self.cutoff
    }

    pub fn max_rejections(&self) -> u32 {
        self.max_rejections
    }
}

/// One deep draw: the structure, every component draw, and the composed
/// ambient field.
#[derive(Clone, Debug)]
pub struct DeepDraw {
    structure: Structure,
    components: Vec<Vec<LayerDraw>>,
    composed: Field,
}

impl DeepDraw {
    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    /// Component draw `(layer, j)` with its coefficients and attempt count.
    pub fn component(&self, layer: usize, j: usize) -> &LayerDraw {
        &self.components[layer][j]
    }

    pub fn components(&self) -> &[Vec<LayerDraw>] {
        &self.components
    }

    pub fn composed(&self) -> &Field {
        &self.composed
    }

    pub fn into_parts(self) -> (Structure, Vec<Vec<LayerDraw>>, Field) {
        (self.structure, self.components, self.composed)
    }
}

/// Evaluates the composition at every node of the ambient grid.
///
/// `layers[i][j]` is the field of component `j` at layer `i`: layer 0 on
/// the ambient grid, higher layers on `[-1,1]^{t_i}`.
pub fn compose(structure: &Structure, layers: &[Vec<Field>], ambient: &Grid) -> Result<Field> {
    check_layer_shapes(structure, layers, ambient)?;
    let graph = structure.graph();
    let q = graph.depth();
    let n_nodes = ambient.n_nodes();
    let mut composed = vec![0.0; n_nodes];
    let mut cur: Vec<f64> = Vec::new();
    let mut next: Vec<f64> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    for idx in 0..n_nodes {
        cur.clear();
        for field in &layers[0] {
            cur.push(field.values()[idx]);
        }
        if q == 0 {
            composed[idx] = cur[0];
            continue;
        }
        clamp_layer(&mut cur, 0)?;
        for i in 1..=q {
            next.clear();
            for (j, field) in layers[i].iter().enumerate() {
                y.clear();
                for &s in graph.active_set(i, j) {
                    y.push(cur[s]);
                }
                next.push(field.eval(&y)?);
            }
            if i < q {
                clamp_layer(&mut next, i)?;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        composed[idx] = cur[0];
    }
    Field::new(
        ambient.clone(),
        composed,
        format!("dgp composed (depth {q})"),
    )
}

fn clamp_layer(values: &mut [f64], layer: usize) -> Result<()> {
    for (j, v) in values.iter_mut().enumerate() {
        if v.abs() > 1.0 + CLAMP_TOL {
            return Err(Error::Composition {
                layer,
                component: j,
                value: *v,
                tol: CLAMP_TOL,
            });
        }
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(())
}

fn check_layer_shapes(structure: &Structure, layers: &[Vec<Field>], ambient: &Grid) -> Result<()> {
    let graph = structure.graph();
    let q = graph.depth();
    if layers.len() != q + 1 {
        return Err(Error::config(format!(
            "expected {} layers, got {}",
            q + 1,
            layers.len()
        )));
    }
    for (i, layer) in layers.iter().enumerate() {
        if layer.len() != graph.n_components(i) {
            return Err(Error::config(format!(
                "layer {i} has {} components, expected {}",
                layer.len(),
                graph.n_components(i)
            )));
        }
        for (j, field) in layer.iter().enumerate() {
            if i == 0 {
                if !field.grid().compatible(ambient) {
                    return Err(Error::config(format!(
                        "layer 0 component {j} is not on the ambient grid"
                    )));
                }
            } else {
                let t = graph.intrinsic()[i];
                if field.grid().dim() != t {
                    return Err(Error::config(format!(
                        "layer {i} component {j} is {}-dimensional, expected {t}",
                        field.grid().dim()
                    )));
                }
                for k in 0..t {
                    let [lo, hi] = field.grid().extent()[k];
                    if (lo + 1.0).abs() > 1e-12 || (hi - 1.0).abs() > 1e-12 {
                        return Err(Error::config(format!(
                            "layer {i} component {j} must live on [-1,1]^{t}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Repeated-draw sampler bundling the reweighted structure table with the
/// layer machinery.
#[derive(Clone, Debug)]
pub struct DgpSampler {
    cfg: DgpPriorConfig,
    n: u64,
    structures: StructureSampler,
}

impl DgpSampler {
    pub fn new(cfg: DgpPriorConfig, n: u64) -> Result<Self> {
        let structures = cfg.hyperprior.sampler(n)?;
        Ok(DgpSampler {
            cfg,
            n,
            structures,
        })
    }

    pub fn config(&self) -> &DgpPriorConfig {
        &self.cfg
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn structures(&self) -> &StructureSampler {
        &self.structures
    }

    /// Elementary configuration of component `(layer, j)` under a structure.
    ///
    /// Layer 0 synthesizes on its active ambient axes, is broadcast, and
    /// carries the cutoff; it is conditioned as a first layer (final when
    /// the depth is zero). Higher layers live on the unit cube and are
    /// inner except for the top one.
    pub fn layer_config(&self, structure: &Structure, layer: usize, j: usize) -> Result<ElementaryConfig> {
        let graph = structure.graph();
        let q = graph.depth();
        let t = graph.intrinsic()[layer];
        let rate = RateParams::new(self.n, structure.alphas()[layer], t as u32)?;
        let beta = self.cfg.hyperprior.beta();
        let trunc = default_truncation(t as u32);
        let (kind, basis, grid, active_axes, cutoff) = if layer == 0 {
            let kind = if q == 0 {
                LayerKind::Final
            } else {
                LayerKind::First
            };
            let axes: Vec<usize> = graph.active_set(0, j).to_vec();
            let domain: Vec<[f64; 2]> = axes
                .iter()
                .map(|&a| self.cfg.ambient_grid.extent()[a])
                .collect();
            let basis = SeriesBasis::new(BasisKind::TensorCosine, t, trunc, domain)?;
            (
                kind,
                basis,
                self.cfg.ambient_grid.clone(),
                Some(axes),
                Some(self.cfg.cutoff.clone()),
            )
        } else {
            let kind = if layer == q {
                LayerKind::Final
            } else {
                LayerKind::Inner
            };
            let basis = SeriesBasis::cube(BasisKind::TensorCosine, t, trunc)?;
            let grid = Grid::cube(t, default_layer_points(t as u32))?;
            (kind, basis, grid, None, None)
        };
        ElementaryConfig::new(
            rate,
            beta,
            self.cfg.m0,
            kind,
            basis,
            grid,
            active_axes,
            cutoff,
        )?
        .with_max_rejections(self.cfg.max_rejections)
    }

    /// Conditioned draws for every component of a structure, in layer-major
    /// order from one stream.
    pub fn sample_components<R: Rng + ?Sized>(
        &self,
        structure: &Structure,
        rng: &mut R,
    ) -> Result<Vec<Vec<LayerDraw>>> {
        let graph = structure.graph();
        let mut components = Vec::with_capacity(graph.depth() + 1);
        for i in 0..=graph.depth() {
            let mut layer = Vec::with_capacity(graph.n_components(i));
            for j in 0..graph.n_components(i) {
                let cfg = self.layer_config(structure, i, j)?;
                let draw = cfg.sample_conditioned(rng).map_err(|e| match e {
                    Error::RejectionBudget {
                        attempts,
                        acceptance_estimate,
                        ..
                    } => Error::RejectionBudget {
                        attempts,
                        acceptance_estimate,
                        context: format!(
                            "dgp layer {i} component {j} (d={:?}, t={:?}, alpha={:?})",
                            graph.dims(),
                            graph.intrinsic(),
                            structure.alphas()
                        ),
                    },
                    other => other,
                })?;
                layer.push(draw);
            }
            components.push(layer);
        }
        Ok(components)
    }

    /// Composes already-sampled components.
    pub fn compose_components(
        &self,
        structure: &Structure,
        components: &[Vec<LayerDraw>],
    ) -> Result<Field> {
        let layers: Vec<Vec<Field>> = components
            .iter()
            .map(|layer| layer.iter().map(|c| c.field.clone()).collect())
            .collect();
        compose(structure, &layers, &self.cfg.ambient_grid)
    }

    /// One full deep draw: structure, components, composition.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DeepDraw> {
        let structure = self.structures.sample(rng);
        let components = self.sample_components(&structure, rng)?;
        let composed = self.compose_components(&structure, &components)?;
        Ok(DeepDraw {
            structure,
            components,
            composed,
        })
    }
}

/// One deep draw from the prior. For repeated draws build a [`DgpSampler`].
pub fn sample_dgp<R: Rng + ?Sized>(
    cfg: &DgpPriorConfig,
    n: u64,
    rng: &mut R,
) -> Result<DeepDraw> {
    DgpSampler::new(cfg.clone(), n)?.sample(rng)
}
