//! Compositional structures, the penalized hyperprior, and structure sampling.
//!
//! A structure is a pair `(graph, alphas)`. The graph fixes the shape of a
//! composition
//!
//! ```text
//! theta = theta_q o ... o theta_0,
//! ```
//!
//! where layer `i` maps a `d_i`-dimensional input to one real value per
//! component, each component reading only the `t_i` coordinates in its
//! active set. The hyperprior over structures is
//!
//! ```text
//! pi(eta)  proportional to  exp(-Psi_n(eta)) gamma(lambda),
//! Psi_n    = n (eps_n^eta)^2 + exp(exp(|d|_1)),
//! eps_n^eta = max_i n^(-alpha_i / (2 alpha_i + t_i)),
//! ```
//!
//! with the smoothness vector drawn uniformly from the rectangle
//! `prod_i I(t_i)`, `I(t) = [beta + t/2, alpha_plus]`. Graph sampling
//! reweights the finite gamma table by `exp(-Psi_n)` evaluated at the
//! interval midpoints, which keeps the smoothness conditional exactly
//! uniform.

use rand::distributions::Uniform;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elementary::RateParams;
use crate::error::{Error, Result};
use crate::norms::MAX_HOLDER_ORDER;

/// Largest intrinsic layer dimension the series machinery supports.
pub const MAX_INTRINSIC_DIM: usize = 3;

/// Cap on auto-enumerated gamma tables before construction refuses.
pub const MAX_TABLE_ENTRIES: usize = 200_000;

/// Shape of a composition: depth, layer dimensions, intrinsic dimensions,
/// and per-component active coordinate sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphSpecRaw", into = "GraphSpecRaw")]
pub struct GraphSpec {
    dims: Vec<usize>,
    intrinsic: Vec<usize>,
    active_sets: Vec<Vec<Vec<usize>>>,
}

#[derive(Serialize, Deserialize)]
struct GraphSpecRaw {
    dims: Vec<usize>,
    intrinsic: Vec<usize>,
    active_sets: Vec<Vec<Vec<usize>>>,
}

impl TryFrom<GraphSpecRaw> for GraphSpec {
    type Error = Error;

    fn try_from(raw: GraphSpecRaw) -> Result<Self> {
        GraphSpec::new(raw.dims, raw.intrinsic, raw.active_sets)
    }
}

impl From<GraphSpec> for GraphSpecRaw {
    fn from(g: GraphSpec) -> Self {
        GraphSpecRaw {
            dims: g.dims,
            intrinsic: g.intrinsic,
            active_sets: g.active_sets,
        }
    }
}

impl GraphSpec {
    /// Builds and validates a graph. `dims[0]` is the ambient dimension;
    /// layer `i < q` has `dims[i+1]` components, the last layer has one.
    /// `active_sets[i][j]` lists the coordinates (0-based, strictly
    /// increasing, `intrinsic[i]` of them) component `j` of layer `i` reads.
    pub fn new(
        dims: Vec<usize>,
        intrinsic: Vec<usize>,
        active_sets: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::config("graph needs at least one layer"));
        }
        let q = dims.len() - 1;
        if intrinsic.len() != q + 1 {
            return Err(Error::config(format!(
                "intrinsic vector has length {}, expected {}",
                intrinsic.len(),
                q + 1
            )));
        }
        if active_sets.len() != q + 1 {
            return Err(Error::config(format!(
                "active_sets has length {}, expected {}",
                active_sets.len(),
                q + 1
            )));
        }
        let ambient = dims[0];
        for (i, &d) in dims.iter().enumerate() {
            if d == 0 {
                return Err(Error::config(format!("layer {i} has dimension 0")));
            }
            if d > ambient {
                return Err(Error::config(format!(
                    "layer {i} dimension {d} exceeds ambient dimension {ambient}"
                )));
            }
        }
        for (i, &t) in intrinsic.iter().enumerate() {
            if t == 0 || t > dims[i] {
                return Err(Error::config(format!(
                    "intrinsic dimension {t} at layer {i} must lie in 1..={}",
                    dims[i]
                )));
            }
        }
        let graph = GraphSpec {
            dims,
            intrinsic,
            active_sets,
        };
        for i in 0..=q {
            let want = graph.n_components(i);
            let sets = &graph.active_sets[i];
            if sets.len() != want {
                return Err(Error::config(format!(
                    "layer {i} has {} active sets, expected {want}",
                    sets.len()
                )));
            }
            for (j, s) in sets.iter().enumerate() {
                if s.len() != graph.intrinsic[i] {
                    return Err(Error::config(format!(
                        "active set ({i},{j}) has {} indices, expected {}",
                        s.len(),
                        graph.intrinsic[i]
                    )));
                }
                for w in s.windows(2) {
                    if w[1] <= w[0] {
                        return Err(Error::config(format!(
                            "active set ({i},{j}) must be strictly increasing"
                        )));
                    }
                }
                if let Some(&last) = s.last() {
                    if last >= graph.dims[i] {
                        return Err(Error::config(format!(
                            "active set ({i},{j}) index {last} out of range for layer dimension {}",
                            graph.dims[i]
                        )));
                    }
                }
            }
        }
        Ok(graph)
    }

    /// Depth-0 graph on an ambient box reading the first `t` coordinates.
    pub fn shallow(ambient: usize, t: usize) -> Result<Self> {
        GraphSpec::new(vec![ambient], vec![t], vec![vec![(0..t).collect()]])
    }

    pub fn depth(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn ambient_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn intrinsic(&self) -> &[usize] {
        &self.intrinsic
    }

    pub fn active_set(&self, layer: usize, component: usize) -> &[usize] {
        &self.active_sets[layer][component]
    }

    /// Components at a layer: the next layer's input dimension, or one at
    /// the top.
    pub fn n_components(&self, layer: usize) -> usize {
        if layer == self.depth() {
            1
        } else {
            self.dims[layer + 1]
        }
    }

    /// `|d|_1`, the penalty driver in the double exponential.
    pub fn dim_sum(&self) -> usize {
        self.dims.iter().sum()
    }
}

/// Graph plus a smoothness per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StructureRaw", into = "StructureRaw")]
pub struct Structure {
    graph: GraphSpec,
    alphas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StructureRaw {
    graph: GraphSpec,
    alphas: Vec<f64>,
}

impl TryFrom<StructureRaw> for Structure {
    type Error = Error;

    fn try_from(raw: StructureRaw) -> Result<Self> {
        Structure::new(raw.graph, raw.alphas)
    }
}

impl From<Structure> for StructureRaw {
    fn from(s: Structure) -> Self {
        StructureRaw {
            graph: s.graph,
            alphas: s.alphas,
        }
    }
}

impl Structure {
    /// Requires one finite smoothness per layer with `alpha_i > t_i / 2`
    /// (so every layer rate is well defined); interval membership against a
    /// hyperprior is checked by [`HyperpriorConfig::check_support`].
    pub fn new(graph: GraphSpec, alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() != graph.depth() + 1 {
            return Err(Error::config(format!(
                "expected {} smoothness values, got {}",
                graph.depth() + 1,
                alphas.len()
            )));
        }
        for (i, &a) in alphas.iter().enumerate() {
            if !a.is_finite() || a <= graph.intrinsic()[i] as f64 / 2.0 {
                return Err(Error::config(format!(
                    "alpha_{i} = {a} must be finite and exceed t_{i}/2 = {}",
                    graph.intrinsic()[i] as f64 / 2.0
                )));
            }
        }
        Ok(Structure { graph, alphas })
    }

    pub fn graph(&self) -> &GraphSpec {
        &self.graph
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// The structure rate `eps_n^eta = max_i eps_n^(alpha_i, t_i)`.
    pub fn epsilon(&self, n: u64) -> Result<f64> {
        let mut eps: f64 = 0.0;
        for (i, &alpha) in self.alphas.iter().enumerate() {
            let t = self.graph.intrinsic()[i] as u32;
            eps = eps.max(RateParams::new(n, alpha, t)?.epsilon());
        }
        Ok(eps)
    }
}

/// Smoothness interval `I(t) = [beta + t/2, alpha_plus]` for one layer.
pub fn alpha_interval(beta: u32, t: usize, alpha_plus: f64) -> [f64; 2] {
    [beta as f64 + t as f64 / 2.0, alpha_plus]
}

/// `Psi_n(eta) = n (eps_n^eta)^2 + exp(exp(|d|_1))`.
///
/// Overflows to `+inf` once `|d|_1 >= 7`; such structures carry reweighted
/// probability zero, which is the honest double-precision value of
/// `exp(-exp(exp(7)))`.
pub fn psi_penalty(structure: &Structure, n: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::config("psi penalty needs n >= 1"));
    }
    let eps = structure.epsilon(n)?;
    let dim_term = (structure.graph().dim_sum() as f64).exp().exp();
    Ok(n as f64 * eps * eps + dim_term)
}

/// Finite hyperprior over structures: an explicit, normalized gamma table
/// over graphs plus the uniform smoothness conditional.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "HyperpriorRaw", into = "HyperpriorRaw")]
pub struct HyperpriorConfig {
    ambient_d: usize,
    beta: u32,
    alpha_plus: f64,
    q_max: usize,
    graphs: Vec<GraphSpec>,
    gamma: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct HyperpriorRaw {
    ambient_d: usize,
    beta: u32,
    alpha_plus: f64,
    q_max: usize,
    graphs: Vec<GraphSpec>,
    gamma: Vec<f64>,
}

impl TryFrom<HyperpriorRaw> for HyperpriorConfig {
    type Error = Error;

    fn try_from(raw: HyperpriorRaw) -> Result<Self> {
        let table = raw.graphs.into_iter().zip(raw.gamma).collect();
        HyperpriorConfig::new(raw.ambient_d, raw.beta, raw.alpha_plus, raw.q_max, table)
    }
}

impl From<HyperpriorConfig> for HyperpriorRaw {
    fn from(cfg: HyperpriorConfig) -> Self {
        HyperpriorRaw {
            ambient_d: cfg.ambient_d,
            beta: cfg.beta,
            alpha_plus: cfg.alpha_plus,
            q_max: cfg.q_max,
            graphs: cfg.graphs,
            gamma: cfg.gamma,
        }
    }
}

impl HyperpriorConfig {
    /// Wraps an explicit gamma table. Weights are normalized here; they must
    /// be strictly positive and every graph must fit the ambient dimension
    /// and depth cap.
    pub fn new(
        ambient_d: usize,
        beta: u32,
        alpha_plus: f64,
        q_max: usize,
        table: Vec<(GraphSpec, f64)>,
    ) -> Result<Self> {
        if ambient_d == 0 {
            return Err(Error::config("ambient dimension must be at least 1"));
        }
        if beta < 1 || beta > MAX_HOLDER_ORDER {
            return Err(Error::config(format!(
                "beta must lie in 1..={MAX_HOLDER_ORDER}, got {beta}"
            )));
        }
        let floor = beta as f64 + ambient_d as f64 / 2.0;
        if !(alpha_plus.is_finite() && alpha_plus > floor) {
            return Err(Error::config(format!(
                "alpha_plus must exceed beta + ambient/2 = {floor}, got {alpha_plus}"
            )));
        }
        if table.is_empty() {
            return Err(Error::config("gamma table must not be empty"));
        }
        let mut graphs = Vec::with_capacity(table.len());
        let mut gamma = Vec::with_capacity(table.len());
        let mut total = 0.0;
        for (k, (graph, weight)) in table.into_iter().enumerate() {
            if graph.ambient_dim() != ambient_d {
                return Err(Error::config(format!(
                    "table entry {k}: graph ambient dimension {} != {ambient_d}",
                    graph.ambient_dim()
                )));
            }
            if graph.depth() > q_max {
                return Err(Error::config(format!(
                    "table entry {k}: depth {} exceeds q_max {q_max}",
                    graph.depth()
                )));
            }
            if graph.intrinsic().iter().any(|&t| t > MAX_INTRINSIC_DIM) {
                return Err(Error::config(format!(
                    "table entry {k}: intrinsic dimension exceeds {MAX_INTRINSIC_DIM}"
                )));
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::config(format!(
                    "table entry {k}: gamma weight {weight} must be positive"
                )));
            }
            total += weight;
            graphs.push(graph);
            gamma.push(weight);
        }
        for w in &mut gamma {
            *w /= total;
        }
        Ok(HyperpriorConfig {
            ambient_d,
            beta,
            alpha_plus,
            q_max,
            graphs,
            gamma,
        })
    }

    /// Enumerates every admissible graph up to the depth cap and weights it
    /// by `exp(-q) exp(-|d|_1)`. Hidden-layer dimensions range over
    /// `1..=ambient_d`, intrinsic dimensions over `1..=min(d_i, 3)`, and
    /// active sets over all coordinate subsets.
    pub fn with_default_table(
        ambient_d: usize,
        beta: u32,
        alpha_plus: f64,
        q_max: usize,
    ) -> Result<Self> {
        let mut table = Vec::new();
        for q in 0..=q_max {
            let mut dims = vec![ambient_d; q + 1];
            enumerate_dims(ambient_d, q, 1, &mut dims, &mut table)?;
        }
        HyperpriorConfig::new(ambient_d, beta, alpha_plus, q_max, table)
    }

    pub fn ambient_d(&self) -> usize {
        self.ambient_d
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn alpha_plus(&self) -> f64 {
        self.alpha_plus
    }

    pub fn q_max(&self) -> usize {
        self.q_max
    }

    pub fn n_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn graph(&self, k: usize) -> &GraphSpec {
        &self.graphs[k]
    }

    /// Normalized gamma weight of table entry `k`.
    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma[k]
    }

    pub fn find_graph(&self, graph: &GraphSpec) -> Option<usize> {
        self.graphs.iter().position(|g| g == graph)
    }

    /// Interval `I(t_i)` for a layer with intrinsic dimension `t`.
    pub fn interval(&self, t: usize) -> [f64; 2] {
        alpha_interval(self.beta, t, self.alpha_plus)
    }

    /// Midpoints of the smoothness intervals, the representative alphas used
    /// when reweighting the graph table.
    pub fn midpoint_alphas(&self, graph: &GraphSpec) -> Vec<f64> {
        graph
            .intrinsic()
            .iter()
            .map(|&t| {
                let [lo, hi] = self.interval(t);
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Errors unless the graph is in the table and every smoothness lies in
    /// its closed interval.
    pub fn check_support(&self, structure: &Structure) -> Result<()> {
        if self.find_graph(structure.graph()).is_none() {
            return Err(Error::Support(
                "structure graph is not in the hyperprior table".into(),
            ));
        }
        for (i, &alpha) in structure.alphas().iter().enumerate() {
            let [lo, hi] = self.interval(structure.graph().intrinsic()[i]);
            if !(alpha >= lo && alpha <= hi) {
                return Err(Error::Support(format!(
                    "alpha_{i} = {alpha} outside I(t_{i}) = [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Graph probabilities after reweighting gamma by `exp(-Psi_n)` at the
    /// interval midpoints. A min-shift keeps the exponentials representable;
    /// graphs whose penalty overflows get probability zero.
    pub fn reweighted_graph_probabilities(&self, n: u64) -> Result<Vec<f64>> {
        if n < 1 {
            return Err(Error::config("reweighting needs n >= 1"));
        }
        let mut psis = Vec::with_capacity(self.graphs.len());
        for graph in &self.graphs {
            let alphas = self.midpoint_alphas(graph);
            let s = Structure::new(graph.clone(), alphas)?;
            psis.push(psi_penalty(&s, n)?);
        }
        let psi_min = psis.iter().cloned().fold(f64::INFINITY, f64::min);
        if !psi_min.is_finite() {
            return Err(Error::config(
                "every graph in the table has an overflowing penalty",
            ));
        }
        let mut probs: Vec<f64> = self
            .gamma
            .iter()
            .zip(&psis)
            .map(|(&g, &psi)| g * (-(psi - psi_min)).exp())
            .collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Ok(probs)
    }

    /// Precomputes the reweighted table for repeated structure draws.
    pub fn sampler(&self, n: u64) -> Result<StructureSampler> {
        let probs = self.reweighted_graph_probabilities(n)?;
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(StructureSampler {
            cfg: self.clone(),
            probs,
            cumulative,
        })
    }
}

fn enumerate_dims(
    ambient: usize,
    q: usize,
    layer: usize,
    dims: &mut Vec<usize>,
    table: &mut Vec<(GraphSpec, f64)>,
) -> Result<()> {
    if layer > q {
        let weight = (-(q as f64) - dims.iter().sum::<usize>() as f64).exp();
        let mut intrinsic = vec![1; q + 1];
        return enumerate_intrinsic(dims, 0, &mut intrinsic, weight, table);
    }
    for d in 1..=ambient {
        dims[layer] = d;
        enumerate_dims(ambient, q, layer + 1, dims, table)?;
    }
    Ok(())
}

fn enumerate_intrinsic(
    dims: &[usize],
    layer: usize,
    intrinsic: &mut Vec<usize>,
    weight: f64,
    table: &mut Vec<(GraphSpec, f64)>,
) -> Result<()> {
    if layer == dims.len() {
        let sets: Vec<Vec<Vec<usize>>> = Vec::new();
        return enumerate_sets(dims, intrinsic, 0, sets, weight, table);
    }
    for t in 1..=dims[layer].min(MAX_INTRINSIC_DIM) {
        intrinsic[layer] = t;
        enumerate_intrinsic(dims, layer + 1, intrinsic, weight, table)?;
    }
    Ok(())
}

fn enumerate_sets(
    dims: &[usize],
    intrinsic: &[usize],
    layer: usize,
    partial: Vec<Vec<Vec<usize>>>,
    weight: f64,
    table: &mut Vec<(GraphSpec, f64)>,
) -> Result<()> {
    let q = dims.len() - 1;
    if layer > q {
        let graph = GraphSpec::new(dims.to_vec(), intrinsic.to_vec(), partial)?;
        table.push((graph, weight));
        if table.len() > MAX_TABLE_ENTRIES {
            return Err(Error::config(format!(
                "default gamma table exceeds {MAX_TABLE_ENTRIES} entries; pass an explicit table"
            )));
        }
        return Ok(());
    }
    let n_components = if layer == q { 1 } else { dims[layer + 1] };
    let choices = subsets(dims[layer], intrinsic[layer]);
    let mut assignment = vec![0usize; n_components];
    loop {
        let mut next = partial.clone();
        next.push(
            assignment
                .iter()
                .map(|&c| choices[c].clone())
                .collect::<Vec<_>>(),
        );
        enumerate_sets(dims, intrinsic, layer + 1, next, weight, table)?;
        // Odometer over the per-component subset choices.
        let mut pos = 0;
        loop {
            if pos == assignment.len() {
                return Ok(());
            }
            assignment[pos] += 1;
            if assignment[pos] < choices.len() {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

/// All strictly increasing `t`-subsets of `0..d`.
fn subsets(d: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(t);
    fn rec(d: usize, t: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == t {
            out.push(current.clone());
            return;
        }
        for i in start..d {
            current.push(i);
            rec(d, t, i + 1, current, out);
            current.pop();
        }
    }
    rec(d, t, 0, &mut current, &mut out);
    out
}

/// Unnormalized log hyperprior density of a structure:
/// `log gamma(lambda) + log uniform(alpha | lambda) - Psi_n(eta)`.
///
/// Differences between two structures are exact (the normalizer never
/// appears). Returns `-inf` when the penalty overflows.
pub fn log_hyperprior(structure: &Structure, n: u64, cfg: &HyperpriorConfig) -> Result<f64> {
    cfg.check_support(structure)?;
    let k = cfg
        .find_graph(structure.graph())
        .expect("support check passed");
    let mut log_density = cfg.gamma(k).ln();
    for &t in structure.graph().intrinsic() {
        let [lo, hi] = cfg.interval(t);
        log_density -= (hi - lo).ln();
    }
    Ok(log_density - psi_penalty(structure, n)?)
}

/// Reusable reweighted-table sampler for structures.
#[derive(Clone, Debug)]
pub struct StructureSampler {
    cfg: HyperpriorConfig,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StructureSampler {
    /// Reweighted probability of each graph in table order.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn config(&self) -> &HyperpriorConfig {
        &self.cfg
    }

    /// Draws a graph from the reweighted table, then each smoothness
    /// uniformly from its interval.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Structure {
        let u: f64 = rng.gen();
        let k = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&u).expect("cumulative weights are finite"))
        {
            Ok(k) => (k + 1).min(self.cumulative.len() - 1),
            Err(k) => k,
        };
        let graph = self.cfg.graph(k).clone();
        let alphas = graph
            .intrinsic()
            .iter()
            .map(|&t| {
                let [lo, hi] = self.cfg.interval(t);
                rng.sample(Uniform::new_inclusive(lo, hi))
            })
            .collect();
        Structure::new(graph, alphas).expect("sampled alphas lie in their intervals")
    }
}

/// One structure draw from the penalized hyperprior. For repeated draws
/// build a [`StructureSampler`] once via [`HyperpriorConfig::sampler`].
pub fn sample_structure<R: Rng + ?Sized>(
    cfg: &HyperpriorConfig,
    n: u64,
    rng: &mut R,
) -> Result<Structure> {
    Ok(cfg.sampler(n)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{module_ids, StreamKey};

    const PSI_SPOT: f64 = 19.481_010_952_401_489;
    const TWO_GRAPH_P1: f64 = 0.804_940_546_917_345_26;
    const THREE_GRAPH_P: [f64; 3] = [
        0.589_299_113_979_548_62,
        0.353_579_468_387_729_17,
        0.057_121_417_632_722_214,
    ];

    fn scalar_graph() -> GraphSpec {
        GraphSpec::shallow(1, 1).unwrap()
    }

    fn planar_graph(t: usize) -> GraphSpec {
        GraphSpec::shallow(2, t).unwrap()
    }

    fn two_graph_cfg() -> HyperpriorConfig {
        let g1 = planar_graph(1);
        let g2 = planar_graph(2);
        HyperpriorConfig::new(2, 1, 3.0, 0, vec![(g1, 0.5), (g2, 0.5)]).unwrap()
    }

    #[test]
    fn psi_penalty_spot_value() {
        let s = Structure::new(scalar_graph(), vec![1.0]).unwrap();
        let psi = psi_penalty(&s, 81).unwrap();
        assert!(
            (psi - PSI_SPOT).abs() < 1e-10,
            "psi = {psi}, expected {PSI_SPOT}"
        );
    }

    #[test]
    fn psi_penalty_at_n_one() {
        let s = Structure::new(scalar_graph(), vec![2.0]).unwrap();
        let psi = psi_penalty(&s, 1).unwrap();
        assert!((psi - (1.0 + 1f64.exp().exp())).abs() < 1e-12);
        assert!(matches!(psi_penalty(&s, 0), Err(Error::Config(_))));
    }

    #[test]
    fn psi_penalty_monotone_in_dims_and_alpha() {
        let narrow = Structure::new(scalar_graph(), vec![2.0]).unwrap();
        let wide = Structure::new(
            GraphSpec::new(vec![2], vec![1], vec![vec![vec![0]]]).unwrap(),
            vec![2.0],
        )
        .unwrap();
        assert!(psi_penalty(&wide, 100).unwrap() > psi_penalty(&narrow, 100).unwrap());

        let smoother = Structure::new(scalar_graph(), vec![3.0]).unwrap();
        assert!(psi_penalty(&smoother, 100).unwrap() <= psi_penalty(&narrow, 100).unwrap());
    }

    #[test]
    fn log_hyperprior_ratio_is_negative_delta_psi() {
        let cfg = HyperpriorConfig::new(
            1,
            1,
            3.0,
            0,
            vec![(scalar_graph(), 1.0)],
        )
        .unwrap();
        let s1 = Structure::new(scalar_graph(), vec![2.0]).unwrap();
        let s2 = Structure::new(scalar_graph(), vec![2.5]).unwrap();
        let lr = log_hyperprior(&s1, 200, &cfg).unwrap() - log_hyperprior(&s2, 200, &cfg).unwrap();
        let dpsi = psi_penalty(&s1, 200).unwrap() - psi_penalty(&s2, 200).unwrap();
        assert!((lr + dpsi).abs() < 1e-12);
    }

    #[test]
    fn log_hyperprior_ratios_are_consistent() {
        let cfg = two_graph_cfg();
        let s1 = Structure::new(planar_graph(1), vec![2.0]).unwrap();
        let s2 = Structure::new(planar_graph(1), vec![2.8]).unwrap();
        let s3 = Structure::new(planar_graph(2), vec![2.5]).unwrap();
        let l1 = log_hyperprior(&s1, 100, &cfg).unwrap();
        let l2 = log_hyperprior(&s2, 100, &cfg).unwrap();
        let l3 = log_hyperprior(&s3, 100, &cfg).unwrap();
        assert!(((l1 - l2) + (l2 - l3) - (l1 - l3)).abs() < 1e-12);
    }

    #[test]
    fn log_hyperprior_rejects_unsupported_structures() {
        let cfg = two_graph_cfg();
        let off_table = Structure::new(
            GraphSpec::new(vec![2, 1], vec![1, 1], vec![vec![vec![0]], vec![vec![0]]])
                .unwrap(),
            vec![2.0, 2.0],
        )
        .unwrap();
        assert!(matches!(
            log_hyperprior(&off_table, 100, &cfg),
            Err(Error::Support(_))
        ));
        let below_interval = Structure::new(planar_graph(1), vec![1.2]).unwrap();
        assert!(matches!(
            log_hyperprior(&below_interval, 100, &cfg),
            Err(Error::Support(_))
        ));
    }

    #[test]
    fn two_graph_reweighting_matches_oracle() {
        let cfg = two_graph_cfg();
        let probs = cfg.reweighted_graph_probabilities(100).unwrap();
        assert!(
            (probs[0] - TWO_GRAPH_P1).abs() < 1e-13,
            "p1 = {}, expected {TWO_GRAPH_P1}",
            probs[0]
        );
        assert!((probs[0] + probs[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn three_graph_table_matches_enumeration_oracle() {
        let g1 = GraphSpec::new(vec![2], vec![1], vec![vec![vec![0]]]).unwrap();
        let g2 = GraphSpec::new(vec![2], vec![1], vec![vec![vec![1]]]).unwrap();
        let g3 = GraphSpec::new(vec![2], vec![2], vec![vec![vec![0, 1]]]).unwrap();
        let cfg = HyperpriorConfig::new(
            2,
            1,
            3.0,
            0,
            vec![(g1, 0.5), (g2, 0.3), (g3, 0.2)],
        )
        .unwrap();
        let probs = cfg.reweighted_graph_probabilities(100).unwrap();
        for (p, expected) in probs.iter().zip(THREE_GRAPH_P) {
            assert!(
                ((p - expected) / expected).abs() < 1e-12,
                "probability {p} vs oracle {expected}"
            );
        }
    }

    #[test]
    fn empirical_graph_frequencies_match_reweighting() {
        let cfg = two_graph_cfg();
        let sampler = cfg.sampler(100).unwrap();
        let mut rng = StreamKey::new(13, module_ids::STRUCTURE).rng();
        let n_draws = 100_000;
        let mut count_first = 0usize;
        for _ in 0..n_draws {
            let s = sampler.sample(&mut rng);
            if s.graph().intrinsic()[0] == 1 {
                count_first += 1;
            }
        }
        let freq = count_first as f64 / n_draws as f64;
        let se = (TWO_GRAPH_P1 * (1.0 - TWO_GRAPH_P1) / n_draws as f64).sqrt();
        assert!(
            (freq - TWO_GRAPH_P1).abs() <= 4.0 * se,
            "frequency {freq} vs {TWO_GRAPH_P1} (4 SE = {})",
            4.0 * se
        );
    }

    #[test]
    fn single_graph_support_is_degenerate() {
        let cfg =
            HyperpriorConfig::new(1, 1, 3.0, 0, vec![(scalar_graph(), 2.0)]).unwrap();
        let sampler = cfg.sampler(64).unwrap();
        let mut rng = StreamKey::new(1, module_ids::STRUCTURE).rng();
        for _ in 0..50 {
            let s = sampler.sample(&mut rng);
            assert_eq!(s.graph(), &scalar_graph());
            cfg.check_support(&s).unwrap();
        }
    }

    #[test]
    fn alpha_marginal_is_uniform() {
        let cfg =
            HyperpriorConfig::new(1, 1, 3.0, 0, vec![(scalar_graph(), 1.0)]).unwrap();
        let sampler = cfg.sampler(100).unwrap();
        let mut rng = StreamKey::new(99, module_ids::STRUCTURE).rng();
        let n_draws = 10_000;
        let [lo, hi] = cfg.interval(1);
        let mut us: Vec<f64> = (0..n_draws)
            .map(|_| {
                let s = sampler.sample(&mut rng);
                (s.alphas()[0] - lo) / (hi - lo)
            })
            .collect();
        us.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let nf = n_draws as f64;
        let mut d_stat: f64 = 0.0;
        for (i, &u) in us.iter().enumerate() {
            d_stat = d_stat
                .max(((i + 1) as f64 / nf - u).abs())
                .max((u - i as f64 / nf).abs());
        }
        // 1% Kolmogorov-Smirnov critical value 1.6276 / sqrt(N).
        let critical = 1.6276 / nf.sqrt();
        assert!(
            d_stat < critical,
            "KS statistic {d_stat} above critical {critical}"
        );
    }

    #[test]
    fn sampled_structures_stay_in_support() {
        let cfg = HyperpriorConfig::with_default_table(2, 1, 3.0, 1).unwrap();
        let sampler = cfg.sampler(500).unwrap();
        let mut rng = StreamKey::new(4, module_ids::STRUCTURE).rng();
        for _ in 0..200 {
            let s = sampler.sample(&mut rng);
            cfg.check_support(&s).unwrap();
            assert!(s.graph().dims().iter().all(|&d| d <= 2));
        }
    }

    #[test]
    fn default_table_counts_match_hand_enumeration() {
        // Ambient 1, depth <= 1: one graph per depth.
        let cfg = HyperpriorConfig::with_default_table(1, 1, 3.0, 1).unwrap();
        assert_eq!(cfg.n_graphs(), 2);
        // Ambient 2, depth 0: S in {{0},{1}} at t=1 plus {0,1} at t=2.
        let cfg = HyperpriorConfig::with_default_table(2, 1, 3.0, 0).unwrap();
        assert_eq!(cfg.n_graphs(), 3);
        let total: f64 = (0..cfg.n_graphs()).map(|k| cfg.gamma(k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((0..cfg.n_graphs()).all(|k| cfg.gamma(k) > 0.0));
    }

    #[test]
    fn graph_validation_rejects_malformed_specs() {
        assert!(GraphSpec::new(vec![2], vec![3], vec![vec![vec![0, 1, 2]]]).is_err());
        assert!(GraphSpec::new(vec![2], vec![1], vec![vec![vec![2]]]).is_err());
        assert!(GraphSpec::new(vec![2], vec![1], vec![vec![vec![0], vec![1]]]).is_err());
        assert!(GraphSpec::new(vec![1, 2], vec![1, 1], vec![vec![vec![0]], vec![vec![0]]])
            .is_err());
        assert!(GraphSpec::new(vec![2], vec![2], vec![vec![vec![1, 0]]]).is_err());
        assert!(Structure::new(scalar_graph(), vec![0.4]).is_err());
        assert!(Structure::new(scalar_graph(), vec![2.0, 2.0]).is_err());
    }

    #[test]
    fn structures_round_trip_through_json() {
        let s = Structure::new(
            GraphSpec::new(
                vec![2, 2],
                vec![1, 2],
                vec![vec![vec![0], vec![1]], vec![vec![0, 1]]],
            )
            .unwrap(),
            vec![2.0, 2.5],
        )
        .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: Structure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);

        let bad = text.replace("2.5", "0.1");
        assert!(serde_json::from_str::<Structure>(&bad).is_err());
    }
}
