//! Posterior sampling: coefficient-space pCN within a structure, full-refresh
//! independence moves between structures, and the rescaled-GP baseline chain.
//!
//! The reference measure of every layer is its rescaled Gaussian series law,
//! so the pCN proposal
//!
//! ```text
//! c' = sqrt(1 - b^2) c + b w,     w ~ reference law,
//! ```
//!
//! preserves the (unconditioned) prior exactly and is accepted with
//! probability `min(1, exp(l(theta') - l(theta))) 1[theta' in C]`, where `C`
//! is the conditioning set of the layer constraints. Structure moves propose
//! `(eta', theta')` jointly from the prior, for which the Metropolis ratio
//! collapses to the likelihood ratio. Step sizes adapt toward a target
//! acceptance during burn-in only, so the post-burn-in kernel is fixed.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, SeriesBasis};
use crate::cutoff::Cutoff;
use crate::data::{log_likelihood, Dataset};
use crate::dgp::{compose, DgpSampler};
use crate::elementary::LayerDraw;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::norms::{l2_norm, norms};
use crate::pde::ForwardModel;
use crate::rng::StreamKey;
use crate::structure::Structure;

/// Initial pCN mixing parameter before adaptation.
pub const INITIAL_BETA: f64 = 0.25;

/// Bounds for the adapted mixing parameter.
pub const BETA_FLOOR: f64 = 1e-4;

/// Tolerance for the cached log-likelihood invariant.
pub const LOGLIK_CACHE_TOL: f64 = 1e-10;

/// Metropolis log acceptance ratio for likelihood-only moves.
pub fn log_accept_ratio(loglik_new: f64, loglik_old: f64) -> f64 {
    loglik_new - loglik_old
}

/// Current position of a DGP posterior chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    structure: Structure,
    coeffs: Vec<Vec<Vec<f64>>>,
    fields: Vec<Vec<Field>>,
    composed: Field,
    forward: Field,
    loglik: f64,
    log_betas: Vec<f64>,
}

impl ChainState {
    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn coeffs(&self) -> &[Vec<Vec<f64>>] {
        &self.coeffs
    }

    /// Per-layer component fields backing the current composition.
    pub fn layer_fields(&self) -> &[Vec<Field>] {
        &self.fields
    }

    pub fn composed(&self) -> &Field {
        &self.composed
    }

    pub fn forward(&self) -> &Field {
        &self.forward
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    /// Per-layer pCN mixing parameters.
    pub fn betas(&self) -> Vec<f64> {
        self.log_betas.iter().map(|lb| lb.exp()).collect()
    }

    pub fn set_log_betas(&mut self, log_betas: Vec<f64>) -> Result<()> {
        if log_betas.len() != self.log_betas.len() {
            return Err(Error::config("one log step size per layer"));
        }
        self.log_betas = log_betas;
        Ok(())
    }

    /// Checks the cached log-likelihood against a recomputation.
    pub fn validate(&self, model: &ForwardModel, data: &Dataset) -> Result<()> {
        let forward = model.apply(&self.composed)?;
        let ll = log_likelihood(&forward, data)?;
        if (ll - self.loglik).abs() > LOGLIK_CACHE_TOL {
            return Err(Error::config(format!(
                "cached log-likelihood {} differs from recomputed {ll}",
                self.loglik
            )));
        }
        Ok(())
    }
}

/// Outcome of one within-structure pCN sweep.
pub struct PcnOutcome {
    /// New state when the proposal was accepted.
    pub state: Option<ChainState>,
}

/// Outcome of one between-structure independence move.
pub struct StructureOutcome {
    pub state: Option<ChainState>,
    /// The proposal draw itself failed its rejection budget; the move counts
    /// as rejected.
    pub budget_hit: bool,
}

/// Posterior driver: prior machinery, forward model, data.
#[derive(Clone, Debug)]
pub struct PosteriorSampler {
    prior: DgpSampler,
    model: ForwardModel,
    data: Dataset,
}

impl PosteriorSampler {
    pub fn new(prior: DgpSampler, model: ForwardModel, data: Dataset) -> Result<Self> {
        if let ForwardModel::Pde(cfg) = &model {
            if !cfg.grid().compatible(prior.config().ambient_grid()) {
                return Err(Error::config(
                    "forward model grid does not match the prior's ambient grid",
                ));
            }
        }
        if data.n() > 0 && data.x(0).len() != prior.config().ambient_grid().dim() {
            return Err(Error::config(
                "design points do not match the ambient dimension",
            ));
        }
        Ok(PosteriorSampler { prior, model, data })
    }

    pub fn prior(&self) -> &DgpSampler {
        &self.prior
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn evaluate(&self, structure: &Structure, fields: &[Vec<Field>]) -> Result<(Field, Field, f64)> {
        let composed = compose(structure, fields, self.prior.config().ambient_grid())?;
        let forward = self.model.apply(&composed)?;
        let loglik = log_likelihood(&forward, &self.data)?;
        Ok((composed, forward, loglik))
    }

    fn state_from_components(
        &self,
        structure: Structure,
        components: Vec<Vec<LayerDraw>>,
        log_betas: Vec<f64>,
    ) -> Result<ChainState> {
        let fields: Vec<Vec<Field>> = components
            .iter()
            .map(|layer| layer.iter().map(|c| c.field.clone()).collect())
            .collect();
        let coeffs: Vec<Vec<Vec<f64>>> = components
            .into_iter()
            .map(|layer| layer.into_iter().map(|c| c.coeffs).collect())
            .collect();
        let (composed, forward, loglik) = self.evaluate(&structure, &fields)?;
        Ok(ChainState {
            structure,
            coeffs,
            fields,
            composed,
            forward,
            loglik,
            log_betas,
        })
    }

    /// Fresh prior draw with default step sizes.
    pub fn init_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChainState> {
        let structure = self.prior.structures().sample(rng);
        let components = self.prior.sample_components(&structure, rng)?;
        let log_betas = vec![INITIAL_BETA.ln(); structure.graph().depth() + 1];
        self.state_from_components(structure, components, log_betas)
    }

    /// One joint pCN proposal across every layer component, accepted with
    /// the likelihood ratio times the conditioning indicator.
    pub fn pcn_step<R: Rng + ?Sized>(&self, state: &ChainState, rng: &mut R) -> Result<PcnOutcome> {
        let graph = state.structure.graph().clone();
        let mut new_coeffs = Vec::with_capacity(graph.depth() + 1);
        let mut new_fields = Vec::with_capacity(graph.depth() + 1);
        for i in 0..=graph.depth() {
            let beta = state.log_betas[i].exp().min(1.0);
            let keep = (1.0 - beta * beta).max(0.0).sqrt();
            let mut layer_coeffs = Vec::with_capacity(graph.n_components(i));
            let mut layer_fields = Vec::with_capacity(graph.n_components(i));
            for j in 0..graph.n_components(i) {
                let cfg = self.prior.layer_config(&state.structure, i, j)?;
                let xis: Vec<f64> = (0..state.coeffs[i][j].len())
                    .map(|_| StandardNormal.sample(rng))
                    .collect();
                let fresh = cfg.rescaled_coeffs(&xis)?;
                let mixed: Vec<f64> = state.coeffs[i][j]
                    .iter()
                    .zip(&fresh)
                    .map(|(c, w)| keep * c + beta * w)
                    .collect();
                let field = cfg.layer_field_from_coeffs(&mixed)?;
                if !cfg.accepts(&field)? {
                    return Ok(PcnOutcome { state: None });
                }
                layer_coeffs.push(mixed);
                layer_fields.push(field);
            }
            new_coeffs.push(layer_coeffs);
            new_fields.push(layer_fields);
        }
        let (composed, forward, loglik) = match self.evaluate(&state.structure, &new_fields) {
            Ok(v) => v,
            Err(Error::Composition { .. }) => return Ok(PcnOutcome { state: None }),
            Err(e) => return Err(e),
        };
        let log_u: f64 = rng.gen::<f64>().ln();
        if log_u < log_accept_ratio(loglik, state.loglik) {
            Ok(PcnOutcome {
                state: Some(ChainState {
                    structure: state.structure.clone(),
                    coeffs: new_coeffs,
                    fields: new_fields,
                    composed,
                    forward,
                    loglik,
                    log_betas: state.log_betas.clone(),
                }),
            })
        } else {
            Ok(PcnOutcome { state: None })
        }
    }

    /// Independence proposal of a fresh structure and fresh conditioned
    /// layers from the prior; the Metropolis ratio reduces to the likelihood
    /// ratio. A rejection-budget failure inside the proposal rejects the
    /// move.
    pub fn structure_move<R: Rng + ?Sized>(
        &self,
        state: &ChainState,
        rng: &mut R,
    ) -> Result<StructureOutcome> {
        let structure = self.prior.structures().sample(rng);
        let components = match self.prior.sample_components(&structure, rng) {
            Ok(c) => c,
            Err(Error::RejectionBudget { .. }) => {
                return Ok(StructureOutcome {
                    state: None,
                    budget_hit: true,
                })
            }
            Err(e) => return Err(e),
        };
        let shared_log_beta = state.log_betas[0];
        let log_betas = vec![shared_log_beta; structure.graph().depth() + 1];
        let proposal = self.state_from_components(structure, components, log_betas)?;
        let log_u: f64 = rng.gen::<f64>().ln();
        if log_u < log_accept_ratio(proposal.loglik, state.loglik) {
            Ok(StructureOutcome {
                state: Some(proposal),
                budget_hit: false,
            })
        } else {
            Ok(StructureOutcome {
                state: None,
                budget_hit: false,
            })
        }
    }
}

fn default_adapt_window() -> usize {
    50
}

fn default_target_acceptance() -> f64 {
    0.3
}

/// Chain schedule: burn-in with step adaptation, then a fixed kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub burn_in: usize,
    pub length: usize,
    pub thin: usize,
    /// Steps per Robbins-Monro adaptation window during burn-in.
    #[serde(default = "default_adapt_window")]
    pub adapt_window: usize,
    /// Attempt a structure move every this many steps (0 disables them).
    #[serde(default)]
    pub structure_every: usize,
    #[serde(default = "default_target_acceptance")]
    pub target_acceptance: f64,
    /// Keep thinned composed fields in the summary.
    #[serde(default)]
    pub store_fields: bool,
}

impl Schedule {
    pub fn new(burn_in: usize, length: usize, thin: usize) -> Result<Self> {
        let s = Schedule {
            burn_in,
            length,
            thin,
            adapt_window: default_adapt_window(),
            structure_every: 0,
            target_acceptance: default_target_acceptance(),
            store_fields: false,
        };
        s.validated()
    }

    pub fn with_structure_every(mut self, every: usize) -> Self {
        self.structure_every = every;
        self
    }

    pub fn with_store_fields(mut self, store: bool) -> Self {
        self.store_fields = store;
        self
    }

    pub fn validated(self) -> Result<Self> {
        if self.thin == 0 {
            return Err(Error::config("thinning interval must be at least 1"));
        }
        if self.adapt_window == 0 {
            return Err(Error::config("adaptation window must be at least 1"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::config("target acceptance must lie in (0,1)"));
        }
        Ok(self)
    }
}

/// Quantile levels reported for every posterior functional.
pub const SUMMARY_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Everything a chain run reports.
#[derive(Clone, Debug)]
pub struct ChainSummary {
    /// L2 distance to the truth per recorded sample (empty without a truth).
    pub err_l2: Vec<f64>,
    pub err_quantiles: Vec<(f64, f64)>,
    /// L2 distance between the forward surface and the truth's forward
    /// surface per recorded sample (empty without a truth).
    pub pred_err: Vec<f64>,
    pub pred_quantiles: Vec<(f64, f64)>,
    /// Holder-norm path of the composed field per recorded sample.
    pub cbeta: Vec<f64>,
    pub cbeta_quantiles: Vec<(f64, f64)>,
    pub pcn_accepted: u64,
    pub pcn_proposed: u64,
    pub structure_accepted: u64,
    pub structure_proposed: u64,
    pub structure_budget_rejections: u64,
    /// Visits per hyperprior table entry among recorded samples.
    pub structure_counts: BTreeMap<usize, u64>,
    pub final_betas: Vec<f64>,
    pub final_loglik: f64,
    pub fields: Option<Vec<Field>>,
}

impl ChainSummary {
    pub fn pcn_acceptance(&self) -> f64 {
        if self.pcn_proposed == 0 {
            0.0
        } else {
            self.pcn_accepted as f64 / self.pcn_proposed as f64
        }
    }

    pub fn structure_acceptance(&self) -> f64 {
        if self.structure_proposed == 0 {
            0.0
        } else {
            self.structure_accepted as f64 / self.structure_proposed as f64
        }
    }

    pub fn median_err(&self) -> Option<f64> {
        median_of(&self.err_quantiles)
    }

    pub fn median_pred_err(&self) -> Option<f64> {
        median_of(&self.pred_quantiles)
    }
}

fn median_of(quantiles: &[(f64, f64)]) -> Option<f64> {
    quantiles
        .iter()
        .find(|(q, _)| (*q - 0.5).abs() < 1e-12)
        .map(|(_, v)| *v)
}

fn quantiles(values: &[f64]) -> Vec<(f64, f64)> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite functionals"));
    SUMMARY_QUANTILES
        .iter()
        .map(|&q| {
            let pos = ((sorted.len() - 1) as f64 * q).round() as usize;
            (q, sorted[pos])
        })
        .collect()
}

struct Recorder<'a> {
    truth: Option<&'a Field>,
    forward_truth: Option<Field>,
    beta: u32,
    err_l2: Vec<f64>,
    pred_err: Vec<f64>,
    cbeta: Vec<f64>,
    structure_counts: BTreeMap<usize, u64>,
    fields: Option<Vec<Field>>,
}

impl<'a> Recorder<'a> {
    fn new(
        truth: Option<&'a Field>,
        forward_truth: Option<Field>,
        beta: u32,
        store_fields: bool,
    ) -> Self {
        Recorder {
            truth,
            forward_truth,
            beta,
            err_l2: Vec::new(),
            pred_err: Vec::new(),
            cbeta: Vec::new(),
            structure_counts: BTreeMap::new(),
            fields: store_fields.then(Vec::new),
        }
    }

    fn record(&mut self, sampler: &PosteriorSampler, state: &ChainState) -> Result<()> {
        if let Some(truth) = self.truth {
            let diff = state
                .composed
                .zip_with(truth, "error", |a, b| a - b)?;
            self.err_l2.push(l2_norm(&diff));
        }
        if let Some(ft) = &self.forward_truth {
            let diff = state.forward.zip_with(ft, "prediction error", |a, b| a - b)?;
            self.pred_err.push(l2_norm(&diff));
        }
        self.cbeta
            .push(norms(&state.composed, self.beta)?.cbeta(self.beta));
        if let Some(idx) = sampler
            .prior
            .config()
            .hyperprior()
            .find_graph(state.structure.graph())
        {
            *self.structure_counts.entry(idx).or_insert(0) += 1;
        }
        if let Some(fields) = &mut self.fields {
            fields.push(state.composed.clone());
        }
        Ok(())
    }
}

/// Runs burn-in with Robbins-Monro step adaptation, then the fixed kernel,
/// recording every `thin`-th state.
///
/// `truth` enables the posterior error functional. A non-finite
/// log-likelihood aborts with the offending structure in the message.
pub fn run_chain(
    sampler: &PosteriorSampler,
    truth: Option<&Field>,
    schedule: &Schedule,
    key: StreamKey,
) -> Result<ChainSummary> {
    let schedule = schedule.validated()?;
    let mut rng = key.rng();
    let beta_holder = sampler.prior.config().hyperprior().beta();
    let forward_truth = match truth {
        Some(t) => Some(sampler.model.apply(t)?),
        None => None,
    };
    let mut state = sampler.init_state(&mut rng).map_err(annotate_abort)?;
    let mut recorder = Recorder::new(truth, forward_truth, beta_holder, schedule.store_fields);

    // Burn-in with adaptation.
    let mut window_accepts = 0u64;
    let mut window_proposals = 0u64;
    for step in 0..schedule.burn_in {
        if is_structure_step(&schedule, step) {
            let out = sampler.structure_move(&state, &mut rng).map_err(annotate_abort)?;
            if let Some(new_state) = out.state {
                state = new_state;
            }
        } else {
            let out = sampler.pcn_step(&state, &mut rng).map_err(annotate_abort)?;
            window_proposals += 1;
            if let Some(new_state) = out.state {
                state = new_state;
                window_accepts += 1;
            }
        }
        if window_proposals >= schedule.adapt_window as u64 {
            let rate = window_accepts as f64 / window_proposals as f64;
            let shift = rate - schedule.target_acceptance;
            let adjusted: Vec<f64> = state
                .log_betas
                .iter()
                .map(|lb| (lb + shift).clamp(BETA_FLOOR.ln(), 0.0))
                .collect();
            state.set_log_betas(adjusted)?;
            window_accepts = 0;
            window_proposals = 0;
        }
    }

    // Sampling with the kernel frozen.
    let mut pcn_accepted = 0u64;
    let mut pcn_proposed = 0u64;
    let mut structure_accepted = 0u64;
    let mut structure_proposed = 0u64;
    let mut budget_rejections = 0u64;
    if schedule.length == 0 {
        recorder.record(sampler, &state)?;
    }
    for step in 0..schedule.length {
        if is_structure_step(&schedule, step) {
            structure_proposed += 1;
            let out = sampler.structure_move(&state, &mut rng).map_err(annotate_abort)?;
            if out.budget_hit {
                budget_rejections += 1;
            }
            if let Some(new_state) = out.state {
                state = new_state;
                structure_accepted += 1;
            }
        } else {
            pcn_proposed += 1;
            let out = sampler.pcn_step(&state, &mut rng).map_err(annotate_abort)?;
            if let Some(new_state) = out.state {
                state = new_state;
                pcn_accepted += 1;
            }
        }
        if (step + 1) % schedule.thin == 0 {
            recorder.record(sampler, &state)?;
        }
    }

    Ok(ChainSummary {
        err_quantiles: quantiles(&recorder.err_l2),
        err_l2: recorder.err_l2,
        pred_quantiles: quantiles(&recorder.pred_err),
        pred_err: recorder.pred_err,
        cbeta_quantiles: quantiles(&recorder.cbeta),
        cbeta: recorder.cbeta,
        pcn_accepted,
        pcn_proposed,
        structure_accepted,
        structure_proposed,
        structure_budget_rejections: budget_rejections,
        structure_counts: recorder.structure_counts,
        final_betas: state.betas(),
        final_loglik: state.loglik,
        fields: recorder.fields,
    })
}

fn is_structure_step(schedule: &Schedule, step: usize) -> bool {
    schedule.structure_every > 0 && (step + 1) % schedule.structure_every == 0
}

fn annotate_abort(e: Error) -> Error {
    match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("chain aborted: {msg}")),
        other => other,
    }
}

/// How the rescaled-GP baseline shrinks its prior with n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineScaling {
    /// `n^(-d / (4 tau + 4 + 2 d))`.
    Canonical,
    /// `n^(-e)` with a caller-chosen exponent `e >= 0`.
    CustomExponent(f64),
}

/// Rescaled series prior on the ambient box: `rho_n^(-1) * cutoff * sum_j
/// xi_j lambda_j^(-tau/2) e_j`.
#[derive(Clone, Debug)]
pub struct BaselineConfig {
    tau: f64,
    scaling: BaselineScaling,
    basis: SeriesBasis,
    grid: Grid,
    cutoff: Cutoff,
}

impl BaselineConfig {
    pub fn new(
        tau: f64,
        scaling: BaselineScaling,
        beta: u32,
        ambient_d: usize,
        points_per_axis: usize,
        margin: f64,
        trunc: usize,
    ) -> Result<Self> {
        let floor = beta as f64 + ambient_d as f64 / 2.0;
        if !(tau.is_finite() && tau > floor) {
            return Err(Error::config(format!(
                "baseline smoothness tau must exceed beta + d/2 = {floor}, got {tau}"
            )));
        }
        if let BaselineScaling::CustomExponent(e) = scaling {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::config(format!(
                    "custom scaling exponent must be >= 0, got {e}"
                )));
            }
        }
        let grid = Grid::ambient(ambient_d, points_per_axis, margin)?;
        let basis = SeriesBasis::new(
            BasisKind::TensorCosine,
            ambient_d,
            trunc,
            grid.extent().to_vec(),
        )?;
        let cutoff = Cutoff::new(ambient_d, margin)?;
        Ok(BaselineConfig {
            tau,
            scaling,
            basis,
            grid,
            cutoff,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn basis(&self) -> &SeriesBasis {
        &self.basis
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The multiplicative shrinkage `rho_n^(-1)`.
    pub fn scaling_factor(&self, n: u64) -> Result<f64> {
        if n < 1 {
            return Err(Error::config("baseline scaling needs n >= 1"));
        }
        let d = self.grid.dim() as f64;
        let e = match self.scaling {
            BaselineScaling::Canonical => d / (4.0 * self.tau + 4.0 + 2.0 * d),
            BaselineScaling::CustomExponent(e) => e,
        };
        Ok((n as f64).powf(-e))
    }

    /// Scaled series coefficients for given mode variables.
    pub fn coeffs_from_xis(&self, xis: &[f64], n: u64) -> Result<Vec<f64>> {
        if xis.len() != self.basis.n_modes() {
            return Err(Error::config(format!(
                "expected {} mode variables, got {}",
                self.basis.n_modes(),
                xis.len()
            )));
        }
        let factor = self.scaling_factor(n)?;
        Ok(xis
            .iter()
            .enumerate()
            .map(|(k, &xi)| xi * self.basis.weight(k, self.tau) * factor)
            .collect())
    }

    /// Synthesis times cutoff on the ambient grid.
    pub fn field_from_coeffs(&self, coeffs: &[f64]) -> Result<Field> {
        let raw = self.basis.synthesize(coeffs, &self.grid)?;
        let cut = self.cutoff.field(&self.grid)?;
        let mut out = raw.zip_with(&cut, "baseline draw", |a, b| a * b)?;
        out.set_provenance(format!("baseline tau={}", self.tau));
        Ok(out)
    }
}

/// One draw from the rescaled baseline prior.
pub fn baseline_prior_sample<R: Rng + ?Sized>(
    cfg: &BaselineConfig,
    n: u64,
    rng: &mut R,
) -> Result<Field> {
    let xis: Vec<f64> = (0..cfg.basis.n_modes())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let coeffs = cfg.coeffs_from_xis(&xis, n)?;
    cfg.field_from_coeffs(&coeffs)
}

/// pCN chain for the baseline prior (no conditioning set, no structure
/// moves), reported in the same summary format.
pub fn run_baseline_chain(
    cfg: &BaselineConfig,
    model: &ForwardModel,
    data: &Dataset,
    n: u64,
    truth: Option<&Field>,
    schedule: &Schedule,
    key: StreamKey,
) -> Result<ChainSummary> {
    let schedule = schedule.validated()?;
    let mut rng = key.rng();
    let mut log_beta = INITIAL_BETA.ln();

    let draw_xis = |rng: &mut rand_chacha::ChaCha20Rng| -> Vec<f64> {
        (0..cfg.basis.n_modes())
            .map(|_| StandardNormal.sample(rng))
            .collect()
    };

    let forward_truth = match truth {
        Some(t) => Some(model.apply(t)?),
        None => None,
    };
    let mut coeffs = cfg.coeffs_from_xis(&draw_xis(&mut rng), n)?;
    let mut field = cfg.field_from_coeffs(&coeffs)?;
    let mut forward = model.apply(&field)?;
    let mut loglik = log_likelihood(&forward, data)?;

    let mut err_l2 = Vec::new();
    let mut pred_err = Vec::new();
    let mut cbeta_path = Vec::new();
    let mut fields_out: Option<Vec<Field>> = schedule.store_fields.then(Vec::new);
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let mut window_accepts = 0u64;
    let mut window_proposals = 0u64;

    let total = schedule.burn_in + schedule.length;
    let record = |field: &Field,
                  forward: &Field,
                  err_l2: &mut Vec<f64>,
                  pred_err: &mut Vec<f64>,
                  cbeta_path: &mut Vec<f64>,
                  fields_out: &mut Option<Vec<Field>>|
     -> Result<()> {
        if let Some(truth) = truth {
            let diff = field.zip_with(truth, "error", |a, b| a - b)?;
            err_l2.push(l2_norm(&diff));
        }
        if let Some(ft) = &forward_truth {
            let diff = forward.zip_with(ft, "prediction error", |a, b| a - b)?;
            pred_err.push(l2_norm(&diff));
        }
        cbeta_path.push(norms(field, 1)?.cbeta(1));
        if let Some(fs) = fields_out {
            fs.push(field.clone());
        }
        Ok(())
    };

    if schedule.length == 0 {
        record(
            &field,
            &forward,
            &mut err_l2,
            &mut pred_err,
            &mut cbeta_path,
            &mut fields_out,
        )?;
    }
    for step in 0..total {
        let burning = step < schedule.burn_in;
        let beta = log_beta.exp().min(1.0);
        let keep = (1.0 - beta * beta).max(0.0).sqrt();
        let fresh = cfg.coeffs_from_xis(&draw_xis(&mut rng), n)?;
        let proposal: Vec<f64> = coeffs
            .iter()
            .zip(&fresh)
            .map(|(c, w)| keep * c + beta * w)
            .collect();
        let prop_field = cfg.field_from_coeffs(&proposal)?;
        let prop_forward = model.apply(&prop_field).map_err(annotate_abort)?;
        let prop_loglik = log_likelihood(&prop_forward, data).map_err(annotate_abort)?;
        let log_u: f64 = rng.gen::<f64>().ln();
        let accept = log_u < log_accept_ratio(prop_loglik, loglik);
        if accept {
            coeffs = proposal;
            field = prop_field;
            forward = prop_forward;
            loglik = prop_loglik;
        }
        if burning {
            window_proposals += 1;
            if accept {
                window_accepts += 1;
            }
            if window_proposals >= schedule.adapt_window as u64 {
                let rate = window_accepts as f64 / window_proposals as f64;
                log_beta = (log_beta + rate - schedule.target_acceptance)
                    .clamp(BETA_FLOOR.ln(), 0.0);
                window_accepts = 0;
                window_proposals = 0;
            }
        } else {
            proposed += 1;
            if accept {
                accepted += 1;
            }
            let sample_idx = step - schedule.burn_in;
            if (sample_idx + 1) % schedule.thin == 0 {
                record(
                    &field,
                    &forward,
                    &mut err_l2,
                    &mut pred_err,
                    &mut cbeta_path,
                    &mut fields_out,
                )?;
            }
        }
    }

    Ok(ChainSummary {
        err_quantiles: quantiles(&err_l2),
        err_l2,
        pred_quantiles: quantiles(&pred_err),
        pred_err,
        cbeta_quantiles: quantiles(&cbeta_path),
        cbeta: cbeta_path,
        pcn_accepted: accepted,
        pcn_proposed: proposed,
        structure_accepted: 0,
        structure_proposed: 0,
        structure_budget_rejections: 0,
        structure_counts: BTreeMap::new(),
        final_betas: vec![log_beta.exp()],
        final_loglik: loglik,
        fields: fields_out,
    })
}
