//! Contraction-rate experiments.
//!
//! A plan fixes a truth, a forward problem, a list of priors, a sample-size
//! grid, and a chain schedule. The runner draws `R` replicate datasets at the
//! largest sample size, reuses their prefixes for the smaller sizes so that
//! sample-size comparisons share randomness, and runs one chain per
//! (prior, n, replicate) cell. Each cell records posterior quantiles of
//!
//! ```text
//! parameter error     ||theta - theta*||_L2
//! prediction risk     ||G(theta) - G(theta*)||_L2
//! ```
//!
//! and the empirical rate is the least-squares slope of
//!
//! ```text
//! log median_error(n) = a + slope * log n
//! ```
//!
//! fitted over every surviving cell, reported with its standard error and
//! R^2 next to the exact theoretical exponents. Cells run in a work pool;
//! every cell owns a disjoint RNG stream keyed by (seed, replicate, cell
//! index), so reruns are bit-identical regardless of thread count.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_data, Dataset};
use crate::dgp::{DgpPriorConfig, DgpSampler};
use crate::error::{Error, Result};
use crate::exponents::{theoretical_exponents, ExponentReport, Rat};
use crate::grid::{Field, Grid};
use crate::mcmc::{
    run_baseline_chain, run_chain, BaselineConfig, BaselineScaling, PosteriorSampler, Schedule,
};
use crate::pde::{DarcyConfig, ForwardConfig, ForwardModel, Problem, SchrodingerConfig};
use crate::rng::{module_ids, StreamKey};
use crate::structure::HyperpriorConfig;
use crate::truth::{build_truth, Truth, TruthSpec};

/// Desk-scale ceilings; exceeding any of them requires the override flag.
pub const DESK_MAX_DIM: usize = 2;
pub const DESK_MAX_N: usize = 4000;
pub const DESK_MAX_REPLICATES: usize = 8;
/// Cap on total chain steps summed over all cells without the override.
pub const DESK_MAX_TOTAL_STEPS: u64 = 2_000_000;

/// Label used for the parameter-error slope fit.
pub const FUNCTIONAL_L2: &str = "l2-median";
/// Label used for the prediction-risk slope fit.
pub const FUNCTIONAL_PRED: &str = "pred-median";

/// Forward problem for an experiment. The PDE problems fix canonical
/// right-hand sides (unit interior source, unit boundary data) so that a
/// plan document stays small; the identity map is the linear debug mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "kebab-case")]
pub enum ProblemSetup {
    Identity,
    Darcy { k_min: f64 },
    Schrodinger,
}

impl ProblemSetup {
    /// The PDE kind, if any.
    pub fn problem(&self) -> Option<Problem> {
        match self {
            ProblemSetup::Identity => None,
            ProblemSetup::Darcy { .. } => Some(Problem::Darcy),
            ProblemSetup::Schrodinger => Some(Problem::Schrodinger),
        }
    }

    /// Instantiate the forward model on a grid.
    pub fn model(&self, grid: &Grid) -> Result<ForwardModel> {
        match self {
            ProblemSetup::Identity => Ok(ForwardModel::Identity),
            ProblemSetup::Darcy { k_min } => {
                let g = Field::from_fn(grid.clone(), "unit source", |_| 1.0)?;
                let cfg = DarcyConfig::new(grid.clone(), g, 1.0, *k_min)?;
                Ok(ForwardModel::Pde(ForwardConfig::Darcy(cfg)))
            }
            ProblemSetup::Schrodinger => {
                let h = Field::from_fn(grid.clone(), "unit boundary", |_| 1.0)?;
                let cfg = SchrodingerConfig::new(grid.clone(), h, 1.0)?;
                Ok(ForwardModel::Pde(ForwardConfig::Schrodinger(cfg)))
            }
        }
    }
}

fn default_baseline_truncation() -> usize {
    16
}

/// One prior entry in a plan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PriorSpec {
    /// Conditioned deep Gaussian process prior with the default graph table.
    Dgp {
        beta: u32,
        alpha_plus: f64,
        q_max: usize,
        m0: f64,
    },
    /// Rescaled series prior with fixed smoothness `tau`.
    Baseline {
        tau: f64,
        beta: u32,
        scaling: BaselineScaling,
        #[serde(default = "default_baseline_truncation")]
        truncation: usize,
    },
}

impl PriorSpec {
    /// Human-readable label used in result tables and plots.
    pub fn label(&self) -> String {
        match self {
            PriorSpec::Dgp { beta, .. } => format!("dgp-beta-{beta}"),
            PriorSpec::Baseline {
                tau,
                scaling: BaselineScaling::Canonical,
                ..
            } => format!("baseline-tau-{tau}"),
            PriorSpec::Baseline {
                tau,
                scaling: BaselineScaling::CustomExponent(e),
                ..
            } => format!("baseline-tau-{tau}-shrink-{e}"),
        }
    }
}

/// Everything needed to reproduce one contraction experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub problem: ProblemSetup,
    pub truth: TruthSpec,
    pub priors: Vec<PriorSpec>,
    /// Strictly increasing sample sizes; at least three for slope fitting.
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub points_per_axis: usize,
    pub margin: f64,
    /// Lifts the desk-scale guard for deliberate large runs.
    #[serde(default)]
    pub override_desk_guard: bool,
}

impl ExperimentPlan {
    /// Total chain steps over all cells, the cost proxy the guard caps.
    pub fn estimated_chain_steps(&self) -> u64 {
        let cells = (self.priors.len() * self.n_grid.len() * self.replicates) as u64;
        cells * (self.schedule.burn_in + self.schedule.length) as u64
    }

    /// Unique result label per prior; duplicates get an ordinal suffix.
    pub fn labels(&self) -> Vec<String> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        self.priors
            .iter()
            .map(|p| {
                let base = p.label();
                let count = seen.entry(base.clone()).or_insert(0);
                *count += 1;
                if *count == 1 {
                    base
                } else {
                    format!("{base}-{count}")
                }
            })
            .collect()
    }

    pub fn validated(&self) -> Result<()> {
        self.truth.clone().validated()?;
        self.schedule.validated()?;
        if self.priors.is_empty() {
            return Err(Error::config("plan needs at least one prior"));
        }
        if self.n_grid.len() < 3 {
            return Err(Error::config(format!(
                "slope fitting needs at least 3 sample sizes, got {}",
                self.n_grid.len()
            )));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::config("sample sizes must be positive"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!(
                "sample-size grid must be strictly increasing, got {:?}",
                self.n_grid
            )));
        }
        if self.replicates == 0 {
            return Err(Error::config("at least one replicate is required"));
        }
        if self.schedule.length < self.schedule.thin {
            return Err(Error::config(
                "schedule records no samples: length is below the thinning interval",
            ));
        }
        Grid::ambient(self.truth.ambient_d, self.points_per_axis, self.margin)?;
        if !self.override_desk_guard {
            let n_max = *self.n_grid.last().expect("nonempty grid");
            if self.truth.ambient_d > DESK_MAX_DIM
                || n_max > DESK_MAX_N
                || self.replicates > DESK_MAX_REPLICATES
                || self.estimated_chain_steps() > DESK_MAX_TOTAL_STEPS
            {
                return Err(Error::config(format!(
                    "plan exceeds the desk-scale guard (d <= {DESK_MAX_DIM}, n <= {DESK_MAX_N}, \
                     replicates <= {DESK_MAX_REPLICATES}, total steps <= {DESK_MAX_TOTAL_STEPS}); \
                     set override_desk_guard to run it anyway"
                )));
            }
        }
        Ok(())
    }
}

/// Posterior summaries from one (prior, n, replicate) chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub prior: String,
    pub n: usize,
    pub replicate: usize,
    pub median_l2: f64,
    pub q90_l2: f64,
    pub median_pred: f64,
    pub q90_pred: f64,
    pub pcn_acceptance: f64,
}

/// A cell whose chain aborted; the experiment continues without it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub prior: String,
    pub n: usize,
    pub replicate: usize,
    pub message: String,
}

/// Least-squares line through (log n, log error).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Slope fit for one prior and one error functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorFit {
    pub prior: String,
    pub functional: String,
    pub fit: SlopeFit,
}

/// Replicate-averaged summaries for one prior at one sample size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub prior: String,
    pub n: usize,
    /// Surviving replicates behind the averages.
    pub replicates: usize,
    pub mean_median_l2: f64,
    pub se_median_l2: f64,
    pub mean_q90_l2: f64,
    pub mean_median_pred: f64,
    pub se_median_pred: f64,
    pub mean_q90_pred: f64,
}

/// Which prior achieved the smallest error at the largest sample size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n: usize,
    pub entries: Vec<ComparisonEntry>,
    /// Label with the smallest replicate-mean median error; descriptive
    /// only, since the asymptotic ordering need not show at desk scale.
    pub smallest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub prior: String,
    pub mean_median_l2: f64,
    pub se_median_l2: f64,
    pub replicates: usize,
}

/// Full output of one contraction experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateReport {
    pub plan: ExperimentPlan,
    /// Smoothness-norm proxy of the realized truth.
    pub truth_proxy_norm: f64,
    /// One entry per surviving cell, prior-major, then n, then replicate.
    pub cells: Vec<CellResult>,
    pub failures: Vec<FailedCell>,
    pub aggregates: Vec<AggregatePoint>,
    /// Fits present only for priors with at least 3 surviving sample sizes.
    pub fits: Vec<PriorFit>,
    /// Exact theoretical exponents, when the problem and truth admit them.
    pub exponents: Option<ExponentReport>,
    pub comparison: Option<Comparison>,
}

/// OLS fit of `log err = intercept + slope * log n` on raw (n, err) pairs.
///
/// Needs at least three distinct sample sizes and positive errors. On an
/// exact power law the slope is recovered to machine precision and the
/// standard error vanishes.
pub fn fit_log_log_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut distinct: Vec<f64> = Vec::new();
    for &(n, err) in points {
        if !(n > 0.0 && err > 0.0 && n.is_finite() && err.is_finite()) {
            return Err(Error::config(format!(
                "slope fit needs positive finite (n, error) pairs, got ({n}, {err})"
            )));
        }
        if !distinct.contains(&n) {
            distinct.push(n);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::config(format!(
            "slope fit needs at least 3 distinct sample sizes, got {}",
            distinct.len()
        )));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let x_bar = xs.iter().sum::<f64>() / m;
    let y_bar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let sst: f64 = ys.iter().map(|y| (y - y_bar) * (y - y_bar)).sum();
    let stderr = if points.len() > 2 {
        (ssr / (m - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        r2,
        n_points: points.len(),
    })
}

/// Per-prior slope fits of both error functionals over the surviving cells.
/// Priors with fewer than 3 surviving sample sizes are skipped.
pub fn prior_fits(labels: &[String], cells: &[CellResult]) -> Vec<PriorFit> {
    let functionals: [(&str, fn(&CellResult) -> f64); 2] = [
        (FUNCTIONAL_L2, |c| c.median_l2),
        (FUNCTIONAL_PRED, |c| c.median_pred),
    ];
    let mut out = Vec::new();
    for label in labels {
        for (functional, value) in functionals {
            let points: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.prior == *label && value(c) > 0.0)
                .map(|c| (c.n as f64, value(c)))
                .collect();
            if let Ok(fit) = fit_log_log_slope(&points) {
                out.push(PriorFit {
                    prior: label.clone(),
                    functional: functional.to_string(),
                    fit,
                });
            }
        }
    }
    out
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Replicate averages per (prior, n), in label-major order.
pub fn aggregate_cells(
    labels: &[String],
    n_grid: &[usize],
    cells: &[CellResult],
) -> Vec<AggregatePoint> {
    let mut out = Vec::new();
    for label in labels {
        for &n in n_grid {
            let slice: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.prior == *label && c.n == n)
                .collect();
            if slice.is_empty() {
                continue;
            }
            let medians_l2: Vec<f64> = slice.iter().map(|c| c.median_l2).collect();
            let medians_pred: Vec<f64> = slice.iter().map(|c| c.median_pred).collect();
            let (mean_median_l2, se_median_l2) = mean_and_se(&medians_l2);
            let (mean_median_pred, se_median_pred) = mean_and_se(&medians_pred);
            out.push(AggregatePoint {
                prior: label.clone(),
                n,
                replicates: slice.len(),
                mean_median_l2,
                se_median_l2,
                mean_q90_l2: slice.iter().map(|c| c.q90_l2).sum::<f64>() / slice.len() as f64,
                mean_median_pred,
                se_median_pred,
                mean_q90_pred: slice.iter().map(|c| c.q90_pred).sum::<f64>() / slice.len() as f64,
            });
        }
    }
    out
}

fn compare_at_largest_n(aggregates: &[AggregatePoint], n_max: usize) -> Option<Comparison> {
    let entries: Vec<ComparisonEntry> = aggregates
        .iter()
        .filter(|a| a.n == n_max)
        .map(|a| ComparisonEntry {
            prior: a.prior.clone(),
            mean_median_l2: a.mean_median_l2,
            se_median_l2: a.se_median_l2,
            replicates: a.replicates,
        })
        .collect();
    if entries.len() < 2 {
        return None;
    }
    let smallest = entries
        .iter()
        .min_by(|a, b| {
            a.mean_median_l2
                .partial_cmp(&b.mean_median_l2)
                .expect("finite means")
        })?
        .prior
        .clone();
    Some(Comparison {
        n: n_max,
        entries,
        smallest,
    })
}

fn exponent_report(plan: &ExperimentPlan) -> Option<ExponentReport> {
    let problem = plan.problem.problem()?;
    let alpha: Rat = Ratio::approximate_float(plan.truth.alpha)?;
    let beta = plan
        .priors
        .iter()
        .find_map(|p| match p {
            PriorSpec::Dgp { beta, .. } => Some(*beta),
            _ => None,
        })
        .or_else(|| {
            plan.priors.iter().find_map(|p| match p {
                PriorSpec::Baseline { beta, .. } => Some(*beta),
                _ => None,
            })
        })?;
    let tau: Option<Rat> = plan
        .priors
        .iter()
        .find_map(|p| match p {
            PriorSpec::Baseline { tau, .. } => Some(*tau),
            _ => None,
        })
        .and_then(Ratio::approximate_float);
    theoretical_exponents(problem, alpha, beta, plan.truth.ambient_d as u32, tau).ok()
}

fn quantile_value(quantiles: &[(f64, f64)], target: f64) -> Result<f64> {
    quantiles
        .iter()
        .find(|(q, _)| (q - target).abs() < 1e-12)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            Error::config(format!(
                "chain recorded no samples; the {target} quantile is unavailable"
            ))
        })
}

struct Cell {
    prior_idx: usize,
    n_idx: usize,
    replicate: usize,
}

fn run_cell(
    plan: &ExperimentPlan,
    labels: &[String],
    truth: &Truth,
    model: &ForwardModel,
    datasets: &[Dataset],
    cell: &Cell,
) -> std::result::Result<CellResult, FailedCell> {
    let n = plan.n_grid[cell.n_idx];
    let attempt = || -> Result<CellResult> {
        let data = datasets[cell.replicate].prefix(n)?;
        let key = StreamKey::new(plan.seed, module_ids::CHAIN)
            .with_replicate(cell.replicate as u32)
            .with_layer((cell.prior_idx * plan.n_grid.len() + cell.n_idx) as u32);
        let summary = match &plan.priors[cell.prior_idx] {
            PriorSpec::Dgp {
                beta,
                alpha_plus,
                q_max,
                m0,
            } => {
                let hyper = HyperpriorConfig::with_default_table(
                    plan.truth.ambient_d,
                    *beta,
                    *alpha_plus,
                    *q_max,
                )?;
                let cfg =
                    DgpPriorConfig::new(hyper, *m0, plan.points_per_axis, plan.margin)?;
                let prior = DgpSampler::new(cfg, n as u64)?;
                let sampler = PosteriorSampler::new(prior, model.clone(), data)?;
                run_chain(&sampler, Some(truth.field()), &plan.schedule, key)?
            }
            PriorSpec::Baseline {
                tau,
                beta,
                scaling,
                truncation,
            } => {
                let cfg = BaselineConfig::new(
                    *tau,
                    *scaling,
                    *beta,
                    plan.truth.ambient_d,
                    plan.points_per_axis,
                    plan.margin,
                    *truncation,
                )?;
                run_baseline_chain(
                    &cfg,
                    model,
                    &data,
                    n as u64,
                    Some(truth.field()),
                    &plan.schedule,
                    key,
                )?
            }
        };
        Ok(CellResult {
            prior: labels[cell.prior_idx].clone(),
            n,
            replicate: cell.replicate,
            median_l2: quantile_value(&summary.err_quantiles, 0.5)?,
            q90_l2: quantile_value(&summary.err_quantiles, 0.9)?,
            median_pred: quantile_value(&summary.pred_quantiles, 0.5)?,
            q90_pred: quantile_value(&summary.pred_quantiles, 0.9)?,
            pcn_acceptance: summary.pcn_acceptance(),
        })
    };
    attempt().map_err(|e| FailedCell {
        prior: labels[cell.prior_idx].clone(),
        n,
        replicate: cell.replicate,
        message: e.to_string(),
    })
}

/// Runs the full plan and assembles the rate report.
///
/// Chain aborts are logged in `failures` and leave their slot missing;
/// everything else proceeds. The report is deterministic given (plan, seed),
/// independent of the worker count.
pub fn run_contraction_experiment(plan: &ExperimentPlan) -> Result<RateReport> {
    plan.validated()?;
    let grid = Grid::ambient(plan.truth.ambient_d, plan.points_per_axis, plan.margin)?;
    let truth = build_truth(&plan.truth, &grid)?;
    let model = plan.problem.model(&grid)?;
    let labels = plan.labels();
    let n_max = *plan.n_grid.last().expect("validated grid");

    let mut datasets = Vec::with_capacity(plan.replicates);
    for r in 0..plan.replicates {
        let key = StreamKey::new(plan.seed, module_ids::DATA).with_replicate(r as u32);
        datasets.push(generate_data(truth.field(), n_max, &model, key)?);
    }

    let mut jobs = Vec::new();
    for prior_idx in 0..plan.priors.len() {
        for n_idx in 0..plan.n_grid.len() {
            for replicate in 0..plan.replicates {
                jobs.push(Cell {
                    prior_idx,
                    n_idx,
                    replicate,
                });
            }
        }
    }
    let outcomes: Vec<std::result::Result<CellResult, FailedCell>> = jobs
        .par_iter()
        .map(|cell| run_cell(plan, &labels, &truth, &model, &datasets, cell))
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(c) => cells.push(c),
            Err(f) => failures.push(f),
        }
    }
    let aggregates = aggregate_cells(&labels, &plan.n_grid, &cells);
    let fits = prior_fits(&labels, &cells);
    let comparison = compare_at_largest_n(&aggregates, n_max);
    Ok(RateReport {
        plan: plan.clone(),
        truth_proxy_norm: truth.proxy_norm(),
        cells,
        failures,
        aggregates,
        fits,
        exponents: exponent_report(plan),
        comparison,
    })
}
