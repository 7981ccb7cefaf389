//! Command-line harness for the inverse-problem laboratory.
//!
//! Subcommands: `forward` (one PDE solve), `prior-sample` (DGP or baseline
//! draws), `exponents` (theoretical rate table), `contract` (run an
//! experiment plan), `lower-bound` (wavelet-spike comparison preset).
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dgp_inverse::dgp::{DgpPriorConfig, DgpSampler};
use dgp_inverse::experiment::{
    run_contraction_experiment, ExperimentPlan, PriorSpec, ProblemSetup, RateReport,
    FUNCTIONAL_L2,
};
use dgp_inverse::exponents::{
    parse_rational, proposition_lower_exponent, theoretical_exponents, to_f64,
};
use dgp_inverse::io;
use dgp_inverse::mcmc::{baseline_prior_sample, BaselineConfig, BaselineScaling, Schedule};
use dgp_inverse::pde::{ForwardModel, Problem};
use dgp_inverse::report::save_report;
use dgp_inverse::rng::{module_ids, StreamKey};
use dgp_inverse::structure::HyperpriorConfig;
use dgp_inverse::truth::{
    spike_order, validate_for_lower_bound, TruthKind, TruthSpec, MAX_SPIKE_LEVEL,
};
use dgp_inverse::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dgpinv",
    version,
    about = "Deep Gaussian process priors for PDE-constrained inverse problems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one PDE forward problem for a saved parameter field.
    Forward(ForwardArgs),
    /// Draw from a DGP or baseline prior and save the draws.
    PriorSample(PriorSampleArgs),
    /// Print the exact theoretical rate-exponent table.
    Exponents(ExponentArgs),
    /// Run a contraction-rate experiment plan.
    Contract(ContractArgs),
    /// Wavelet-spike preset comparing a fixed-smoothness baseline prior
    /// against the DGP prior on a hard additive truth.
    LowerBound(LowerBoundArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemArg {
    Darcy,
    Schrodinger,
}

#[derive(Args)]
struct ForwardArgs {
    /// PDE to solve.
    #[arg(long, value_enum)]
    problem: ProblemArg,
    /// Parameter field document (JSON).
    #[arg(long)]
    theta: PathBuf,
    /// Output path; `.csv` writes a table, anything else a field document.
    #[arg(long)]
    out: PathBuf,
    /// Diffusivity floor for the divergence-form problem.
    #[arg(long, default_value_t = 0.1)]
    k_min: f64,
}

#[derive(Args)]
struct PriorSampleArgs {
    /// Prior document: {"prior": ..., "ambient_d", "points_per_axis",
    /// "margin", "n"}.
    #[arg(long)]
    config: PathBuf,
    /// Number of independent draws.
    #[arg(long, default_value_t = 1)]
    draws: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExponentArgs {
    #[arg(long, value_enum)]
    problem: ProblemArg,
    /// Truth smoothness; integers, p/q, or short decimals.
    #[arg(long)]
    alpha: String,
    /// Forward-regularity order.
    #[arg(long)]
    beta: u32,
    /// Ambient dimension.
    #[arg(long)]
    d: u32,
    /// Baseline prior smoothness for the lower-bound rows.
    #[arg(long)]
    tau: Option<String>,
    /// Emit the table as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ContractArgs {
    /// Experiment plan (single JSON document).
    #[arg(long)]
    plan: PathBuf,
    /// Output directory for cells.csv, report.json, rates.svg.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed recorded in the plan.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct LowerBoundArgs {
    #[arg(long, value_enum, default_value_t = ProblemArg::Schrodinger)]
    problem: ProblemArg,
    /// Integer truth smoothness (must exceed beta + d/2).
    #[arg(long)]
    alpha: u32,
    #[arg(long)]
    beta: u32,
    #[arg(long, default_value_t = 1)]
    d: u32,
    /// Baseline smoothness; defaults to alpha (the undersmoothed edge).
    #[arg(long)]
    tau: Option<String>,
    /// Smoothness-ball radius of the spike truth.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Comma-separated strictly increasing sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "250,1000,4000")]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    replicates: usize,
    #[arg(long, default_value_t = 1500)]
    burn_in: usize,
    #[arg(long, default_value_t = 3000)]
    length: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// DGP hyperprior smoothness ceiling; defaults to alpha + 1.
    #[arg(long)]
    alpha_plus: Option<f64>,
    #[arg(long, default_value_t = 1)]
    q_max: usize,
    #[arg(long, default_value_t = 2.0)]
    m0: f64,
    /// Baseline series truncation per axis.
    #[arg(long, default_value_t = 16)]
    truncation: usize,
    #[arg(long, default_value_t = 0.1)]
    k_min: f64,
    #[arg(long, default_value_t = 65)]
    points_per_axis: usize,
    #[arg(long, default_value_t = 0.25)]
    margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Lift the desk-scale guard.
    #[arg(long)]
    override_desk_guard: bool,
}

/// Standalone prior-draw request, a single JSON document.
#[derive(Serialize, Deserialize)]
struct PriorSampleDoc {
    prior: PriorSpec,
    ambient_d: usize,
    points_per_axis: usize,
    margin: f64,
    /// Sample size the prior is conditioned or rescaled for.
    n: u64,
}

fn main() {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Forward(args) => cmd_forward(args),
        Cmd::PriorSample(args) => cmd_prior_sample(args),
        Cmd::Exponents(args) => cmd_exponents(args),
        Cmd::Contract(args) => cmd_contract(args),
        Cmd::LowerBound(args) => cmd_lower_bound(args),
    };
    if let Err(e) = res {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn configure_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err(Error::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn setup_for(problem: ProblemArg, k_min: f64) -> ProblemSetup {
    match problem {
        ProblemArg::Darcy => ProblemSetup::Darcy { k_min },
        ProblemArg::Schrodinger => ProblemSetup::Schrodinger,
    }
}

fn cmd_forward(args: ForwardArgs) -> Result<()> {
    let theta = io::load_field(&args.theta)?;
    let grid = theta.grid().clone();
    let model = setup_for(args.problem, args.k_min).model(&grid)?;
    let cfg = match &model {
        ForwardModel::Pde(cfg) => cfg,
        ForwardModel::Identity => unreachable!("both problem kinds are PDEs"),
    };
    let (u, info) = cfg.forward(&theta)?;
    println!(
        "{:?} on a {}-d grid with {} points per axis: {} iterations, relative residual {:.3e}",
        cfg.problem(),
        grid.dim(),
        grid.points_per_axis(),
        info.iterations,
        info.residual
    );
    if args.out.extension().is_some_and(|e| e == "csv") {
        io::save_field_csv(&u, &args.out)?;
    } else {
        io::save_field(&u, &args.out)?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_prior_sample(args: PriorSampleArgs) -> Result<()> {
    let doc: PriorSampleDoc = io::load_json(&args.config)?;
    if args.draws == 0 {
        return Err(Error::config("--draws must be at least 1"));
    }
    std::fs::create_dir_all(&args.out)?;
    match doc.prior {
        PriorSpec::Dgp {
            beta,
            alpha_plus,
            q_max,
            m0,
        } => {
            let hyper =
                HyperpriorConfig::with_default_table(doc.ambient_d, beta, alpha_plus, q_max)?;
            let cfg = DgpPriorConfig::new(hyper, m0, doc.points_per_axis, doc.margin)?;
            let sampler = DgpSampler::new(cfg, doc.n)?;
            for r in 0..args.draws {
                let mut rng = StreamKey::new(args.seed, module_ids::ELEMENTARY)
                    .with_replicate(r)
                    .rng();
                let draw = sampler.sample(&mut rng)?;
                let dir = args.out.join(format!("draw-{r}"));
                io::save_deep_draw(&draw, &dir)?;
                let attempts: u32 = draw
                    .components()
                    .iter()
                    .flatten()
                    .map(|c| c.attempts)
                    .sum();
                println!(
                    "draw {r}: graph dims {:?}, {} conditioning attempts -> {}",
                    draw.structure().graph().dims(),
                    attempts,
                    dir.display()
                );
            }
        }
        PriorSpec::Baseline {
            tau,
            beta,
            scaling,
            truncation,
        } => {
            let cfg = BaselineConfig::new(
                tau,
                scaling,
                beta,
                doc.ambient_d,
                doc.points_per_axis,
                doc.margin,
                truncation,
            )?;
            for r in 0..args.draws {
                let mut rng = StreamKey::new(args.seed, module_ids::BASELINE)
                    .with_replicate(r)
                    .rng();
                let field = baseline_prior_sample(&cfg, doc.n, &mut rng)?;
                let path = args.out.join(format!("draw-{r}.json"));
                io::save_field(&field, &path)?;
                println!("draw {r}: rescaled series draw -> {}", path.display());
            }
        }
    }
    Ok(())
}

fn cmd_exponents(args: ExponentArgs) -> Result<()> {
    let problem = match args.problem {
        ProblemArg::Darcy => Problem::Darcy,
        ProblemArg::Schrodinger => Problem::Schrodinger,
    };
    let alpha = parse_rational(&args.alpha)?;
    let tau = args.tau.as_deref().map(parse_rational).transpose()?;
    let report = theoretical_exponents(problem, alpha, args.beta, args.d, tau)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    println!(
        "{:?}: alpha = {}, beta = {}, d = {}",
        report.problem, report.alpha, report.beta, report.d
    );
    println!(
        "stability: xi = {}, zeta = {}",
        report.stability_xi, report.stability_zeta
    );
    println!("rate = n^(-exponent):");
    for (name, rat) in report.entries() {
        println!("  {name:<18} {rat:>8}   = {:.6}", to_f64(rat));
    }
    if let Some((regime, _)) = report.tau_prior_lower {
        println!("tau-prior regime: {regime:?} (tau = {})", report.tau.unwrap());
    }
    match dgp_inverse::exponents::gam_ordering_crossover(problem, alpha, args.beta) {
        Ok(crossover) => println!(
            "additive truths: the DGP exponent (t_eff = 1) beats the baseline \
             lower bound for every d >= {crossover}"
        ),
        Err(_) => println!("additive truths: no crossover dimension below 10000"),
    }
    Ok(())
}

fn print_report_summary(report: &RateReport) {
    for fit in &report.fits {
        println!(
            "{} {}: slope {:.4} +- {:.4} (R2 {:.3}, {} points)",
            fit.prior, fit.functional, fit.fit.slope, fit.fit.stderr, fit.fit.r2, fit.fit.n_points
        );
    }
    if let Some(exp) = &report.exponents {
        let theory: Vec<String> = exp
            .entries()
            .iter()
            .map(|(name, rat)| format!("{name} -{rat}"))
            .collect();
        println!("theory: {}", theory.join(", "));
    }
    if let Some(cmp) = &report.comparison {
        for e in &cmp.entries {
            println!(
                "at n = {}: {} median L2 {:.5} +- {:.5} ({} replicates)",
                cmp.n, e.prior, e.mean_median_l2, e.se_median_l2, e.replicates
            );
        }
        println!("smallest median error at n = {}: {}", cmp.n, cmp.smallest);
    }
    if !report.failures.is_empty() {
        println!(
            "{} cell(s) failed; first: {} (see report.json)",
            report.failures.len(),
            report.failures[0].message
        );
    }
}

fn run_and_save(plan: &ExperimentPlan, out: &PathBuf) -> Result<RateReport> {
    let report = run_contraction_experiment(plan)?;
    let paths = save_report(&report, out)?;
    print_report_summary(&report);
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(report)
}

fn cmd_contract(args: ContractArgs) -> Result<()> {
    configure_pool(args.jobs)?;
    let mut plan: ExperimentPlan = io::load_json(&args.plan)?;
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    run_and_save(&plan, &args.out)?;
    Ok(())
}

fn cmd_lower_bound(args: LowerBoundArgs) -> Result<()> {
    configure_pool(args.jobs)?;
    let alpha = parse_rational(&args.alpha.to_string())?;
    let tau = match &args.tau {
        Some(t) => parse_rational(t)?,
        None => alpha,
    };
    let (regime, lower) = proposition_lower_exponent(alpha, tau, args.beta, args.d)?;
    let n_max = *args
        .n_grid
        .last()
        .ok_or_else(|| Error::config("--n-grid must not be empty"))?;

    // The bad truth is a single wavelet coefficient whose scale matches the
    // claimed rate: equate 2^(-j alpha) with n_max^(-lower exponent).
    let alpha_f = args.alpha as f64;
    let requested = (to_f64(lower) * (n_max as f64).log2() / alpha_f).round() as i64;
    let order = spike_order(alpha_f)?;
    let min_level = (2 * order - 1).next_power_of_two().trailing_zeros();
    let level = (requested.max(min_level as i64) as u32).min(MAX_SPIKE_LEVEL);
    if level as i64 != requested {
        println!(
            "requested spike level {requested} clamped to {level} \
             (support and resolution limits)"
        );
    }

    let truth = TruthSpec {
        kind: TruthKind::WaveletSpikeGam { level },
        alpha: alpha_f,
        radius: args.radius,
        ambient_d: args.d as usize,
    }
    .validated()?;
    validate_for_lower_bound(&truth, args.beta)?;

    let plan = ExperimentPlan {
        problem: setup_for(args.problem, args.k_min),
        truth,
        priors: vec![
            PriorSpec::Baseline {
                tau: to_f64(tau),
                beta: args.beta,
                scaling: BaselineScaling::Canonical,
                truncation: args.truncation,
            },
            PriorSpec::Dgp {
                beta: args.beta,
                alpha_plus: args.alpha_plus.unwrap_or(alpha_f + 1.0),
                q_max: args.q_max,
                m0: args.m0,
            },
        ],
        n_grid: args.n_grid.clone(),
        replicates: args.replicates,
        schedule: Schedule::new(args.burn_in, args.length, args.thin)?,
        seed: args.seed,
        points_per_axis: args.points_per_axis,
        margin: args.margin,
        override_desk_guard: args.override_desk_guard,
    };

    println!(
        "spike truth: level {level}, amplitude {:.6e}, proxy norm target {}",
        args.radius * 2f64.powf(-(level as f64) * (2.0 * alpha_f + 1.0) / 2.0),
        args.radius
    );
    println!(
        "tau-prior lower bound: regime {regime:?}, rate n^(-{lower}) = n^(-{:.6})",
        to_f64(lower)
    );
    let report = run_and_save(&plan, &args.out)?;

    let labels = plan.labels();
    let observed: Vec<Option<f64>> = labels
        .iter()
        .map(|l| {
            report
                .fits
                .iter()
                .find(|f| f.prior == *l && f.functional == FUNCTIONAL_L2)
                .map(|f| f.fit.slope)
        })
        .collect();
    if let Some(slope) = observed[0] {
        println!(
            "baseline observed slope {slope:.4} vs lower-bound slope -{:.4}; \
             observed - bound = {:.4} (descriptive; the bound is asymptotic)",
            to_f64(lower),
            slope + to_f64(lower)
        );
    }
    if let Some(slope) = observed[1] {
        println!("dgp observed slope {slope:.4}");
    }
    Ok(())
}
