//! Exact rate-exponent calculator.
//!
//! Every contraction-rate statement in this laboratory is a power of n; the
//! experiments estimate the powers empirically and this module produces the
//! theoretical values as exact rationals. Writing `rate = n^(-exponent)`:
//!
//! ```text
//! prediction (t-intrinsic):   alpha / (2 alpha + t)
//! DGP L2:                     zeta * alpha / (2 alpha + t),
//!                             zeta = (beta-1)/(beta+1)  (Darcy, integer beta >= 2)
//!                             zeta = beta/(beta+2)      (Schrodinger, beta >= 1)
//! small ball delta_n:         (alpha+1) / (2 alpha + 2 + d)
//! baseline L2 lower bound:    alpha / (2 alpha + 2 + d)      [delta_n^(alpha/(alpha+1))]
//! tau-prior lower bound:      tau / (2 tau + 2 + d)          when tau <= alpha
//!                             alpha / (2 alpha + 2 + d)      when alpha < tau < alpha + d/2
//!                             alpha / (2 tau + 2)            when tau >= alpha + d/2
//! canonical shrink rho_n^-1:  d / (4 tau + 4 + 2 d)
//! ```
//!
//! The oversmoothed lower-bound case carries a sub-polynomial factor (the
//! rescaling sequence may grow arbitrarily slowly); only the polynomial part
//! is reported. Its n-power follows the truncation-point derivation, under
//! which the three cases agree at the boundary tau = alpha + d/2.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::Problem;

/// Exact rational exponent.
pub type Rat = Ratio<i64>;

fn rat(n: i64, d: i64) -> Rat {
    Ratio::new(n, d)
}

fn check_alpha(alpha: Rat, formula: &str) -> Result<()> {
    if alpha <= Ratio::from_integer(0) {
        return Err(Error::config(format!(
            "{formula} needs smoothness alpha > 0, got {alpha}"
        )));
    }
    Ok(())
}

/// Smallest beta the stability estimate supports for each problem.
pub fn min_beta(problem: Problem) -> u32 {
    match problem {
        Problem::Darcy => 2,
        Problem::Schrodinger => 1,
    }
}

/// Exact inverse-stability exponent `zeta`.
pub fn stability_zeta(problem: Problem, beta: u32) -> Result<Rat> {
    if beta < min_beta(problem) {
        return Err(Error::config(format!(
            "stability exponent zeta for {problem:?} needs integer beta >= {}, got {beta}",
            min_beta(problem)
        )));
    }
    let b = beta as i64;
    Ok(match problem {
        Problem::Darcy => rat(b - 1, b + 1),
        Problem::Schrodinger => rat(b, b + 2),
    })
}

/// Exact forward-stability exponent `xi`.
pub fn stability_xi(problem: Problem, beta: u32) -> Result<Rat> {
    if beta < min_beta(problem) {
        return Err(Error::config(format!(
            "stability exponent xi for {problem:?} needs integer beta >= {}, got {beta}",
            min_beta(problem)
        )));
    }
    let b = beta as i64;
    Ok(match problem {
        Problem::Darcy => Ratio::from_integer(b * (b + 1)),
        Problem::Schrodinger => rat(b + 2, 2),
    })
}

/// n-exponent of the prediction-risk rate over a t-dimensional layer,
/// `alpha / (2 alpha + t)`.
pub fn prediction_exponent(alpha: Rat, t: u32) -> Result<Rat> {
    check_alpha(alpha, "prediction exponent")?;
    if t == 0 {
        return Err(Error::config(
            "prediction exponent needs intrinsic dimension t >= 1",
        ));
    }
    Ok(alpha / (alpha * 2 + Ratio::from_integer(t as i64)))
}

/// n-exponent of the DGP L2 contraction rate: the prediction exponent
/// damped by the inverse-stability exponent zeta.
///
/// `t_eff` is the effective intrinsic dimension of the rate-determining
/// layer: the ambient d for a generic truth, 1 for additive truths.
pub fn dgp_l2_exponent(problem: Problem, alpha: Rat, beta: u32, t_eff: u32) -> Result<Rat> {
    let zeta = stability_zeta(problem, beta)?;
    Ok(zeta * prediction_exponent(alpha, t_eff)?)
}

/// n-exponent of the small-ball rate `delta_n = n^-((alpha+1)/(2 alpha + 2 + d))`.
pub fn small_ball_exponent(alpha: Rat, d: u32) -> Result<Rat> {
    check_alpha(alpha, "small-ball exponent")?;
    let one = Ratio::from_integer(1);
    Ok((alpha + one) / (alpha * 2 + Ratio::from_integer(2 + d as i64)))
}

/// n-exponent of the rescaled-GP L2 lower bound `delta_n^(alpha/(alpha+1))`.
pub fn baseline_lower_exponent(alpha: Rat, d: u32) -> Result<Rat> {
    check_alpha(alpha, "baseline lower-bound exponent")?;
    Ok(alpha / (alpha * 2 + Ratio::from_integer(2 + d as i64)))
}

/// n-exponent of the canonical shrink factor `rho_n^-1 = n^-(d/(4 tau + 4 + 2d))`.
pub fn canonical_scaling_exponent(tau: Rat, d: u32) -> Result<Rat> {
    if tau <= Ratio::from_integer(0) {
        return Err(Error::config(format!(
            "canonical scaling needs tau > 0, got {tau}"
        )));
    }
    Ok(Ratio::from_integer(d as i64) / (tau * 4 + Ratio::from_integer(4 + 2 * d as i64)))
}

/// Which smoothness regime a tau-prior falls into against an alpha-truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorRegime {
    /// tau <= alpha: the prior is rough enough to reach the truth's ball.
    Undersmoothed,
    /// alpha < tau < alpha + d/2: approximation bites but the canonical
    /// rescale still balances.
    MildlyOversmoothed,
    /// tau >= alpha + d/2: approximation dominates for every rescale.
    Oversmoothed,
}

/// Lower-bound n-exponent for a tau-smooth rescaled GP prior on an
/// alpha-smooth additive truth, with the regime that produced it.
pub fn proposition_lower_exponent(
    alpha: Rat,
    tau: Rat,
    beta: u32,
    d: u32,
) -> Result<(PriorRegime, Rat)> {
    check_alpha(alpha, "tau-prior lower-bound exponent")?;
    let floor = Ratio::from_integer(beta as i64) + rat(d as i64, 2);
    if tau <= floor {
        return Err(Error::config(format!(
            "tau-prior lower-bound exponent needs tau > beta + d/2 = {floor}, got {tau}"
        )));
    }
    if alpha <= floor {
        return Err(Error::config(format!(
            "tau-prior lower-bound exponent needs alpha > beta + d/2 = {floor}, got {alpha}"
        )));
    }
    let two = Ratio::from_integer(2);
    let half_d = rat(d as i64, 2);
    if tau <= alpha {
        Ok((
            PriorRegime::Undersmoothed,
            tau / (tau * 2 + two + Ratio::from_integer(d as i64)),
        ))
    } else if tau < alpha + half_d {
        Ok((
            PriorRegime::MildlyOversmoothed,
            alpha / (alpha * 2 + two + Ratio::from_integer(d as i64)),
        ))
    } else {
        Ok((PriorRegime::Oversmoothed, alpha / (tau * 2 + two)))
    }
}

/// Smallest ambient dimension at which the additive-truth DGP exponent
/// strictly exceeds the baseline lower-bound exponent (and stays above it:
/// the baseline exponent is strictly decreasing in d, the DGP one constant).
pub fn gam_ordering_crossover(problem: Problem, alpha: Rat, beta: u32) -> Result<u32> {
    let dgp = dgp_l2_exponent(problem, alpha, beta, 1)?;
    for d in 1..=10_000u32 {
        if dgp > baseline_lower_exponent(alpha, d)? {
            return Ok(d);
        }
    }
    Err(Error::config(
        "no crossover dimension below 10000; parameters out of the intended range",
    ))
}

/// The full exponent table for one problem configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentReport {
    pub problem: Problem,
    pub alpha: Rat,
    pub beta: u32,
    pub d: u32,
    pub tau: Option<Rat>,
    pub stability_xi: Rat,
    pub stability_zeta: Rat,
    /// Prediction-risk exponent with the ambient intrinsic dimension.
    pub prediction: Rat,
    /// DGP L2 exponent with the ambient intrinsic dimension.
    pub dgp_l2: Rat,
    /// Prediction-risk exponent for additive truths (t_eff = 1).
    pub prediction_gam: Rat,
    /// DGP L2 exponent for additive truths (t_eff = 1).
    pub dgp_l2_gam: Rat,
    pub small_ball: Rat,
    pub baseline_lower: Rat,
    /// Lower-bound exponent and regime for the configured tau-prior.
    pub tau_prior_lower: Option<(PriorRegime, Rat)>,
    /// Canonical shrink exponent for the configured tau-prior.
    pub canonical_scaling: Option<Rat>,
}

impl ExponentReport {
    /// Every contraction exponent in the report, labelled.
    pub fn entries(&self) -> Vec<(&'static str, Rat)> {
        let mut out = vec![
            ("prediction", self.prediction),
            ("dgp-l2", self.dgp_l2),
            ("prediction-gam", self.prediction_gam),
            ("dgp-l2-gam", self.dgp_l2_gam),
            ("small-ball", self.small_ball),
            ("baseline-lower", self.baseline_lower),
        ];
        if let Some((_, e)) = self.tau_prior_lower {
            out.push(("tau-prior-lower", e));
        }
        if let Some(e) = self.canonical_scaling {
            out.push(("canonical-scaling", e));
        }
        out
    }
}

/// Evaluates every exponent for one (problem, alpha, beta, d) and an
/// optional baseline smoothness tau, as exact rationals.
pub fn theoretical_exponents(
    problem: Problem,
    alpha: Rat,
    beta: u32,
    d: u32,
    tau: Option<Rat>,
) -> Result<ExponentReport> {
    if d == 0 {
        return Err(Error::config("ambient dimension must be at least 1"));
    }
    let floor = Ratio::from_integer(beta as i64) + rat(d as i64, 2);
    if alpha <= floor {
        return Err(Error::config(format!(
            "lower-bound formulas need alpha > beta + d/2 = {floor}, got {alpha}"
        )));
    }
    let (tau_prior_lower, canonical_scaling) = match tau {
        Some(tau) => (
            Some(proposition_lower_exponent(alpha, tau, beta, d)?),
            Some(canonical_scaling_exponent(tau, d)?),
        ),
        None => (None, None),
    };
    Ok(ExponentReport {
        problem,
        alpha,
        beta,
        d,
        tau,
        stability_xi: stability_xi(problem, beta)?,
        stability_zeta: stability_zeta(problem, beta)?,
        prediction: prediction_exponent(alpha, d)?,
        dgp_l2: dgp_l2_exponent(problem, alpha, beta, d)?,
        prediction_gam: prediction_exponent(alpha, 1)?,
        dgp_l2_gam: dgp_l2_exponent(problem, alpha, beta, 1)?,
        small_ball: small_ball_exponent(alpha, d)?,
        baseline_lower: baseline_lower_exponent(alpha, d)?,
        tau_prior_lower,
        canonical_scaling,
    })
}

/// Parses "3", "7/2", or "3.5" into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rat> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad rational numerator in {s:?}")))?;
        let d: i64 = den
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad rational denominator in {s:?}")))?;
        if d == 0 {
            return Err(Error::config(format!("zero denominator in {s:?}")));
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let sign = if int.trim_start().starts_with('-') { -1 } else { 1 };
        let i: i64 = int
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad decimal in {s:?}")))?;
        if frac.is_empty() || frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::config(format!("bad decimal fraction in {s:?}")));
        }
        let f: i64 = frac.parse().expect("digits only");
        let scale = 10i64.pow(frac.len() as u32);
        return Ok(Ratio::new(i * scale + sign * f, scale));
    }
    let n: i64 = s
        .parse()
        .map_err(|_| Error::config(format!("expected an integer, p/q, or decimal, got {s:?}")))?;
    Ok(Ratio::from_integer(n))
}

/// f64 value of an exact exponent, for plotting and slope comparison.
pub fn to_f64(r: Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
