//! Information distances between observation laws.
//!
//! For two parameters the observation laws differ only through the forward
//! surfaces, and with unit Gaussian noise and uniform design the distances
//! have closed forms in `Delta = G(theta_1) - G(theta_2)`:
//!
//! ```text
//! KL          = 1/2 ||Delta||^2_{L^2(mu)},
//! Hellinger^2 = 2 integral (1 - exp(-Delta(x)^2 / 8)) dmu(x)
//!             <= 1/4 ||Delta||^2_{L^2(mu)},
//! ```
//!
//! where `mu` is the uniform distribution on the domain (volume-normalized
//! Lebesgue measure). Both are evaluated by trapezoid quadrature on the
//! forward grid.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::pde::ForwardModel;

/// Tolerance slack when asserting the Hellinger upper bound.
pub const BOUND_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfoReport {
    /// Kullback-Leibler divergence of the two observation laws.
    pub kl: f64,
    /// Squared Hellinger distance.
    pub hellinger_sq: f64,
    /// The quarter-prediction-risk upper bound on the squared Hellinger
    /// distance.
    pub upper_bound: f64,
    /// Whether `hellinger_sq <= upper_bound` held (up to [`BOUND_SLACK`]).
    pub bound_ok: bool,
}

/// KL and squared Hellinger distance between the observation laws of two
/// parameters under one forward model.
pub fn kl_and_hellinger(
    theta1: &Field,
    theta2: &Field,
    model: &ForwardModel,
) -> Result<InfoReport> {
    let g1 = model.apply(theta1)?;
    let g2 = model.apply(theta2)?;
    if !g1.grid().compatible(g2.grid()) {
        return Err(Error::config(
            "forward surfaces live on incompatible grids",
        ));
    }
    let grid = g1.grid();
    let vol = grid.volume();
    let mut sq = 0.0;
    let mut hell = 0.0;
    for idx in 0..grid.n_nodes() {
        let w = grid.quad_weight(idx);
        let delta = g1.values()[idx] - g2.values()[idx];
        sq += w * delta * delta;
        hell += w * (1.0 - (-delta * delta / 8.0).exp());
    }
    let kl = 0.5 * sq / vol;
    let hellinger_sq = 2.0 * hell / vol;
    let upper_bound = 0.25 * sq / vol;
    Ok(InfoReport {
        kl,
        hellinger_sq,
        upper_bound,
        bound_ok: hellinger_sq <= upper_bound + BOUND_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::rng::{module_ids, StreamKey};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn smooth_pair(scale: f64) -> (Field, Field) {
        let grid = Grid::ambient(1, 129, 0.25).unwrap();
        let f1 = Field::from_fn(grid.clone(), "pair a", |x| scale * (1.7 * x[0]).sin()).unwrap();
        let f2 =
            Field::from_fn(grid, "pair b", |x| scale * 0.5 * (0.9 * x[0]).cos()).unwrap();
        (f1, f2)
    }

    #[test]
    fn identical_parameters_have_zero_distance() {
        let (f1, _) = smooth_pair(1.0);
        let report = kl_and_hellinger(&f1, &f1, &ForwardModel::Identity).unwrap();
        assert_eq!(report.kl, 0.0);
        assert_eq!(report.hellinger_sq, 0.0);
        assert!(report.bound_ok);
    }

    #[test]
    fn kl_is_symmetric_under_swap() {
        let (f1, f2) = smooth_pair(1.0);
        let a = kl_and_hellinger(&f1, &f2, &ForwardModel::Identity).unwrap();
        let b = kl_and_hellinger(&f2, &f1, &ForwardModel::Identity).unwrap();
        assert_eq!(a.kl, b.kl);
        assert_eq!(a.hellinger_sq, b.hellinger_sq);
    }

    #[test]
    fn monte_carlo_kl_matches_quadrature() {
        let (f1, f2) = smooth_pair(1.0);
        let report = kl_and_hellinger(&f1, &f2, &ForwardModel::Identity).unwrap();

        // KL(P1 || P2) = E_{X,Y ~ P1} [log p1(Y|X) - log p2(Y|X)].
        let mut rng = StreamKey::new(71, module_ids::DATA).rng();
        let grid = f1.grid();
        let [lo, hi] = grid.extent()[0];
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = [rng.gen_range(lo..hi)];
            let m1 = f1.eval(&x).unwrap();
            let m2 = f2.eval(&x).unwrap();
            let eps: f64 = StandardNormal.sample(&mut rng);
            let y = m1 + eps;
            let term = 0.5 * ((y - m2) * (y - m2) - (y - m1) * (y - m1));
            sum += term;
            sum_sq += term * term;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let se = ((sum_sq / nf - mean * mean) / nf).sqrt();
        assert!(
            (mean - report.kl).abs() <= 3.0 * se,
            "MC KL {mean} vs quadrature {} (3 SE = {})",
            report.kl,
            3.0 * se
        );
    }

    #[test]
    fn hellinger_bound_holds_on_random_pairs() {
        let grid = Grid::ambient(1, 65, 0.25).unwrap();
        let mut rng = StreamKey::new(7, module_ids::DATA).rng();
        for _ in 0..10 {
            let (a1, k1, a2, k2): (f64, f64, f64, f64) = (
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.5..4.0),
            );
            let f1 =
                Field::from_fn(grid.clone(), "rand a", |x| a1 * (k1 * x[0]).sin()).unwrap();
            let f2 =
                Field::from_fn(grid.clone(), "rand b", |x| a2 * (k2 * x[0]).cos()).unwrap();
            let report = kl_and_hellinger(&f1, &f2, &ForwardModel::Identity).unwrap();
            assert!(report.bound_ok, "bound violated: {report:?}");
            assert!(report.hellinger_sq <= 2.0 + BOUND_SLACK);
            assert!(report.kl >= 0.0);
        }
    }

    #[test]
    fn darcy_surfaces_give_positive_distances() {
        let grid = Grid::ambient(1, 65, 0.25).unwrap();
        let g = Field::constant(grid.clone(), -2.0, "source").unwrap();
        let cfg = crate::pde::DarcyConfig::new(grid.clone(), g, 1e-3, 0.2).unwrap();
        let model = ForwardModel::Pde(crate::pde::ForwardConfig::Darcy(cfg));
        let t1 = Field::constant(grid.clone(), 0.0, "theta1").unwrap();
        let t2 = Field::from_fn(grid, "theta2", |x| 0.3 * x[0]).unwrap();
        let report = kl_and_hellinger(&t1, &t2, &model).unwrap();
        assert!(report.kl > 0.0);
        assert!(report.hellinger_sq > 0.0);
        assert!(report.bound_ok);
    }
}
