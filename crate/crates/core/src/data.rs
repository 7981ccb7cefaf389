//! Synthetic observations and the Gaussian log-likelihood.
//!
//! The observation model is
//!
//! ```text
//! Y_i = G(theta*)(X_i) + eps_i,    X_i ~ U(domain),  eps_i ~ N(0, 1),
//! l_n(theta) = -1/2 sum_i (Y_i - G(theta)(X_i))^2
//! ```
//!
//! up to the additive constant shared by every theta. Datasets record the
//! stream key seed they were generated from, so any experiment cell can be
//! reproduced from its manifest.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::pde::ForwardModel;
use crate::rng::StreamKey;

/// Design points and responses for one inverse-problem instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    truth_ref: String,
    noise_seed: u64,
}

impl Dataset {
    pub fn new(
        xs: Vec<Vec<f64>>,
        ys: Vec<f64>,
        truth_ref: impl Into<String>,
        noise_seed: u64,
    ) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::config(format!(
                "{} design points but {} responses",
                xs.len(),
                ys.len()
            )));
        }
        let dim = xs.first().map(|x| x.len());
        for (i, x) in xs.iter().enumerate() {
            if Some(x.len()) != dim {
                return Err(Error::config(format!(
                    "design point {i} has dimension {}, expected {:?}",
                    x.len(),
                    dim
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("design point {i} is not finite")));
            }
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::config("responses must be finite"));
        }
        Ok(Dataset {
            xs,
            ys,
            truth_ref: truth_ref.into(),
            noise_seed,
        })
    }

    pub fn n(&self) -> usize {
        self.ys.len()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i]
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn truth_ref(&self) -> &str {
        &self.truth_ref
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    /// The first `m` observations as their own dataset. Experiments run the
    /// whole n-grid on prefixes of one replicate draw, so sample-size
    /// comparisons share randomness.
    pub fn prefix(&self, m: usize) -> Result<Dataset> {
        if m > self.n() {
            return Err(Error::config(format!(
                "prefix length {m} exceeds dataset size {}",
                self.n()
            )));
        }
        Ok(Dataset {
            xs: self.xs[..m].to_vec(),
            ys: self.ys[..m].to_vec(),
            truth_ref: self.truth_ref.clone(),
            noise_seed: self.noise_seed,
        })
    }
}

fn sample_design<R: Rng + ?Sized>(forward: &Field, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let grid = forward.grid();
    (0..n)
        .map(|_| {
            (0..grid.dim())
                .map(|k| {
                    let [lo, hi] = grid.extent()[k];
                    rng.gen_range(lo..hi)
                })
                .collect()
        })
        .collect()
}

/// Observations at uniform design points with unit Gaussian noise.
pub fn generate_data(
    truth: &Field,
    n: usize,
    model: &ForwardModel,
    key: StreamKey,
) -> Result<Dataset> {
    generate_with_noise(truth, n, model, 1.0, key)
}

/// Noise-free observations, for debugging and oracle comparisons.
pub fn generate_noiseless(
    truth: &Field,
    n: usize,
    model: &ForwardModel,
    key: StreamKey,
) -> Result<Dataset> {
    generate_with_noise(truth, n, model, 0.0, key)
}

fn generate_with_noise(
    truth: &Field,
    n: usize,
    model: &ForwardModel,
    noise_sd: f64,
    key: StreamKey,
) -> Result<Dataset> {
    let forward = model.apply(truth)?;
    let mut rng = key.rng();
    let xs = sample_design(&forward, n, &mut rng);
    let mut ys = Vec::with_capacity(n);
    for x in &xs {
        let eps: f64 = StandardNormal.sample(&mut rng);
        ys.push(forward.eval(x)? + noise_sd * eps);
    }
    Dataset::new(xs, ys, truth.provenance(), key.seed)
}

/// Forward-surface values at the design points.
pub fn predictions(forward: &Field, data: &Dataset) -> Result<Vec<f64>> {
    data.xs().iter().map(|x| forward.eval(x)).collect()
}

/// `-1/2 sum_i (y_i - G(x_i))^2` for a cached forward solution.
pub fn log_likelihood(forward: &Field, data: &Dataset) -> Result<f64> {
    let mut acc = 0.0;
    for (x, &y) in data.xs().iter().zip(data.ys()) {
        let r = y - forward.eval(x)?;
        acc -= 0.5 * r * r;
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite("log-likelihood".into()));
    }
    Ok(acc)
}
