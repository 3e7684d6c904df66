//! Random-walk Metropolis-Hastings on the unit sphere.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Standard deviation of the isotropic Gaussian proposal before renormalization.
    pub step: f64,
    /// Steps discarded before the first retained sample.
    pub burn_in: usize,
    /// Keep every `thin`-th state after burn-in.
    pub thin: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            step: 0.3,
            burn_in: 200,
            thin: 10,
        }
    }
}

/// Uniform draw from the unit sphere in `dim` dimensions.
pub fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = l2_norm(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub samples: Vec<Vec<f64>>,
    pub accepted: usize,
    pub proposed: usize,
}

impl ChainOutput {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Runs one chain targeting `exp(log_target)` restricted to the unit sphere.
///
/// Proposals perturb the current point with `N(0, step^2 I)` and project back
/// onto the sphere. The proposal density depends only on the angle between
/// the two points, so it is symmetric and the acceptance ratio reduces to the
/// target ratio.
pub fn sample_sphere<R, F>(
    dim: usize,
    count: usize,
    config: &SamplerConfig,
    log_target: F,
    rng: &mut R,
) -> ChainOutput
where
    R: Rng,
    F: Fn(&[f64]) -> f64,
{
    let thin = config.thin.max(1);
    let total = config.burn_in + count * thin;
    let mut current = random_unit_vector(dim, rng);
    let mut current_lp = log_target(&current);
    let mut samples = Vec::with_capacity(count);
    let mut accepted = 0;
    let mut proposal = vec![0.0; dim];

    for step in 1..=total {
        for (p, c) in proposal.iter_mut().zip(&current) {
            let noise: f64 = rng.sample(StandardNormal);
            *p = c + config.step * noise;
        }
        let norm = l2_norm(&proposal);
        let u: f64 = rng.gen();
        if norm > 1e-12 {
            proposal.iter_mut().for_each(|p| *p /= norm);
            let lp = log_target(&proposal);
            if u.ln() < lp - current_lp {
                current.copy_from_slice(&proposal);
                current_lp = lp;
                accepted += 1;
            }
        }
        if step > config.burn_in && (step - config.burn_in).is_multiple_of(thin) {
            samples.push(current.clone());
        }
    }

    ChainOutput {
        samples,
        accepted,
        proposed: total,
    }
}
