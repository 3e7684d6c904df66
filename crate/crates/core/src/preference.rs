//! Linear reward, softmax choice model and the sampled belief over weights.

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gait::mean_and_sample_std;
use crate::mcmc::{self, SamplerConfig};
use crate::profile::{normalize_features, FeatureRanges, TorqueProfileFeatures, FEATURE_COUNT};

/// Default number of weight samples in a belief.
pub const DEFAULT_BELIEF_SIZE: usize = 100;

/// Below this norm the sample mean carries no usable direction.
pub const DEGENERATE_MEAN_NORM: f64 = 0.1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PreferenceError {
    #[error("belief needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("rationality must be non-negative and not NaN, got {0}")]
    InvalidRationality(f64),
    #[error("weight vector has zero norm")]
    ZeroWeights,
}

/// Reward weights, one per profile feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub [f64; FEATURE_COUNT]);

impl WeightVector {
    /// Scales to unit L2 norm.
    pub fn normalized(values: [f64; FEATURE_COUNT]) -> Result<Self, PreferenceError> {
        let norm = mcmc::l2_norm(&values);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(PreferenceError::ZeroWeights);
        }
        Ok(Self(values.map(|v| v / norm)))
    }

    pub fn axis(index: usize) -> Self {
        let mut w = [0.0; FEATURE_COUNT];
        w[index] = 1.0;
        Self(w)
    }

    pub fn norm(&self) -> f64 {
        mcmc::l2_norm(&self.0)
    }

    pub fn dot(&self, other: &[f64; FEATURE_COUNT]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn cosine(&self, other: &WeightVector) -> f64 {
        self.dot(&other.0) / (self.norm() * other.norm())
    }

    fn from_slice(v: &[f64]) -> Self {
        let mut w = [0.0; FEATURE_COUNT];
        w.copy_from_slice(v);
        Self(w)
    }
}

/// `w . phi(features)` with min-max normalized features.
pub fn reward(w: &WeightVector, features: &TorqueProfileFeatures, ranges: &FeatureRanges) -> f64 {
    w.dot(&normalize_features(features, ranges))
}

/// Which of the two presented options was preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Selection {
    A,
    B,
}

impl Selection {
    pub fn other(self) -> Self {
        match self {
            Selection::A => Selection::B,
            Selection::B => Selection::A,
        }
    }
}

/// One side of a query. Batch members carry their index; perturbed
/// validation profiles do not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: Option<usize>,
    pub features: TorqueProfileFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presentation {
    AFirst,
    BFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub a: Candidate,
    pub b: Candidate,
    pub presentation: Presentation,
}

impl Query {
    pub fn between(
        batch: &[TorqueProfileFeatures],
        a: usize,
        b: usize,
    ) -> Self {
        Self {
            a: Candidate {
                index: Some(a),
                features: batch[a],
            },
            b: Candidate {
                index: Some(b),
                features: batch[b],
            },
            presentation: Presentation::AFirst,
        }
    }

    pub fn candidate(&self, selection: Selection) -> &Candidate {
        match selection {
            Selection::A => &self.a,
            Selection::B => &self.b,
        }
    }

    /// Batch indices as an unordered pair, if both sides come from the batch.
    pub fn index_pair(&self) -> Option<(usize, usize)> {
        match (self.a.index, self.b.index) {
            (Some(a), Some(b)) => Some((a.min(b), a.max(b))),
            _ => None,
        }
    }

    pub fn is_distinct(&self) -> bool {
        !self.a.features.same_shape(&self.b.features) || self.a.features.perturbed != self.b.features.perturbed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponderKind {
    Human,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub query: Query,
    pub selected: Selection,
    pub timestamp: DateTime<Utc>,
    pub responder: ResponderKind,
}

impl Choice {
    pub fn chosen(&self) -> &Candidate {
        self.query.candidate(self.selected)
    }

    pub fn rejected(&self) -> &Candidate {
        self.query.candidate(self.selected.other())
    }

    /// `phi(chosen) - phi(rejected)`; the likelihood depends only on this.
    pub fn feature_difference(&self, ranges: &FeatureRanges) -> [f64; FEATURE_COUNT] {
        let c = normalize_features(&self.chosen().features, ranges);
        let r = normalize_features(&self.rejected().features, ranges);
        let mut d = [0.0; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            d[i] = c[i] - r[i];
        }
        d
    }
}

/// `(P(A), P(B))` under a softmax over `beta * reward`.
///
/// The less likely option is computed through the logistic of the negative
/// gap and the other as its complement, so the pair sums to exactly one.
pub fn pair_probabilities(reward_a: f64, reward_b: f64, beta: f64) -> (f64, f64) {
    let gap = beta * (reward_a - reward_b);
    if gap >= 0.0 {
        let e = (-gap).exp();
        let pb = e / (1.0 + e);
        (1.0 - pb, pb)
    } else {
        let e = gap.exp();
        let pa = e / (1.0 + e);
        (pa, 1.0 - pa)
    }
}

pub fn choice_likelihood(
    w: &WeightVector,
    query: &Query,
    chosen: Selection,
    beta: f64,
    ranges: &FeatureRanges,
) -> f64 {
    let ra = reward(w, &query.a.features, ranges);
    let rb = reward(w, &query.b.features, ranges);
    let (pa, pb) = pair_probabilities(ra, rb, beta);
    match chosen {
        Selection::A => pa,
        Selection::B => pb,
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Log-likelihood of observations given as `phi(chosen) - phi(rejected)` rows.
pub fn log_likelihood(w: &[f64], differences: &[Vec<f64>], beta: f64) -> f64 {
    differences
        .iter()
        .map(|d| {
            let margin: f64 = w.iter().zip(d).map(|(a, b)| a * b).sum();
            -softplus(-beta * margin)
        })
        .sum()
}

/// Model and sampler settings used for belief updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateConfig {
    pub beta: f64,
    #[serde(flatten)]
    pub sampler: SamplerConfig,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            sampler: SamplerConfig::default(),
        }
    }
}

/// Equal-mass weight samples approximating the posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub seed: u64,
    pub iteration: u32,
    pub samples: Vec<WeightVector>,
}

impl Belief {
    /// Uniform draws from the unit sphere.
    pub fn prior(size: usize, seed: u64) -> Result<Self, PreferenceError> {
        if size < 2 {
            return Err(PreferenceError::TooFewSamples(size));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..size)
            .map(|_| WeightVector::from_slice(&mcmc::random_unit_vector(FEATURE_COUNT, &mut rng)))
            .collect();
        Ok(Self {
            seed,
            iteration: 0,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn raw_mean(&self) -> [f64; FEATURE_COUNT] {
        let mut mean = [0.0; FEATURE_COUNT];
        for s in &self.samples {
            for (m, v) in mean.iter_mut().zip(&s.0) {
                *m += v;
            }
        }
        mean.map(|m| m / self.samples.len() as f64)
    }
}

/// Re-samples the posterior from scratch over every recorded choice.
///
/// The chain is seeded from the belief seed and the number of choices, so
/// replaying the same choices reproduces the same samples.
pub fn mh_update(
    belief: &Belief,
    choices: &[Choice],
    ranges: &FeatureRanges,
    config: &UpdateConfig,
) -> Result<Belief, PreferenceError> {
    if !(config.beta >= 0.0) {
        return Err(PreferenceError::InvalidRationality(config.beta));
    }
    let size = belief.len();
    if choices.is_empty() {
        return Belief::prior(size, belief.seed);
    }
    let differences: Vec<Vec<f64>> = choices
        .iter()
        .map(|c| c.feature_difference(ranges).to_vec())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(belief.seed);
    rng.set_stream(choices.len() as u64);
    let out = mcmc::sample_sphere(
        FEATURE_COUNT,
        size,
        &config.sampler,
        |w| log_likelihood(w, &differences, config.beta),
        &mut rng,
    );
    Ok(Belief {
        seed: belief.seed,
        iteration: choices.len() as u32,
        samples: out.samples.iter().map(|s| WeightVector::from_slice(s)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Sample mean scaled to unit norm (the raw mean when degenerate).
    pub mean: WeightVector,
    pub mean_norm: f64,
    pub std: [f64; FEATURE_COUNT],
    pub degenerate: bool,
    /// Batch member with the highest expected reward, lowest index on ties.
    pub best_index: Option<usize>,
}

pub fn posterior_summary(
    belief: &Belief,
    batch: &[TorqueProfileFeatures],
    ranges: &FeatureRanges,
) -> PosteriorSummary {
    let raw = belief.raw_mean();
    let mean_norm = mcmc::l2_norm(&raw);
    let degenerate = mean_norm < DEGENERATE_MEAN_NORM;
    let mean = if mean_norm > 0.0 {
        WeightVector(raw.map(|m| m / mean_norm))
    } else {
        WeightVector(raw)
    };
    let mut std = [0.0; FEATURE_COUNT];
    for (i, s) in std.iter_mut().enumerate() {
        let column: Vec<f64> = belief.samples.iter().map(|w| w.0[i]).collect();
        *s = mean_and_sample_std(&column).1;
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, profile) in batch.iter().enumerate() {
        let expected = belief
            .samples
            .iter()
            .map(|w| reward(w, profile, ranges))
            .sum::<f64>()
            / belief.len() as f64;
        if best.is_none_or(|(_, r)| expected > r) {
            best = Some((i, expected));
        }
    }
    PosteriorSummary {
        mean,
        mean_norm,
        std,
        degenerate,
        best_index: best.map(|(i, _)| i),
    }
}
