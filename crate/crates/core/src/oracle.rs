//! Simulated responder with known reward weights.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mcmc;
use crate::preference::{pair_probabilities, reward, Query, ResponderKind, Selection, WeightVector};
use crate::profile::{FeatureRanges, FEATURE_COUNT};
use crate::query::Responder;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("oracle rationality must be >= 0, got {0}")]
    InvalidRationality(f64),
    #[error("oracle weights must have non-zero finite norm")]
    InvalidWeights,
    #[error("feature dropout probability must lie in [0, 1], got {0}")]
    InvalidDropout(f64),
}

/// Responder rationality; `Infinite` always picks the higher reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rationality {
    Finite(f64),
    Infinite,
}

impl Serialize for Rationality {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Rationality::Finite(b) => s.serialize_f64(*b),
            Rationality::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Rationality {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(b) => Ok(Rationality::Finite(b)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(Rationality::Infinite)
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got \"{t}\""
            ))),
        }
    }
}

/// Serializable description of a simulated user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    /// True weights. When absent, each session draws its own from the sphere.
    #[serde(default)]
    pub w: Option<WeightVector>,
    pub beta: Rationality,
    pub seed: u64,
    /// Probability of ignoring each feature on a given query.
    #[serde(default)]
    pub feature_dropout: f64,
}

impl OracleSpec {
    pub fn new(w: WeightVector, beta: Rationality, seed: u64) -> Self {
        Self {
            w: Some(w),
            beta,
            seed,
            feature_dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if let Rationality::Finite(b) = self.beta {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(OracleError::InvalidRationality(b));
            }
        }
        if let Some(w) = &self.w {
            let n = w.norm();
            if !(n.is_finite() && n > 0.0) {
                return Err(OracleError::InvalidWeights);
            }
        }
        if !(0.0..=1.0).contains(&self.feature_dropout) {
            return Err(OracleError::InvalidDropout(self.feature_dropout));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedUser {
    weights: WeightVector,
    beta: Rationality,
    feature_dropout: f64,
    ranges: FeatureRanges,
    rng: ChaCha8Rng,
}

impl SimulatedUser {
    /// Builds the user exactly as described by `spec`.
    pub fn new(spec: &OracleSpec, ranges: FeatureRanges) -> Result<Self, OracleError> {
        Self::build(spec, ranges, spec.seed)
    }

    /// Builds the user for one session. The rng (and the weights, when the
    /// spec leaves them open) are derived from both seeds.
    pub fn for_session(
        spec: &OracleSpec,
        ranges: FeatureRanges,
        session_seed: u64,
    ) -> Result<Self, OracleError> {
        let mut mix = ChaCha8Rng::seed_from_u64(spec.seed);
        mix.set_stream(session_seed);
        Self::build(spec, ranges, mix.next_u64())
    }

    fn build(spec: &OracleSpec, ranges: FeatureRanges, seed: u64) -> Result<Self, OracleError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = match spec.w {
            Some(w) => WeightVector::normalized(w.0).map_err(|_| OracleError::InvalidWeights)?,
            None => {
                let v = mcmc::random_unit_vector(FEATURE_COUNT, &mut rng);
                let mut w = [0.0; FEATURE_COUNT];
                w.copy_from_slice(&v);
                WeightVector(w)
            }
        };
        Ok(Self {
            weights,
            beta: spec.beta,
            feature_dropout: spec.feature_dropout,
            ranges,
            rng,
        })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn beta(&self) -> Rationality {
        self.beta
    }

    /// Probability of answering `A` under the noise-free model.
    pub fn probability_a(&self, query: &Query) -> f64 {
        let ra = reward(&self.weights, &query.a.features, &self.ranges);
        let rb = reward(&self.weights, &query.b.features, &self.ranges);
        match self.beta {
            Rationality::Infinite => {
                if ra >= rb {
                    1.0
                } else {
                    0.0
                }
            }
            Rationality::Finite(beta) => pair_probabilities(ra, rb, beta).0,
        }
    }

    fn perceived_weights(&mut self) -> WeightVector {
        if self.feature_dropout <= 0.0 {
            return self.weights;
        }
        let mut w = self.weights;
        for v in w.0.iter_mut() {
            if self.rng.gen::<f64>() < self.feature_dropout {
                *v = 0.0;
            }
        }
        w
    }

    pub fn respond(&mut self, query: &Query) -> Selection {
        let w = self.perceived_weights();
        let ra = reward(&w, &query.a.features, &self.ranges);
        let rb = reward(&w, &query.b.features, &self.ranges);
        match self.beta {
            Rationality::Infinite => {
                if ra >= rb {
                    Selection::A
                } else {
                    Selection::B
                }
            }
            Rationality::Finite(beta) => {
                let (pa, _) = pair_probabilities(ra, rb, beta);
                if self.rng.gen::<f64>() < pa {
                    Selection::A
                } else {
                    Selection::B
                }
            }
        }
    }
}

impl Responder for SimulatedUser {
    fn respond(&mut self, query: &Query) -> Selection {
        SimulatedUser::respond(self, query)
    }

    fn kind(&self) -> ResponderKind {
        ResponderKind::Oracle
    }
}
