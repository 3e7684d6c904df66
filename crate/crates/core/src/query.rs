//! The active querying loop: batch initialization, query selection, belief
//! updates after each answer, and the perturbation validation round.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::preference::{
    mh_update, pair_probabilities, posterior_summary, reward, Belief, Candidate, Choice,
    PosteriorSummary, PreferenceError, Presentation, Query, ResponderKind, Selection,
    UpdateConfig, DEFAULT_BELIEF_SIZE,
};
use crate::profile::{
    perturb, sample_batch, FeatureKind, FeatureRanges, ProfileError, Sign, TorqueProfileFeatures,
    DEFAULT_RESOLUTION,
};

/// Anything that can answer "Do you prefer A or B?".
pub trait Responder {
    fn respond(&mut self, query: &Query) -> Selection;
    fn kind(&self) -> ResponderKind;
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QueryError {
    #[error("invalid session config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error("operation '{operation}' not allowed in state {state}")]
    InvalidState {
        operation: &'static str,
        state: SessionPhase,
    },
    #[error("batch needs at least 2 profiles to form a query, got {0}")]
    BatchTooSmall(usize),
    #[error("validation round is complete")]
    ValidationComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[serde(alias = "mi")]
    MutualInformation,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub batch_size: usize,
    pub comparisons: usize,
    /// Walking time with each option, seconds.
    pub exposure_s: f64,
    /// Unassisted walking between the two options, seconds.
    pub washout_s: f64,
    pub seed: u64,
    pub strategy: Strategy,
    pub validation_targets: Vec<FeatureKind>,
    pub ranges: FeatureRanges,
    pub belief_size: usize,
    pub update: UpdateConfig,
    pub resolution: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            batch_size: 40,
            comparisons: 12,
            exposure_s: 20.0,
            washout_s: 5.0,
            seed: 0,
            strategy: Strategy::MutualInformation,
            validation_targets: FeatureKind::ALL.to_vec(),
            ranges: FeatureRanges::default(),
            belief_size: DEFAULT_BELIEF_SIZE,
            update: UpdateConfig::default(),
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), QueryError> {
        let mut problems = Vec::new();
        if self.comparisons < 1 {
            problems.push("comparisons must be >= 1".to_string());
        }
        if self.batch_size < 2 {
            problems.push(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if !(self.exposure_s > 0.0 && self.exposure_s.is_finite()) {
            problems.push(format!("exposure_s must be > 0, got {}", self.exposure_s));
        }
        if !(self.washout_s > 0.0 && self.washout_s.is_finite()) {
            problems.push(format!("washout_s must be > 0, got {}", self.washout_s));
        }
        if self.belief_size < 2 {
            problems.push(format!("belief_size must be >= 2, got {}", self.belief_size));
        }
        if !(self.update.beta > 0.0 && self.update.beta.is_finite()) {
            problems.push(format!("update.beta must be > 0, got {}", self.update.beta));
        }
        if !(self.update.sampler.step > 0.0) {
            problems.push(format!("update.step must be > 0, got {}", self.update.sampler.step));
        }
        if self.resolution < 100 {
            problems.push(format!("resolution must be >= 100, got {}", self.resolution));
        }
        if let Err(e) = self.ranges.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(QueryError::InvalidConfig(problems))
        }
    }

    /// Earliest time after a query is presented at which an answer is accepted.
    pub fn answer_delay_s(&self) -> f64 {
        2.0 * self.exposure_s + self.washout_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Initialized,
    AwaitingChoice,
    Updating,
    Finished,
    Validating,
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SessionPhase::Initialized => "initialized",
            SessionPhase::AwaitingChoice => "awaiting_choice",
            SessionPhase::Updating => "updating",
            SessionPhase::Finished => "finished",
            SessionPhase::Validating => "validating",
        };
        f.write_str(s)
    }
}

/// Independent streams derived from the session seed.
#[derive(Debug, Clone, Copy)]
enum SeedStream {
    Belief = 1,
    RandomQuery = 2,
    Validation = 3,
}

fn derive_seed(seed: u64, stream: SeedStream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationQuery {
    pub target: FeatureKind,
    pub sign: Sign,
    pub query: Query,
    /// Slot holding the learned preferred profile.
    pub preferred_slot: Selection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeepLose {
    pub kept: usize,
    pub lost: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub per_target: BTreeMap<FeatureKind, KeepLose>,
    pub answered: usize,
    pub total: usize,
}

impl ValidationReport {
    pub fn kept(&self) -> usize {
        self.per_target.values().map(|k| k.kept).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRound {
    pub preferred: TorqueProfileFeatures,
    pub queries: Vec<ValidationQuery>,
    /// Whether the preferred profile was kept, per answered query.
    pub outcomes: Vec<bool>,
}

impl ValidationRound {
    pub fn current(&self) -> Option<&ValidationQuery> {
        self.queries.get(self.outcomes.len())
    }

    pub fn is_complete(&self) -> bool {
        self.outcomes.len() == self.queries.len()
    }

    pub fn report(&self) -> ValidationReport {
        let mut per_target: BTreeMap<FeatureKind, KeepLose> = BTreeMap::new();
        for (q, &kept) in self.queries.iter().zip(&self.outcomes) {
            let entry = per_target.entry(q.target).or_default();
            if kept {
                entry.kept += 1;
            } else {
                entry.lost += 1;
            }
        }
        ValidationReport {
            per_target,
            answered: self.outcomes.len(),
            total: self.queries.len(),
        }
    }
}

/// Builds one preferred-vs-perturbed query per target and sign, with the
/// preferred profile placed in a seeded random slot.
pub fn validation_queries(
    preferred: &TorqueProfileFeatures,
    preferred_index: Option<usize>,
    ranges: &FeatureRanges,
    targets: &[FeatureKind],
    seed: u64,
) -> Result<Vec<ValidationQuery>, QueryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(targets.len() * 2);
    for &target in targets {
        for sign in Sign::BOTH {
            let perturbed = perturb(preferred, ranges, target, sign)?;
            let keep = Candidate {
                index: preferred_index,
                features: *preferred,
            };
            let other = Candidate {
                index: None,
                features: perturbed,
            };
            let preferred_slot = if rng.gen::<bool>() {
                Selection::A
            } else {
                Selection::B
            };
            let (a, b) = match preferred_slot {
                Selection::A => (keep, other),
                Selection::B => (other, keep),
            };
            out.push(ValidationQuery {
                target,
                sign,
                query: Query {
                    a,
                    b,
                    presentation: Presentation::AFirst,
                },
                preferred_slot,
            });
        }
    }
    Ok(out)
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Mutual information between the answer to `(i, j)` and the weights, for
/// every unordered batch pair `i < j`, in lexicographic order.
pub fn pair_mutual_information(
    belief: &Belief,
    batch: &[TorqueProfileFeatures],
    ranges: &FeatureRanges,
    beta: f64,
) -> Vec<((usize, usize), f64)> {
    let rewards: Vec<Vec<f64>> = belief
        .samples
        .iter()
        .map(|w| batch.iter().map(|p| reward(w, p, ranges)).collect())
        .collect();
    let m = belief.len() as f64;
    let mut scores = Vec::with_capacity(batch.len() * batch.len().saturating_sub(1) / 2);
    for i in 0..batch.len() {
        for j in i + 1..batch.len() {
            let (mut sum_p, mut sum_h) = (0.0, 0.0);
            for r in &rewards {
                let (p, _) = pair_probabilities(r[i], r[j], beta);
                sum_p += p;
                sum_h += binary_entropy(p);
            }
            let mi = binary_entropy(sum_p / m) - sum_h / m;
            scores.push(((i, j), mi.clamp(0.0, std::f64::consts::LN_2)));
        }
    }
    scores
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub config: SessionConfig,
    pub batch: Vec<TorqueProfileFeatures>,
    pub belief: Belief,
    pub history: Vec<Choice>,
    pub phase: SessionPhase,
    pub current_query: Option<Query>,
    /// Pair presented last (the dummy query before the first comparison).
    pub previous_pair: Option<(usize, usize)>,
    /// Posterior summaries after each update.
    pub trajectory: Vec<PosteriorSummary>,
    pub final_index: Option<usize>,
    pub validation: Option<ValidationRound>,
}

impl SessionState {
    /// Samples the batch, draws the prior belief and installs the dummy query.
    pub fn initialize(config: SessionConfig) -> Result<Self, QueryError> {
        config.validate()?;
        let batch = sample_batch(&config.ranges, config.batch_size, config.seed)?;
        let belief = Belief::prior(
            config.belief_size,
            derive_seed(config.seed, SeedStream::Belief),
        )?;
        let dummy = Query::between(&batch, 0, 1);
        Ok(Self {
            config,
            batch,
            belief,
            history: Vec::new(),
            phase: SessionPhase::Initialized,
            current_query: Some(dummy),
            previous_pair: Some((0, 1)),
            trajectory: Vec::new(),
            final_index: None,
            validation: None,
        })
    }

    fn expect_phase(&self, allowed: &[SessionPhase], operation: &'static str) -> Result<(), QueryError> {
        if allowed.contains(&self.phase) {
            Ok(())
        } else {
            Err(QueryError::InvalidState {
                operation,
                state: self.phase,
            })
        }
    }

    pub fn iteration(&self) -> usize {
        self.history.len()
    }

    pub fn summary(&self) -> PosteriorSummary {
        posterior_summary(&self.belief, &self.batch, &self.config.ranges)
    }

    pub fn final_profile(&self) -> Option<&TorqueProfileFeatures> {
        self.final_index.map(|i| &self.batch[i])
    }

    /// Picks the next pair under the configured strategy. The pair shown
    /// last is never repeated unless it is the only pair available.
    pub fn optimize_query(&self) -> Result<Query, QueryError> {
        self.expect_phase(
            &[SessionPhase::Initialized, SessionPhase::Updating, SessionPhase::AwaitingChoice],
            "optimize_query",
        )?;
        let n = self.batch.len();
        if n < 2 {
            return Err(QueryError::BatchTooSmall(n));
        }
        let only_pair = n == 2;
        let allowed = |pair: (usize, usize)| only_pair || Some(pair) != self.previous_pair;
        let (i, j) = match self.config.strategy {
            Strategy::MutualInformation => {
                let scores = pair_mutual_information(
                    &self.belief,
                    &self.batch,
                    &self.config.ranges,
                    self.config.update.beta,
                );
                let mut best: Option<((usize, usize), f64)> = None;
                for (pair, mi) in scores {
                    if allowed(pair) && best.is_none_or(|(_, b)| mi > b) {
                        best = Some((pair, mi));
                    }
                }
                best.expect("at least one admissible pair").0
            }
            Strategy::Random => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, SeedStream::RandomQuery));
                rng.set_stream(self.history.len() as u64);
                loop {
                    let a = rng.gen_range(0..n);
                    let b = rng.gen_range(0..n);
                    let pair = (a.min(b), a.max(b));
                    if a != b && allowed(pair) {
                        break pair;
                    }
                }
            }
        };
        Ok(Query::between(&self.batch, i, j))
    }

    /// Replaces the dummy query with the first optimized one.
    pub fn start(&mut self) -> Result<&Query, QueryError> {
        self.expect_phase(&[SessionPhase::Initialized], "start")?;
        let q = self.optimize_query()?;
        self.current_query = Some(q);
        self.phase = SessionPhase::AwaitingChoice;
        Ok(self.current_query.as_ref().expect("just set"))
    }

    /// Records the answer to the current query; the belief update follows in
    /// [`SessionState::complete_update`].
    pub fn record_choice(
        &mut self,
        selected: Selection,
        responder: ResponderKind,
        timestamp: DateTime<Utc>,
    ) -> Result<&Choice, QueryError> {
        self.expect_phase(&[SessionPhase::AwaitingChoice], "submit_choice")?;
        let query = self.current_query.expect("awaiting a choice implies a query");
        self.previous_pair = query.index_pair();
        self.history.push(Choice {
            query,
            selected,
            timestamp,
            responder,
        });
        self.phase = SessionPhase::Updating;
        Ok(self.history.last().expect("just pushed"))
    }

    /// Re-samples the belief over the full history and either finishes the
    /// session or presents the next query.
    pub fn complete_update(&mut self) -> Result<(), QueryError> {
        self.expect_phase(&[SessionPhase::Updating], "complete_update")?;
        self.belief = mh_update(&self.belief, &self.history, &self.config.ranges, &self.config.update)?;
        let summary = self.summary();
        let best = summary.best_index;
        self.trajectory.push(summary);
        if self.history.len() >= self.config.comparisons {
            self.final_index = best;
            self.current_query = None;
            self.phase = SessionPhase::Finished;
        } else {
            self.current_query = Some(self.optimize_query()?);
            self.phase = SessionPhase::AwaitingChoice;
        }
        Ok(())
    }

    pub fn submit_choice(
        &mut self,
        selected: Selection,
        responder: ResponderKind,
        timestamp: DateTime<Utc>,
    ) -> Result<(), QueryError> {
        self.record_choice(selected, responder, timestamp)?;
        self.complete_update()
    }

    /// Opens the validation round around the learned profile.
    pub fn validation_round(&mut self, targets: &[FeatureKind]) -> Result<&[ValidationQuery], QueryError> {
        self.expect_phase(&[SessionPhase::Finished], "validation_round")?;
        let index = self.final_index.ok_or(QueryError::BatchTooSmall(self.batch.len()))?;
        let preferred = self.batch[index];
        let queries = validation_queries(
            &preferred,
            Some(index),
            &self.config.ranges,
            targets,
            derive_seed(self.config.seed, SeedStream::Validation),
        )?;
        self.validation = Some(ValidationRound {
            preferred,
            queries,
            outcomes: Vec::new(),
        });
        self.phase = SessionPhase::Validating;
        Ok(&self.validation.as_ref().expect("just set").queries)
    }

    pub fn current_validation(&self) -> Option<&ValidationQuery> {
        self.validation.as_ref().and_then(ValidationRound::current)
    }

    /// Records an answer to the current validation query; returns whether
    /// the preferred profile was kept.
    pub fn submit_validation(&mut self, selected: Selection) -> Result<bool, QueryError> {
        self.expect_phase(&[SessionPhase::Validating], "submit_validation")?;
        let round = self.validation.as_mut().expect("validating implies a round");
        let q = round.current().ok_or(QueryError::ValidationComplete)?;
        let kept = q.preferred_slot == selected;
        round.outcomes.push(kept);
        Ok(kept)
    }

    pub fn validation_report(&self) -> Option<ValidationReport> {
        self.validation.as_ref().map(ValidationRound::report)
    }
}
