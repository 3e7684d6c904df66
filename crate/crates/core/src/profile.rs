//! Parameterized hip assistance torque profiles.
//!
//! A profile is described by six features: peak torque, peak time and rise
//! time for an extension bump and a flexion bump. Each bump is a smooth
//! trapezoid with no plateau, so it rises over `rise_time` to its peak and
//! falls back symmetrically. Extension torque is negative, flexion torque is
//! positive, and all phases wrap around the gait cycle.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of features describing a profile.
pub const FEATURE_COUNT: usize = 6;

/// Peak torque the actuators can deliver.
pub const ACTUATOR_LIMIT_NM: f64 = 32.0;

/// Perturbation applied to peak torques during validation.
pub const PEAK_TORQUE_PERTURBATION_NM: f64 = 2.0;

/// Perturbation applied to peak and rise times during validation.
pub const TIMING_PERTURBATION_PCT: f64 = 7.0;

/// Default number of samples per gait cycle for interpolated curves.
pub const DEFAULT_RESOLUTION: usize = 1000;

/// Smallest admissible rise time: one interpolation step at the default resolution.
pub const MIN_RISE_TIME_PCT: f64 = 100.0 / DEFAULT_RESOLUTION as f64;

/// Rise times must leave the bump support shorter than one cycle.
pub const MAX_RISE_TIME_PCT: f64 = 50.0;

/// Familiarization profile used before the comparisons start.
pub const FAMILIARIZATION: TorqueProfileFeatures = TorqueProfileFeatures {
    f1: 7.0,
    f2: 10.0,
    f3: 15.0,
    f4: 7.0,
    f5: 60.0,
    f6: 15.0,
    perturbed: false,
};

const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProfileError {
    #[error("invalid profile features: {}", .0.join("; "))]
    InvalidFeatures(Vec<String>),
    #[error("invalid feature ranges: {0}")]
    InvalidRanges(String),
    #[error("requested {requested} distinct profiles but only {available} exist in the discretized ranges")]
    BatchTooLarge { requested: usize, available: u128 },
    #[error("batch size must be at least 2, got {0}")]
    BatchTooSmall(usize),
    #[error("resolution must be at least 100, got {0}")]
    ResolutionTooLow(usize),
}

/// Which feature a perturbation or report row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    PeakTorqueExt,
    PeakTimeExt,
    RiseTimeExt,
    PeakTorqueFlex,
    PeakTimeFlex,
    RiseTimeFlex,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; FEATURE_COUNT] = [
        FeatureKind::PeakTorqueExt,
        FeatureKind::PeakTimeExt,
        FeatureKind::RiseTimeExt,
        FeatureKind::PeakTorqueFlex,
        FeatureKind::PeakTimeFlex,
        FeatureKind::RiseTimeFlex,
    ];

    /// Position of the feature in the `f1..f6` vector.
    pub fn index(self) -> usize {
        match self {
            FeatureKind::PeakTorqueExt => 0,
            FeatureKind::PeakTimeExt => 1,
            FeatureKind::RiseTimeExt => 2,
            FeatureKind::PeakTorqueFlex => 3,
            FeatureKind::PeakTimeFlex => 4,
            FeatureKind::RiseTimeFlex => 5,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn is_peak_torque(self) -> bool {
        matches!(self, FeatureKind::PeakTorqueExt | FeatureKind::PeakTorqueFlex)
    }

    pub fn is_rise_time(self) -> bool {
        matches!(self, FeatureKind::RiseTimeExt | FeatureKind::RiseTimeFlex)
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureKind::PeakTorqueExt => "extension peak torque",
            FeatureKind::PeakTimeExt => "extension peak time",
            FeatureKind::RiseTimeExt => "extension rise time",
            FeatureKind::PeakTorqueFlex => "flexion peak torque",
            FeatureKind::PeakTimeFlex => "flexion peak time",
            FeatureKind::RiseTimeFlex => "flexion rise time",
        }
    }

    pub fn unit(self) -> &'static str {
        if self.is_peak_torque() {
            "Nm"
        } else {
            "%GC"
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Closed interval of admissible values for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    fn contains(&self, value: f64) -> bool {
        value >= self.lower - RANGE_EPS && value <= self.upper + RANGE_EPS
    }
}

/// Sampling ranges for the six features plus the discretization step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges {
    pub bounds: [Bounds; FEATURE_COUNT],
    pub step: f64,
}

impl Default for FeatureRanges {
    fn default() -> Self {
        Self {
            bounds: [
                Bounds::new(5.0, 8.0),
                Bounds::new(10.0, 20.0),
                Bounds::new(10.0, 20.0),
                Bounds::new(5.0, 8.0),
                Bounds::new(55.0, 65.0),
                Bounds::new(10.0, 20.0),
            ],
            step: 0.1,
        }
    }
}

impl FeatureRanges {
    pub fn bound(&self, kind: FeatureKind) -> Bounds {
        self.bounds[kind.index()]
    }

    /// Checks the ordering of every interval and the step.
    ///
    /// A degenerate interval (`lower == upper`) is accepted so that a single
    /// admissible value can be pinned for experiments.
    pub fn validate(&self) -> Result<(), ProfileError> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(ProfileError::InvalidRanges(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        for (kind, b) in FeatureKind::ALL.iter().zip(&self.bounds) {
            if !(b.lower.is_finite() && b.upper.is_finite()) || b.lower > b.upper {
                return Err(ProfileError::InvalidRanges(format!(
                    "{kind}: lower {} must not exceed upper {}",
                    b.lower, b.upper
                )));
            }
        }
        Ok(())
    }

    /// Number of discretized values for one feature.
    pub fn levels(&self, kind: FeatureKind) -> usize {
        let b = self.bound(kind);
        ((b.upper - b.lower) / self.step + 1e-9).floor() as usize + 1
    }

    /// Value of the `level`-th grid point of a feature.
    pub fn level_value(&self, kind: FeatureKind, level: usize) -> f64 {
        let raw = self.bound(kind).lower + level as f64 * self.step;
        round_to_step(raw, self.step)
    }

    /// Number of distinct discretized feature vectors.
    pub fn distinct_vectors(&self) -> u128 {
        FeatureKind::ALL
            .iter()
            .map(|&k| self.levels(k) as u128)
            .fold(1u128, |acc, n| acc.saturating_mul(n))
    }
}

/// Rounds to the number of decimals implied by `step` (0.1 -> one decimal).
fn round_to_step(value: f64, step: f64) -> f64 {
    let decimals = (-step.log10()).ceil().max(0.0) as i32;
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

/// The six profile features. Torques in Nm, times in percent of the gait cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueProfileFeatures {
    /// Extension peak torque.
    pub f1: f64,
    /// Extension peak time.
    pub f2: f64,
    /// Extension rise time.
    pub f3: f64,
    /// Flexion peak torque.
    pub f4: f64,
    /// Flexion peak time.
    pub f5: f64,
    /// Flexion rise time.
    pub f6: f64,
    /// Set on profiles produced by [`perturb`]; these may leave the nominal ranges.
    #[serde(default)]
    pub perturbed: bool,
}

impl TorqueProfileFeatures {
    pub fn from_array(values: [f64; FEATURE_COUNT]) -> Self {
        Self {
            f1: values[0],
            f2: values[1],
            f3: values[2],
            f4: values[3],
            f5: values[4],
            f6: values[5],
            perturbed: false,
        }
    }

    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [self.f1, self.f2, self.f3, self.f4, self.f5, self.f6]
    }

    pub fn get(&self, kind: FeatureKind) -> f64 {
        self.to_array()[kind.index()]
    }

    pub fn set(&mut self, kind: FeatureKind, value: f64) {
        match kind {
            FeatureKind::PeakTorqueExt => self.f1 = value,
            FeatureKind::PeakTimeExt => self.f2 = value,
            FeatureKind::RiseTimeExt => self.f3 = value,
            FeatureKind::PeakTorqueFlex => self.f4 = value,
            FeatureKind::PeakTimeFlex => self.f5 = value,
            FeatureKind::RiseTimeFlex => self.f6 = value,
        }
    }

    /// Same feature values, ignoring the perturbation flag.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.to_array() == other.to_array()
    }

    /// Validates against `ranges`, or against actuator limits for perturbed profiles.
    pub fn validate(&self, ranges: &FeatureRanges) -> Result<(), ProfileError> {
        let mut problems = Vec::new();
        for kind in FeatureKind::ALL {
            let v = self.get(kind);
            if !v.is_finite() {
                problems.push(format!("{kind} is not finite"));
                continue;
            }
            if self.perturbed {
                if kind.is_peak_torque() && !(0.0..=ACTUATOR_LIMIT_NM).contains(&v) {
                    problems.push(format!(
                        "{kind} = {v} Nm outside [0, {ACTUATOR_LIMIT_NM}]"
                    ));
                }
            } else {
                let b = ranges.bound(kind);
                if !b.contains(v) {
                    problems.push(format!(
                        "{kind} = {v} {} outside [{}, {}]",
                        kind.unit(),
                        b.lower,
                        b.upper
                    ));
                }
            }
            if kind.is_rise_time()
                && !(MIN_RISE_TIME_PCT - RANGE_EPS..MAX_RISE_TIME_PCT).contains(&v)
            {
                problems.push(format!(
                    "{kind} = {v} %GC outside [{MIN_RISE_TIME_PCT}, {MAX_RISE_TIME_PCT})"
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ProfileError::InvalidFeatures(problems))
        }
    }

    /// Torque at a gait phase in `[0, 1)`; phases outside are wrapped.
    pub fn torque_at(&self, phase: f64) -> f64 {
        let flexion = bump(phase, self.f5 / 100.0, self.f6 / 100.0, self.f4);
        let extension = bump(phase, self.f2 / 100.0, self.f3 / 100.0, self.f1);
        flexion - extension
    }
}

/// Cubic smoothstep on `[0, 1]`.
fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

/// Signed distance from `peak` to `phase` on the unit circle, in `[-0.5, 0.5)`.
fn circular_offset(phase: f64, peak: f64) -> f64 {
    (phase - peak + 0.5).rem_euclid(1.0) - 0.5
}

fn bump(phase: f64, peak: f64, rise: f64, amplitude: f64) -> f64 {
    let d = circular_offset(phase, peak).abs();
    if d >= rise {
        0.0
    } else {
        amplitude * smoothstep(1.0 - d / rise)
    }
}

/// Sampled torque over one gait cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueCurve {
    pub phase: Vec<f64>,
    pub torque_nm: Vec<f64>,
}

impl TorqueCurve {
    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.phase.len()
    }

    /// Linear interpolation between samples, wrapping past the last one.
    pub fn value_at(&self, phase: f64) -> f64 {
        let n = self.torque_nm.len();
        let x = phase.rem_euclid(1.0) * n as f64;
        let i = (x.floor() as usize) % n;
        let frac = x - x.floor();
        let next = (i + 1) % n;
        self.torque_nm[i] * (1.0 - frac) + self.torque_nm[next] * frac
    }

    pub fn max_abs(&self) -> f64 {
        self.torque_nm.iter().fold(0.0, |m, t| m.max(t.abs()))
    }

    /// Writes the curve as `phase,torque_nm` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["phase", "torque_nm"])?;
        for (p, t) in self.phase.iter().zip(&self.torque_nm) {
            w.write_record([p.to_string(), t.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples the torque profile at `resolution` evenly spaced phases.
pub fn interpolate(
    features: &TorqueProfileFeatures,
    ranges: &FeatureRanges,
    resolution: usize,
) -> Result<TorqueCurve, ProfileError> {
    if resolution < 100 {
        return Err(ProfileError::ResolutionTooLow(resolution));
    }
    features.validate(ranges)?;
    let phase: Vec<f64> = (0..resolution)
        .map(|i| i as f64 / resolution as f64)
        .collect();
    let torque_nm = phase.iter().map(|&p| features.torque_at(p)).collect();
    Ok(TorqueCurve { phase, torque_nm })
}

/// Draws `count` pairwise-distinct profiles from the discretized ranges.
pub fn sample_batch(
    ranges: &FeatureRanges,
    count: usize,
    seed: u64,
) -> Result<Vec<TorqueProfileFeatures>, ProfileError> {
    ranges.validate()?;
    if count < 2 {
        return Err(ProfileError::BatchTooSmall(count));
    }
    let available = ranges.distinct_vectors();
    if (count as u128) > available {
        return Err(ProfileError::BatchTooLarge {
            requested: count,
            available,
        });
    }
    Ok(draw_distinct(ranges, count, seed))
}

/// Draws a single profile; used for distribution checks.
pub fn sample_one(ranges: &FeatureRanges, rng: &mut impl Rng) -> TorqueProfileFeatures {
    let levels = draw_levels(ranges, rng);
    from_levels(ranges, &levels)
}

fn draw_levels(ranges: &FeatureRanges, rng: &mut impl Rng) -> [usize; FEATURE_COUNT] {
    let mut levels = [0usize; FEATURE_COUNT];
    for (slot, kind) in levels.iter_mut().zip(FeatureKind::ALL) {
        *slot = rng.gen_range(0..ranges.levels(kind));
    }
    levels
}

fn from_levels(ranges: &FeatureRanges, levels: &[usize; FEATURE_COUNT]) -> TorqueProfileFeatures {
    let mut values = [0.0; FEATURE_COUNT];
    for (v, kind) in values.iter_mut().zip(FeatureKind::ALL) {
        *v = ranges.level_value(kind, levels[kind.index()]);
    }
    TorqueProfileFeatures::from_array(values)
}

fn draw_distinct(ranges: &FeatureRanges, count: usize, seed: u64) -> Vec<TorqueProfileFeatures> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(count);
    let mut batch = Vec::with_capacity(count);
    while batch.len() < count {
        let levels = draw_levels(ranges, &mut rng);
        if seen.insert(levels) {
            batch.push(from_levels(ranges, &levels));
        }
    }
    batch
}

/// Changes exactly one feature by the validation perturbation magnitude.
pub fn perturb(
    features: &TorqueProfileFeatures,
    ranges: &FeatureRanges,
    target: FeatureKind,
    sign: Sign,
) -> Result<TorqueProfileFeatures, ProfileError> {
    features.validate(ranges)?;
    let mut out = *features;
    let current = features.get(target);
    let value = if target.is_peak_torque() {
        (current + sign.factor() * PEAK_TORQUE_PERTURBATION_NM).clamp(0.0, ACTUATOR_LIMIT_NM)
    } else if target.is_rise_time() {
        (current + sign.factor() * TIMING_PERTURBATION_PCT)
            .clamp(MIN_RISE_TIME_PCT, MAX_RISE_TIME_PCT - MIN_RISE_TIME_PCT)
    } else {
        current + sign.factor() * TIMING_PERTURBATION_PCT
    };
    out.set(target, round_to_step(value, 1e-6));
    out.perturbed = true;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Min-max normalization of each feature; perturbed values may fall outside `[0, 1]`.
pub fn normalize_features(
    features: &TorqueProfileFeatures,
    ranges: &FeatureRanges,
) -> [f64; FEATURE_COUNT] {
    let mut out = [0.0; FEATURE_COUNT];
    for (o, kind) in out.iter_mut().zip(FeatureKind::ALL) {
        let b = ranges.bound(kind);
        let span = b.upper - b.lower;
        *o = if span > 0.0 {
            (features.get(kind) - b.lower) / span
        } else {
            0.0
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranges() -> FeatureRanges {
        FeatureRanges::default()
    }

    #[test]
    fn familiarization_profile_values() {
        let p = FAMILIARIZATION;
        assert!((p.torque_at(0.10) + 7.0).abs() < 1e-12);
        assert!((p.torque_at(0.60) - 7.0).abs() < 1e-12);
        assert_eq!(p.torque_at(0.35), 0.0);
    }

    #[test]
    fn extension_bump_starts_in_previous_cycle() {
        // f2 = 10, f3 = 15: support begins at 95 %GC.
        let p = FAMILIARIZATION;
        assert_eq!(p.torque_at(0.949), 0.0);
        assert!(p.torque_at(0.97) < 0.0);
        assert!(p.torque_at(0.0) < 0.0);
    }

    #[test]
    fn interpolate_rejects_low_resolution_and_bad_features() {
        assert_eq!(
            interpolate(&FAMILIARIZATION, &ranges(), 99),
            Err(ProfileError::ResolutionTooLow(99))
        );
        let mut bad = FAMILIARIZATION;
        bad.f1 = 9.0;
        bad.f5 = 40.0;
        match interpolate(&bad, &ranges(), 1000) {
            Err(ProfileError::InvalidFeatures(list)) => {
                assert_eq!(list.len(), 2);
                assert!(list[0].contains("extension peak torque"));
                assert!(list[1].contains("flexion peak time"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn curve_has_requested_resolution() {
        let c = interpolate(&FAMILIARIZATION, &ranges(), DEFAULT_RESOLUTION).unwrap();
        assert_eq!(c.len(), 1000);
        assert!((c.max_abs() - 7.0).abs() < 1e-9);
        assert!((c.value_at(0.6) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn batch_is_distinct_and_on_grid() {
        let batch = sample_batch(&ranges(), 40, 7).unwrap();
        assert_eq!(batch.len(), 40);
        for (i, a) in batch.iter().enumerate() {
            a.validate(&ranges()).unwrap();
            let tenths = a.f1 * 10.0;
            assert!((tenths - tenths.round()).abs() < 1e-9);
            assert!((5.0..=8.0).contains(&a.f1));
            for b in &batch[i + 1..] {
                assert!(!a.same_shape(b));
            }
        }
    }

    #[test]
    fn batch_is_deterministic() {
        let a = sample_batch(&ranges(), 2, 0).unwrap();
        let b = sample_batch(&ranges(), 2, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn collapsed_ranges_cannot_supply_two_profiles() {
        let mut r = ranges();
        for b in r.bounds.iter_mut() {
            b.upper = b.lower;
        }
        assert_eq!(r.distinct_vectors(), 1);
        assert!(matches!(
            sample_batch(&r, 2, 0),
            Err(ProfileError::BatchTooLarge { available: 1, .. })
        ));
        assert_eq!(sample_batch(&ranges(), 1, 0), Err(ProfileError::BatchTooSmall(1)));
    }

    #[test]
    fn perturbation_examples() {
        let mut base = FAMILIARIZATION;
        base.f1 = 6.0;
        let p = perturb(&base, &ranges(), FeatureKind::PeakTorqueExt, Sign::Plus).unwrap();
        assert_eq!(p.f1, 8.0);
        assert!(p.perturbed);
        assert_eq!(
            [p.f2, p.f3, p.f4, p.f5, p.f6],
            [base.f2, base.f3, base.f4, base.f5, base.f6]
        );

        let p = perturb(&FAMILIARIZATION, &ranges(), FeatureKind::RiseTimeExt, Sign::Minus).unwrap();
        assert_eq!(p.f3, 8.0);

        base.f1 = 5.0;
        let p = perturb(&base, &ranges(), FeatureKind::PeakTorqueExt, Sign::Minus).unwrap();
        assert_eq!(p.f1, 3.0);
        assert!(p.validate(&ranges()).is_ok());
        let mut unflagged = p;
        unflagged.perturbed = false;
        assert!(unflagged.validate(&ranges()).is_err());
    }

    #[test]
    fn perturbation_clamps_rise_time() {
        let mut base = FAMILIARIZATION;
        base.f3 = 10.0;
        let once = perturb(&base, &ranges(), FeatureKind::RiseTimeExt, Sign::Minus).unwrap();
        assert_eq!(once.f3, 3.0);
        let twice = perturb(&once, &ranges(), FeatureKind::RiseTimeExt, Sign::Minus).unwrap();
        assert_eq!(twice.f3, MIN_RISE_TIME_PCT);
    }

    #[test]
    fn normalization_examples() {
        let r = ranges();
        let mut p = FAMILIARIZATION;
        for (f1, expected) in [(5.0, 0.0), (8.0, 1.0), (6.5, 0.5)] {
            p.f1 = f1;
            assert_eq!(normalize_features(&p, &r)[0], expected);
        }
    }

    #[test]
    fn json_uses_feature_keys() {
        let v = serde_json::to_value(FAMILIARIZATION).unwrap();
        assert_eq!(v["f1"], 7.0);
        assert_eq!(v["f5"], 60.0);
        assert_eq!(v["perturbed"], false);
    }
}
