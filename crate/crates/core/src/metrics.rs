//! Mechanical power, power ratio and feature statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::gait::{self, mean_and_sample_std, GaitError, GaitTrace, StanceSwingSummary};
use crate::preference::Choice;
use crate::profile::{FeatureKind, TorqueProfileFeatures};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("torque has {torque} samples but angular velocity has {omega}")]
    LengthMismatch { torque: usize, omega: usize },
    #[error("no comparisons to analyse")]
    EmptyLog,
    #[error("need at least 2 profiles for feature statistics, got {0}")]
    TooFewProfiles(usize),
    #[error("trace has no commanded torque channel")]
    MissingTorque,
    #[error(transparent)]
    Gait(#[from] GaitError),
}

/// Power over one gait cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub power_w: Vec<f64>,
    pub mean_positive_w: f64,
    /// Mean magnitude over the negative-power samples.
    pub mean_negative_w: f64,
}

pub fn power_profile(torque_nm: &[f64], omega_rads: &[f64]) -> Result<PowerProfile, MetricsError> {
    if torque_nm.len() != omega_rads.len() {
        return Err(MetricsError::LengthMismatch {
            torque: torque_nm.len(),
            omega: omega_rads.len(),
        });
    }
    let power_w: Vec<f64> = torque_nm.iter().zip(omega_rads).map(|(t, w)| t * w).collect();
    let mean_of = |keep: fn(f64) -> bool| {
        let (sum, n) = power_w
            .iter()
            .filter(|p| keep(**p))
            .fold((0.0, 0usize), |(s, n), p| (s + p.abs(), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    };
    let mean_positive_w = mean_of(|p| p > 0.0);
    let mean_negative_w = mean_of(|p| p < 0.0);
    Ok(PowerProfile {
        power_w,
        mean_positive_w,
        mean_negative_w,
    })
}

/// Negative-to-positive mean power ratio, with the degenerate cases flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", content = "value", rename_all = "snake_case")]
pub enum PowerRatio {
    Finite(f64),
    /// Negative power but no positive power.
    Infinite,
    /// No power at all.
    Undefined,
}

impl PowerRatio {
    pub fn value(self) -> f64 {
        match self {
            PowerRatio::Finite(v) => v,
            PowerRatio::Infinite => f64::INFINITY,
            PowerRatio::Undefined => f64::NAN,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            PowerRatio::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn flag(self) -> &'static str {
        match self {
            PowerRatio::Finite(_) => "finite",
            PowerRatio::Infinite => "infinite",
            PowerRatio::Undefined => "undefined",
        }
    }
}

pub fn power_ratio(profile: &PowerProfile) -> PowerRatio {
    match (profile.mean_positive_w > 0.0, profile.mean_negative_w > 0.0) {
        (true, _) => PowerRatio::Finite(profile.mean_negative_w / profile.mean_positive_w),
        (false, true) => PowerRatio::Infinite,
        (false, false) => PowerRatio::Undefined,
    }
}

/// Per-profile metrics computed from one ingested trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMetrics {
    pub profile_index: usize,
    pub cycles: usize,
    /// Mean of the finite per-cycle ratios.
    pub mean_pr: Option<f64>,
    pub infinite_cycles: usize,
    pub undefined_cycles: usize,
    pub stance_swing: Option<StanceSwingSummary>,
}

/// Segments the trace and computes the power ratio of every cycle on every
/// side that carries commanded torque.
pub fn profile_metrics(trace: &GaitTrace, profile_index: usize) -> Result<ProfileMetrics, MetricsError> {
    let cycles = gait::segment_trace(trace)?;
    let mut ratios = Vec::new();
    let (mut infinite_cycles, mut undefined_cycles, mut with_torque) = (0, 0, 0);
    let mut any_torque = false;
    for side in gait::Side::BOTH {
        let Some(torque) = &trace.leg(side).torque_nm else { continue };
        any_torque = true;
        let omega = trace.hip_velocity(side);
        for c in cycles.iter().filter(|c| c.side == side) {
            with_torque += 1;
            let p = power_profile(&torque[c.start..c.end], &omega[c.start..c.end])?;
            match power_ratio(&p) {
                PowerRatio::Finite(v) => ratios.push(v),
                PowerRatio::Infinite => infinite_cycles += 1,
                PowerRatio::Undefined => undefined_cycles += 1,
            }
        }
    }
    if !any_torque {
        return Err(MetricsError::MissingTorque);
    }
    let mean_pr = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
    let stance_swing = gait::stance_swing_ratio(&cycles).ok();
    Ok(ProfileMetrics {
        profile_index,
        cycles: with_torque,
        mean_pr,
        infinite_cycles,
        undefined_cycles,
        stance_swing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenVsDiscarded {
    pub chosen_mean_pr: Option<f64>,
    pub discarded_mean_pr: Option<f64>,
    pub chosen: Vec<usize>,
    pub discarded: Vec<usize>,
    /// Tested profiles without a usable power ratio.
    pub omissions: Vec<usize>,
}

/// Splits the tested batch profiles into those chosen at least once and
/// those never chosen, and averages their power ratios.
pub fn chosen_vs_discarded_pr(
    choices: &[Choice],
    pr_by_profile: &BTreeMap<usize, f64>,
) -> Result<ChosenVsDiscarded, MetricsError> {
    if choices.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let chosen: BTreeSet<usize> = choices.iter().filter_map(|c| c.chosen().index).collect();
    let tested: BTreeSet<usize> = choices
        .iter()
        .flat_map(|c| [c.query.a.index, c.query.b.index])
        .flatten()
        .collect();
    let discarded: BTreeSet<usize> = tested.difference(&chosen).copied().collect();
    let omissions: Vec<usize> = tested
        .iter()
        .filter(|i| !pr_by_profile.get(i).is_some_and(|v| v.is_finite()))
        .copied()
        .collect();
    let mean_over = |set: &BTreeSet<usize>| {
        let values: Vec<f64> = set
            .iter()
            .filter_map(|i| pr_by_profile.get(i))
            .filter(|v| v.is_finite())
            .copied()
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    Ok(ChosenVsDiscarded {
        chosen_mean_pr: mean_over(&chosen),
        discarded_mean_pr: mean_over(&discarded),
        chosen: chosen.into_iter().collect(),
        discarded: discarded.into_iter().collect(),
        omissions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub feature: FeatureKind,
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation of each feature across final profiles.
pub fn feature_stats(profiles: &[TorqueProfileFeatures]) -> Result<Vec<FeatureStat>, MetricsError> {
    if profiles.len() < 2 {
        return Err(MetricsError::TooFewProfiles(profiles.len()));
    }
    Ok(FeatureKind::ALL
        .iter()
        .map(|&feature| {
            let column: Vec<f64> = profiles.iter().map(|p| p.get(feature)).collect();
            let (mean, std) = mean_and_sample_std(&column);
            FeatureStat { feature, mean, std }
        })
        .collect())
}

/// `feature,unit,mean,std` with one decimal.
pub fn write_feature_stats_csv<W: Write>(stats: &[FeatureStat], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "unit", "mean", "std"])?;
    for s in stats {
        w.write_record([
            s.feature.label().to_string(),
            s.feature.unit().to_string(),
            format!("{:.1}", s.mean),
            format!("{:.1}", s.std),
        ])?;
    }
    w.flush()?;
    Ok(())
}
