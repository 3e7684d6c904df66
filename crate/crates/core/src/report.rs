//! Offline analysis of session logs and gait traces.
//!
//! Output layout under the report directory:
//!
//! ```text
//! summary.json
//! feature_stats.csv            (two or more finished sessions)
//! <session>/final_torque.csv
//! <session>/weight_trajectory.csv
//! <session>/pr_by_profile.csv  (when traces are available)
//! <session>/stance_swing.csv   (when traces are available)
//! ```
//!
//! Reports contain no timestamps, so re-running on equal inputs produces
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gait::{GaitError, GaitTrace};
use crate::metrics::{
    chosen_vs_discarded_pr, feature_stats, profile_metrics, write_feature_stats_csv,
    ChosenVsDiscarded, FeatureStat, MetricsError, ProfileMetrics,
};
use crate::profile::{interpolate, ProfileError, TorqueProfileFeatures};
use crate::query::{SessionState, ValidationReport};
use crate::session::{replay, ReplayError};
use crate::session_log::{read_log_file, LogReadError};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: log contains no events")]
    EmptyLog { path: PathBuf },
    #[error("no logs given")]
    NoLogs,
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: LogReadError,
    },
    #[error("{path}: {source}")]
    Replay {
        path: PathBuf,
        #[source]
        source: ReplayError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub name: String,
    pub session_id: String,
    pub comparisons: usize,
    pub final_index: Option<usize>,
    pub final_profile: Option<TorqueProfileFeatures>,
    pub final_weights: [f64; 6],
    pub validation: Option<ValidationReport>,
    pub profile_metrics: Vec<ProfileMetrics>,
    pub power_ratio: Option<ChosenVsDiscarded>,
    /// Tested profiles whose trace was missing or unusable.
    pub omissions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub sessions: Vec<SessionReport>,
    pub feature_stats: Option<Vec<FeatureStat>>,
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> ReportError {
    let path = path.to_path_buf();
    move |source| ReportError::Io { path, source }
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> ReportError {
    let path = path.to_path_buf();
    move |e| ReportError::Io {
        path,
        source: io::Error::other(e),
    }
}

fn session_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "session".into())
}

fn find_trace(traces_dir: &Path, name: &str, index: usize, single: bool) -> Option<PathBuf> {
    let file = format!("profile_{index}.csv");
    let nested = traces_dir.join(name).join(&file);
    if nested.is_file() {
        return Some(nested);
    }
    let flat = traces_dir.join(&file);
    (single && flat.is_file()).then_some(flat)
}

fn load_trace_metrics(path: &Path, index: usize) -> Result<ProfileMetrics, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let trace = GaitTrace::from_csv(file).map_err(|e: GaitError| format!("{}: {e}", path.display()))?;
    profile_metrics(&trace, index).map_err(|e: MetricsError| format!("{}: {e}", path.display()))
}

fn analyze_session(
    log: &Path,
    traces_dir: Option<&Path>,
    single: bool,
    out_dir: &Path,
) -> Result<SessionReport, ReportError> {
    let events = read_log_file(log).map_err(|source| ReportError::Read {
        path: log.to_path_buf(),
        source,
    })?;
    if events.is_empty() {
        return Err(ReportError::EmptyLog {
            path: log.to_path_buf(),
        });
    }
    let (state, header) = replay(&events).map_err(|source| ReportError::Replay {
        path: log.to_path_buf(),
        source,
    })?;
    let name = session_name(log);
    let dir = out_dir.join(&name);
    fs::create_dir_all(&dir).map_err(io_error(&dir))?;

    if let Some(profile) = state.final_profile() {
        let curve = interpolate(profile, &state.config.ranges, state.config.resolution)?;
        let path = dir.join("final_torque.csv");
        curve
            .write_csv(File::create(&path).map_err(io_error(&path))?)
            .map_err(csv_error(&path))?;
    }
    write_trajectory(&state, &dir.join("weight_trajectory.csv"))?;

    let mut metrics = Vec::new();
    let mut omissions = Vec::new();
    if let Some(traces) = traces_dir {
        for index in tested_profiles(&state) {
            match find_trace(traces, &name, index, single) {
                None => omissions.push(format!("profile {index}: no trace")),
                Some(path) => match load_trace_metrics(&path, index) {
                    Ok(m) => metrics.push(m),
                    Err(e) => omissions.push(format!("profile {index}: {e}")),
                },
            }
        }
    } else {
        omissions.push("no traces supplied: power ratio and stance/swing omitted".to_owned());
    }
    let report = build_session_report(name, header.session_id, &state, metrics, omissions);
    if let Some(split) = &report.power_ratio {
        write_profile_tables(&report.profile_metrics, split, &dir)?;
    }
    Ok(report)
}

/// Assembles the report for one session from its state and whatever gait
/// metrics are available for the tested profiles.
pub fn build_session_report(
    name: String,
    session_id: String,
    state: &SessionState,
    metrics: Vec<ProfileMetrics>,
    omissions: Vec<String>,
) -> SessionReport {
    let power_ratio = if metrics.is_empty() || state.history.is_empty() {
        None
    } else {
        let prs: BTreeMap<usize, f64> = metrics
            .iter()
            .filter_map(|m| m.mean_pr.map(|pr| (m.profile_index, pr)))
            .collect();
        chosen_vs_discarded_pr(&state.history, &prs).ok()
    };
    SessionReport {
        name,
        session_id,
        comparisons: state.history.len(),
        final_index: state.final_index,
        final_profile: state.final_profile().copied(),
        final_weights: state.summary().mean.0,
        validation: state.validation_report(),
        profile_metrics: metrics,
        power_ratio,
        omissions,
    }
}

/// Indices of every batch member shown in at least one comparison.
pub fn tested_profiles(state: &SessionState) -> Vec<usize> {
    let mut tested: Vec<usize> = state
        .history
        .iter()
        .flat_map(|c| [c.query.a.index, c.query.b.index])
        .flatten()
        .collect();
    tested.sort_unstable();
    tested.dedup();
    tested
}

fn write_trajectory(state: &SessionState, path: &Path) -> Result<(), ReportError> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut w = csv::Writer::from_writer(file);
    let mut rows = || -> csv::Result<()> {
        w.write_record(["iteration", "w1", "w2", "w3", "w4", "w5", "w6", "mean_norm", "degenerate"])?;
        for (i, s) in state.trajectory.iter().enumerate() {
            let mut r = vec![(i + 1).to_string()];
            r.extend(s.mean.0.iter().map(|v| format!("{v:.6}")));
            r.push(format!("{:.6}", s.mean_norm));
            r.push(s.degenerate.to_string());
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    };
    rows().map_err(csv_error(path))
}

fn write_profile_tables(
    metrics: &[ProfileMetrics],
    split: &ChosenVsDiscarded,
    dir: &Path,
) -> Result<(), ReportError> {
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();

    let path = dir.join("pr_by_profile.csv");
    let mut w = csv::Writer::from_writer(File::create(&path).map_err(io_error(&path))?);
    let mut write = || -> csv::Result<()> {
        w.write_record(["profile_index", "chosen", "cycles", "mean_pr", "infinite_cycles", "undefined_cycles"])?;
        for m in metrics {
            w.write_record([
                m.profile_index.to_string(),
                split.chosen.contains(&m.profile_index).to_string(),
                m.cycles.to_string(),
                fmt_opt(m.mean_pr),
                m.infinite_cycles.to_string(),
                m.undefined_cycles.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(csv_error(&path))?;

    let path = dir.join("stance_swing.csv");
    let mut w = csv::Writer::from_writer(File::create(&path).map_err(io_error(&path))?);
    let mut write = || -> csv::Result<()> {
        w.write_record(["profile_index", "cycles", "mean_ratio", "std_ratio", "excluded"])?;
        for m in metrics {
            let s = m.stance_swing.as_ref();
            w.write_record([
                m.profile_index.to_string(),
                s.map(|s| s.ratios.len()).unwrap_or(0).to_string(),
                fmt_opt(s.map(|s| s.mean).filter(|v| v.is_finite())),
                fmt_opt(s.map(|s| s.std).filter(|v| v.is_finite())),
                s.map(|s| s.excluded).unwrap_or(0).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(csv_error(&path))
}

/// Analyses every log and writes the report bundle to `out_dir`.
pub fn analyze(logs: &[PathBuf], traces_dir: Option<&Path>, out_dir: &Path) -> Result<AnalysisReport, ReportError> {
    if logs.is_empty() {
        return Err(ReportError::NoLogs);
    }
    fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    let single = logs.len() == 1;
    let sessions = logs
        .iter()
        .map(|log| analyze_session(log, traces_dir, single, out_dir))
        .collect::<Result<Vec<_>, _>>()?;

    let finals: Vec<TorqueProfileFeatures> = sessions.iter().filter_map(|s| s.final_profile).collect();
    let stats = feature_stats(&finals).ok();
    if let Some(stats) = &stats {
        let path = out_dir.join("feature_stats.csv");
        write_feature_stats_csv(stats, File::create(&path).map_err(io_error(&path))?)
            .map_err(csv_error(&path))?;
    }
    let report = AnalysisReport {
        sessions,
        feature_stats: stats,
    };
    let path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&path, json + "\n").map_err(io_error(&path))?;
    Ok(report)
}
