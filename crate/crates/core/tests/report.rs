use std::fs;
use std::path::{Path, PathBuf};

use prefgait::oracle::{OracleSpec, Rationality};
use prefgait::preference::WeightVector;
use prefgait::query::SessionConfig;
use prefgait::report::{analyze, tested_profiles, ReportError};
use prefgait::session::run_simulated;
use prefgait::session_log::JsonlFile;
use prefgait::synthetic::{walking_trace, WalkingPattern};

fn simulated_log(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let path = dir.join(format!("{name}.jsonl"));
    let config = SessionConfig {
        batch_size: 8,
        comparisons: 4,
        seed,
        ..SessionConfig::default()
    };
    let oracle = OracleSpec::new(WeightVector::axis(1), Rationality::Finite(5.0), seed);
    run_simulated(name, config, oracle, JsonlFile::create(&path, false).unwrap()).unwrap();
    path
}

fn write_traces(log: &Path, traces: &Path) {
    let events = prefgait::session_log::read_log_file(log).unwrap();
    let (state, _) = prefgait::session::replay(&events).unwrap();
    let stem = log.file_stem().unwrap().to_str().unwrap();
    let dir = traces.join(stem);
    fs::create_dir_all(&dir).unwrap();
    for index in tested_profiles(&state) {
        let trace = walking_trace(&state.batch[index], &WalkingPattern::default()).unwrap();
        trace
            .write_csv(fs::File::create(dir.join(format!("profile_{index}.csv"))).unwrap())
            .unwrap();
    }
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn rerunning_analysis_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let logs = vec![simulated_log(tmp.path(), "a", 1), simulated_log(tmp.path(), "b", 2)];
    let traces = tmp.path().join("traces");
    for log in &logs {
        write_traces(log, &traces);
    }
    let (first, second) = (tmp.path().join("out1"), tmp.path().join("out2"));
    analyze(&logs, Some(&traces), &first).unwrap();
    analyze(&logs, Some(&traces), &second).unwrap();
    let (a, b) = (snapshot(&first), snapshot(&second));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn traces_produce_the_full_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let logs = vec![simulated_log(tmp.path(), "a", 3), simulated_log(tmp.path(), "b", 4)];
    let traces = tmp.path().join("traces");
    for log in &logs {
        write_traces(log, &traces);
    }
    let out = tmp.path().join("out");
    let report = analyze(&logs, Some(&traces), &out).unwrap();

    for file in ["summary.json", "feature_stats.csv"] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    for name in ["a", "b"] {
        for file in ["final_torque.csv", "weight_trajectory.csv", "pr_by_profile.csv", "stance_swing.csv"] {
            assert!(out.join(name).join(file).is_file(), "missing {name}/{file}");
        }
    }
    assert_eq!(report.sessions.len(), 2);
    for s in &report.sessions {
        assert!(s.omissions.is_empty(), "{:?}", s.omissions);
        assert!(s.power_ratio.is_some());
        assert!(!s.profile_metrics.is_empty());
        assert_eq!(s.comparisons, 4);
    }
    assert_eq!(report.feature_stats.as_ref().unwrap().len(), 6);

    let trajectory = fs::read_to_string(out.join("a/weight_trajectory.csv")).unwrap();
    let mut lines = trajectory.lines();
    assert_eq!(lines.next().unwrap(), "iteration,w1,w2,w3,w4,w5,w6,mean_norm,degenerate");
    assert_eq!(lines.count(), 4);
    let torque = fs::read_to_string(out.join("a/final_torque.csv")).unwrap();
    assert_eq!(torque.lines().count(), 1001);
}

#[test]
fn missing_traces_are_reported_as_omissions() {
    let tmp = tempfile::tempdir().unwrap();
    let log = simulated_log(tmp.path(), "solo", 5);
    let report = analyze(&[log], None, &tmp.path().join("out")).unwrap();
    let s = &report.sessions[0];
    assert!(s.power_ratio.is_none());
    assert!(!s.omissions.is_empty());
    assert!(report.feature_stats.is_none());
}

#[test]
fn empty_log_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let err = analyze(&[empty], None, &tmp.path().join("out")).unwrap_err();
    assert!(matches!(err, ReportError::EmptyLog { .. }), "{err}");
    assert!(matches!(analyze(&[], None, tmp.path()), Err(ReportError::NoLogs)));
}
