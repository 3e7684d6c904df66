//! Simulates two sessions, records idealized traces for every tested
//! profile and builds the analysis bundle.

use std::fs;

use prefgait::campaign::run_seed;
use prefgait::oracle::{OracleSpec, Rationality};
use prefgait::query::SessionConfig;
use prefgait::report::{analyze, tested_profiles};
use prefgait::session_log::JsonlFile;
use prefgait::synthetic::{walking_trace, WalkingPattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let traces = dir.path().join("traces");
    let oracle = OracleSpec {
        w: None,
        beta: Rationality::Finite(5.0),
        seed: 1,
        feature_dropout: 0.0,
    };
    let config = SessionConfig {
        batch_size: 12,
        comparisons: 6,
        ..SessionConfig::default()
    };
    let mut logs = Vec::new();
    for seed in [1, 2] {
        let log = dir.path().join(format!("subject{seed}.jsonl"));
        let (_, state, _) = run_seed(&config, &oracle, seed, JsonlFile::create(&log, false)?)?;
        let trace_dir = traces.join(format!("subject{seed}"));
        fs::create_dir_all(&trace_dir)?;
        for index in tested_profiles(&state) {
            let trace = walking_trace(&state.batch[index], &WalkingPattern::default())?;
            trace.write_csv(fs::File::create(trace_dir.join(format!("profile_{index}.csv")))?)?;
        }
        logs.push(log);
    }

    let out = dir.path().join("report");
    let report = analyze(&logs, Some(&traces), &out)?;
    for s in &report.sessions {
        let pr = s.power_ratio.as_ref().unwrap();
        println!(
            "{}: final #{:?}  chosen PR {:?}  discarded PR {:?}",
            s.name, s.final_index, pr.chosen_mean_pr, pr.discarded_mean_pr
        );
    }
    for stat in report.feature_stats.unwrap_or_default() {
        println!("  {stat:?}");
    }
    let mut files: Vec<_> = walk(&out);
    files.sort();
    println!("wrote:");
    for f in files {
        println!("  {}", f.strip_prefix(&out)?.display());
    }
    Ok(())
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).into_iter().flatten().flatten() {
        let path = entry.path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}
