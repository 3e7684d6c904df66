//! Batches of simulated sessions, one per seed.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::oracle::OracleSpec;
use crate::preference::reward;
use crate::profile::TorqueProfileFeatures;
use crate::query::{SessionConfig, SessionState};
use crate::session::{run_simulated, SessionError};
use crate::session_log::{EventSink, JsonlFile, LogEvent};

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("seed {seed}: {source}")]
    Session {
        seed: u64,
        #[source]
        source: SessionError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("seed count must be at least 1")]
    NoSeeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub seed: u64,
    pub final_index: usize,
    pub final_profile: TorqueProfileFeatures,
    /// 1 for the batch member the oracle values most.
    pub true_rank: usize,
    /// Cosine between the posterior mean and the oracle weights.
    pub alignment: f64,
}

impl CampaignRow {
    pub fn hit(&self, k: usize) -> bool {
        self.true_rank <= k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub rows: Vec<CampaignRow>,
    pub top1_rate: f64,
    pub top3_rate: f64,
    pub mean_alignment: f64,
}

impl CampaignSummary {
    fn from_rows(rows: Vec<CampaignRow>) -> Self {
        let n = rows.len() as f64;
        let rate = |k| rows.iter().filter(|r| r.hit(k)).count() as f64 / n;
        Self {
            top1_rate: rate(1),
            top3_rate: rate(3),
            mean_alignment: rows.iter().map(|r| r.alignment).sum::<f64>() / n,
            rows,
        }
    }

    /// `seed,final_index,f1..f6,true_rank,alignment`
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "seed", "final_index", "f1", "f2", "f3", "f4", "f5", "f6", "true_rank", "alignment",
        ])?;
        for r in &self.rows {
            let mut record = vec![r.seed.to_string(), r.final_index.to_string()];
            record.extend(r.final_profile.to_array().iter().map(|v| format!("{v:.1}")));
            record.push(r.true_rank.to_string());
            record.push(format!("{:.6}", r.alignment));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rank of `index` among the batch under `reward_of`, counting strictly
/// better members.
pub fn true_rank(batch: &[TorqueProfileFeatures], index: usize, reward_of: impl Fn(&TorqueProfileFeatures) -> f64) -> usize {
    let target = reward_of(&batch[index]);
    1 + batch.iter().filter(|p| reward_of(p) > target).count()
}

/// Runs one simulated session and scores the result against the oracle.
pub fn run_seed<S: EventSink>(
    config: &SessionConfig,
    oracle: &OracleSpec,
    seed: u64,
    sink: S,
) -> Result<(CampaignRow, SessionState, S), SessionError> {
    let config = SessionConfig {
        seed,
        ..config.clone()
    };
    let (driver, user) = run_simulated(format!("sim-{seed}"), config, oracle.clone(), sink)?;
    let (state, sink) = driver.into_parts();
    let final_index = state.final_index.expect("finished sessions have a final profile");
    let ranges = &state.config.ranges;
    let row = CampaignRow {
        seed,
        final_index,
        final_profile: state.batch[final_index],
        true_rank: true_rank(&state.batch, final_index, |p| reward(user.weights(), p, ranges)),
        alignment: state.summary().mean.cosine(user.weights()),
    };
    Ok((row, state, sink))
}

/// Runs `count` sessions with seeds `start..start + count` in parallel.
/// With `out_dir`, writes `session_<seed>.jsonl` per session and `campaign.csv`.
pub fn run_campaign(
    config: &SessionConfig,
    oracle: &OracleSpec,
    start: u64,
    count: u64,
    out_dir: Option<&Path>,
) -> Result<CampaignSummary, CampaignError> {
    if count == 0 {
        return Err(CampaignError::NoSeeds);
    }
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CampaignError::Io { path, source }
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let rows: Vec<CampaignRow> = (start..start + count)
        .into_par_iter()
        .map(|seed| {
            let wrap = |source| CampaignError::Session { seed, source };
            match out_dir {
                Some(dir) => {
                    let path = dir.join(format!("session_{seed}.jsonl"));
                    if path.exists() {
                        fs::remove_file(&path).map_err(io_err(&path))?;
                    }
                    let sink = JsonlFile::create(&path, false).map_err(io_err(&path))?;
                    run_seed(config, oracle, seed, sink).map(|r| r.0).map_err(wrap)
                }
                None => run_seed(config, oracle, seed, Vec::<LogEvent>::new())
                    .map(|r| r.0)
                    .map_err(wrap),
            }
        })
        .collect::<Result<_, _>>()?;
    let summary = CampaignSummary::from_rows(rows);
    if let Some(dir) = out_dir {
        let path = dir.join("campaign.csv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        summary
            .write_csv(file)
            .map_err(|e| io_err(&path)(io::Error::other(e)))?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Rationality;
    use crate::preference::WeightVector;
    use crate::profile::FeatureRanges;

    #[test]
    fn rank_counts_strictly_better_members() {
        let batch: Vec<_> = [5.0, 8.0, 6.0, 8.0]
            .iter()
            .map(|&f1| TorqueProfileFeatures::from_array([f1, 15.0, 15.0, 6.0, 60.0, 15.0]))
            .collect();
        let w = WeightVector::axis(0);
        let r = FeatureRanges::default();
        let rank = |i| true_rank(&batch, i, |p| reward(&w, p, &r));
        assert_eq!(rank(1), 1);
        assert_eq!(rank(3), 1);
        assert_eq!(rank(2), 3);
        assert_eq!(rank(0), 4);
    }

    #[test]
    fn campaign_writes_one_row_and_log_per_seed() {
        let dir = tempfile::tempdir().unwrap();
        let config = SessionConfig {
            batch_size: 10,
            comparisons: 3,
            ..SessionConfig::default()
        };
        let oracle = OracleSpec::new(WeightVector::axis(3), Rationality::Finite(5.0), 1);
        let s = run_campaign(&config, &oracle, 10, 4, Some(dir.path())).unwrap();
        assert_eq!(s.rows.len(), 4);
        assert_eq!(s.rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![10, 11, 12, 13]);
        for seed in 10..14 {
            assert!(dir.path().join(format!("session_{seed}.jsonl")).exists());
        }
        let csv = fs::read_to_string(dir.path().join("campaign.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(matches!(
            run_campaign(&config, &oracle, 0, 0, None),
            Err(CampaignError::NoSeeds)
        ));
    }
}
