//! Updates the weight belief from a handful of answers and prints how the
//! posterior mean moves toward the answering user's weights.

use chrono::Utc;
use prefgait::oracle::{OracleSpec, Rationality, SimulatedUser};
use prefgait::preference::{mh_update, posterior_summary, Belief, Choice, Query, ResponderKind, UpdateConfig, WeightVector};
use prefgait::profile::{sample_batch, FeatureRanges};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ranges = FeatureRanges::default();
    let batch = sample_batch(&ranges, 40, 1)?;
    let truth = WeightVector::normalized([0.7, 0.0, -0.3, 0.6, 0.2, 0.0])?;
    let mut user = SimulatedUser::new(&OracleSpec::new(truth, Rationality::Finite(5.0), 3), ranges.clone())?;

    let prior = Belief::prior(100, 11)?;
    let config = UpdateConfig {
        beta: 5.0,
        ..UpdateConfig::default()
    };
    let mut choices = Vec::new();
    for k in 0..16 {
        let query = Query::between(&batch, (2 * k) % 40, (2 * k + 7) % 40);
        choices.push(Choice {
            query,
            selected: user.respond(&query),
            timestamp: Utc::now(),
            responder: ResponderKind::Oracle,
        });
        if (k + 1) % 4 == 0 {
            let belief = mh_update(&prior, &choices, &ranges, &config)?;
            let s = posterior_summary(&belief, &batch, &ranges);
            println!(
                "{:>2} answers  |mean| {:.3}  cos to truth {:.3}  best profile {:?}",
                choices.len(),
                s.mean_norm,
                s.mean.cosine(&truth),
                s.best_index
            );
        }
    }
    Ok(())
}
