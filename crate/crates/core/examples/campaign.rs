//! Compares information-driven and random query selection over a few seeds.

use prefgait::campaign::run_campaign;
use prefgait::oracle::{OracleSpec, Rationality};
use prefgait::preference::UpdateConfig;
use prefgait::query::{SessionConfig, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds = std::env::args().nth(1).map_or(Ok(20), |s| s.parse())?;
    let oracle = OracleSpec {
        w: None,
        beta: Rationality::Finite(5.0),
        seed: 42,
        feature_dropout: 0.0,
    };
    for strategy in [Strategy::MutualInformation, Strategy::Random] {
        let config = SessionConfig {
            strategy,
            validation_targets: Vec::new(),
            update: UpdateConfig {
                beta: 5.0,
                ..UpdateConfig::default()
            },
            ..SessionConfig::default()
        };
        let s = run_campaign(&config, &oracle, 0, seeds, None)?;
        println!(
            "{strategy:?}: top-1 {:.2}  top-3 {:.2}  mean cos {:.3} over {seeds} seeds",
            s.top1_rate, s.top3_rate, s.mean_alignment
        );
    }
    Ok(())
}
