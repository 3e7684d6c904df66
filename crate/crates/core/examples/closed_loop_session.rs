//! One simulated session from batch to final profile, with the posterior
//! trajectory printed after each comparison.

use prefgait::oracle::{OracleSpec, Rationality};
use prefgait::preference::WeightVector;
use prefgait::query::SessionConfig;
use prefgait::session::run_simulated;
use prefgait::session_log::LogEvent;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = WeightVector::normalized([0.2, -0.5, 0.1, 0.8, 0.0, -0.2])?;
    let oracle = OracleSpec::new(truth, Rationality::Finite(5.0), 9);
    let config = SessionConfig {
        seed: 12,
        validation_targets: Vec::new(),
        ..SessionConfig::default()
    };
    let (driver, user) = run_simulated("demo", config, oracle, Vec::<LogEvent>::new())?;
    let (state, events) = driver.into_parts();

    for (k, (choice, summary)) in state.history.iter().zip(&state.trajectory).enumerate() {
        let (a, b) = choice.query.index_pair().unwrap();
        println!(
            "comparison {:>2}: ({a:>2} vs {b:>2}) chose {:?}  cos {:.3}",
            k + 1,
            choice.selected,
            summary.mean.cosine(user.weights())
        );
    }
    let final_index = state.final_index.unwrap();
    println!("final profile #{final_index}: {:?}", state.batch[final_index].to_array());
    println!("{} log events", events.len());
    Ok(())
}
