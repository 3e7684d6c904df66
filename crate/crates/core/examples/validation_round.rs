//! Runs a session with the validation round and prints the keep/lose table.

use prefgait::oracle::{OracleSpec, Rationality};
use prefgait::preference::WeightVector;
use prefgait::query::SessionConfig;
use prefgait::session::run_simulated;
use prefgait::session_log::LogEvent;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = WeightVector::normalized([0.6, 0.1, -0.2, 0.7, -0.3, 0.1])?;
    let config = SessionConfig {
        seed: 2,
        ..SessionConfig::default()
    };
    let oracle = OracleSpec::new(truth, Rationality::Finite(5.0), 4);
    let (driver, _) = run_simulated("validation-demo", config, oracle, Vec::<LogEvent>::new())?;
    let state = driver.state();
    let report = state.validation_report().expect("validation ran");

    println!("preferred profile {:?}", state.final_profile().unwrap().to_array());
    println!("{:<24} kept  lost", "target");
    for (kind, kl) in &report.per_target {
        println!("{:<24} {:>4}  {:>4}", kind.label(), kl.kept, kl.lost);
    }
    println!("kept {} of {}", report.kept(), report.answered);
    Ok(())
}
