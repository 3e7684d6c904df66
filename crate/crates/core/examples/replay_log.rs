//! Writes a session log to disk, reads it back and replays it to the same
//! state.

use prefgait::oracle::{OracleSpec, Rationality};
use prefgait::preference::WeightVector;
use prefgait::query::SessionConfig;
use prefgait::session::{replay, run_simulated};
use prefgait::session_log::{read_log_file, JsonlFile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("session.jsonl");
    let oracle = OracleSpec::new(WeightVector::axis(4), Rationality::Finite(2.0), 8);
    let config = SessionConfig {
        batch_size: 20,
        comparisons: 6,
        seed: 3,
        ..SessionConfig::default()
    };
    let (driver, _) = run_simulated("replay-demo", config, oracle, JsonlFile::create(&path, true)?)?;
    let live = driver.state().clone();

    let events = read_log_file(&path)?;
    for e in events.iter().take(4) {
        println!("{:?} at {}", e.event, e.t);
    }
    println!("... {} events in total", events.len());

    let (replayed, header) = replay(&events)?;
    println!("session {} ({:?})", header.session_id, header.mode);
    println!("belief identical: {}", replayed.belief == live.belief);
    println!("final index: {:?}", replayed.final_index);
    Ok(())
}
