//! Prints the familiarization torque curve at a few phases and writes the
//! full 1000-point curve as CSV to stdout when run with `--csv`.

use prefgait::profile::{interpolate, FeatureRanges, DEFAULT_RESOLUTION, FAMILIARIZATION};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ranges = FeatureRanges::default();
    let curve = interpolate(&FAMILIARIZATION, &ranges, DEFAULT_RESOLUTION)?;

    if std::env::args().any(|a| a == "--csv") {
        curve.write_csv(std::io::stdout())?;
        return Ok(());
    }
    println!("features {:?}", FAMILIARIZATION.to_array());
    for phase in [0.0, 0.05, 0.10, 0.175, 0.30, 0.50, 0.60, 0.70, 0.95] {
        println!("  phase {phase:>5.3}  torque {:>7.3} Nm", curve.value_at(phase));
    }
    println!("max |torque| {:.2} Nm over {} samples", curve.max_abs(), curve.len());
    Ok(())
}
