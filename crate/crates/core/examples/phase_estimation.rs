//! Online gait phase from heel strikes.

use prefgait::gait::PhaseEstimator;

fn main() {
    let mut estimator = PhaseEstimator::default();
    let strikes = [0.0, 1.08, 2.20, 3.29, 4.40];
    for (i, &t) in strikes.iter().enumerate() {
        estimator.heel_strike(t);
        match estimator.phase(t + 0.55) {
            Ok(phase) => println!("after strike {i} at {t:.2} s: phase 0.55 s later = {phase:.3}"),
            Err(e) => println!("after strike {i} at {t:.2} s: {e}"),
        }
    }
    // A long pause saturates just below 1 instead of wrapping.
    println!("phase 5 s after the last strike = {:.6}", estimator.phase(9.4).unwrap());
}
