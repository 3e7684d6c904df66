//! Power ratio of an idealized trace under two profiles, plus the
//! closed-form sine check.

use std::f64::consts::TAU;

use prefgait::metrics::{power_profile, power_ratio, profile_metrics};
use prefgait::profile::{TorqueProfileFeatures, FAMILIARIZATION};
use prefgait::synthetic::{walking_trace, WalkingPattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 10_000;
    let omega: Vec<f64> = (0..n).map(|i| (TAU * i as f64 / n as f64).sin()).collect();
    let sine = power_profile(&vec![1.0; n], &omega)?;
    println!("constant torque against a sine velocity: PR = {:?}", power_ratio(&sine));

    let late = TorqueProfileFeatures::from_array([5.0, 20.0, 20.0, 8.0, 65.0, 20.0]);
    for (name, profile) in [("familiarization", FAMILIARIZATION), ("late timing", late)] {
        let trace = walking_trace(&profile, &WalkingPattern::default())?;
        let m = profile_metrics(&trace, 0)?;
        println!(
            "{name:<16} cycles {:>2}  mean PR {:?}  infinite {}  undefined {}",
            m.cycles, m.mean_pr, m.infinite_cycles, m.undefined_cycles
        );
    }
    Ok(())
}
