//! Segments a synthetic walking trace into cycles and exports hip-knee
//! synergy rows.

use prefgait::gait::{segment_trace, stance_swing_ratio, synergy_export, Side};
use prefgait::profile::FAMILIARIZATION;
use prefgait::synthetic::{walking_trace, WalkingPattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace = walking_trace(&FAMILIARIZATION, &WalkingPattern::default())?;
    println!("{} samples at {} Hz", trace.len(), trace.sample_rate_hz);

    let cycles = segment_trace(&trace)?;
    for side in Side::BOTH {
        let n = cycles.iter().filter(|c| c.side == side).count();
        println!("{side:?}: {n} cycles");
    }
    for c in cycles.iter().take(3) {
        println!(
            "  {:?} samples {}..{}  stance {:.2} s  swing {:.2} s",
            c.side, c.start, c.end, c.stance_s, c.swing_s
        );
    }

    let ratio = stance_swing_ratio(&cycles)?;
    println!("stance/swing {:.3} +- {:.3} ({} excluded)", ratio.mean, ratio.std, ratio.excluded);

    let rows = synergy_export(&trace, &cycles);
    println!("synergy export: {} rows, first {:?}", rows.len(), rows[0]);
    Ok(())
}
