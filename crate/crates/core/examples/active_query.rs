//! Ranks batch pairs by how much their answer would tell about the weights.

use prefgait::preference::Belief;
use prefgait::profile::{sample_batch, FeatureRanges};
use prefgait::query::pair_mutual_information;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ranges = FeatureRanges::default();
    let batch = sample_batch(&ranges, 40, 5)?;
    let belief = Belief::prior(100, 5)?;

    let mut scores = pair_mutual_information(&belief, &batch, &ranges, 1.0);
    scores.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("{} candidate pairs; most informative under the prior:", scores.len());
    for ((i, j), mi) in scores.iter().take(5) {
        println!("  ({i:>2}, {j:>2})  {mi:.4} nats");
    }
    let ((i, j), mi) = scores.last().unwrap();
    println!("least informative: ({i}, {j}) {mi:.4} nats (upper bound ln 2 = {:.4})", std::f64::consts::LN_2);
    Ok(())
}
