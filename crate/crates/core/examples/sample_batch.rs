//! Draws a 40-profile batch and shows how collapsed ranges limit the batch.

use prefgait::profile::{sample_batch, Bounds, FeatureRanges};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ranges = FeatureRanges::default();
    println!("{} distinct profiles on the 0.1 grid", ranges.distinct_vectors());

    let batch = sample_batch(&ranges, 40, 7)?;
    println!("{:>3}  {:>5} {:>5} {:>5} {:>5} {:>5} {:>5}", "#", "f1", "f2", "f3", "f4", "f5", "f6");
    for (i, p) in batch.iter().enumerate().take(10) {
        let v = p.to_array();
        println!("{i:>3}  {:>5.1} {:>5.1} {:>5.1} {:>5.1} {:>5.1} {:>5.1}", v[0], v[1], v[2], v[3], v[4], v[5]);
    }
    println!("... {} more", batch.len() - 10);

    // One admissible value per feature leaves a single profile, so even a
    // pair cannot be drawn.
    let mut collapsed = ranges.clone();
    collapsed.bounds = collapsed.bounds.map(|b| Bounds::new(b.lower, b.lower));
    match sample_batch(&collapsed, 2, 7) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("collapsed ranges: {e}"),
    }
    Ok(())
}
