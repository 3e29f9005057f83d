//! Sampling, coarsening and saving Brownian increments.

use coadjoint::noise::{coarsen, sample_channels, BrownianGrid};

fn main() -> coadjoint::Result<()> {
    let fine = sample_channels(2, 2024, 1.0, 1024)?;
    let coarse = coarsen(&fine, 16)?;
    println!("generator {}", fine.generator());
    println!("fine W(T)   = {:?}", fine.total_displacement());
    println!("coarse W(T) = {:?}", coarse.total_displacement());

    let var: f64 = fine.channel(0).iter().map(|d| d * d).sum();
    println!("quadratic variation of channel 0: {var:.4}");

    let path = std::env::temp_dir().join("coadjoint_brownian.bin");
    fine.save(&path)?;
    let back = BrownianGrid::load(&path)?;
    println!("round trip identical: {}", back.increments() == fine.increments());
    std::fs::remove_file(path)?;
    Ok(())
}
