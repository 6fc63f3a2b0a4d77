//! Generate the standard benchmark on disk and read it back.
//!
//! `cargo run --release --example synth_dataset -- [out_dir] [count]`

use std::path::PathBuf;

use polydepth::datamodel::load_dataset;
use polydepth::synthgen::{generate_dataset, SceneSpec};

fn main() -> polydepth::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/benchmark".into()));
    let count: usize = args.next().map(|s| s.parse().expect("count")).unwrap_or(200);

    let ids = generate_dataset(&out, &SceneSpec::default(), count, 7)?;
    let scenes = load_dataset(&out)?;
    println!("wrote {} scenes to {}", ids.len(), out.display());
    for s in scenes.iter().take(5) {
        let valid = s.mask.count();
        let mean_gt = s.ground_truth.values().iter().sum::<f64>() / valid as f64;
        println!(
            "{}: {}x{}, {} radar points, {} valid pixels, mean depth {:.1} m",
            s.id,
            s.scaleless.height(),
            s.scaleless.width(),
            s.cloud.len(),
            valid,
            mean_gt
        );
    }
    Ok(())
}
