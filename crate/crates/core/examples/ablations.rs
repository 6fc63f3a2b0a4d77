//! Prototype, fusion and monotonicity ablations against the full model.
//!
//! `cargo run --release --example ablations -- [epochs]`

use polydepth::synthgen::{generate_scenes, SceneSpec};
use polydepth::training::{ablation_table_csv, run_ablations, split_dataset, ExperimentConfig, BENCHMARK_VAL_EVERY};

fn main() -> polydepth::Result<()> {
    let mut cfg = ExperimentConfig::benchmark();
    if let Some(e) = std::env::args().nth(1) {
        cfg.train.epochs = e.parse().expect("epochs");
    }
    let scenes = generate_scenes(&SceneSpec::default(), 200, 7)?;
    let split = split_dataset(&scenes, BENCHMARK_VAL_EVERY)?;
    print!("{}", ablation_table_csv(&run_ablations(&split, &cfg)?));
    Ok(())
}
