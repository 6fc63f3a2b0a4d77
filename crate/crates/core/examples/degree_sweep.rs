//! Learned models of increasing degree under one training budget.
//!
//! `cargo run --release --example degree_sweep -- [epochs] [degrees]`
//! The default budget is the benchmark recipe (several minutes per degree).

use polydepth::synthgen::{generate_scenes, SceneSpec};
use polydepth::training::{run_degree_sweep, split_dataset, sweep_table_csv, ExperimentConfig, BENCHMARK_VAL_EVERY};

fn main() -> polydepth::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::benchmark();
    if let Some(e) = args.next() {
        cfg.train.epochs = e.parse().expect("epochs");
    }
    let degrees: Vec<usize> = args
        .next()
        .unwrap_or_else(|| "1,2,4,8".into())
        .split(',')
        .map(|d| d.parse().expect("degree"))
        .collect();
    let scenes = generate_scenes(&SceneSpec::default(), 200, 7)?;
    let split = split_dataset(&scenes, BENCHMARK_VAL_EVERY)?;
    let rows = run_degree_sweep(&split, &degrees, &cfg)?;
    print!("{}", sweep_table_csv(&rows));
    Ok(())
}
