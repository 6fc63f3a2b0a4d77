//! Closed-form baselines on the test half of the standard benchmark.

use polydepth::eval::{evaluate_method, Method, Unit, DEFAULT_CAPS};
use polydepth::synthgen::{generate_scenes, SceneSpec};
use polydepth::training::{split_dataset, BENCHMARK_VAL_EVERY};

fn main() -> polydepth::Result<()> {
    let scenes = generate_scenes(&SceneSpec::default(), 200, 7)?;
    let split = split_dataset(&scenes, BENCHMARK_VAL_EVERY)?;
    println!("method,cap_m,mae_mm,rmse_mm");
    for m in [
        Method::Raw,
        Method::Median,
        Method::Linear,
        Method::PolyDense(2),
        Method::PolyDense(4),
        Method::PolyDense(8),
        Method::PolySparse(1),
        Method::PolySparse(3),
        Method::PolySparse(8),
    ] {
        let r = evaluate_method(&m, &split.test, &DEFAULT_CAPS, Unit::Millimeters)?;
        for cap in DEFAULT_CAPS {
            let e = r.mean_at(&m.label(), cap).expect("mean row");
            println!("{},{cap},{:.1},{:.1}", m.label(), e.mae, e.rmse);
        }
    }
    Ok(())
}
