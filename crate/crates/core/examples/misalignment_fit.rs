//! One global line cannot align three objects whose scaleless depths are
//! warped differently; a cubic can.

use polydepth::eval::{mae_rmse, predict, Method, Unit};
use polydepth::synthgen::misalignment_fixture;

fn main() -> polydepth::Result<()> {
    let (s, layout) = misalignment_fixture()?;
    for (k, r) in layout.regions.iter().enumerate() {
        println!("region {k}: {} columns from {}, {:?}", r.cols, r.col, r.surface);
    }
    for m in [
        Method::Median,
        Method::Linear,
        Method::PolyDense(3),
        Method::PolyDense(8),
        Method::PolySparse(3),
    ] {
        let p = predict(&m, &s)?;
        let e = mae_rmse(&p, &s.ground_truth, &s.mask, f64::INFINITY, Unit::Meters)?;
        println!("{:>14}  MAE {:7.3} m  RMSE {:7.3} m", m.label(), e.mae, e.rmse);
    }
    Ok(())
}
