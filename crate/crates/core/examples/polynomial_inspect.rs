//! Evaluate a transform, its slope and its inflection points.
//!
//! `cargo run --example polynomial_inspect -- 0,0,-1.5,1 4`

use polydepth::polytransform::{has_negative_slope, inflection_points, sample_curve, slope_at, value_at};
use polydepth::PolyCoefficients;

fn main() -> polydepth::Result<()> {
    let mut args = std::env::args().skip(1);
    let coeffs: Vec<f64> = args
        .next()
        .unwrap_or_else(|| "2,60,-90,120,-40".into())
        .split(',')
        .map(|v| v.trim().parse().expect("coefficient"))
        .collect();
    let z_max: f64 = args.next().map(|s| s.parse().expect("z_max")).unwrap_or(1.0);
    let p = PolyCoefficients::new(coeffs, z_max)?;

    println!("degree {} over [0, {z_max}]", p.degree());
    for s in sample_curve(&p, 9) {
        println!("z {:8.4}  d {:10.4}  dd/dz {:10.4}", s.z, s.depth, s.slope);
    }
    let set = inflection_points(&p);
    println!("{} inflection point(s)", set.len());
    for q in &set.points {
        println!("  z* = {:.6} ({:?}), d = {:.4}, slope {:.4}", q.z, q.change, value_at(&p, q.z), slope_at(&p, q.z));
    }
    println!("negative slope somewhere: {}", has_negative_slope(&p));
    Ok(())
}
