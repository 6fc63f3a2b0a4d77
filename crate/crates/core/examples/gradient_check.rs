//! Central-difference checks of every graph operation and of the full
//! training loss through the network.

use polydepth::autodiff::gradcheck::{op_suite, MAX_REL_ERROR};
use polydepth::network::NetConfig;
use polydepth::training::pipeline_gradcheck;

fn main() -> polydepth::Result<()> {
    let mut reports = op_suite(0)?;
    reports.extend(pipeline_gradcheck(0, NetConfig::default())?);
    let mut worst: f64 = 0.0;
    for r in &reports {
        worst = worst.max(r.max_rel_error);
        println!("{:<28} {:>4} entries  max rel error {:.2e}", r.name, r.checked, r.max_rel_error);
    }
    println!("worst {worst:.2e}, threshold {MAX_REL_ERROR:.0e}");
    Ok(())
}
