//! Shortest escape from a line at unknown distance 1 and unknown direction,
//! and from a point at unknown direction, as N grows.
use std::f64::consts::PI;

use forest_escape::scenario::catalog_instance;
use forest_escape::{solve_fixed_order, OrderPlan, SolveOptions};

fn main() -> forest_escape::Result<()> {
    for name in ["halfplane_unit", "point_unit"] {
        for n in [45, 90, 180, 360, 720] {
            let inst = catalog_instance(name, n)?;
            let sol = solve_fixed_order(&inst, &OrderPlan::identity(inst.len()), &SolveOptions::default())?;
            println!("{name:>15} N={n:<4} L={:.6} residual={:.1e}", sol.length, sol.max_residual);
        }
    }
    println!("continuum lengths: line {:.6}, point {:.6}", 3f64.sqrt() + 7.0 * PI / 6.0 + 1.0, 1.0 + 2.0 * PI);
    Ok(())
}
