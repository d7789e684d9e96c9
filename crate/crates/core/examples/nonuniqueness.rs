//! An enclosing circle whose radius admits two different optimal escapes.
use std::collections::BTreeMap;

use forest_escape::analysis::{detect_nonuniqueness, straight_escape};
use forest_escape::{build_instance, solve_fixed_order, Catalog, OrderPlan, SolveOptions, Vec3};

fn main() -> forest_escape::Result<()> {
    let catalog = Catalog::standard();
    let spec = catalog.spec("circle_interior_nonunique", 360, 1, &BTreeMap::new())?;
    let inst = build_instance(&spec)?;
    let order = spec.order_hint.clone().unwrap_or_else(|| OrderPlan::identity(inst.len()));
    let sols: Vec<_> = [0, 1, 2, 3]
        .into_iter()
        .map(|seed| solve_fixed_order(&inst, &order, &SolveOptions::default().with_seed(seed)))
        .collect::<forest_escape::Result<_>>()?;
    for (seed, s) in sols.iter().enumerate() {
        println!("seed {seed}: solver path L={:.6}", s.length);
    }
    let report = detect_nonuniqueness(&sols, None)?;
    println!("distinct near-optimal geometries among the seeds: {}", report.distinct_optima);

    let radius = spec.params["radius"];
    let walk = straight_escape(&inst, Vec3::new(1.0, 0.0, 0.0), 2.0 * radius)?;
    println!(
        "straight walk of length {:.6} meets every rotated circle: {} (last hit at {:.6})",
        2.0 * radius,
        walk.meets_all(),
        walk.last_hit().unwrap_or(f64::NAN)
    );
    Ok(())
}
