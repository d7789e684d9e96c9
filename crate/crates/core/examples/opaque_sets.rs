//! Opaque curves: one curve meeting every tangent line of a disc, then a
//! split of a square's lines between curves. Beyond ten lines the split and
//! the orders come from local search, so the square figures are upper bounds.
use std::collections::BTreeMap;

use forest_escape::order_search::partition_search;
use forest_escape::{build_instance, solve_fixed_order, Catalog, OrderPlan, SolveOptions};

fn main() -> forest_escape::Result<()> {
    let catalog = Catalog::standard();
    let opts = SolveOptions::default();

    let spec = catalog.spec("opaque_circle_tangent", 90, 1, &BTreeMap::new())?;
    let inst = build_instance(&spec)?;
    let order = spec.order_hint.clone().unwrap_or_else(|| OrderPlan::identity(inst.len()));
    let sol = solve_fixed_order(&inst, &order, &opts)?;
    println!("disc tangents, N=90: single curve length {:.6}", sol.length);

    let spec = catalog.spec("opaque_square", 4, 4, &BTreeMap::new())?;
    let inst = build_instance(&spec)?;
    for p in 1..=2 {
        let (plan, parts) = partition_search(&inst, p, &opts)?;
        let total: f64 = parts.iter().map(|s| s.length).sum();
        println!("square, {} lines, {p} curve(s): total {total:.6}, subsets {:?}", inst.len(), plan.subsets);
    }
    Ok(())
}
