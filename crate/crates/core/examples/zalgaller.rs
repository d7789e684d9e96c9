//! Escape from a unit strip starting on one edge, where the far line is
//! swept through a range that depends on the solved first escape point.
use std::collections::BTreeMap;

use forest_escape::nlp_solver::solve_self_referential;
use forest_escape::{build_instance, Catalog, SolveOptions};

fn main() -> forest_escape::Result<()> {
    let catalog = Catalog::standard();
    let entry = catalog.get("zalgaller_class2")?;
    let build = |estimate: f64| {
        let overrides = BTreeMap::from([("estimate".to_string(), estimate)]);
        build_instance(&entry.spec(180, 1, &overrides)?)
    };
    let (sol, estimate) = solve_self_referential(build, None, entry.params["estimate"], &SolveOptions::default())?;
    println!(
        "L = {:.6} after {} fixed-point iterations, first-point angle {estimate:.6}",
        sol.length, sol.iterations
    );
    Ok(())
}
