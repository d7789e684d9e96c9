//! Spatial variant: one curve meeting every sampled tangent plane of a ball.
use std::collections::BTreeMap;

use forest_escape::{build_instance, Catalog, SolveOptions, Strategy};

fn main() -> forest_escape::Result<()> {
    let catalog = Catalog::standard();
    for (n, m) in [(4, 4), (8, 8)] {
        let spec = catalog.spec("plane3d", n, m, &BTreeMap::new())?;
        let inst = build_instance(&spec)?;
        let hint = spec.order_hint.as_ref();
        let sol = Strategy::default_for(hint).solve(&inst, hint, &SolveOptions::default())?;
        println!("{} planes: L={:.6} residual={:.1e}", inst.len(), sol.length, sol.max_residual);
    }
    Ok(())
}
