//! Many start points across a strip, one shared escape path for all of them.
use std::collections::BTreeMap;

use forest_escape::{build_instance, solve_fixed_order, Catalog, OrderPlan, SolveOptions};

fn main() -> forest_escape::Result<()> {
    let catalog = Catalog::standard();
    for (n, m) in [(6, 13), (12, 26)] {
        let spec = catalog.spec("strip_wf2", n, m, &BTreeMap::new())?;
        let inst = build_instance(&spec)?;
        let order = spec.order_hint.clone().unwrap_or_else(|| OrderPlan::identity(inst.len()));
        let sol = solve_fixed_order(&inst, &order, &SolveOptions::default())?;
        println!("N={n:<3} M={m:<3} boundaries={:<4} L={:.6}", inst.len(), sol.length);
    }
    Ok(())
}
