//! Open paths against paths that must return to the start.
use std::collections::BTreeMap;

use forest_escape::scenario::Mode;
use forest_escape::{build_instance, solve_fixed_order, Catalog, OrderPlan, SolveOptions};

fn main() -> forest_escape::Result<()> {
    let catalog = Catalog::standard();
    for name in ["point_unit", "halfplane_unit", "circle_exterior"] {
        let mut lengths = Vec::new();
        for mode in [Mode::EscapeOpen, Mode::EscapeClosed] {
            let mut spec = catalog.spec(name, 180, 1, &BTreeMap::new())?;
            spec.mode = mode;
            let inst = build_instance(&spec)?;
            let order = spec.order_hint.clone().unwrap_or_else(|| OrderPlan::identity(inst.len()));
            lengths.push(solve_fixed_order(&inst, &order, &SolveOptions::default())?.length);
        }
        println!("{name:>16}: open {:.6}, closed {:.6}", lengths[0], lengths[1]);
    }
    Ok(())
}
