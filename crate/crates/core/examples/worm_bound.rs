//! Area over squared escape length for bounded regions with many starts.
use std::collections::BTreeMap;

use forest_escape::analysis::worm_upper_bound;
use forest_escape::{build_instance, Catalog, SolveOptions, Strategy};

fn main() -> forest_escape::Result<()> {
    let catalog = Catalog::standard();
    for name in ["circle_wf2", "triangle_equilateral", "sector"] {
        let entry = catalog.get(name)?;
        let spec = catalog.spec(name, 6, entry.default_m, &BTreeMap::new())?;
        let inst = build_instance(&spec)?;
        let hint = spec.order_hint.as_ref();
        let sol = Strategy::default_for(hint).solve(&inst, hint, &SolveOptions::default())?;
        let area = spec.region_area.expect("bounded region");
        let bound = worm_upper_bound(name, area, &sol)?;
        println!("{name:>22}: area {:.6}, L {:.6}, A/L^2 {:.6}", bound.area, bound.escape_length, bound.ratio);
    }
    Ok(())
}
