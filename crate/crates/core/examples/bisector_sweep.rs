//! Two lines seen from their bisector, for several opening angles, with one
//! SVG figure per angle.
use std::collections::BTreeMap;
use std::f64::consts::PI;

use forest_escape::export::SvgScene;
use forest_escape::{build_instance, solve_fixed_order, Catalog, OrderPlan, SolveOptions};

fn main() -> forest_escape::Result<()> {
    let catalog = Catalog::standard();
    let dir = std::env::temp_dir().join("bisector_sweep");
    std::fs::create_dir_all(&dir)?;
    for (i, theta) in [PI / 6.0, PI / 3.0, 2.0 * PI / 3.0, 5.0 * PI / 6.0].into_iter().enumerate() {
        let spec = catalog.spec("bisector_angle", 180, 1, &BTreeMap::from([("theta".to_string(), theta)]))?;
        let inst = build_instance(&spec)?;
        let order = spec.order_hint.clone().unwrap_or_else(|| OrderPlan::identity(inst.len()));
        let sol = solve_fixed_order(&inst, &order, &SolveOptions::default())?;
        let path = dir.join(format!("bisector_{i}.svg"));
        std::fs::write(&path, SvgScene::new(&inst, Some(&sol)).with_comment(format!("theta {theta}")).render())?;
        println!("theta={theta:.6} L={:.6} -> {}", sol.length, path.display());
    }
    Ok(())
}
