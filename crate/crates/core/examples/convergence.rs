//! Lengths over a nested ladder of orientation counts never decrease.
use forest_escape::analysis::catalog_convergence_study;
use forest_escape::{Catalog, SolveOptions};

fn main() -> forest_escape::Result<()> {
    let catalog = Catalog::standard();
    for name in ["halfplane_unit", "strip_middle"] {
        let report = catalog_convergence_study(&catalog, name, &[15, 30, 60, 120, 240], &SolveOptions::default())?;
        for e in &report.entries {
            println!("{name:>15} N={:<4} L={:.6}", e.n, e.length);
        }
        println!("{name:>15} monotone: {}", report.monotone_ok);
    }
    Ok(())
}
