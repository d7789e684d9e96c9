//! Writes the visiting-order model of a solved instance as text and checks
//! it back independently.
use forest_escape::acceptance::random_point_instance;
use forest_escape::export::{check_mtz_text, to_mtz_text};
use forest_escape::order_search::mtz_branch_and_bound;
use forest_escape::scenario::Mode;
use forest_escape::SolveOptions;

fn main() -> forest_escape::Result<()> {
    let inst = random_point_instance(3, 5, Mode::EscapeOpen)?;
    let outcome = mtz_branch_and_bound(&inst, &SolveOptions::default())?;
    let text = to_mtz_text(&outcome.model, &inst)?;
    let check = check_mtz_text(&text, 1e-9)?;
    println!(
        "K={} binaries={} auxiliaries={} objective={:.9} (solution {:.9}), {} search nodes",
        check.k, check.binaries, check.auxiliaries, check.objective, outcome.solution.length, outcome.nodes_visited
    );
    for line in text.lines().take(12) {
        println!("  {line}");
    }
    Ok(())
}
