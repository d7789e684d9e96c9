//! Every visiting-order strategy on one random instance.
use forest_escape::acceptance::random_point_instance;
use forest_escape::scenario::Mode;
use forest_escape::{SolveOptions, Strategy};

fn main() -> forest_escape::Result<()> {
    let inst = random_point_instance(7, 7, Mode::EscapeOpen)?;
    let opts = SolveOptions::default();
    for strategy in Strategy::ALL {
        let sol = strategy.solve(&inst, None, &opts)?;
        println!("{strategy:>12}: L={:.9} order {:?}", sol.length, sol.order.perm());
    }
    Ok(())
}
