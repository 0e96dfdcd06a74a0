//! Charging transaction costs and the cost of debt against the diagonal
//! restructurings.
//!
//! cargo run --example transaction_costs

use sysrisk::risk::empirical_es;
use sysrisk::studies::{apply_costs, diagonal_requirements, Action, CostSpec, Prepared, StudyConfig};

fn main() -> sysrisk::Result<()> {
    let cfg = StudyConfig::base_case(4, 0.6, 0.23, 0.9, 20_000, 20240607);
    let p = Prepared::new(&cfg)?;
    let sys = p.system()?;
    let req = diagonal_requirements(&sys, 1e-6)?;
    let costs = CostSpec::default();
    println!("{} bps per trade, {} cost of debt", costs.transaction_cost_bps, costs.cost_of_debt);
    let actions = [
        ("intrinsic", req.intrinsic.map(|b| Action::Intrinsic(vec![b.value; 4]))),
        ("monetary", req.monetary.map(|b| Action::Monetary(vec![b.value; 4]))),
    ];
    for (name, action) in actions {
        let Some(action) = action else { continue };
        let free = apply_costs(&sys, &action, &CostSpec::zero())?;
        let paid = apply_costs(&sys, &action, &costs)?;
        println!(
            "{name}: ES {:+.2e} without costs, {:+.2e} with costs",
            empirical_es(&free, 0.05)?,
            empirical_es(&paid, 0.05)?
        );
    }
    Ok(())
}
