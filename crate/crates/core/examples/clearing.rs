//! Clear a two-bank network with both engines and aggregate the outcome.
//!
//! cargo run --example clearing

use sysrisk::clearing::{
    aggregate, clearing_fictitious_default, clearing_picard, validate_liabilities, AggregationSpec,
};

fn main() -> sysrisk::Result<()> {
    // row i lists what bank i owes: column 0 is society
    let net = validate_liabilities(&[vec![0.0, 0.0, 0.0], vec![0.2, 0.0, 0.6], vec![0.2, 0.6, 0.0]])?;
    let spec = AggregationSpec::new(net.clone(), 0.5)?;
    for x in [[0.1, 1.0], [0.0, 0.0], [2.0, 2.0]] {
        let picard = clearing_picard(&x, &net, 1e-12, 10_000)?;
        let fda = clearing_fictitious_default(&x, &net)?;
        println!(
            "x = {x:?}: p = {:?} after {} Picard steps, {:?} after {} default rounds, defaulting {:?}, Λ = {:.4}",
            picard.p,
            picard.iterations,
            fda.p,
            fda.iterations,
            fda.defaulting_set,
            aggregate(&x, &spec)?
        );
    }
    let (lo, hi) = spec.range();
    println!("Λ ranges over [{lo}, {hi}]");
    Ok(())
}
