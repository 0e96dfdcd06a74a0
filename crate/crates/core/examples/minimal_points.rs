//! Cheapest restructurings: members of the intrinsic risk measure with the
//! smallest 1-norm, found by bisection over the planes `λᵀ1 = k`.
//!
//! cargo run --example minimal_points

use std::time::Instant;

use sysrisk::clearing::{AggregationSpec, ClearingMethod, LiabilityStructure};
use sysrisk::risk::AcceptanceCriterion;
use sysrisk::scenario::{sample_market, MarketSpec};
use sysrisk::setvalued::{minimal_points, MinimalPointsOptions, SystemRisk};

fn main() -> sysrisk::Result<()> {
    let market = sample_market(&MarketSpec::symmetric(2, 2.0, 5.0, 0.2, 20_000, 20240607)?)?;
    let agg = AggregationSpec::new(LiabilityStructure::complete(2, 0.6, 0.2)?, 0.9)?
        .with_method(ClearingMethod::FictitiousDefault);
    let sys = SystemRisk::new(&market, &agg, AcceptanceCriterion::es(0.05)?)?;

    let mut opts = MinimalPointsOptions::new(0.05, 1e-3);
    for prune in [true, false] {
        opts.prune = prune;
        let t = Instant::now();
        let r = minimal_points(&sys, &opts)?;
        println!(
            "prune={prune}: k_min {:.5} in {:?}, points {:?}, {} membership tests, {:?}",
            r.k_min,
            r.bracket,
            r.minimal_points,
            r.membership_tests,
            t.elapsed()
        );
    }

    // making bank 2's restructuring three times as expensive
    opts.weights = Some(vec![1.0, 3.0]);
    let r = minimal_points(&sys, &opts)?;
    println!("weighted: k_min {:.5}, points {:?}", r.k_min, r.minimal_points);
    Ok(())
}
