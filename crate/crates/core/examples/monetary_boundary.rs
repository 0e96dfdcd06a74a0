//! Boundary of the set-valued monetary risk measure: capital allocations
//! invested in the eligible assets that make the system acceptable.
//!
//! cargo run --example monetary_boundary

use sysrisk::clearing::{AggregationSpec, ClearingMethod, LiabilityStructure};
use sysrisk::risk::AcceptanceCriterion;
use sysrisk::scenario::{sample_market, MarketSpec};
use sysrisk::setvalued::{boundary_monetary, default_monetary_box, SystemRisk};

fn main() -> sysrisk::Result<()> {
    let market = sample_market(&MarketSpec::symmetric(2, 2.0, 5.0, 0.2, 20_000, 20240607)?)?;
    let agg = AggregationSpec::new(LiabilityStructure::complete(2, 0.6, 0.2)?, 0.9)?
        .with_method(ClearingMethod::FictitiousDefault);
    let sys = SystemRisk::new(&market, &agg, AcceptanceCriterion::es(0.05)?)?;
    let bounds = default_monetary_box(&market.x0);
    println!("search box [{:.4}, {:.4}]^2", bounds.0, bounds.1);
    let b = boundary_monetary(&sys, 0.1, 1e-6, bounds)?;
    for p in &b.points {
        println!("k = ({:+.4}, {:+.4})  total {:+.4}", p.point[0], p.point[1], p.point[0] + p.point[1]);
    }
    Ok(())
}
