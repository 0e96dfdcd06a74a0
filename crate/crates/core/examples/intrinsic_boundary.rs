//! Boundary of the set-valued intrinsic risk measure of a two-bank system,
//! written as CSV with its run metadata.
//!
//! cargo run --example intrinsic_boundary [N]

use sysrisk::clearing::{AggregationSpec, ClearingMethod, LiabilityStructure};
use sysrisk::risk::AcceptanceCriterion;
use sysrisk::scenario::{sample_market, MarketSpec};
use sysrisk::setvalued::{boundary_intrinsic, write_boundary_csv, RunMetadata, SystemRisk};

fn main() -> sysrisk::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let market = sample_market(&MarketSpec::symmetric(2, 2.0, 5.0, 0.2, n, 20240607)?)?;
    let agg = AggregationSpec::new(LiabilityStructure::complete(2, 0.6, 0.2)?, 0.9)?
        .with_method(ClearingMethod::FictitiousDefault);
    let sys = SystemRisk::new(&market, &agg, AcceptanceCriterion::es(0.05)?)?;

    println!("risk of the original system {:.5}", sys.intrinsic_risk(&[0.0, 0.0])?);
    let b = boundary_intrinsic(&sys, 0.1, 1e-6)?;
    for p in b.points.iter().step_by(3) {
        println!("from {:?}: λ̂ = ({:.4}, {:.4}) after {} steps", p.origin, p.point[0], p.point[1], p.n_iter);
    }
    println!("cheapest boundary point sums to {:.4}", b.min_coordinate_sum().unwrap_or(f64::NAN));

    let meta = RunMetadata {
        seed: Some(20240607),
        n,
        grid_step: b.grid_step,
        epsilon: b.epsilon,
        criterion: sys.criterion().to_string(),
        beta: agg.beta,
        feasible_flag: b.feasible_flag,
        extras: Default::default(),
    };
    let mut out = Vec::new();
    write_boundary_csv(&mut out, &b, "lambda", &meta)?;
    print!("{}", String::from_utf8_lossy(&out).lines().take(3).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
