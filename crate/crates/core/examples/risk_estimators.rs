//! Empirical VaR and ES, their scalar monetary and intrinsic risk measures,
//! and the dual representation of expected shortfall.
//!
//! cargo run --example risk_estimators

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sysrisk::risk::{
    empirical_es, empirical_var, es_dual_max, scalar_intrinsic_rho, scalar_monetary_rho, AcceptanceCriterion,
    IntrinsicOptions, ScalarPosition,
};

fn main() -> sysrisk::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 10_000;
    // a risky position worth 1 today and a safer eligible asset
    let x: Vec<f64> = (0..n).map(|_| 1.05 + 0.4 * (rng.random::<f64>() - 0.6)).collect();
    let s: Vec<f64> = (0..n).map(|_| 1.02 + 0.02 * rng.random::<f64>()).collect();
    let alpha = 0.05;
    println!("VaR {:.4}, ES {:.4}", empirical_var(&x, alpha)?, empirical_es(&x, alpha)?);

    let pos = ScalarPosition::new(1.0, x.iter().map(|v| v - 1.0).collect())?;
    let elig = ScalarPosition::new(1.0, s)?;
    for criterion in [AcceptanceCriterion::var(alpha)?, AcceptanceCriterion::es(alpha)?] {
        let m = scalar_monetary_rho(&pos, &elig, &criterion, 1e-10)?;
        let l = scalar_intrinsic_rho(&pos, &elig, &criterion, IntrinsicOptions::default())?;
        println!("{criterion}: capital {m:?}, fraction to sell {l:?}");
    }

    let dual = es_dual_max(&x[..1000], alpha, 1000, 1)?;
    println!("ES by its dual: vertex {:.6}, best of 1000 random densities {:.6}", dual.exact_max, dual.max_over_trials);
    Ok(())
}
