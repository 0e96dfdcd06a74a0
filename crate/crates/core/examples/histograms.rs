//! Diagonal restructurings of a four-bank system and the distribution of the
//! aggregate outcome before and after each of them.
//!
//! cargo run --example histograms

use sysrisk::studies::{diagonal_requirements, histogram_report, Prepared, StudyConfig};

fn main() -> sysrisk::Result<()> {
    let cfg = StudyConfig::base_case(4, 0.6, 0.23, 0.9, 20_000, 20240607);
    let p = Prepared::new(&cfg)?;
    let sys = p.system()?;
    let req = diagonal_requirements(&sys, 1e-6)?;
    let (Some(l), Some(k)) = (req.intrinsic, req.monetary) else {
        println!("no diagonal solution: {req:?}");
        return Ok(());
    };
    println!("sell λ = {:.5} of every position, or inject k = {:.5} per bank", l.value, k.value);
    let r = histogram_report(&sys, &[l.value; 4], &[k.value; 4], 0.01)?;
    for s in &r.summaries {
        println!(
            "{:<9} min {:+.4} max {:+.4} mean {:+.4} sd {:.4} skew {:+.3} ES {:+.2e}",
            s.system,
            s.support_min,
            s.support_max,
            s.mean,
            s.variance.sqrt(),
            s.skewness,
            s.es
        );
    }
    Ok(())
}
