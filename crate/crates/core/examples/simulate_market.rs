//! Draw a small Gaussian-copula market and summarize it.
//!
//! cargo run --example simulate_market

use sysrisk::scenario::{sample_market, MarketSpec};

fn main() -> sysrisk::Result<()> {
    // Beta(2,5) wealth, log-normal eligible assets with a fifth of its variance
    let mut spec = MarketSpec::symmetric(2, 2.0, 5.0, 0.2, 50_000, 7)?;
    spec.correlation.set(0, 1, 0.3)?;
    let m = sample_market(&spec)?;
    println!("x0 = {:?}", m.x0);
    println!("s0 = {:?}", m.s0);
    for j in 0..m.d() {
        let x = m.xt.column(j);
        let s = m.st.column(j);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "bank {}: mean X_T {:.4} (target {:.4}), mean S_T {:.4} (target {:.4})",
            j + 1,
            mean(&x),
            spec.positions[j].mean(),
            mean(&s),
            spec.eligible[j].mean()
        );
    }
    let (a, b) = (m.xt.column(0), m.xt.column(1));
    let (ma, mb) = (a.iter().sum::<f64>() / a.len() as f64, b.iter().sum::<f64>() / b.len() as f64);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
    let sd = |v: &[f64], m: f64| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    println!("sample correlation of X_T: {:.3}", cov / (sd(&a, ma) * sd(&b, mb)));
    Ok(())
}
