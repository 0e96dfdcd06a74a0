//! How the intrinsic risk measure reacts to larger liabilities towards
//! society: the same frozen scenarios cleared through different networks.
//!
//! cargo run --example liability_study

use sysrisk::setvalued::boundary_intrinsic;
use sysrisk::studies::{Prepared, StudyConfig, StudyKind};

fn main() -> sysrisk::Result<()> {
    let base = StudyConfig::base_case(2, 0.6, 0.2, 0.9, 10_000, 20240607);
    for l in [0.1, 0.15, 0.2] {
        let cfg = base.with_parameter(StudyKind::LiabSociety, l)?;
        let p = Prepared::new(&cfg)?;
        let sys = p.system()?;
        match boundary_intrinsic(&sys, 0.1, 1e-5) {
            Ok(b) => println!("L_i0 = {l}: cheapest boundary point sums to {:.4}", b.min_coordinate_sum().unwrap()),
            Err(e) => println!("L_i0 = {l}: {e}"),
        }
    }
    Ok(())
}
