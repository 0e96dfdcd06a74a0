//! Set-valued systemic risk measures for financial networks.
//!
//! A Monte Carlo scenario engine samples terminal values of institutions and
//! their eligible assets, an Eisenberg-Noe clearing network aggregates each
//! scenario into the value received by society, and empirical VaR or ES
//! decides acceptability. On top of that membership oracle the crate
//! approximates the boundary and the minimal points of the intrinsic risk set
//! `R^int(X) ⊂ [0,1]^d` and the monetary risk set `R(X) ⊂ R^d`.

pub mod clearing;
pub mod error;
pub mod risk;
pub mod scenario;
pub mod setvalued;
pub mod studies;

pub use error::{Error, Result};
