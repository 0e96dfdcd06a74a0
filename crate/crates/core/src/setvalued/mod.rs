//! Intrinsic and monetary set-valued measures of systemic risk.
//!
//! ```text
//! R^int(X) = { λ ∈ [0,1]^d : Λ((1−λ)⊙X_T + λ⊙x0⊙S_T⊘s0) ∈ A }
//! R(X)     = { k ∈ R^d     : Λ(X_T + k⊙S_T⊘s0) ∈ A }
//! ```
//!
//! Every membership test in one run evaluates the same frozen scenario set,
//! so the algorithms see a deterministic oracle.

mod boundary;
mod export;
mod minimal;

pub use boundary::{
    boundary_intrinsic, boundary_monetary, boundary_with, default_monetary_box, face_grid, full_grid_scan,
    BoundaryApproximation, BoundaryPoint, GridMember,
};
pub use export::{write_boundary_csv, write_grid_csv, write_minimal_csv, RunMetadata};
pub use minimal::{
    convex_prune, minimal_points, minimal_points_with, MinimalPointResult, MinimalPointsOptions, PlaneLattice,
    PruneOutcome,
};

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::clearing::{aggregate_rows, AggregationSpec};
use crate::error::{Error, Result};
use crate::risk::AcceptanceCriterion;
use crate::scenario::{MarketModel, ScenarioSet};

/// Membership oracle for both measures of one system.
pub struct SystemRisk<'a> {
    market: &'a MarketModel,
    agg: &'a AggregationSpec,
    criterion: AcceptanceCriterion,
    /// `S_T ⊘ s0`, row-major.
    eligible_return: Vec<f64>,
    evaluations: AtomicUsize,
}

impl<'a> SystemRisk<'a> {
    pub fn new(market: &'a MarketModel, agg: &'a AggregationSpec, criterion: AcceptanceCriterion) -> Result<Self> {
        if market.d() != agg.d() {
            return Err(Error::Dimension(format!("market has {} institutions, network has {}", market.d(), agg.d())));
        }
        agg.validate()?;
        criterion.validate()?;
        let d = market.d();
        let eligible_return = market
            .st
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, s)| s / market.s0[i % d])
            .collect();
        Ok(SystemRisk { market, agg, criterion, eligible_return, evaluations: AtomicUsize::new(0) })
    }

    pub fn d(&self) -> usize {
        self.market.d()
    }

    pub fn market(&self) -> &MarketModel {
        self.market
    }

    pub fn aggregation(&self) -> &AggregationSpec {
        self.agg
    }

    pub fn criterion(&self) -> AcceptanceCriterion {
        self.criterion
    }

    /// Number of risk evaluations so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.d() {
            return Err(Error::Dimension(format!("vector of length {} for {} institutions", v.len(), self.d())));
        }
        Ok(())
    }

    /// Rows of `(1−λ)⊙X_T + λ⊙x0⊙S_T⊘s0`.
    pub fn intrinsic_rows(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check_len(lambda)?;
        if lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Domain(format!("λ = {lambda:?} is outside [0,1]^d")));
        }
        let d = self.d();
        let x0 = &self.market.x0;
        Ok(self
            .market
            .xt
            .as_slice()
            .iter()
            .zip(&self.eligible_return)
            .enumerate()
            .map(|(i, (x, r))| {
                let k = i % d;
                (1.0 - lambda[k]) * x + lambda[k] * x0[k] * r
            })
            .collect())
    }

    /// Rows of `X_T + k⊙S_T⊘s0`.
    pub fn monetary_rows(&self, k: &[f64]) -> Result<Vec<f64>> {
        self.check_len(k)?;
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("capital vector must be finite".into()));
        }
        let d = self.d();
        Ok(self
            .market
            .xt
            .as_slice()
            .iter()
            .zip(&self.eligible_return)
            .enumerate()
            .map(|(i, (x, r))| x + k[i % d] * r)
            .collect())
    }

    /// `Λ` of the intrinsic system, one value per scenario.
    pub fn intrinsic_aggregate(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        aggregate_rows(&self.intrinsic_rows(lambda)?, self.agg)
    }

    pub fn monetary_aggregate(&self, k: &[f64]) -> Result<Vec<f64>> {
        aggregate_rows(&self.monetary_rows(k)?, self.agg)
    }

    /// Risk of the aggregated intrinsic system; `λ` is a member iff `≤ 0`.
    pub fn intrinsic_risk(&self, lambda: &[f64]) -> Result<f64> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.criterion.risk(&self.intrinsic_aggregate(lambda)?)
    }

    pub fn monetary_risk(&self, k: &[f64]) -> Result<f64> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.criterion.risk(&self.monetary_aggregate(k)?)
    }

    pub fn is_member_intrinsic(&self, lambda: &[f64]) -> Result<bool> {
        Ok(self.intrinsic_risk(lambda)? <= 0.0)
    }

    pub fn is_member_monetary(&self, k: &[f64]) -> Result<bool> {
        Ok(self.monetary_risk(k)? <= 0.0)
    }

    /// Whether `Λ(x0⊙S_T⊘s0)` is acceptable, i.e. `1 ∈ R^int`.
    pub fn all_eligible_acceptable(&self) -> Result<bool> {
        self.is_member_intrinsic(&vec![1.0; self.d()])
    }
}

/// `(1−λ)⊙X_T + λ⊙x0⊙S_T⊘s0` as a scenario set.
pub fn intrinsic_system(market: &MarketModel, lambda: &[f64]) -> Result<ScenarioSet> {
    if lambda.len() != market.d() || lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Domain(format!("λ = {lambda:?} is not in [0,1]^{}", market.d())));
    }
    let d = market.d();
    let data = market
        .xt
        .as_slice()
        .iter()
        .zip(market.st.as_slice())
        .enumerate()
        .map(|(i, (x, s))| {
            let k = i % d;
            (1.0 - lambda[k]) * x + lambda[k] * market.x0[k] * s / market.s0[k]
        })
        .collect();
    ScenarioSet::from_row_major(market.n(), d, data)
}

pub fn is_member_intrinsic(
    lambda: &[f64],
    market: &MarketModel,
    agg: &AggregationSpec,
    criterion: &AcceptanceCriterion,
) -> Result<bool> {
    SystemRisk::new(market, agg, *criterion)?.is_member_intrinsic(lambda)
}

pub fn is_member_monetary(
    k: &[f64],
    market: &MarketModel,
    agg: &AggregationSpec,
    criterion: &AcceptanceCriterion,
) -> Result<bool> {
    SystemRisk::new(market, agg, *criterion)?.is_member_monetary(k)
}
