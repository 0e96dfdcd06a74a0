use serde::{Deserialize, Serialize};

use super::config::CostSpec;
use crate::clearing::aggregate_rows;
use crate::error::{Error, Result};
use crate::setvalued::SystemRisk;

/// Bisection result along the diagonal `t·1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalBracket {
    /// Smallest member found: `value·1` is a member.
    pub value: f64,
    /// `inner·1` is not a member; equal to `value` when no bisection ran.
    pub inner: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalRequirements {
    /// `None` when no point of `[0,1]·1` is a member.
    pub intrinsic: Option<DiagonalBracket>,
    /// `None` when no capital level up to the search limit is acceptable.
    pub monetary: Option<DiagonalBracket>,
}

/// Largest capital level tried on the diagonal.
const CAPITAL_LIMIT: f64 = 1e6;

fn bisect<F: Fn(f64) -> Result<bool>>(mut lo: f64, mut hi: f64, tol: f64, member: F) -> Result<DiagonalBracket> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if member(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(DiagonalBracket { value: hi, inner: lo })
}

/// Smallest `λ` with `λ·1 ∈ R^int` and smallest `k` with `k·1 ∈ R`, each
/// bracketed to width `tol`.
///
/// The intrinsic search bisects on `[0, 1]`, which is exact when `1` is a
/// member because the segment from any member to `1` stays inside the set.
/// The monetary search uses that its values are upper sets and expands the
/// bracket geometrically, into negative capital when `0` is already acceptable.
pub fn diagonal_requirements(sys: &SystemRisk<'_>, tol: f64) -> Result<DiagonalRequirements> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let d = sys.d();
    let lam = |t: f64| sys.is_member_intrinsic(&vec![t; d]);
    let intrinsic = if lam(0.0)? {
        Some(DiagonalBracket { value: 0.0, inner: 0.0 })
    } else if lam(1.0)? {
        Some(bisect(0.0, 1.0, tol, lam)?)
    } else {
        None
    };

    let cap = |t: f64| sys.is_member_monetary(&vec![t; d]);
    let monetary = if cap(0.0)? {
        let mut step = 1.0;
        loop {
            if !cap(-step)? {
                let hi = if step == 1.0 { 0.0 } else { -step / 2.0 };
                break Some(bisect(-step, hi, tol, cap)?);
            }
            if step >= CAPITAL_LIMIT {
                return Err(Error::Box(format!("every capital level down to {} is acceptable", -step)));
            }
            step *= 2.0;
        }
    } else {
        let mut step = 1.0;
        loop {
            if cap(step)? {
                let lo = if step == 1.0 { 0.0 } else { step / 2.0 };
                break Some(bisect(lo, step, tol, cap)?);
            }
            if step >= CAPITAL_LIMIT {
                break None;
            }
            step *= 2.0;
        }
    };
    Ok(DiagonalRequirements { intrinsic, monetary })
}

/// Distribution summary of one aggregate outcome vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSummary {
    pub system: String,
    pub support_min: f64,
    pub support_max: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub es: f64,
    pub alpha: f64,
    /// Left edge of the first bin, a multiple of `bin_width`.
    pub bin_start: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl HistogramSummary {
    pub fn from_values(system: &str, values: &[f64], alpha: f64, bin_width: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("no values to summarize".into()));
        }
        if !(bin_width > 0.0) {
            return Err(Error::Domain(format!("bin width must be positive, got {bin_width}")));
        }
        let n = values.len() as f64;
        let support_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let support_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / n;
        let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        let first = (support_min / bin_width).floor() as i64;
        let last = (support_max / bin_width).floor() as i64;
        let mut counts = vec![0usize; (last - first + 1) as usize];
        for v in values {
            let b = ((v / bin_width).floor() as i64 - first).clamp(0, last - first) as usize;
            counts[b] += 1;
        }
        Ok(HistogramSummary {
            system: system.to_string(),
            support_min,
            support_max,
            // the mean of rounded values can drift out of the support
            mean: mean.clamp(support_min, support_max),
            variance: m2,
            skewness,
            es: crate::risk::empirical_es(values, alpha)?,
            alpha,
            bin_start: first as f64 * bin_width,
            bin_width,
            counts,
        })
    }
}

/// Aggregate outcomes of the four systems compared in the histogram study.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramReport {
    /// `(name, Λ values)` for original, intrinsic, monetary and eligible.
    pub aggregates: Vec<(String, Vec<f64>)>,
    pub summaries: Vec<HistogramSummary>,
}

/// `Λ(X_T)`, `Λ(X^{λ,S}_T)`, `Λ(X_T + k⊙S_T⊘s0)` and `Λ(x0⊙S_T⊘s0)` over the
/// same scenarios.
pub fn histogram_report(sys: &SystemRisk<'_>, lambda: &[f64], k: &[f64], bin_width: f64) -> Result<HistogramReport> {
    let d = sys.d();
    let alpha = sys.criterion().alpha;
    let aggregates = vec![
        ("original".to_string(), sys.intrinsic_aggregate(&vec![0.0; d])?),
        ("intrinsic".to_string(), sys.intrinsic_aggregate(lambda)?),
        ("monetary".to_string(), sys.monetary_aggregate(k)?),
        ("eligible".to_string(), sys.intrinsic_aggregate(&vec![1.0; d])?),
    ];
    let summaries = aggregates
        .iter()
        .map(|(name, v)| HistogramSummary::from_values(name, v, alpha, bin_width))
        .collect::<Result<_>>()?;
    Ok(HistogramReport { aggregates, summaries })
}

/// A management action whose costs are charged before clearing.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Intrinsic(Vec<f64>),
    Monetary(Vec<f64>),
}

/// Aggregate outcome after charging costs against terminal wealth.
///
/// Intrinsic: `2 · bps · λ_k x0_k` for the sell and buy legs. Monetary:
/// `(bps + cost_of_debt) · k_k` for buying the eligible asset with borrowed
/// capital; capital withdrawals (`k_k < 0`) are not charged.
pub fn apply_costs(sys: &SystemRisk<'_>, action: &Action, costs: &CostSpec) -> Result<Vec<f64>> {
    costs.validate()?;
    let d = sys.d();
    let rate = costs.transaction_cost_bps / 10_000.0;
    let (mut rows, charge): (Vec<f64>, Vec<f64>) = match action {
        Action::Intrinsic(l) => {
            let x0 = &sys.market().x0;
            (sys.intrinsic_rows(l)?, l.iter().zip(x0).map(|(l, x)| 2.0 * rate * l * x).collect())
        }
        Action::Monetary(k) => (
            sys.monetary_rows(k)?,
            k.iter().map(|k| (rate + costs.cost_of_debt) * k.max(0.0)).collect(),
        ),
    };
    if charge.iter().any(|c| *c != 0.0) {
        rows.iter_mut().enumerate().for_each(|(i, v)| *v -= charge[i % d]);
    }
    aggregate_rows(&rows, sys.aggregation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::{AggregationSpec, LiabilityStructure};
    use crate::risk::AcceptanceCriterion;
    use crate::scenario::{sample_market, MarketModel, MarketSpec};

    fn setup(n: usize) -> (MarketModel, AggregationSpec) {
        let m = sample_market(&MarketSpec::symmetric(2, 2.0, 5.0, 0.2, n, 11).unwrap()).unwrap();
        (m, AggregationSpec::new(LiabilityStructure::complete(2, 0.6, 0.2).unwrap(), 0.9).unwrap())
    }

    #[test]
    fn summary_moments() {
        let s = HistogramSummary::from_values("x", &[0.0, 0.0, 0.0, 1.0], 0.25, 0.5).unwrap();
        assert_eq!((s.support_min, s.support_max, s.mean), (0.0, 1.0, 0.25));
        assert!((s.variance - 0.1875).abs() < 1e-15);
        // third central moment (3·(−0.25)³ + 0.75³)/4 = 0.09375
        assert!((s.skewness - 0.09375 / 0.1875f64.powf(1.5)).abs() < 1e-12);
        assert_eq!(s.counts, vec![3, 0, 1]);
        assert_eq!(s.bin_start, 0.0);
        assert_eq!(s.es, -0.0);
    }

    #[test]
    fn diagonal_certificates() {
        let (m, agg) = setup(4000);
        let sys = SystemRisk::new(&m, &agg, AcceptanceCriterion::es(0.05).unwrap()).unwrap();
        let tol = 1e-6;
        let req = diagonal_requirements(&sys, tol).unwrap();
        let l = req.intrinsic.unwrap();
        assert!(sys.is_member_intrinsic(&[l.value; 2]).unwrap());
        assert!(!sys.is_member_intrinsic(&[l.inner; 2]).unwrap());
        assert!(l.value - l.inner <= tol);
        let k = req.monetary.unwrap();
        assert!(sys.is_member_monetary(&[k.value; 2]).unwrap());
        assert!(!sys.is_member_monetary(&[k.inner; 2]).unwrap());
        assert!(k.value - k.inner <= tol);
    }

    #[test]
    fn acceptable_system_needs_no_restructuring() {
        let (m, _) = setup(2000);
        // tiny liabilities are always repaid in full
        let agg = AggregationSpec::new(LiabilityStructure::complete(2, 0.0, 0.001).unwrap(), 0.5).unwrap();
        let sys = SystemRisk::new(&m, &agg, AcceptanceCriterion::es(0.05).unwrap()).unwrap();
        let req = diagonal_requirements(&sys, 1e-6).unwrap();
        assert_eq!(req.intrinsic.unwrap().value, 0.0);
        assert!(req.monetary.unwrap().value <= 0.0);
    }

    #[test]
    fn zero_costs_change_nothing_and_costs_do_not_help() {
        let (m, agg) = setup(3000);
        let sys = SystemRisk::new(&m, &agg, AcceptanceCriterion::es(0.05).unwrap()).unwrap();
        let l = vec![0.4, 0.7];
        let plain = sys.intrinsic_aggregate(&l).unwrap();
        assert_eq!(apply_costs(&sys, &Action::Intrinsic(l.clone()), &CostSpec::zero()).unwrap(), plain);
        let costly = apply_costs(&sys, &Action::Intrinsic(l), &CostSpec::default()).unwrap();
        assert!(costly.iter().zip(&plain).all(|(c, p)| c <= p));
        assert!(costly.iter().zip(&plain).any(|(c, p)| c < p));
        let k = vec![0.1, 0.2];
        let plain = sys.monetary_aggregate(&k).unwrap();
        let costly = apply_costs(&sys, &Action::Monetary(k), &CostSpec::default()).unwrap();
        assert!(costly.iter().zip(&plain).all(|(c, p)| c <= p));
    }

    #[test]
    fn report_covers_four_systems() {
        let (m, agg) = setup(2000);
        let sys = SystemRisk::new(&m, &agg, AcceptanceCriterion::es(0.05).unwrap()).unwrap();
        let r = histogram_report(&sys, &[0.5, 0.5], &[0.1, 0.1], 0.01).unwrap();
        let names: Vec<&str> = r.summaries.iter().map(|s| s.system.as_str()).collect();
        assert_eq!(names, ["original", "intrinsic", "monetary", "eligible"]);
        for (s, (_, v)) in r.summaries.iter().zip(&r.aggregates) {
            assert!(s.support_min <= s.mean && s.mean <= s.support_max && s.variance >= 0.0);
            assert_eq!(s.counts.iter().sum::<usize>(), v.len());
            assert_eq!(s.es, crate::risk::empirical_es(v, 0.05).unwrap());
        }
    }
}
