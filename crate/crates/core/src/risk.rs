//! Empirical scalar risk functionals on equally weighted samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    #[serde(alias = "VaR")]
    Var,
    #[serde(alias = "ES")]
    Es,
}

/// `{Y : VaR_α(Y) ≤ 0}` or `{Y : ES_α(Y) ≤ 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceCriterion {
    pub kind: RiskKind,
    pub alpha: f64,
}

impl AcceptanceCriterion {
    pub fn new(kind: RiskKind, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(AcceptanceCriterion { kind, alpha })
    }

    pub fn es(alpha: f64) -> Result<Self> {
        Self::new(RiskKind::Es, alpha)
    }

    pub fn var(alpha: f64) -> Result<Self> {
        Self::new(RiskKind::Var, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)
    }

    /// The risk functional value; acceptable iff it is `≤ 0`.
    pub fn risk(&self, samples: &[f64]) -> Result<f64> {
        match self.kind {
            RiskKind::Var => empirical_var(samples, self.alpha),
            RiskKind::Es => empirical_es(samples, self.alpha),
        }
    }

    pub fn is_convex(&self) -> bool {
        self.kind == RiskKind::Es
    }
}

impl std::fmt::Display for AcceptanceCriterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.kind {
            RiskKind::Var => "VaR",
            RiskKind::Es => "ES",
        };
        write!(f, "{name}@{}", self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    Ok(())
}

/// `⌊αN⌋` with representation noise removed.
fn tail_count(alpha: f64, n: usize) -> (usize, f64) {
    let t = alpha * n as f64;
    let r = t.round();
    let t = if (t - r).abs() < 1e-9 * t.max(1.0) { r } else { t };
    (t.floor() as usize, t)
}

/// `−x_(⌊αN⌋+1)`: the smallest `m` with `#{i : x_i + m < 0} / N ≤ α`.
pub fn empirical_var(samples: &[f64], alpha: f64) -> Result<f64> {
    check_samples(samples)?;
    check_alpha(alpha)?;
    let (k, _) = tail_count(alpha, samples.len());
    let mut v = samples.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k, f64::total_cmp);
    Ok(-*kth)
}

/// Tail average `(1/(αN)) [Σ_{i≤⌊αN⌋} (−x_(i)) + (αN − ⌊αN⌋)(−x_(⌊αN⌋+1))]`.
pub fn empirical_es(samples: &[f64], alpha: f64) -> Result<f64> {
    check_samples(samples)?;
    check_alpha(alpha)?;
    let (k, t) = tail_count(alpha, samples.len());
    let mut v = samples.to_vec();
    let (worst, kth, _) = v.select_nth_unstable_by(k, f64::total_cmp);
    let tail: f64 = worst.iter().map(|x| -x).sum();
    Ok((tail + (t - k as f64) * -*kth) / t)
}

pub fn is_acceptable(samples: &[f64], criterion: &AcceptanceCriterion) -> Result<bool> {
    Ok(criterion.risk(samples)? <= 0.0)
}

/// An initial price and an equally weighted sample of terminal values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPosition {
    pub x0: f64,
    pub samples: Vec<f64>,
}

impl ScalarPosition {
    pub fn new(x0: f64, samples: Vec<f64>) -> Result<Self> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::Domain(format!("initial price must be positive, got {x0}")));
        }
        check_samples(&samples)?;
        Ok(ScalarPosition { x0, samples })
    }
}

const BRACKET_LIMIT: f64 = 1e12;

/// `inf{m : X_T + (m/s0) S_T acceptable}`, or `None` when no finite amount
/// of the eligible asset helps (or the infimum is `−∞`).
pub fn scalar_monetary_rho(
    x: &ScalarPosition,
    s: &ScalarPosition,
    criterion: &AcceptanceCriterion,
    tol: f64,
) -> Result<Option<f64>> {
    if x.samples.len() != s.samples.len() {
        return Err(Error::Dimension("position and eligible asset have different sample counts".into()));
    }
    if s.samples.iter().any(|&v| v < 0.0) || s.samples.iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("eligible payoff must be nonnegative and not identically zero".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let mut buf = vec![0.0; x.samples.len()];
    let mut accepts = |m: f64| -> Result<bool> {
        for ((b, xv), sv) in buf.iter_mut().zip(&x.samples).zip(&s.samples) {
            *b = xv + m / s.x0 * sv;
        }
        is_acceptable(&buf, criterion)
    };

    let (mut lo, mut hi);
    if accepts(0.0)? {
        hi = 0.0;
        lo = -1.0;
        while accepts(lo)? {
            hi = lo;
            lo *= 2.0;
            if lo < -BRACKET_LIMIT {
                return Ok(None);
            }
        }
    } else {
        lo = 0.0;
        hi = 1.0;
        while !accepts(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > BRACKET_LIMIT {
                return Ok(None);
            }
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if accepts(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Options for [`scalar_intrinsic_rho`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntrinsicOptions {
    pub tol: f64,
    /// Scan `[0, 1]` at this resolution and fall back to the leftmost
    /// acceptable point if acceptability is not monotone along the segment.
    pub verify_resolution: Option<f64>,
}

impl Default for IntrinsicOptions {
    fn default() -> Self {
        IntrinsicOptions { tol: 1e-8, verify_resolution: None }
    }
}

/// `inf{λ ∈ [0,1] : (1−λ) X_T + λ (x0/s0) S_T acceptable}`; `None` when even
/// `λ = 1` is unacceptable.
pub fn scalar_intrinsic_rho(
    x: &ScalarPosition,
    s: &ScalarPosition,
    criterion: &AcceptanceCriterion,
    opts: IntrinsicOptions,
) -> Result<Option<f64>> {
    if x.samples.len() != s.samples.len() {
        return Err(Error::Dimension("position and eligible asset have different sample counts".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let ratio = x.x0 / s.x0;
    let mut buf = vec![0.0; x.samples.len()];
    let mut accepts = |lambda: f64| -> Result<bool> {
        for ((b, xv), sv) in buf.iter_mut().zip(&x.samples).zip(&s.samples) {
            *b = (1.0 - lambda) * xv + lambda * ratio * sv;
        }
        is_acceptable(&buf, criterion)
    };
    if accepts(0.0)? {
        return Ok(Some(0.0));
    }
    if !accepts(1.0)? {
        return Ok(None);
    }
    let bisect = |mut lo: f64, mut hi: f64, accepts: &mut dyn FnMut(f64) -> Result<bool>| -> Result<f64> {
        while hi - lo > opts.tol {
            let mid = 0.5 * (lo + hi);
            if accepts(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    };
    let lambda = bisect(0.0, 1.0, &mut accepts)?;

    if let Some(res) = opts.verify_resolution {
        let steps = (1.0 / res).ceil() as usize;
        for i in 1..=steps {
            let grid = (i as f64 * res).min(1.0);
            if grid >= lambda {
                break;
            }
            if accepts(grid)? {
                // non-monotone: refine between the first acceptable grid point
                // and its unacceptable predecessor
                let prev = ((i - 1) as f64 * res).min(1.0);
                return Ok(Some(bisect(prev, grid, &mut accepts)?));
            }
        }
    }
    Ok(Some(lambda))
}

/// A density with respect to the empirical measure: atom probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub q: Vec<f64>,
}

impl DualCertificate {
    /// `q ≥ 0`, `Σ q = 1`, `q ≤ 1/(αN)` up to `tol`.
    pub fn is_es_feasible(&self, alpha: f64, tol: f64) -> bool {
        let cap = 1.0 / (alpha * self.q.len() as f64);
        let sum: f64 = self.q.iter().sum();
        (sum - 1.0).abs() <= tol && self.q.iter().all(|&v| v >= -tol && v <= cap + tol)
    }

    /// `Σ q_i (−x_i)`.
    pub fn value(&self, samples: &[f64]) -> f64 {
        self.q.iter().zip(samples).map(|(q, x)| -q * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualMax {
    pub max_over_trials: f64,
    pub exact_max: f64,
    pub exact_certificate: DualCertificate,
}

/// The vertex certificate: mass `1/(αN)` on the worst outcomes and the
/// remainder on the next one.
pub fn es_vertex_certificate(samples: &[f64], alpha: f64) -> Result<DualCertificate> {
    check_samples(samples)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let n = samples.len();
    let cap = 1.0 / (alpha * n as f64);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    let mut q = vec![0.0; n];
    let mut left = 1.0_f64;
    for &i in &order {
        if left <= 0.0 {
            break;
        }
        let take = cap.min(left);
        q[i] = take;
        left -= take;
    }
    Ok(DualCertificate { q })
}

/// A random point of `{q : 0 ≤ q ≤ 1/(αN), Σq = 1}`.
pub fn random_es_certificate<R: Rng>(n: usize, alpha: f64, rng: &mut R) -> DualCertificate {
    let cap = 1.0 / (alpha * n as f64);
    let mut q: Vec<f64> = (0..n).map(|_| cap * rng.random::<f64>()).collect();
    let sum: f64 = q.iter().sum();
    if sum >= 1.0 {
        q.iter_mut().for_each(|v| *v /= sum);
    } else {
        let room: f64 = q.iter().map(|v| cap - v).sum();
        let theta = (1.0 - sum) / room;
        q.iter_mut().for_each(|v| *v += theta * (cap - *v));
    }
    DualCertificate { q }
}

/// Finite-sample dual of expected shortfall:
/// `ES_α(X) = sup { Σ q_i (−x_i) : 0 ≤ q_i ≤ 1/(αN), Σ q_i = 1 }`.
///
/// Returns the vertex maximum and the best of `trials` random feasible
/// certificates.
pub fn es_dual_max(samples: &[f64], alpha: f64, trials: usize, seed: u64) -> Result<DualMax> {
    check_samples(samples)?;
    if !(alpha > 0.0 && alpha <= 1.0) || alpha * (samples.len() as f64) < 1.0 - 1e-12 {
        return Err(Error::Domain(format!("need 0 < alpha <= 1 and alpha N >= 1, got alpha {alpha}")));
    }
    let cert = es_vertex_certificate(samples, alpha)?;
    let exact_max = cert.value(samples);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let max_over_trials = (0..trials)
        .map(|_| random_es_certificate(samples.len(), alpha, &mut rng).value(samples))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DualMax { max_over_trials, exact_max, exact_certificate: cert })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    /// `inf{m : #{x_i + m < 0}/N ≤ α}` by scanning the candidate thresholds
    /// `m = −x_j`; the infimum is attained at one of them.
    fn var_by_threshold_scan(samples: &[f64], alpha: f64) -> f64 {
        let n = samples.len() as f64;
        samples
            .iter()
            .map(|x| -x)
            .filter(|m| samples.iter().filter(|x| *x + m < 0.0).count() as f64 / n <= alpha)
            .fold(f64::INFINITY, f64::min)
    }

    fn es_by_sort_and_average(samples: &[f64], alpha: f64) -> f64 {
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let t = alpha * v.len() as f64;
        let mut acc = 0.0;
        let mut weight_left = t;
        for x in v {
            let w = weight_left.min(1.0);
            if w <= 0.0 {
                break;
            }
            acc += w * -x;
            weight_left -= w;
        }
        acc / t
    }

    #[test]
    fn var_and_es_examples() {
        let s = [-1.0, 0.0, 1.0, 2.0];
        assert_eq!(empirical_var(&s, 0.25).unwrap(), 0.0);
        assert_eq!(var_by_threshold_scan(&s, 0.25), 0.0);
        assert_relative_eq!(empirical_es(&s, 0.5).unwrap(), 0.5);
        assert_relative_eq!(empirical_es(&[3.0; 7], 0.3).unwrap(), -3.0, epsilon = 1e-15);
        assert!(empirical_var(&[], 0.1).is_err());
        assert!(empirical_es(&[1.0], 0.0).is_err());
        assert!(empirical_es(&[1.0], 1.0).is_err());
    }

    #[test]
    fn acceptance_is_closed() {
        let es = AcceptanceCriterion::es(0.5).unwrap();
        assert!(is_acceptable(&[-1.0, 1.0, 2.0, 3.0], &es).unwrap());
        assert_eq!(es.risk(&[-1.0, 1.0, 2.0, 3.0]).unwrap(), 0.0);
        let var = AcceptanceCriterion::var(0.1).unwrap();
        assert!(is_acceptable(&[0.0, 1.0, 2.0], &var).unwrap());
        assert!(!is_acceptable(&[-10.0, 1.0, 2.0], &AcceptanceCriterion::es(0.01).unwrap()).unwrap());
    }

    #[test]
    fn monetary_with_cash_is_the_risk_value() {
        let x = ScalarPosition::new(1.0, vec![-0.5, 0.1, 0.3, -0.2, 0.7]).unwrap();
        let cash = ScalarPosition::new(2.0, vec![2.0; 5]).unwrap();
        for c in [AcceptanceCriterion::es(0.4).unwrap(), AcceptanceCriterion::var(0.2).unwrap()] {
            let rho = scalar_monetary_rho(&x, &cash, &c, 1e-10).unwrap().unwrap();
            assert!((rho - c.risk(&x.samples).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn monetary_infeasible_when_eligible_vanishes_on_the_tail() {
        let x = ScalarPosition::new(1.0, vec![-1.0, 1.0, 1.0, 1.0]).unwrap();
        let s = ScalarPosition::new(1.0, vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        let c = AcceptanceCriterion::es(0.25).unwrap();
        assert_eq!(scalar_monetary_rho(&x, &s, &c, 1e-8).unwrap(), None);
    }

    #[test]
    fn intrinsic_edge_cases() {
        let c = AcceptanceCriterion::es(0.25).unwrap();
        let good = ScalarPosition::new(1.0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = ScalarPosition::new(1.0, vec![1.0; 4]).unwrap();
        assert_eq!(scalar_intrinsic_rho(&good, &s, &c, IntrinsicOptions::default()).unwrap(), Some(0.0));

        let bad = ScalarPosition::new(1.0, vec![-1.0, 2.0, 3.0, 4.0]).unwrap();
        let opts = IntrinsicOptions { tol: 1e-9, verify_resolution: Some(1e-3) };
        let lam = scalar_intrinsic_rho(&bad, &s, &c, opts).unwrap().unwrap();
        // (1−λ)(−1) + λ = 0 at λ = 1/2
        assert!((lam - 0.5).abs() < 1e-8);

        let worthless = ScalarPosition::new(1.0, vec![-1.0; 4]).unwrap();
        assert_eq!(scalar_intrinsic_rho(&bad, &worthless, &c, opts).unwrap(), None);
    }

    #[test]
    fn es_dual_examples() {
        let s = [-1.0, 0.0, 1.0, 2.0];
        let d = es_dual_max(&s, 0.5, 200, 1).unwrap();
        assert_relative_eq!(d.exact_max, 0.5);
        assert!(d.max_over_trials <= d.exact_max + 1e-12);
        let all = es_dual_max(&s, 1.0, 10, 1).unwrap();
        assert_relative_eq!(all.exact_max, -0.5);
        assert!(d.exact_certificate.is_es_feasible(0.5, 1e-12));
        assert!(es_dual_max(&s, 0.1, 1, 1).is_err());
    }

    proptest! {
        #[test]
        fn var_matches_definition_scan(samples in prop::collection::vec(-5.0f64..5.0, 1..60), alpha in 0.01f64..0.99) {
            prop_assert_eq!(empirical_var(&samples, alpha).unwrap(), var_by_threshold_scan(&samples, alpha));
        }

        #[test]
        fn es_dominates_var_and_matches_sort_oracle(samples in prop::collection::vec(-5.0f64..5.0, 1..60), alpha in 0.01f64..0.99) {
            let es = empirical_es(&samples, alpha).unwrap();
            prop_assert!(es >= empirical_var(&samples, alpha).unwrap() - 1e-12);
            prop_assert!((es - es_by_sort_and_average(&samples, alpha)).abs() < 1e-12);
        }

        #[test]
        fn var_is_cash_additive(samples in prop::collection::vec(-5.0f64..5.0, 1..40), alpha in 0.01f64..0.99, c in -3.0f64..3.0) {
            let shifted: Vec<f64> = samples.iter().map(|x| x + c).collect();
            let a = empirical_var(&samples, alpha).unwrap();
            let b = empirical_var(&shifted, alpha).unwrap();
            prop_assert!((a - c - b).abs() < 1e-12);
        }

        #[test]
        fn random_certificates_are_feasible_and_dominated(samples in prop::collection::vec(-5.0f64..5.0, 10..50), alpha in 0.1f64..1.0, seed in any::<u64>()) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let q = random_es_certificate(samples.len(), alpha, &mut rng);
            prop_assert!(q.is_es_feasible(alpha, 1e-12));
            let exact = es_vertex_certificate(&samples, alpha).unwrap().value(&samples);
            prop_assert!(q.value(&samples) <= exact + 1e-12);
        }

        #[test]
        fn monetary_is_s_additive(k in -2.0f64..2.0, seed in any::<u64>()) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..40).map(|_| rng.random::<f64>() - 0.3).collect();
            let ss: Vec<f64> = (0..40).map(|_| 0.5 + rng.random::<f64>()).collect();
            let s = ScalarPosition::new(1.3, ss.clone()).unwrap();
            let x = ScalarPosition::new(1.0, xs.clone()).unwrap();
            let shifted = ScalarPosition::new(1.0, xs.iter().zip(&ss).map(|(a, b)| a + k / 1.3 * b).collect()).unwrap();
            let c = AcceptanceCriterion::es(0.1).unwrap();
            let tol = 1e-9;
            let r0 = scalar_monetary_rho(&x, &s, &c, tol).unwrap().unwrap();
            let r1 = scalar_monetary_rho(&shifted, &s, &c, tol).unwrap().unwrap();
            prop_assert!((r1 - (r0 - k)).abs() <= 4.0 * tol);
        }
    }
}
