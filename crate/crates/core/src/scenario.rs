//! Seeded scenario generation: beta and log-normal marginals tied together by
//! a Gaussian copula.
//!
//! Normal draws come from ChaCha20 streams, one stream per block of
//! [`BLOCK_ROWS`] scenarios, so the generated matrix does not depend on how
//! many threads produced it.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Rows generated from one ChaCha stream.
pub const BLOCK_ROWS: usize = 1024;

const BETA_INV_TOL: f64 = 1e-12;
const BETA_INV_MAX_ITER: usize = 200;

/// Marginal law of one terminal value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalSpec {
    Beta { a: f64, b: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

impl MarginalSpec {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("beta shape parameters must be positive, got ({a}, {b})")));
        }
        Ok(MarginalSpec::Beta { a, b })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("lognormal needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        Ok(MarginalSpec::Lognormal { mu, sigma })
    }

    /// Log-normal with the given mean and variance.
    pub fn lognormal_from_moments(mean: f64, variance: f64) -> Result<Self> {
        let (mu, sigma) = lognormal_params_from_moments(mean, variance)?;
        Self::lognormal(mu, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MarginalSpec::Beta { a, b } => Self::beta(a, b).map(|_| ()),
            MarginalSpec::Lognormal { mu, sigma } => Self::lognormal(mu, sigma).map(|_| ()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarginalSpec::Beta { a, b } => a / (a + b),
            MarginalSpec::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            MarginalSpec::Beta { a, b } => a * b / ((a + b) * (a + b) * (a + b + 1.0)),
            MarginalSpec::Lognormal { mu, sigma } => {
                let s2 = sigma * sigma;
                s2.exp_m1() * (2.0 * mu + s2).exp()
            }
        }
    }
}

/// Mean and variance of Beta(a, b).
pub fn beta_moments(a: f64, b: f64) -> Result<(f64, f64)> {
    let m = MarginalSpec::beta(a, b)?;
    Ok((m.mean(), m.variance()))
}

/// `(mu, sigma)` of the log-normal law with the given mean and variance.
pub fn lognormal_params_from_moments(mean: f64, variance: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0 && variance > 0.0 && mean.is_finite() && variance.is_finite()) {
        return Err(Error::Domain(format!(
            "lognormal moments must be positive, got mean {mean}, variance {variance}"
        )));
    }
    let s2 = (variance / (mean * mean)).ln_1p();
    Ok((mean.ln() - 0.5 * s2, s2.sqrt()))
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function.
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// Quantile function `F^{-1}(u)` of a marginal.
pub fn inverse_cdf(marginal: &MarginalSpec, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {u}")));
    }
    match *marginal {
        MarginalSpec::Lognormal { mu, sigma } => Ok((mu + sigma * normal_quantile(u)).exp()),
        MarginalSpec::Beta { a, b } => beta_quantile(a, b, u),
    }
}

/// Solves `I_x(a, b) = u` with a safeguarded Newton iteration inside a
/// shrinking bracket.
fn beta_quantile(a: f64, b: f64, u: f64) -> Result<f64> {
    let ln_norm = ln_beta(a, b);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = a / (a + b);
    for _ in 0..BETA_INV_MAX_ITER {
        let f = beta_reg(a, b, x) - u;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_norm).exp();
        let newton = x - f / density;
        let next = if density.is_finite() && density > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() < BETA_INV_TOL || hi - lo < BETA_INV_TOL {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numerical(format!(
        "beta({a}, {b}) quantile at {u} did not converge in {BETA_INV_MAX_ITER} iterations"
    )))
}

/// Correlation matrix of the stacked normal scores `(X^1..X^d, S^1..S^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        CorrelationMatrix { dim, entries }
    }

    /// Builds from a row-major square matrix.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Matrix(format!("expected {} entries, got {}", dim * dim, entries.len())));
        }
        let m = CorrelationMatrix { dim, entries };
        for i in 0..dim {
            if (m.get(i, i) - 1.0).abs() > 1e-12 {
                return Err(Error::Matrix(format!("diagonal entry ({i},{i}) is {} not 1", m.get(i, i))));
            }
            for j in 0..dim {
                let v = m.get(i, j);
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::Matrix(format!("entry ({i},{j}) = {v} outside [-1, 1]")));
                }
                if (v - m.get(j, i)).abs() > 1e-12 {
                    return Err(Error::Matrix(format!("not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Sets the symmetric pair `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, rho: f64) -> Result<()> {
        if i >= self.dim || j >= self.dim {
            return Err(Error::Matrix(format!("index ({i},{j}) out of range for dimension {}", self.dim)));
        }
        if i == j {
            return Err(Error::Matrix("diagonal entries are fixed at 1".into()));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Matrix(format!("correlation {rho} outside [-1, 1]")));
        }
        self.entries[i * self.dim + j] = rho;
        self.entries[j * self.dim + i] = rho;
        Ok(())
    }

    /// Lower-triangular `B` with `B Bᵀ = C`.
    ///
    /// Zero pivots are accepted so that singular but positive semidefinite
    /// matrices (for instance `ρ = 1`) factor; any negative pivot is an error.
    pub fn factor(&self) -> Result<Vec<f64>> {
        const TOL: f64 = 1e-10;
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let diag = self.get(j, j) - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
            if diag < -TOL {
                return Err(Error::Matrix(format!("correlation matrix is not positive semidefinite (pivot {j} = {diag:e})")));
            }
            let pivot = if diag > TOL { diag.sqrt() } else { 0.0 };
            l[j * n + j] = pivot;
            for i in j + 1..n {
                let v = self.get(i, j) - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
                if pivot == 0.0 {
                    if v.abs() > 1e-8 {
                        return Err(Error::Matrix(format!(
                            "correlation matrix is not positive semidefinite (column {j})"
                        )));
                    }
                } else {
                    l[i * n + j] = v / pivot;
                }
            }
        }
        Ok(l)
    }
}

/// `N × d` matrix of nonnegative terminal values, one scenario per row,
/// each with probability `1/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl ScenarioSet {
    /// Row-major construction; rejects negative or non-finite entries.
    pub fn from_row_major(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Dimension("scenario set needs at least one row and one column".into()));
        }
        if data.len() != n * d {
            return Err(Error::Dimension(format!("expected {} values, got {}", n * d, data.len())));
        }
        if let Some(pos) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!(
                "scenario {} asset {} is {} (must be finite and nonnegative)",
                pos / d,
                pos % d,
                data[pos]
            )));
        }
        Ok(ScenarioSet { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged scenario rows".into()));
        }
        Self::from_row_major(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Returns a copy with the columns reordered: column `k` of the result is
    /// column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.d)?;
        let data = self.rows().flat_map(|r| perm.iter().map(move |&p| r[p])).collect();
        Ok(ScenarioSet { n: self.n, d: self.d, data })
    }

    /// Writes `scenario,asset_1..asset_d` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["scenario".to_string()];
        header.extend((1..=self.d).map(|k| format!("asset_{k}")));
        w.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| format_sig17(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`ScenarioSet::write_csv`]. A leading
    /// `scenario` column is optional.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let skip = r.headers()?.get(0).is_some_and(|h| h.trim() == "scenario");
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .skip(usize::from(skip))
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

pub(crate) fn check_permutation(perm: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::Dimension(format!("{perm:?} is not a permutation of 0..{d}")));
    }
    Ok(())
}

/// Scientific notation with 17 significant digits.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Positions `X = (x0, X_T)` and eligible assets `S = (s0, S_T)` of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub x0: Vec<f64>,
    pub xt: ScenarioSet,
    pub s0: Vec<f64>,
    pub st: ScenarioSet,
}

impl MarketModel {
    pub fn new(x0: Vec<f64>, xt: ScenarioSet, s0: Vec<f64>, st: ScenarioSet) -> Result<Self> {
        let d = xt.d();
        if x0.len() != d || s0.len() != d || st.d() != d {
            return Err(Error::Dimension(format!(
                "inconsistent dimensions: x0 {}, X_T {}, s0 {}, S_T {}",
                x0.len(),
                d,
                s0.len(),
                st.d()
            )));
        }
        if xt.n() != st.n() {
            return Err(Error::Dimension(format!("X_T has {} scenarios, S_T has {}", xt.n(), st.n())));
        }
        if x0.iter().chain(&s0).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("initial prices must be strictly positive".into()));
        }
        Ok(MarketModel { x0, xt, s0, st })
    }

    pub fn d(&self) -> usize {
        self.x0.len()
    }

    pub fn n(&self) -> usize {
        self.xt.n()
    }

    /// The same system with institutions relabelled by `perm`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.d())?;
        Ok(MarketModel {
            x0: perm.iter().map(|&p| self.x0[p]).collect(),
            xt: self.xt.permute_columns(perm)?,
            s0: perm.iter().map(|&p| self.s0[p]).collect(),
            st: self.st.permute_columns(perm)?,
        })
    }
}

/// Everything needed to draw a [`MarketModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSpec {
    pub positions: Vec<MarginalSpec>,
    pub eligible: Vec<MarginalSpec>,
    /// Over the stacked scores `(X^1..X^d, S^1..S^d)`.
    pub correlation: CorrelationMatrix,
    /// `E[X_T] = (1 + position_return) x0`.
    pub position_return: f64,
    /// `E[S_T] = (1 + eligible_return) s0`.
    pub eligible_return: f64,
    pub n_scenarios: usize,
    pub seed: u64,
}

impl MarketSpec {
    /// `d` institutions with Beta(a, b) wealth and log-normal eligible assets
    /// matching the wealth mean with `variance_ratio` times its variance;
    /// all scores uncorrelated, returns 15% and 10%.
    pub fn symmetric(d: usize, a: f64, b: f64, variance_ratio: f64, n_scenarios: usize, seed: u64) -> Result<Self> {
        let position = MarginalSpec::beta(a, b)?;
        let eligible = MarginalSpec::lognormal_from_moments(position.mean(), variance_ratio * position.variance())?;
        Ok(MarketSpec {
            positions: vec![position; d],
            eligible: vec![eligible; d],
            correlation: CorrelationMatrix::identity(2 * d),
            position_return: 0.15,
            eligible_return: 0.10,
            n_scenarios,
            seed,
        })
    }

    pub fn d(&self) -> usize {
        self.positions.len()
    }

    pub fn initial_prices(&self) -> (Vec<f64>, Vec<f64>) {
        let x0 = self.positions.iter().map(|m| m.mean() / (1.0 + self.position_return)).collect();
        let s0 = self.eligible.iter().map(|m| m.mean() / (1.0 + self.eligible_return)).collect();
        (x0, s0)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if d == 0 || self.eligible.len() != d {
            return Err(Error::Dimension(format!(
                "{} positions but {} eligible assets",
                d,
                self.eligible.len()
            )));
        }
        if self.correlation.dim() != 2 * d {
            return Err(Error::Dimension(format!(
                "correlation matrix must be {0}x{0}, got {1}",
                2 * d,
                self.correlation.dim()
            )));
        }
        if self.n_scenarios == 0 {
            return Err(Error::Domain("need at least one scenario".into()));
        }
        if !(self.position_return > -1.0 && self.eligible_return > -1.0) {
            return Err(Error::Domain("expected returns must exceed -100%".into()));
        }
        for m in self.positions.iter().chain(&self.eligible) {
            m.validate()?;
        }
        Ok(())
    }
}

/// Correlated standard normal scores, `n × dim` row-major.
pub fn normal_scores(corr: &CorrelationMatrix, n: usize, seed: u64) -> Result<Vec<f64>> {
    let dim = corr.dim();
    let factor = corr.factor()?;
    let mut out = vec![0.0; n * dim];
    out.par_chunks_mut(BLOCK_ROWS * dim.max(1)).enumerate().for_each(|(block, chunk)| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(block as u64);
        let mut iid = vec![0.0; dim];
        for row in chunk.chunks_exact_mut(dim) {
            for v in iid.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = (0..=i).map(|k| factor[i * dim + k] * iid[k]).sum();
            }
        }
    });
    Ok(out)
}

/// Draws the market described by `spec`. Equal specs give identical output.
pub fn sample_market(spec: &MarketSpec) -> Result<MarketModel> {
    spec.validate()?;
    let d = spec.d();
    let n = spec.n_scenarios;
    let scores = normal_scores(&spec.correlation, n, spec.seed)?;
    let marginals: Vec<MarginalSpec> = spec.positions.iter().chain(&spec.eligible).copied().collect();

    let mut values = vec![0.0; n * 2 * d];
    values
        .par_chunks_mut(2 * d)
        .zip(scores.par_chunks(2 * d))
        .try_for_each(|(out, z)| -> Result<()> {
            for ((slot, m), &score) in out.iter_mut().zip(&marginals).zip(z) {
                *slot = match *m {
                    // exp(mu + sigma * Phi^{-1}(Phi(z))) without the round trip
                    MarginalSpec::Lognormal { mu, sigma } => (mu + sigma * score).exp(),
                    MarginalSpec::Beta { .. } => {
                        let u = normal_cdf(score).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                        inverse_cdf(m, u)?
                    }
                };
            }
            Ok(())
        })?;

    let mut xt = Vec::with_capacity(n * d);
    let mut st = Vec::with_capacity(n * d);
    for row in values.chunks_exact(2 * d) {
        xt.extend_from_slice(&row[..d]);
        st.extend_from_slice(&row[d..]);
    }
    let (x0, s0) = spec.initial_prices();
    MarketModel::new(
        x0,
        ScenarioSet::from_row_major(n, d, xt)?,
        s0,
        ScenarioSet::from_row_major(n, d, st)?,
    )
}
