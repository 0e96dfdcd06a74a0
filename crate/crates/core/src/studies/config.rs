use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clearing::{AggregationSpec, ClearingMethod, LiabilityStructure};
use crate::error::{Error, Result};
use crate::risk::{AcceptanceCriterion, RiskKind};
use crate::scenario::{CorrelationMatrix, MarginalSpec, MarketSpec};

/// Marginal of one terminal value as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalConfig {
    Beta { a: f64, b: f64 },
    Lognormal { mu: f64, sigma: f64 },
    LognormalMoments { mean: f64, variance: f64 },
    /// Log-normal eligible asset with the mean of the matching position and
    /// `variance_ratio` times its variance.
    MatchPosition { variance_ratio: f64 },
}

impl MarginalConfig {
    fn resolve(&self, position: Option<&MarginalSpec>) -> Result<MarginalSpec> {
        match *self {
            MarginalConfig::Beta { a, b } => MarginalSpec::beta(a, b),
            MarginalConfig::Lognormal { mu, sigma } => MarginalSpec::lognormal(mu, sigma),
            MarginalConfig::LognormalMoments { mean, variance } => MarginalSpec::lognormal_from_moments(mean, variance),
            MarginalConfig::MatchPosition { variance_ratio } => {
                let p = position.ok_or_else(|| Error::Config("match_position is only valid for eligible assets".into()))?;
                MarginalSpec::lognormal_from_moments(p.mean(), variance_ratio * p.variance())
            }
        }
    }
}

/// One value shared by every institution, or one per institution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerInstitution<T> {
    Each(Vec<T>),
    All(T),
}

impl<T: Clone> PerInstitution<T> {
    pub fn expand(&self, d: usize) -> Result<Vec<T>> {
        match self {
            PerInstitution::All(v) => Ok(vec![v.clone(); d]),
            PerInstitution::Each(v) if v.len() == d => Ok(v.clone()),
            PerInstitution::Each(v) => Err(Error::Config(format!("{} entries given for {d} institutions", v.len()))),
        }
    }
}

/// A correlation between two named scores, `"X1"`..`"Xd"` or `"S1"`..`"Sd"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub between: [String; 2],
    pub rho: f64,
}

/// Index of a named score in the stacked vector `(X^1..X^d, S^1..S^d)`.
pub fn score_index(name: &str, d: usize) -> Result<usize> {
    let bad = || Error::Config(format!("unknown score {name:?}; expected X1..X{d} or S1..S{d}"));
    let (offset, digits) = match name.split_at_checked(1) {
        Some(("X", rest)) => (0, rest),
        Some(("S", rest)) => (d, rest),
        _ => return Err(bad()),
    };
    let i: usize = digits.parse().map_err(|_| bad())?;
    if i == 0 || i > d {
        return Err(bad());
    }
    Ok(offset + i - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub d: usize,
    pub positions: PerInstitution<MarginalConfig>,
    pub eligible: PerInstitution<MarginalConfig>,
    #[serde(default = "default_position_return")]
    pub position_return: f64,
    #[serde(default = "default_eligible_return")]
    pub eligible_return: f64,
    #[serde(default)]
    pub correlations: Vec<CorrelationEntry>,
}

fn default_position_return() -> f64 {
    0.15
}

fn default_eligible_return() -> f64 {
    0.10
}

impl MarketConfig {
    /// Two-by-two case study model: Beta(2,5) wealth, log-normal eligible
    /// assets with the same mean and a fifth of the variance, all independent.
    pub fn base_case(d: usize) -> Self {
        MarketConfig {
            d,
            positions: PerInstitution::All(MarginalConfig::Beta { a: 2.0, b: 5.0 }),
            eligible: PerInstitution::All(MarginalConfig::MatchPosition { variance_ratio: 0.2 }),
            position_return: 0.15,
            eligible_return: 0.10,
            correlations: Vec::new(),
        }
    }

    pub fn correlation(&self) -> Result<CorrelationMatrix> {
        let mut c = CorrelationMatrix::identity(2 * self.d);
        for e in &self.correlations {
            c.set(score_index(&e.between[0], self.d)?, score_index(&e.between[1], self.d)?, e.rho)?;
        }
        Ok(c)
    }

    pub fn to_spec(&self, n_scenarios: usize, seed: u64) -> Result<MarketSpec> {
        if self.d == 0 {
            return Err(Error::Config("market needs at least one institution".into()));
        }
        let positions = self
            .positions
            .expand(self.d)?
            .iter()
            .map(|m| m.resolve(None))
            .collect::<Result<Vec<_>>>()?;
        let eligible = self
            .eligible
            .expand(self.d)?
            .iter()
            .zip(&positions)
            .map(|(m, p)| m.resolve(Some(p)))
            .collect::<Result<Vec<_>>>()?;
        let spec = MarketSpec {
            positions,
            eligible,
            correlation: self.correlation()?,
            position_return: self.position_return,
            eligible_return: self.eligible_return,
            n_scenarios,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LiabilityConfig {
    Complete { interbank: f64, to_society: f64 },
    Matrix { matrix: Vec<Vec<f64>> },
}

impl LiabilityConfig {
    pub fn build(&self, d: usize) -> Result<LiabilityStructure> {
        let net = match self {
            LiabilityConfig::Complete { interbank, to_society } => LiabilityStructure::complete(d, *interbank, *to_society)?,
            LiabilityConfig::Matrix { matrix } => LiabilityStructure::try_from(matrix.clone())?,
        };
        if net.d() != d {
            return Err(Error::Dimension(format!("liabilities describe {} banks, market has {d}", net.d())));
        }
        Ok(net)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    #[serde(rename = "corr_X")]
    CorrX,
    #[serde(rename = "corr_X1S1")]
    CorrX1S1,
    #[serde(rename = "corr_S")]
    CorrS,
    LiabSociety,
    LiabBilateral,
    Volatility,
    Histograms,
    Costs,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::CorrX => "corr_X",
            StudyKind::CorrX1S1 => "corr_X1S1",
            StudyKind::CorrS => "corr_S",
            StudyKind::LiabSociety => "liab_society",
            StudyKind::LiabBilateral => "liab_bilateral",
            StudyKind::Volatility => "volatility",
            StudyKind::Histograms => "histograms",
            StudyKind::Costs => "costs",
        }
    }

    /// Name of the swept parameter in output file names.
    pub fn parameter(&self) -> &'static str {
        match self {
            StudyKind::CorrX | StudyKind::CorrX1S1 | StudyKind::CorrS => "rho",
            StudyKind::LiabSociety => "L_i0",
            StudyKind::LiabBilateral => "L_ij",
            StudyKind::Volatility => "a_1",
            StudyKind::Histograms | StudyKind::Costs => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown study kind {s:?}")))
    }
}

/// Settings of the minimal point search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalConfig {
    pub plane_grid_step: f64,
    pub delta: f64,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub prune: bool,
    #[serde(default)]
    pub refine: bool,
}

fn yes() -> bool {
    true
}

/// Transaction costs and cost of debt of the management actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    #[serde(default = "default_bps")]
    pub transaction_cost_bps: f64,
    #[serde(default = "default_cost_of_debt")]
    pub cost_of_debt: f64,
}

fn default_bps() -> f64 {
    50.0
}

fn default_cost_of_debt() -> f64 {
    0.0264
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec { transaction_cost_bps: default_bps(), cost_of_debt: default_cost_of_debt() }
    }
}

impl CostSpec {
    pub fn zero() -> Self {
        CostSpec { transaction_cost_bps: 0.0, cost_of_debt: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transaction_cost_bps >= 0.0 && self.cost_of_debt >= 0.0) {
            return Err(Error::Domain("costs must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Everything one run needs: market, network, acceptance criterion and the
/// algorithm settings. Shared by every CLI subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub kind: Option<StudyKind>,
    #[serde(default)]
    pub sweep: Vec<f64>,
    pub market: MarketConfig,
    pub liabilities: LiabilityConfig,
    /// Fraction of society's claims that counts as a loss, `β ∈ (0,1)`.
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_risk")]
    pub risk: RiskKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Monetary search box `[lo, hi]^d`; defaults to `±2 max x0`.
    #[serde(default)]
    pub monetary_box: Option<(f64, f64)>,
    #[serde(default)]
    pub clearing: ClearingMethod,
    #[serde(default)]
    pub minimal: Option<MinimalConfig>,
    #[serde(default)]
    pub costs: Option<CostSpec>,
    /// Slack on the risk value when re-testing points across a sweep.
    #[serde(default = "default_slack")]
    pub nestedness_slack: f64,
    /// Bin width of the histogram summaries.
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    /// Width of the diagonal bisections of the histogram study.
    #[serde(default = "default_diag_tol")]
    pub diagonal_tol: f64,
    #[serde(default)]
    pub out: Option<String>,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_risk() -> RiskKind {
    RiskKind::Es
}

fn default_grid_step() -> f64 {
    0.05
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_slack() -> f64 {
    1e-3
}

fn default_bin_width() -> f64 {
    0.01
}

fn default_diag_tol() -> f64 {
    1e-6
}

impl StudyConfig {
    /// Base case with `d` institutions, liabilities `L_ij`, `L_i0` and `β`.
    pub fn base_case(d: usize, interbank: f64, to_society: f64, beta: f64, n: usize, seed: u64) -> Self {
        StudyConfig {
            kind: None,
            sweep: Vec::new(),
            market: MarketConfig::base_case(d),
            liabilities: LiabilityConfig::Complete { interbank, to_society },
            beta,
            alpha: default_alpha(),
            risk: default_risk(),
            n,
            seed,
            grid_step: default_grid_step(),
            epsilon: default_epsilon(),
            monetary_box: None,
            clearing: ClearingMethod::FictitiousDefault,
            minimal: None,
            costs: None,
            nestedness_slack: default_slack(),
            bin_width: default_bin_width(),
            diagonal_tol: default_diag_tol(),
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return Err(Error::Config(format!("grid_step must lie in (0, 1], got {}", self.grid_step)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if let Some((lo, hi)) = self.monetary_box {
            if !(lo < hi) {
                return Err(Error::Config(format!("monetary box [{lo}, {hi}] is empty")));
            }
        }
        if !(self.bin_width > 0.0 && self.diagonal_tol > 0.0 && self.nestedness_slack >= 0.0) {
            return Err(Error::Config("bin_width and diagonal_tol must be positive, nestedness_slack nonnegative".into()));
        }
        if let Some(c) = &self.costs {
            c.validate()?;
        }
        self.criterion()?;
        self.market.to_spec(self.n, self.seed)?;
        self.aggregation()?;
        if let Some(kind) = self.kind {
            for &v in &self.sweep {
                check_sweep_value(kind, v)?;
            }
        }
        Ok(())
    }

    pub fn criterion(&self) -> Result<AcceptanceCriterion> {
        AcceptanceCriterion::new(self.risk, self.alpha)
    }

    pub fn market_spec(&self) -> Result<MarketSpec> {
        self.market.to_spec(self.n, self.seed)
    }

    pub fn aggregation(&self) -> Result<AggregationSpec> {
        Ok(AggregationSpec::new(self.liabilities.build(self.market.d)?, self.beta)?.with_method(self.clearing))
    }

    /// The config with the study parameter set to `value`.
    pub fn with_parameter(&self, kind: StudyKind, value: f64) -> Result<StudyConfig> {
        check_sweep_value(kind, value)?;
        let mut cfg = self.clone();
        let d = cfg.market.d;
        let set_pairs = |cfg: &mut StudyConfig, prefix: &str| {
            cfg.market.correlations.retain(|e| !(e.between[0].starts_with(prefix) && e.between[1].starts_with(prefix)));
            for i in 1..=d {
                for j in i + 1..=d {
                    cfg.market.correlations.push(CorrelationEntry {
                        between: [format!("{prefix}{i}"), format!("{prefix}{j}")],
                        rho: value,
                    });
                }
            }
        };
        match kind {
            StudyKind::CorrX => set_pairs(&mut cfg, "X"),
            StudyKind::CorrS => set_pairs(&mut cfg, "S"),
            StudyKind::CorrX1S1 => {
                let pair = ["X1".to_string(), "S1".to_string()];
                cfg.market.correlations.retain(|e| {
                    let mut b = e.between.clone();
                    b.sort();
                    b != ["S1".to_string(), "X1".to_string()]
                });
                cfg.market.correlations.push(CorrelationEntry { between: pair, rho: value });
            }
            StudyKind::LiabSociety | StudyKind::LiabBilateral => {
                let (interbank, to_society) = match &cfg.liabilities {
                    LiabilityConfig::Complete { interbank, to_society } => (*interbank, *to_society),
                    LiabilityConfig::Matrix { .. } => {
                        return Err(Error::Config("liability sweeps need the complete-network liability form".into()));
                    }
                };
                cfg.liabilities = if kind == StudyKind::LiabSociety {
                    LiabilityConfig::Complete { interbank, to_society: value }
                } else {
                    LiabilityConfig::Complete { interbank: value, to_society }
                };
            }
            StudyKind::Volatility => {
                // agent 1 keeps its mean a/(a+b) while its variance changes;
                // the eligible assets keep their base calibration
                let positions = cfg.market.positions.expand(d)?;
                let eligible = cfg.market.eligible.expand(d)?;
                let base: Vec<MarginalSpec> = positions.iter().map(|m| m.resolve(None)).collect::<Result<_>>()?;
                let (a, b) = match positions[0] {
                    MarginalConfig::Beta { a, b } => (a, b),
                    _ => return Err(Error::Config("the volatility study needs a beta position for agent 1".into())),
                };
                let mut new_positions = positions.clone();
                new_positions[0] = MarginalConfig::Beta { a: value, b: value * b / a };
                let frozen: Vec<MarginalConfig> = eligible
                    .iter()
                    .zip(&base)
                    .map(|(e, p)| match e.resolve(Some(p)) {
                        Ok(MarginalSpec::Lognormal { mu, sigma }) => Ok(MarginalConfig::Lognormal { mu, sigma }),
                        Ok(MarginalSpec::Beta { a, b }) => Ok(MarginalConfig::Beta { a, b }),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<_>>()?;
                cfg.market.positions = PerInstitution::Each(new_positions);
                cfg.market.eligible = PerInstitution::Each(frozen);
            }
            StudyKind::Histograms | StudyKind::Costs => {}
        }
        Ok(cfg)
    }
}

fn check_sweep_value(kind: StudyKind, v: f64) -> Result<()> {
    let ok = match kind {
        StudyKind::CorrX | StudyKind::CorrX1S1 | StudyKind::CorrS => (-1.0..=1.0).contains(&v),
        StudyKind::LiabSociety | StudyKind::LiabBilateral => v >= 0.0 && v.is_finite(),
        StudyKind::Volatility => v > 0.0 && v.is_finite(),
        StudyKind::Histograms | StudyKind::Costs => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("sweep value {v} is outside the domain of {}", kind.parameter())))
    }
}
