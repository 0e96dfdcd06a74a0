//! Configuration-driven case studies: parameter sweeps of the two risk
//! measures, histogram comparisons of the restructured systems and cost
//! variants. Every artifact is a pure function of the config and its seed.

mod config;
mod report;

pub use config::{
    score_index, CorrelationEntry, CostSpec, LiabilityConfig, MarginalConfig, MarketConfig, MinimalConfig,
    PerInstitution, StudyConfig, StudyKind,
};
pub use report::{
    apply_costs, diagonal_requirements, histogram_report, Action, DiagonalBracket, DiagonalRequirements,
    HistogramReport, HistogramSummary,
};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::clearing::{write_aggregate_csv, AggregationSpec};
use crate::error::{Error, Result};
use crate::risk::AcceptanceCriterion;
use crate::scenario::{sample_market, MarketModel};
use crate::setvalued::{
    boundary_intrinsic, boundary_monetary, default_monetary_box, full_grid_scan, minimal_points, write_boundary_csv,
    write_grid_csv, write_minimal_csv, MinimalPointsOptions, RunMetadata, SystemRisk,
};

/// Market, network and criterion of one resolved config.
pub struct Prepared {
    pub config: StudyConfig,
    pub market: MarketModel,
    pub aggregation: AggregationSpec,
    pub criterion: AcceptanceCriterion,
}

impl Prepared {
    pub fn new(config: &StudyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Prepared {
            config: config.clone(),
            market: sample_market(&config.market_spec()?)?,
            aggregation: config.aggregation()?,
            criterion: config.criterion()?,
        })
    }

    pub fn system(&self) -> Result<SystemRisk<'_>> {
        SystemRisk::new(&self.market, &self.aggregation, self.criterion)
    }

    pub fn monetary_box(&self) -> (f64, f64) {
        self.config.monetary_box.unwrap_or_else(|| default_monetary_box(&self.market.x0))
    }

    pub fn metadata(&self, feasible_flag: bool) -> RunMetadata {
        RunMetadata {
            seed: Some(self.config.seed),
            n: self.config.n,
            grid_step: self.config.grid_step,
            epsilon: self.config.epsilon,
            criterion: self.criterion.to_string(),
            beta: self.config.beta,
            feasible_flag,
            extras: BTreeMap::new(),
        }
    }
}

/// Output of one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub value: f64,
    /// Risk of the all-eligible aggregate; `1` is a member iff `≤ 0`.
    pub all_eligible_risk: f64,
    pub feasible_flag: bool,
    pub intrinsic_file: String,
    pub intrinsic_points: usize,
    pub monetary_file: Option<String>,
    pub monetary_points: usize,
    pub monetary_error: Option<String>,
    pub minimal_file: Option<String>,
    pub minimal_k: Option<f64>,
    pub minimal_error: Option<String>,
    pub membership_tests: usize,
}

/// Re-test of the certified points of one sweep value under another.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestednessCheck {
    pub measure: String,
    /// Sweep value whose points are re-tested.
    pub points_of: f64,
    /// Sweep value whose system re-tests them.
    pub tested_under: f64,
    pub points: usize,
    /// Largest risk value among the re-tested points.
    pub max_risk: f64,
    pub pass: bool,
    /// Whether the direction is the one the case study predicts.
    pub expected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostDelta {
    pub system: String,
    pub mean: f64,
    pub variance: f64,
    pub support_min: f64,
    pub es: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyManifest {
    pub library: String,
    pub version: String,
    pub study: String,
    pub parameter: String,
    pub config: StudyConfig,
    pub runs: Vec<SweepRecord>,
    pub nestedness: Vec<NestednessCheck>,
    pub diagonal: Option<DiagonalRequirements>,
    pub histograms: Vec<HistogramSummary>,
    pub histograms_with_costs: Vec<HistogramSummary>,
    pub cost_deltas: Vec<CostDelta>,
    pub files: Vec<String>,
}

struct SweepState {
    value: f64,
    prepared: Prepared,
    intrinsic: Vec<Vec<f64>>,
    monetary: Vec<Vec<f64>>,
}

fn create(dir: &Path, name: &str, files: &mut Vec<String>) -> Result<BufWriter<File>> {
    files.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run_one(prepared: &Prepared, kind: StudyKind, value: f64, dir: &Path, files: &mut Vec<String>) -> Result<(SweepRecord, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let cfg = &prepared.config;
    let sys = prepared.system()?;
    let d = sys.d();
    let tag = format!("{}={}", kind.parameter(), value);
    let all_eligible_risk = sys.intrinsic_risk(&vec![1.0; d])?;
    let feasible = all_eligible_risk <= 0.0;
    let mut meta = prepared.metadata(feasible);
    meta.extras.insert(kind.parameter().to_string(), serde_json::json!(value));

    let (intrinsic_file, intrinsic) = if feasible {
        let approx = boundary_intrinsic(&sys, cfg.grid_step, cfg.epsilon)?;
        let name = format!("boundary_intrinsic_{tag}.csv");
        write_boundary_csv(&mut create(dir, &name, files)?, &approx, "lambda", &meta)?;
        (name, approx.points.into_iter().map(|p| p.point).collect::<Vec<_>>())
    } else {
        let members = full_grid_scan(&sys, cfg.grid_step)?;
        let name = format!("grid_intrinsic_{tag}.csv");
        write_grid_csv(&mut create(dir, &name, files)?, d, &members, &meta)?;
        (name, members.into_iter().map(|m| m.point).collect())
    };

    let bounds = prepared.monetary_box();
    let mut mmeta = meta.clone();
    mmeta.feasible_flag = true;
    mmeta.extras.insert("box".into(), serde_json::json!([bounds.0, bounds.1]));
    let (monetary_file, monetary, monetary_error) = match boundary_monetary(&sys, cfg.grid_step, cfg.epsilon, bounds) {
        Ok(approx) => {
            let name = format!("boundary_monetary_{tag}.csv");
            write_boundary_csv(&mut create(dir, &name, files)?, &approx, "k", &mmeta)?;
            (Some(name), approx.points.into_iter().map(|p| p.point).collect(), None)
        }
        Err(e @ Error::Box(_)) => (None, Vec::new(), Some(e.to_string())),
        Err(e) => return Err(e),
    };

    let (mut minimal_file, mut minimal_k, mut minimal_error) = (None, None, None);
    if let Some(mc) = &cfg.minimal {
        let opts = MinimalPointsOptions {
            plane_grid_step: mc.plane_grid_step,
            delta: mc.delta,
            weights: mc.weights.clone(),
            prune: mc.prune,
            refine: mc.refine,
        };
        match minimal_points(&sys, &opts) {
            Ok(r) => {
                let name = format!("minimal_{tag}.csv");
                let mut m = meta.clone();
                m.grid_step = mc.plane_grid_step;
                m.epsilon = mc.delta;
                write_minimal_csv(&mut create(dir, &name, files)?, d, &r, &m)?;
                minimal_file = Some(name);
                minimal_k = Some(r.k_min);
            }
            Err(e @ Error::Resolution(_)) => minimal_error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
    }

    let record = SweepRecord {
        value,
        all_eligible_risk,
        feasible_flag: feasible,
        intrinsic_file,
        intrinsic_points: intrinsic.len(),
        monetary_file,
        monetary_points: monetary.len(),
        monetary_error,
        minimal_file,
        minimal_k,
        minimal_error,
        membership_tests: sys.evaluations(),
    };
    Ok((record, intrinsic, monetary))
}

/// Direction in which the case study predicts the sets to be nested, as
/// `Some(true)` when the sets grow with the swept value.
fn predicted_growth(kind: StudyKind) -> Option<bool> {
    match kind {
        StudyKind::CorrX | StudyKind::LiabSociety => Some(false),
        StudyKind::LiabBilateral | StudyKind::Volatility => Some(true),
        _ => None,
    }
}

fn nestedness(kind: StudyKind, states: &[SweepState], slack: f64) -> Result<Vec<NestednessCheck>> {
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by(|a, b| states[*a].value.total_cmp(&states[*b].value));
    let growth = predicted_growth(kind);
    let mut checks = Vec::new();
    for pair in order.windows(2) {
        let (lo, hi) = (&states[pair[0]], &states[pair[1]]);
        for (from, to, expected) in [(hi, lo, growth == Some(false)), (lo, hi, growth == Some(true))] {
            let sys = to.prepared.system()?;
            for (measure, points) in [("intrinsic", &from.intrinsic), ("monetary", &from.monetary)] {
                let mut max_risk = f64::NEG_INFINITY;
                for p in points.iter() {
                    let r = if measure == "intrinsic" { sys.intrinsic_risk(p)? } else { sys.monetary_risk(p)? };
                    max_risk = max_risk.max(r);
                }
                checks.push(NestednessCheck {
                    measure: measure.to_string(),
                    points_of: from.value,
                    tested_under: to.value,
                    points: points.len(),
                    max_risk,
                    pass: max_risk <= slack,
                    expected,
                });
            }
        }
    }
    Ok(checks)
}

fn write_histograms(dir: &Path, report: &HistogramReport, suffix: &str, files: &mut Vec<String>) -> Result<()> {
    for (name, values) in &report.aggregates {
        write_aggregate_csv(values, create(dir, &format!("histogram_{name}{suffix}.csv"), files)?)?;
    }
    Ok(())
}

/// Runs the study described by `config`, writing every artifact and
/// `manifest.json` (last) into `out_dir`.
pub fn run_study(config: &StudyConfig, out_dir: &Path) -> Result<StudyManifest> {
    config.validate()?;
    let kind = config.kind.ok_or_else(|| Error::Config("the config does not name a study kind".into()))?;
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut manifest = StudyManifest {
        library: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        study: kind.name().to_string(),
        parameter: kind.parameter().to_string(),
        config: config.clone(),
        runs: Vec::new(),
        nestedness: Vec::new(),
        diagonal: None,
        histograms: Vec::new(),
        histograms_with_costs: Vec::new(),
        cost_deltas: Vec::new(),
        files: Vec::new(),
    };

    match kind {
        StudyKind::Histograms | StudyKind::Costs => {
            let prepared = Prepared::new(config)?;
            let sys = prepared.system()?;
            let d = sys.d();
            let diag = diagonal_requirements(&sys, config.diagonal_tol)?;
            manifest.diagonal = Some(diag);
            let lambda = diag.intrinsic.ok_or(Error::NotFeasible)?.value;
            let k = diag
                .monetary
                .ok_or_else(|| Error::Box("no acceptable capital level on the diagonal".into()))?
                .value;
            let report = histogram_report(&sys, &vec![lambda; d], &vec![k; d], config.bin_width)?;
            write_histograms(out_dir, &report, "", &mut files)?;
            manifest.histograms = report.summaries.clone();
            if kind == StudyKind::Costs {
                let costs = config.costs.unwrap_or_default();
                let alpha = prepared.criterion.alpha;
                let with = [
                    ("intrinsic", apply_costs(&sys, &Action::Intrinsic(vec![lambda; d]), &costs)?),
                    ("monetary", apply_costs(&sys, &Action::Monetary(vec![k; d]), &costs)?),
                ];
                for (name, values) in &with {
                    write_aggregate_csv(values, create(out_dir, &format!("histogram_{name}_costs.csv"), &mut files)?)?;
                    let s = HistogramSummary::from_values(name, values, alpha, config.bin_width)?;
                    let base = report.summaries.iter().find(|b| b.system == *name).expect("system present");
                    manifest.cost_deltas.push(CostDelta {
                        system: name.to_string(),
                        mean: s.mean - base.mean,
                        variance: s.variance - base.variance,
                        support_min: s.support_min - base.support_min,
                        es: s.es - base.es,
                    });
                    manifest.histograms_with_costs.push(s);
                }
            }
        }
        _ => {
            if config.sweep.is_empty() {
                return Err(Error::Config(format!("study {} needs sweep values", kind.name())));
            }
            let mut states: Vec<SweepState> = Vec::new();
            for &value in &config.sweep {
                let cfg = config.with_parameter(kind, value)?;
                // one seed across the sweep; reuse the draw when only the network changes
                let prepared = match states.last() {
                    Some(prev) if prev.prepared.config.market_spec()? == cfg.market_spec()? => Prepared {
                        config: cfg.clone(),
                        market: prev.prepared.market.clone(),
                        aggregation: cfg.aggregation()?,
                        criterion: cfg.criterion()?,
                    },
                    _ => Prepared::new(&cfg)?,
                };
                let (record, intrinsic, monetary) = run_one(&prepared, kind, value, out_dir, &mut files)?;
                manifest.runs.push(record);
                states.push(SweepState { value, prepared, intrinsic, monetary });
            }
            manifest.nestedness = nestedness(kind, &states, config.nestedness_slack)?;
        }
    }

    files.push("manifest.json".to_string());
    manifest.files = files;
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out_dir.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

/// Default output directory of a config: its `out` field or `./out`.
pub fn output_dir(config: &StudyConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir
        .map(Path::to_path_buf)
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: StudyKind, sweep: Vec<f64>) -> StudyConfig {
        let mut cfg = StudyConfig::base_case(2, 0.6, 0.2, 0.9, 2000, 5);
        cfg.kind = Some(kind);
        cfg.sweep = sweep;
        cfg.grid_step = 0.25;
        cfg.epsilon = 1e-3;
        cfg
    }

    #[test]
    fn sweep_writes_files_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let m = run_study(&small(StudyKind::CorrX, vec![0.0, 0.3]), dir.path()).unwrap();
        assert_eq!(m.runs.len(), 2);
        for f in &m.files {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(m.files.contains(&"boundary_intrinsic_rho=0.3.csv".to_string()) || m.files.contains(&"grid_intrinsic_rho=0.3.csv".to_string()));
        // two directions, two measures
        assert_eq!(m.nestedness.len(), 4);
        assert!(m.nestedness.iter().any(|c| c.expected && c.points_of == 0.3));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = small(StudyKind::LiabSociety, vec![0.1, 0.2]);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ma = run_study(&cfg, a.path()).unwrap();
        run_study(&cfg, b.path()).unwrap();
        for f in &ma.files {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn histogram_study_summaries_match_raw_aggregates() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(StudyKind::Costs, vec![]);
        cfg.diagonal_tol = 1e-4;
        let m = run_study(&cfg, dir.path()).unwrap();
        assert_eq!(m.histograms.len(), 4);
        assert_eq!(m.cost_deltas.len(), 2);
        for s in &m.histograms {
            let text = std::fs::read_to_string(dir.path().join(format!("histogram_{}.csv", s.system))).unwrap();
            let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
            let es = crate::risk::empirical_es(&values, 0.05).unwrap();
            assert!((es - s.es).abs() <= 1e-12);
        }
    }

    #[test]
    fn missing_kind_or_sweep_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(StudyKind::CorrS, vec![]);
        assert!(matches!(run_study(&cfg, dir.path()), Err(Error::Config(_))));
        cfg.kind = None;
        assert!(matches!(run_study(&cfg, dir.path()), Err(Error::Config(_))));
    }
}
