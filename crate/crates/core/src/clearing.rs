//! Eisenberg-Noe clearing with society as a sink node, and the society-equity
//! aggregation function `Λ(x) = Σ Π_{i0} p_i(x) − β Σ L_{i0}`.
//!
//! Payments are kept in `[0, L̂_i]`: a bank whose external wealth plus
//! interbank income is negative pays nothing. For nonnegative wealth this is
//! exactly `p_i = min{L̂_i, x_i + Σ_j Π_ji p_j}`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{format_sig17, ScenarioSet};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Validated nominal liability matrix. Node 0 is society.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct LiabilityStructure {
    d: usize,
    /// `(d+1) × (d+1)` row-major.
    nominal: Vec<f64>,
    lhat: Vec<f64>,
    /// `Π_ij` between banks, `d × d` row-major, bank indices shifted by one.
    relative: Vec<f64>,
    /// `Π_i0`.
    to_society: Vec<f64>,
}

impl LiabilityStructure {
    pub fn d(&self) -> usize {
        self.d
    }

    /// `L_ij` with society at index 0.
    pub fn nominal(&self, i: usize, j: usize) -> f64 {
        self.nominal[i * (self.d + 1) + j]
    }

    /// Total nominal liabilities `L̂` of banks `1..=d`.
    pub fn lhat(&self) -> &[f64] {
        &self.lhat
    }

    /// `Π_ij` for banks `i, j ∈ 1..=d`, 1-based like the nominal matrix.
    pub fn relative(&self, i: usize, j: usize) -> f64 {
        if j == 0 {
            self.to_society[i - 1]
        } else {
            self.relative[(i - 1) * self.d + (j - 1)]
        }
    }

    /// `Π_{i0}` for banks `1..=d`.
    pub fn relative_to_society(&self) -> &[f64] {
        &self.to_society
    }

    /// `Σ_i L_{i0}`.
    pub fn total_to_society(&self) -> f64 {
        (1..=self.d).map(|i| self.nominal(i, 0)).sum()
    }

    /// Rows of the nominal matrix.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.nominal.chunks(self.d + 1).map(<[f64]>::to_vec).collect()
    }

    /// `L_ij = interbank` for all banks `i ≠ j` and `L_i0 = to_society`.
    pub fn complete(d: usize, interbank: f64, to_society: f64) -> Result<Self> {
        let mut rows = vec![vec![0.0; d + 1]; d + 1];
        for (i, row) in rows.iter_mut().enumerate().skip(1) {
            row[0] = to_society;
            for (j, v) in row.iter_mut().enumerate().skip(1) {
                if i != j {
                    *v = interbank;
                }
            }
        }
        validate_liabilities(&rows)
    }

    /// Reads a headerless `(d+1) × (d+1)` CSV, society first.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(
                rec?.iter()
                    .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number {s:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        validate_liabilities(&rows)
    }
}

impl TryFrom<Vec<Vec<f64>>> for LiabilityStructure {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_liabilities(&rows)
    }
}

impl From<LiabilityStructure> for Vec<Vec<f64>> {
    fn from(l: LiabilityStructure) -> Self {
        l.to_rows()
    }
}

/// Checks the network invariants and derives `L̂` and `Π`.
pub fn validate_liabilities(rows: &[Vec<f64>]) -> Result<LiabilityStructure> {
    let size = rows.len();
    if size < 3 {
        return Err(Error::Validation(format!("need at least two banks plus society, got a {size}x{size} matrix")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != size) {
        return Err(Error::Validation(format!("row {i} has {} entries, expected {size}", rows[i].len())));
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("L[{i}][{j}] = {v} must be finite and nonnegative")));
            }
            if i == j && v != 0.0 {
                return Err(Error::Validation(format!("self-liability L[{i}][{i}] = {v} must be zero")));
            }
            if i == 0 && v != 0.0 {
                return Err(Error::Validation(format!("society is a sink but L[0][{j}] = {v}")));
            }
        }
        if i > 0 && row[0] <= 0.0 {
            return Err(Error::Validation(format!("L[{i}][0] = {} must be positive", row[0])));
        }
    }
    let d = size - 1;
    let lhat: Vec<f64> = rows[1..].iter().map(|r| r.iter().sum()).collect();
    let mut relative = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            relative[i * d + j] = rows[i + 1][j + 1] / lhat[i];
        }
    }
    let to_society = (0..d).map(|i| rows[i + 1][0] / lhat[i]).collect();
    Ok(LiabilityStructure { d, nominal: rows.concat(), lhat, relative, to_society })
}

/// Payments of banks `1..=d` at clearing.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearingVector {
    pub p: Vec<f64>,
    /// Sup-norm defect of the fixed-point equation.
    pub residual: f64,
    /// 0-based bank indices with `p_i < L̂_i`.
    pub defaulting_set: Vec<usize>,
    pub iterations: usize,
}

/// `(Πᵀp)_i = Σ_j Π_ji p_j`.
fn interbank_income(net: &LiabilityStructure, p: &[f64], out: &mut [f64]) {
    let d = net.d;
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, &pj) in p.iter().enumerate() {
        let row = &net.relative[j * d..(j + 1) * d];
        for (o, &pi) in out.iter_mut().zip(row) {
            *o += pi * pj;
        }
    }
}

fn clearing_map(net: &LiabilityStructure, x: &[f64], p: &[f64], out: &mut [f64]) {
    interbank_income(net, p, out);
    for ((o, &xi), &cap) in out.iter_mut().zip(x).zip(&net.lhat) {
        *o = (xi + *o).max(0.0).min(cap);
    }
}

/// `max_i |p_i − min{L̂_i, max{0, x_i + (Πᵀp)_i}}|`.
pub fn fixed_point_residual(x: &[f64], net: &LiabilityStructure, p: &[f64]) -> f64 {
    let mut image = vec![0.0; net.d];
    clearing_map(net, x, p, &mut image);
    p.iter().zip(&image).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn check_wealth(x: &[f64], net: &LiabilityStructure) -> Result<()> {
    if x.len() != net.d {
        return Err(Error::Dimension(format!("wealth vector has {} entries, network has {} banks", x.len(), net.d)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("wealth must be finite".into()));
    }
    Ok(())
}

fn finish(x: &[f64], net: &LiabilityStructure, p: Vec<f64>, iterations: usize) -> ClearingVector {
    let residual = fixed_point_residual(x, net, &p);
    let defaulting_set = p.iter().zip(&net.lhat).enumerate().filter(|(_, (a, b))| a < b).map(|(i, _)| i).collect();
    ClearingVector { p, residual, defaulting_set, iterations }
}

/// Picard iteration from `p = L̂`. The iterates decrease monotonically to the
/// greatest clearing vector.
pub fn clearing_picard(x: &[f64], net: &LiabilityStructure, tol: f64, max_iter: usize) -> Result<ClearingVector> {
    check_wealth(x, net)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut p = net.lhat.clone();
    let mut next = vec![0.0; net.d];
    let (iterations, _) = picard_in_place(x, net, tol, max_iter, &mut p, &mut next)?;
    Ok(finish(x, net, p, iterations))
}

/// Allocation-free Picard core shared with the batch aggregation.
fn picard_in_place(
    x: &[f64],
    net: &LiabilityStructure,
    tol: f64,
    max_iter: usize,
    p: &mut Vec<f64>,
    next: &mut Vec<f64>,
) -> Result<(usize, f64)> {
    p.copy_from_slice(&net.lhat);
    let mut step = f64::INFINITY;
    for it in 1..=max_iter {
        clearing_map(net, x, p, next);
        step = p.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(p, next);
        if step < tol {
            return Ok((it, step));
        }
    }
    Err(Error::Convergence { iterations: max_iter, last_step: step, last_iterate: p.clone() })
}

/// Eisenberg-Noe fictitious default algorithm: posit a defaulting set, solve
/// the linear system for the defaulters with everyone else paying in full,
/// and enlarge the set until no new defaults appear (at most `d` rounds).
///
/// Requires nonnegative wealth.
pub fn clearing_fictitious_default(x: &[f64], net: &LiabilityStructure) -> Result<ClearingVector> {
    check_wealth(x, net)?;
    let mut s = FdaScratch::new(net.d);
    let rounds = fda_in_place(x, net, &mut s)?;
    Ok(finish(x, net, s.p, rounds))
}

/// Buffers reused across rows by the batch aggregation.
struct FdaScratch {
    p: Vec<f64>,
    income: Vec<f64>,
    defaulted: Vec<bool>,
    members: Vec<usize>,
    /// Position of bank `j` in `members`, if defaulted.
    slot: Vec<usize>,
}

impl FdaScratch {
    fn new(d: usize) -> Self {
        FdaScratch { p: vec![0.0; d], income: vec![0.0; d], defaulted: vec![false; d], members: Vec::with_capacity(d), slot: vec![0; d] }
    }
}

fn fda_in_place(x: &[f64], net: &LiabilityStructure, s: &mut FdaScratch) -> Result<usize> {
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("fictitious default algorithm requires nonnegative wealth".into()));
    }
    let d = net.d;
    s.p.copy_from_slice(&net.lhat);
    s.defaulted.iter_mut().for_each(|v| *v = false);
    s.members.clear();
    for round in 1..=d + 1 {
        interbank_income(net, &s.p, &mut s.income);
        let mut grew = false;
        for i in 0..d {
            if !s.defaulted[i] && x[i] + s.income[i] < net.lhat[i] {
                s.defaulted[i] = true;
                grew = true;
            }
        }
        if !grew {
            return Ok(round);
        }
        s.members.clear();
        for i in 0..d {
            if s.defaulted[i] {
                s.slot[i] = s.members.len();
                s.members.push(i);
            }
        }
        let k = s.members.len();
        // (I − Π_DDᵀ) p_D = x_D + Σ_{j∉D} Π_jD L̂_j
        let mut a = DMatrix::<f64>::identity(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for (r, &i) in s.members.iter().enumerate() {
            rhs[r] = x[i];
            for j in 0..d {
                let pji = net.relative[j * d + i];
                if s.defaulted[j] {
                    a[(r, s.slot[j])] -= pji;
                } else {
                    rhs[r] += pji * net.lhat[j];
                }
            }
        }
        if !a.lu().solve_mut(&mut rhs) {
            return Err(Error::Singular { defaulting: s.members.clone() });
        }
        for (r, &i) in s.members.iter().enumerate() {
            s.p[i] = rhs[r].clamp(0.0, net.lhat[i]);
        }
    }
    Err(Error::Numerical("fictitious default algorithm exceeded d rounds".into()))
}

/// Which clearing engine evaluates `Λ`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearingMethod {
    #[default]
    Picard,
    /// Used for nonnegative wealth vectors; rows with a negative entry fall
    /// back to Picard.
    FictitiousDefault,
}

/// Network plus the society repayment fraction `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationSpec {
    pub liabilities: LiabilityStructure,
    pub beta: f64,
    #[serde(default)]
    pub method: ClearingMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl AggregationSpec {
    pub fn new(liabilities: LiabilityStructure, beta: f64) -> Result<Self> {
        let spec = AggregationSpec { liabilities, beta, method: ClearingMethod::Picard, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_method(mut self, method: ClearingMethod) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Domain(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Domain("clearing tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.liabilities.d
    }

    /// `[−β Σ L_{i0}, (1−β) Σ L_{i0}]`.
    pub fn range(&self) -> (f64, f64) {
        let total = self.liabilities.total_to_society();
        (-self.beta * total, (1.0 - self.beta) * total)
    }

    pub fn clear(&self, x: &[f64]) -> Result<ClearingVector> {
        match self.method {
            ClearingMethod::FictitiousDefault if x.iter().all(|&v| v >= 0.0) => {
                clearing_fictitious_default(x, &self.liabilities)
            }
            _ => clearing_picard(x, &self.liabilities, self.tol, self.max_iter),
        }
    }

    fn value_of(&self, p: &[f64]) -> f64 {
        let income: f64 = p.iter().zip(&self.liabilities.to_society).map(|(a, b)| a * b).sum();
        income - self.beta * self.liabilities.total_to_society()
    }
}

/// `Λ(x) = Σ Π_{i0} p_i(x) − β Σ L_{i0}`.
pub fn aggregate(x: &[f64], spec: &AggregationSpec) -> Result<f64> {
    Ok(spec.value_of(&spec.clear(x)?.p))
}

/// `Λ` applied to each row of a row-major `n × d` block; rows may contain
/// negative wealth (capital withdrawals).
pub fn aggregate_rows(rows: &[f64], spec: &AggregationSpec) -> Result<Vec<f64>> {
    let d = spec.d();
    if rows.len() % d != 0 {
        return Err(Error::Dimension(format!("{} values do not form rows of length {d}", rows.len())));
    }
    match spec.method {
        ClearingMethod::Picard => rows
            .par_chunks(d)
            .map_init(
                || (vec![0.0; d], vec![0.0; d]),
                |(p, next), x| {
                    check_wealth(x, &spec.liabilities)?;
                    picard_in_place(x, &spec.liabilities, spec.tol, spec.max_iter, p, next)?;
                    Ok(spec.value_of(p))
                },
            )
            .collect(),
        ClearingMethod::FictitiousDefault => rows
            .par_chunks(d)
            .map_init(
                || (FdaScratch::new(d), vec![0.0; d]),
                |(s, next), x| {
                    check_wealth(x, &spec.liabilities)?;
                    if x.iter().all(|&v| v >= 0.0) {
                        fda_in_place(x, &spec.liabilities, s)?;
                    } else {
                        picard_in_place(x, &spec.liabilities, spec.tol, spec.max_iter, &mut s.p, next)?;
                    }
                    Ok(spec.value_of(&s.p))
                },
            )
            .collect(),
    }
}

/// Rowwise `Λ` over a scenario set, order preserved.
pub fn aggregate_scenarios(xt: &ScenarioSet, spec: &AggregationSpec) -> Result<Vec<f64>> {
    if xt.d() != spec.d() {
        return Err(Error::Dimension(format!("scenarios have {} assets, network has {} banks", xt.d(), spec.d())));
    }
    aggregate_rows(xt.as_slice(), spec)
}

/// Writes `scenario,lambda_value`.
pub fn write_aggregate_csv<W: Write>(values: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "lambda_value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format_sig17(*v)])?;
    }
    w.flush()?;
    Ok(())
}
