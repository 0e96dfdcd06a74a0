use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{BoundaryApproximation, GridMember, MinimalPointResult};
use crate::error::Result;

/// Metadata written as a `# {json}` line ahead of every result CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: Option<u64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub grid_step: f64,
    pub epsilon: f64,
    pub criterion: String,
    pub beta: f64,
    pub feasible_flag: bool,
    #[serde(flatten)]
    pub extras: BTreeMap<String, serde_json::Value>,
}

impl RunMetadata {
    /// Parses the `# {json}` line of an exported file.
    pub fn from_header_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line.trim_start_matches('#').trim())?)
    }
}

fn header<W: Write>(out: &mut W, meta: &RunMetadata) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(meta)?)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// One row per certified point: `origin_index, <prefix>_1..d, bracket_width, n_iter`.
/// Use the prefix `lambda` for intrinsic and `k` for monetary results.
pub fn write_boundary_csv<W: Write>(
    out: &mut W,
    approx: &BoundaryApproximation,
    prefix: &str,
    meta: &RunMetadata,
) -> Result<()> {
    header(out, meta)?;
    let d = approx.target.len();
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["origin_index".to_string()];
    head.extend((1..=d).map(|i| format!("{prefix}_{i}")));
    head.extend(["bracket_width".to_string(), "n_iter".to_string()]);
    w.write_record(&head)?;
    for p in &approx.points {
        let mut row = vec![p.origin_index.to_string()];
        row.extend(p.point.iter().map(|v| fmt(*v)));
        row.push(fmt(p.bracket_width));
        row.push(p.n_iter.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Member lattice points of a full scan: `grid_index, lambda_1..d`.
pub fn write_grid_csv<W: Write>(out: &mut W, d: usize, members: &[GridMember], meta: &RunMetadata) -> Result<()> {
    header(out, meta)?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["grid_index".to_string()];
    head.extend((1..=d).map(|i| format!("lambda_{i}")));
    w.write_record(&head)?;
    for m in members {
        let mut row = vec![m.index.to_string()];
        row.extend(m.point.iter().map(|v| fmt(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Minimal points: `point_index, lambda_1..d, k_min, k_a, k_b`.
pub fn write_minimal_csv<W: Write>(out: &mut W, d: usize, result: &MinimalPointResult, meta: &RunMetadata) -> Result<()> {
    header(out, meta)?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["point_index".to_string()];
    head.extend((1..=d).map(|i| format!("lambda_{i}")));
    head.extend(["k_min", "k_a", "k_b"].map(String::from));
    w.write_record(&head)?;
    for (i, p) in result.minimal_points.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.iter().map(|v| fmt(*v)));
        row.extend([result.k_min, result.bracket.0, result.bracket.1].map(fmt));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setvalued::BoundaryPoint;

    fn meta() -> RunMetadata {
        RunMetadata {
            seed: Some(7),
            n: 100,
            grid_step: 0.05,
            epsilon: 1e-3,
            criterion: "ES@0.05".into(),
            beta: 0.9,
            feasible_flag: true,
            extras: BTreeMap::new(),
        }
    }

    #[test]
    fn boundary_csv_layout() {
        let approx = BoundaryApproximation {
            points: vec![BoundaryPoint {
                origin_index: 3,
                origin: vec![0.0, 0.15],
                point: vec![0.25, 0.5],
                inner: vec![0.24, 0.49],
                n_iter: 10,
                bracket_width: 9e-4,
                direct: false,
            }],
            target: vec![1.0, 1.0],
            grid_step: 0.05,
            epsilon: 1e-3,
            feasible_flag: true,
        };
        let mut buf = Vec::new();
        write_boundary_csv(&mut buf, &approx, "lambda", &meta()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(RunMetadata::from_header_line(lines.next().unwrap()).unwrap(), meta());
        assert_eq!(lines.next().unwrap(), "origin_index,lambda_1,lambda_2,bracket_width,n_iter");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "3");
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.5);
        assert_eq!(row[4], "10");
    }

    #[test]
    fn metadata_carries_extras() {
        let mut m = meta();
        m.extras.insert("rho".into(), serde_json::json!(0.3));
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"N\":100") && text.contains("\"rho\":0.3"));
        assert_eq!(RunMetadata::from_header_line(&format!("# {text}")).unwrap(), m);
    }
}
