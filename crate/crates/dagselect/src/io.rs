//! File formats: numeric CSV, truth, summary, metrics and manifest JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dagselect_core::graphs::Dag;
use dagselect_core::sampler::{median_probability_model, ChainSummary};
use dagselect_core::simdata::GroundTruth;
use dagselect_core::{Matrix, VariableIndicator};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reads a numeric CSV. A first row whose first cell is not a number is
/// taken as a header and skipped.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if k == 0 && record.get(0).is_some_and(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    Error::format(
                        path,
                        format!("row {}, column {}: `{cell}` is not a number", k + 1, c + 1),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }
    Matrix::from_rows(&rows).map_err(|e| Error::format(path, e.to_string()))
}

/// Reads a response: one column, or a single row.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.cols() == 1 {
        Ok(m.column(0))
    } else if m.rows() == 1 {
        Ok(m.row(0).to_vec())
    } else {
        Err(Error::format(
            path,
            format!("expected a single column, found {} columns", m.cols()),
        ))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::with_capacity(m.rows() * m.cols() * 20);
    for r in 0..m.rows() {
        let cells: Vec<String> = m.row(r).iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let out: String = v.iter().map(|x| format!("{x}\n")).collect();
    write_text(path, &out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_owned(),
        source: e,
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_owned(),
        source: e,
    })
}

/// `[child, parent]`, 1-based.
pub fn edge_list(dag: &Dag) -> Vec<[usize; 2]> {
    dag.edges().map(|(c, q)| [c + 1, q + 1]).collect()
}

pub fn dag_from_edge_list(p: usize, edges: &[[usize; 2]]) -> dagselect_core::Result<Dag> {
    let zero_based: Vec<(usize, usize)> = edges
        .iter()
        .map(|&[c, q]| (c.wrapping_sub(1), q.wrapping_sub(1)))
        .collect();
    Dag::from_edges(p, &zero_based)
}

/// `child,parent` lines with a header, 1-based.
pub fn dag_csv(dag: &Dag) -> String {
    let mut out = String::from("child,parent\n");
    for [c, q] in edge_list(dag) {
        out.push_str(&format!("{c},{q}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub scenario: u8,
    pub setting: u8,
    pub seed: u64,
    pub beta0: Vec<f64>,
    pub gamma0: String,
    /// Absent when the covariates have no DAG structure.
    pub edges: Option<Vec<[usize; 2]>>,
    pub sigma_eps2: f64,
    pub permutation: Option<Vec<usize>>,
    pub condition_a: Option<bool>,
}

impl TruthFile {
    pub fn from_truth(t: &GroundTruth) -> Self {
        Self {
            scenario: t.scenario,
            setting: t.setting,
            seed: t.seed,
            beta0: t.beta0.clone(),
            gamma0: t.gamma0.to_bitstring(),
            edges: t.dag0.as_ref().map(edge_list),
            sigma_eps2: t.sigma_eps2,
            permutation: t
                .permutation
                .as_ref()
                .map(|p| p.iter().map(|i| i + 1).collect()),
            condition_a: t.condition_a_status(),
        }
    }

    pub fn p(&self) -> usize {
        self.beta0.len()
    }

    pub fn gamma(&self) -> dagselect_core::Result<VariableIndicator> {
        VariableIndicator::parse_bitstring(&self.gamma0)
    }

    pub fn dag(&self) -> dagselect_core::Result<Option<Dag>> {
        self.edges
            .as_ref()
            .map(|e| dag_from_edge_list(self.p(), e))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub p: usize,
    pub seed: u64,
    pub iters: usize,
    pub burnin: usize,
    pub inclusion_probs: Vec<f64>,
    /// `edge_probs[i][j]`: posterior probability that `j` is a parent of `i`.
    pub edge_probs: Vec<Vec<f64>>,
    pub gamma: String,
    /// 1-based indices of the selected variables.
    pub selected: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
    pub gamma_acceptance: f64,
    pub dag_acceptance: Vec<f64>,
}

impl SummaryFile {
    pub fn new(summary: &ChainSummary, iters: usize, burnin: usize) -> Self {
        let (gamma, dag) = median_probability_model(summary);
        Self {
            p: summary.inclusion_probs.len(),
            seed: summary.seed,
            iters,
            burnin,
            inclusion_probs: summary.inclusion_probs.clone(),
            edge_probs: summary.edge_probs.clone(),
            gamma: gamma.to_bitstring(),
            selected: gamma.indices().iter().map(|j| j + 1).collect(),
            edges: edge_list(&dag),
            gamma_acceptance: summary.gamma_acceptance,
            dag_acceptance: summary.dag_acceptance.clone(),
        }
    }

    pub fn gamma(&self) -> dagselect_core::Result<VariableIndicator> {
        VariableIndicator::parse_bitstring(&self.gamma)
    }
}

/// The six comparison metrics; `None` serializes as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub sens: Option<f64>,
    pub spec: Option<f64>,
    pub auc: Option<f64>,
    pub mcc: Option<f64>,
    pub n_error: Option<f64>,
    pub mspe: Option<f64>,
}

impl MetricsFile {
    pub const COLUMNS: [&'static str; 6] = ["Sens", "Spec", "AUC", "MCC", "#Error", "MSPE"];

    pub fn values(&self) -> [Option<f64>; 6] {
        [
            self.sens,
            self.spec,
            self.auc,
            self.mcc,
            self.n_error,
            self.mspe,
        ]
    }

    pub fn from_values(v: [Option<f64>; 6]) -> Self {
        Self {
            sens: v[0],
            spec: v[1],
            auc: v[2],
            mcc: v[3],
            n_error: v[4],
            mspe: v[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<String>,
    pub runtime_seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("a.csv");
        let without = dir.path().join("b.csv");
        fs::write(&with, "x1,x2\n1,2\n3,4.5\n").unwrap();
        fs::write(&without, "1,2\n3,4.5\n").unwrap();
        let a = read_matrix(&with).unwrap();
        assert_eq!(a, read_matrix(&without).unwrap());
        assert_eq!(a.as_slice(), &[1.0, 2.0, 3.0, 4.5]);
        fs::write(&with, "1,2\n3,oops\n").unwrap();
        assert!(read_matrix(&with).unwrap_err().to_string().contains("oops"));
    }

    #[test]
    fn matrices_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = Matrix::from_fn(3, 2, |r, c| (r as f64 + 0.1) / (c as f64 + 3.0));
        write_matrix(&path, &m).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);
        let v = vec![0.1, -2.5e-7, 3.0];
        write_vector(&path, &v).unwrap();
        assert_eq!(read_vector(&path).unwrap(), v);
    }

    #[test]
    fn edge_lists_are_one_based() {
        let dag = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        assert_eq!(edge_list(&dag), vec![[1, 3], [2, 3]]);
        assert_eq!(dag_from_edge_list(3, &edge_list(&dag)).unwrap(), dag);
        assert_eq!(dag_csv(&dag), "child,parent\n1,3\n2,3\n");
        assert!(dag_from_edge_list(3, &[[0, 1]]).is_err());
    }
}
