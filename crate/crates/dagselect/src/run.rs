//! The four commands. Each writes its artifacts plus a `manifest.json` into
//! the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dagselect_core::metrics::{auc, ls_refit, mspe, selection_metrics};
use dagselect_core::rng::derive_seed;
use dagselect_core::sampler::{median_probability_model, run_chain_with, ChainSummary};
use dagselect_core::simdata::{generate, Simulation};
use dagselect_core::{Dataset, Matrix, VariableIndicator};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, Manifest, MetricsFile, SummaryFile, TruthFile};

/// Runs the chain on `data`. With `trace`, one JSON line per sweep is written to it.
pub fn fit(
    config: &RunConfig,
    data: &Dataset,
    trace: Option<&mut dyn Write>,
) -> Result<ChainSummary> {
    config.validate()?;
    let hyper = config.hyperparameters(data.p());
    let control = config.chain_control();
    let Some(out) = trace else {
        return Ok(dagselect_core::sampler::run_chain(data, &hyper, &control)?);
    };
    let mut failure = None;
    let summary = run_chain_with(data, &hyper, &control, |rec, _| {
        if failure.is_some() {
            return;
        }
        let line = TraceLine {
            iteration: rec.iteration,
            size: rec.size,
            edges: rec.edges,
            log_score: rec.log_score,
            gamma_accepted: rec.gamma_accepted,
            dag_accepted: rec.dag_accepted,
        };
        let res = serde_json::to_writer(&mut *out, &line)
            .map_err(std::io::Error::from)
            .and_then(|()| out.write_all(b"\n"));
        if let Err(e) = res {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(Error::io("trace", e));
    }
    Ok(summary)
}

#[derive(Serialize)]
struct TraceLine {
    iteration: usize,
    size: usize,
    edges: usize,
    log_score: f64,
    gamma_accepted: bool,
    dag_accepted: usize,
}

/// Selection metrics of `selected` against `truth`, AUC from `scores` when
/// given, and test error of the least-squares refit when a test set is given.
pub fn evaluate_selection(
    selected: &VariableIndicator,
    scores: Option<&[f64]>,
    truth: &VariableIndicator,
    train: &Dataset,
    test: Option<&Dataset>,
) -> Result<MetricsFile> {
    if selected.p() != truth.p()
        || train.p() != truth.p()
        || test.is_some_and(|t| t.p() != truth.p())
    {
        return Err(dagselect_core::Error::DimensionMismatch(format!(
            "truth has p = {}, selection {}, training data {}",
            truth.p(),
            selected.p(),
            train.p()
        ))
        .into());
    }
    let m = selection_metrics(truth.bits(), selected.bits())?;
    let auc = match scores {
        Some(s) => match auc(s, truth.bits()) {
            Ok(v) => Some(v),
            Err(dagselect_core::Error::UndefinedAuc) => None,
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    let mspe = match test {
        Some(test) => {
            let idx = selected.indices();
            match ls_refit(train, &idx) {
                Ok(beta) => Some(mspe(test.x(), test.y(), &idx, &beta)?),
                Err(dagselect_core::Error::RankDeficient) => None,
                Err(e) => return Err(e.into()),
            }
        }
        None => None,
    };
    Ok(MetricsFile {
        sens: m.sensitivity,
        spec: m.specificity,
        auc,
        mcc: Some(m.mcc),
        n_error: Some(m.n_error as f64),
        mspe,
    })
}

pub fn evaluate(
    summary: &SummaryFile,
    truth: &TruthFile,
    train: &Dataset,
    test: Option<&Dataset>,
) -> Result<MetricsFile> {
    if summary.p != truth.p() {
        return Err(dagselect_core::Error::DimensionMismatch(format!(
            "summary has p = {} but truth has p = {}",
            summary.p,
            truth.p()
        ))
        .into());
    }
    evaluate_selection(
        &summary.gamma()?,
        Some(&summary.inclusion_probs),
        &truth.gamma()?,
        train,
        test,
    )
}

/// One row of the comparison: a method on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub method: String,
    pub rep: usize,
    pub seed: u64,
    pub metrics: MetricsFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateReport {
    pub rows: Vec<ReplicateRow>,
    /// Per method, in first-appearance order: mean over replicates of each
    /// metric (over the replicates where it is defined).
    pub table: Vec<(String, MetricsFile)>,
}

pub fn method_name(b: f64) -> String {
    format!("Joint b={b}")
}

/// Replicate seed `r` (0-based) derived from the root seed.
pub fn replicate_seed(root: u64, r: usize) -> u64 {
    derive_seed(root, r as u64)
}

/// Simulates `config.reps` datasets and fits the joint model with the
/// configured `b` and with `b = 0`. `baselines` are precomputed selections,
/// one row per replicate.
pub fn replicate(config: &RunConfig, baselines: &[(String, Matrix)]) -> Result<ReplicateReport> {
    config.validate()?;
    for (name, sel) in baselines {
        if sel.rows() < config.reps {
            return Err(Error::Usage(format!(
                "baseline `{name}` has {} rows but {} replicates were requested",
                sel.rows(),
                config.reps
            )));
        }
    }
    let mut bs = vec![config.b];
    if config.b != 0.0 {
        bs.push(0.0);
    }
    let per_rep: Vec<Result<Vec<ReplicateRow>>> = (0..config.reps)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(config.seed, r);
            let sim = generate(config.scenario, config.setting, seed)?;
            let mut rows = Vec::new();
            for &b in &bs {
                let run = RunConfig {
                    b,
                    seed: derive_seed(seed, 1),
                    ..config.clone()
                };
                let summary = fit(&run, &sim.train, None)?;
                let (gamma, _) = median_probability_model(&summary);
                let metrics = evaluate_selection(
                    &gamma,
                    Some(&summary.inclusion_probs),
                    &sim.truth.gamma0,
                    &sim.train,
                    Some(&sim.test),
                )?;
                rows.push(ReplicateRow {
                    method: method_name(b),
                    rep: r + 1,
                    seed,
                    metrics,
                });
            }
            for (name, sel) in baselines {
                rows.push(ReplicateRow {
                    method: name.clone(),
                    rep: r + 1,
                    seed,
                    metrics: evaluate_baseline(sel.row(r), &sim)?,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    let table = aggregate(&rows);
    Ok(ReplicateReport { rows, table })
}

fn evaluate_baseline(row: &[f64], sim: &Simulation) -> Result<MetricsFile> {
    let gamma = VariableIndicator::from_bits(row.iter().map(|&v| v != 0.0).collect());
    evaluate_selection(&gamma, None, &sim.truth.gamma0, &sim.train, Some(&sim.test))
}

/// Mean of each metric per method, accumulated in replicate order.
pub fn aggregate(rows: &[ReplicateRow]) -> Vec<(String, MetricsFile)> {
    let mut methods: Vec<String> = Vec::new();
    for row in rows {
        if !methods.contains(&row.method) {
            methods.push(row.method.clone());
        }
    }
    methods
        .into_iter()
        .map(|method| {
            let mut sums = [0.0; 6];
            let mut counts = [0usize; 6];
            for row in rows.iter().filter(|r| r.method == method) {
                for (k, v) in row.metrics.values().into_iter().enumerate() {
                    if let Some(v) = v {
                        sums[k] += v;
                        counts[k] += 1;
                    }
                }
            }
            let means =
                std::array::from_fn(|k| (counts[k] > 0).then(|| sums[k] / counts[k] as f64));
            (method, MetricsFile::from_values(means))
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn table_csv(table: &[(String, MetricsFile)]) -> String {
    let mut out = format!("method,{}\n", MetricsFile::COLUMNS.join(","));
    for (method, m) in table {
        let cells: Vec<String> = m.values().into_iter().map(cell).collect();
        out.push_str(&format!("{method},{}\n", cells.join(",")));
    }
    out
}

pub fn replicates_csv(rows: &[ReplicateRow]) -> String {
    let mut out = format!("method,rep,seed,{}\n", MetricsFile::COLUMNS.join(","));
    for row in rows {
        let cells: Vec<String> = row.metrics.values().into_iter().map(cell).collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.method,
            row.rep,
            row.seed,
            cells.join(",")
        ));
    }
    out
}

fn file_stem(method: &str) -> String {
    method
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect::<String>()
        .replace("_b_", "_b")
}

struct ManifestBuilder {
    command: &'static str,
    config: RunConfig,
    inputs: Vec<PathBuf>,
    artifacts: Vec<String>,
    start: Instant,
}

impl ManifestBuilder {
    fn new(command: &'static str, config: &RunConfig) -> Self {
        Self {
            command,
            config: config.clone(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
            start: Instant::now(),
        }
    }

    fn write(&mut self, out: &Path, name: &str, text: &str) -> Result<()> {
        io::write_text(&out.join(name), text)?;
        self.artifacts.push(name.to_owned());
        Ok(())
    }

    fn finish(self, out: &Path) -> Result<()> {
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: self.command.to_owned(),
            config: self
                .config
                .echo()
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v))
                .collect(),
            seed: self.config.seed,
            inputs: self.inputs,
            artifacts: self.artifacts,
            runtime_seconds: self.start.elapsed().as_secs_f64(),
        };
        io::write_json(&out.join("manifest.json"), &manifest)
    }
}

fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn matrix_text(m: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let cells: Vec<String> = m.row(r).iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn vector_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}\n")).collect()
}

/// Writes `X.csv`, `Y.csv`, `X_test.csv`, `Y_test.csv` and `truth.json`.
pub fn cmd_simulate(config: &RunConfig, out: &Path) -> Result<()> {
    config.validate()?;
    let mut m = ManifestBuilder::new("simulate", config);
    let sim = generate(config.scenario, config.setting, config.seed)?;
    m.write(out, "X.csv", &matrix_text(sim.train.x()))?;
    m.write(out, "Y.csv", &vector_text(sim.train.y()))?;
    m.write(out, "X_test.csv", &matrix_text(sim.test.x()))?;
    m.write(out, "Y_test.csv", &vector_text(sim.test.y()))?;
    m.write(
        out,
        "truth.json",
        &json_text(&TruthFile::from_truth(&sim.truth)),
    )?;
    m.finish(out)
}

pub fn load_dataset(x: &Path, y: &Path) -> Result<Dataset> {
    let xm = io::read_matrix(x)?;
    let yv = io::read_vector(y)?;
    Ok(Dataset::new(xm, yv)?)
}

/// Writes `summary.json` and `dag.csv` (the median probability model).
pub fn cmd_fit(
    config: &RunConfig,
    x: &Path,
    y: &Path,
    out: &Path,
    trace: Option<&Path>,
) -> Result<SummaryFile> {
    config.validate()?;
    let mut m = ManifestBuilder::new("fit", config);
    m.inputs = vec![x.to_owned(), y.to_owned()];
    let data = load_dataset(x, y)?;
    let summary = match trace {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            let s = fit(config, &data, Some(&mut w))?;
            w.flush().map_err(|e| Error::io(path, e))?;
            s
        }
        None => fit(config, &data, None)?,
    };
    let file = SummaryFile::new(&summary, config.iters, config.burnin);
    let (_, dag) = median_probability_model(&summary);
    m.write(out, "summary.json", &json_text(&file))?;
    m.write(out, "dag.csv", &io::dag_csv(&dag))?;
    m.finish(out)?;
    Ok(file)
}

pub struct EvaluateInputs<'a> {
    pub summary: &'a Path,
    pub truth: &'a Path,
    pub x: &'a Path,
    pub y: &'a Path,
    pub test: Option<(&'a Path, &'a Path)>,
}

/// Writes `metrics.json`.
pub fn cmd_evaluate(
    config: &RunConfig,
    inputs: &EvaluateInputs<'_>,
    out: &Path,
) -> Result<MetricsFile> {
    let mut m = ManifestBuilder::new("evaluate", config);
    m.inputs = vec![
        inputs.summary.to_owned(),
        inputs.truth.to_owned(),
        inputs.x.to_owned(),
        inputs.y.to_owned(),
    ];
    let summary: SummaryFile = io::read_json(inputs.summary)?;
    let truth: TruthFile = io::read_json(inputs.truth)?;
    let train = load_dataset(inputs.x, inputs.y)?;
    let test = match inputs.test {
        Some((x, y)) => {
            m.inputs.extend([x.to_owned(), y.to_owned()]);
            Some(load_dataset(x, y)?)
        }
        None => None,
    };
    let metrics = evaluate(&summary, &truth, &train, test.as_ref())?;
    m.write(out, "metrics.json", &json_text(&metrics))?;
    m.finish(out)?;
    Ok(metrics)
}

/// Writes `table.csv`, `replicates.csv` and `rep_NNN/metrics_<method>.json`.
pub fn cmd_replicate(
    config: &RunConfig,
    baselines: &[(String, PathBuf)],
    out: &Path,
) -> Result<ReplicateReport> {
    config.validate()?;
    let mut m = ManifestBuilder::new("replicate", config);
    let mut loaded = Vec::new();
    for (name, path) in baselines {
        m.inputs.push(path.clone());
        loaded.push((name.clone(), io::read_matrix(path)?));
    }
    let report = replicate(config, &loaded)?;
    for row in &report.rows {
        let name = format!("rep_{:03}/metrics_{}.json", row.rep, file_stem(&row.method));
        m.write(out, &name, &json_text(&row.metrics))?;
    }
    m.write(out, "replicates.csv", &replicates_csv(&report.rows))?;
    m.write(out, "table.csv", &table_csv(&report.table))?;
    m.finish(out)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, rep: usize, mcc: f64, auc: Option<f64>) -> ReplicateRow {
        ReplicateRow {
            method: method.into(),
            rep,
            seed: 0,
            metrics: MetricsFile {
                sens: Some(1.0),
                spec: Some(0.5),
                auc,
                mcc: Some(mcc),
                n_error: Some(rep as f64),
                mspe: None,
            },
        }
    }

    #[test]
    fn aggregate_is_plain_mean() {
        let rows = vec![
            row("A", 1, 0.2, Some(0.9)),
            row("B", 1, 1.0, None),
            row("A", 2, 0.5, None),
            row("A", 3, 0.8, Some(0.7)),
        ];
        let t = aggregate(&rows);
        assert_eq!(t[0].0, "A");
        assert_eq!(t[0].1.mcc, Some((0.2 + 0.5 + 0.8) / 3.0));
        assert_eq!(t[0].1.auc, Some((0.9 + 0.7) / 2.0));
        assert_eq!(t[0].1.n_error, Some(2.0));
        assert_eq!(t[0].1.mspe, None);
        assert_eq!(t[1].1.auc, None);
        let csv = table_csv(&t);
        assert!(csv.starts_with("method,Sens,Spec,AUC,MCC,#Error,MSPE\nA,1,0.5,"));
        assert!(csv.ends_with("B,1,0.5,,1,1,\n"));
    }

    #[test]
    fn file_stems() {
        assert_eq!(file_stem("Joint b=0.5"), "joint_b0.5");
        assert_eq!(file_stem("Joint b=0"), "joint_b0");
    }
}
