//! Joint unnormalized log posterior of `(γ, D)` and exact enumeration.
//!
//! The score is
//!
//! ```text
//! log π(γ | D) + log π(D) + [log z_D(U + XᵀX, n + α) − log z_D(U, α)] + log m(Y | X_γ)
//! ```
//!
//! Every term except the marginal likelihood splits over DAG columns once the
//! MRF quadratic form is written as `2·Σ_edges γ_child·γ_parent`. For fixed
//! `γ` the posterior over DAGs is therefore a product over columns, which is
//! what makes exhaustive enumeration and parallel column updates cheap.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write as _;

use crate::dag_wishart::column_log_z;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::{log_prior_column, Adjacency, Dag};
use crate::linalg::Matrix;
use crate::math::{self, LogSumExp};
use crate::spike_slab::{log_marginal_for, mrf_from_counts, Hyperparameters, VariableIndicator};

pub const DEFAULT_ENUMERATION_LIMIT: usize = 6;
/// Hard cap for the factorized exact posterior (`γ` masks are `u32`).
pub const EXACT_LIMIT: usize = 16;

/// The joint score with its parts. `log_score` is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointScore {
    pub log_score: f64,
    /// `log π(γ | D)` without its normalizer.
    pub log_prior_gamma: f64,
    pub log_prior_dag: f64,
    /// `log z_D(Ũ, α̃) − log z_D(U, α)`.
    pub delta_log_z: f64,
    pub log_marginal: f64,
}

impl JointScore {
    fn from_parts(
        log_prior_gamma: f64,
        log_prior_dag: f64,
        delta_log_z: f64,
        log_marginal: f64,
    ) -> Self {
        Self {
            log_score: log_prior_gamma + log_prior_dag + delta_log_z + log_marginal,
            log_prior_gamma,
            log_prior_dag,
            delta_log_z,
            log_marginal,
        }
    }
}

/// Per-column parts of the score that do not involve `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnTerm {
    /// Erdős–Rényi term, `-inf` past the complexity bound.
    pub log_prior: f64,
    pub delta_log_z: f64,
}

impl ColumnTerm {
    #[inline]
    pub fn total(&self) -> f64 {
        self.log_prior + self.delta_log_z
    }
}

/// Precomputed prior and posterior scale matrices for one dataset.
#[derive(Debug, Clone)]
pub struct ScoreContext<'a> {
    data: &'a Dataset,
    hyper: &'a Hyperparameters,
    prior_u: Matrix,
    post_u: Matrix,
}

impl<'a> ScoreContext<'a> {
    pub fn new(data: &'a Dataset, hyper: &'a Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        let prior_u = hyper.scale_matrix(data.p())?;
        let post_u = prior_u.add(data.gram())?;
        Ok(Self {
            data,
            hyper,
            prior_u,
            post_u,
        })
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn hyper(&self) -> &'a Hyperparameters {
        self.hyper
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn column_log_prior(&self, i: usize, nu: usize) -> f64 {
        if nu >= self.hyper.r {
            return f64::NEG_INFINITY;
        }
        log_prior_column(nu, self.p() - 1 - i, self.hyper.q)
    }

    pub fn column_delta_log_z(&self, i: usize, parents: &[usize]) -> Result<f64> {
        let alpha = parents.len() as f64 + self.hyper.alpha_offset;
        let n = self.data.n() as f64;
        let post = column_log_z(&self.post_u, i, parents, alpha + n)?;
        let prior = column_log_z(&self.prior_u, i, parents, alpha)?;
        Ok(post - prior)
    }

    pub fn column_term(&self, i: usize, parents: &[usize]) -> Result<ColumnTerm> {
        Ok(ColumnTerm {
            log_prior: self.column_log_prior(i, parents.len()),
            delta_log_z: self
                .column_delta_log_z(i, parents)
                .map_err(|e| e.in_component("dag_wishart"))?,
        })
    }

    pub fn log_marginal(&self, selected: &[usize]) -> Result<f64> {
        log_marginal_for(self.data, selected, self.hyper).map_err(|e| e.in_component("spike_slab"))
    }

    pub fn log_mrf(&self, size: usize, quad: usize) -> f64 {
        mrf_from_counts(size, quad, self.hyper)
    }

    pub fn score(&self, gamma: &VariableIndicator, dag: &Dag) -> Result<JointScore> {
        let p = self.p();
        if gamma.p() != p || dag.p() != p {
            return Err(Error::DimensionMismatch(alloc::format!(
                "gamma has {} entries, DAG has {} vertices, data has p = {p}",
                gamma.p(),
                dag.p()
            )));
        }
        let quad = dag.adjacency().quadratic_form(gamma.bits());
        let log_prior_gamma = self.log_mrf(gamma.size(), quad);
        let mut log_prior_dag = 0.0;
        let mut delta_log_z = 0.0;
        for i in 0..p {
            let term = self.column_term(i, dag.parents(i))?;
            log_prior_dag += term.log_prior;
            delta_log_z += term.delta_log_z;
        }
        let log_marginal = self.log_marginal(&gamma.indices())?;
        Ok(JointScore::from_parts(
            log_prior_gamma,
            log_prior_dag,
            delta_log_z,
            log_marginal,
        ))
    }
}

/// Unnormalized joint log posterior of `(gamma, dag)`.
pub fn log_joint_score(
    gamma: &VariableIndicator,
    dag: &Dag,
    data: &Dataset,
    hyper: &Hyperparameters,
) -> Result<JointScore> {
    ScoreContext::new(data, hyper)?.score(gamma, dag)
}

/// Whether every edge of `g0` joins two included variables.
pub fn check_condition_a(gamma0: &VariableIndicator, g0: &Adjacency) -> Result<bool> {
    let p = g0.p();
    if gamma0.p() != p {
        return Err(Error::DimensionMismatch(
            "gamma and adjacency differ in p".into(),
        ));
    }
    Ok((0..p).all(|i| (0..p).all(|j| !g0.get(i, j) || (gamma0.get(i) && gamma0.get(j)))))
}

/// Bit layout for small-`p` enumeration: `γ` as a `u32` with bit `j` for
/// variable `j`; a DAG as a `u64` with one bit per ordered pair `(child, parent)`,
/// columns laid out one after another.
#[derive(Debug, Clone)]
pub struct EdgeCodec {
    p: usize,
    offsets: Vec<usize>,
}

impl EdgeCodec {
    pub fn new(p: usize) -> Self {
        let mut offsets = Vec::with_capacity(p);
        let mut acc = 0;
        for i in 0..p {
            offsets.push(acc);
            acc += p - 1 - i;
        }
        Self { p, offsets }
    }

    pub fn n_edges(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2
    }

    /// Bits of column `i` inside a DAG mask, given a mask over its candidates.
    #[inline]
    pub fn column_bits(&self, i: usize, local: u64) -> u64 {
        local << self.offsets[i]
    }

    #[inline]
    pub fn local_mask(&self, i: usize, dag_mask: u64) -> u64 {
        let width = self.p - 1 - i;
        (dag_mask >> self.offsets[i]) & ((1u64 << width) - 1)
    }

    pub fn encode(&self, dag: &Dag) -> u64 {
        dag.edges()
            .map(|(c, j)| 1u64 << (self.offsets[c] + j - c - 1))
            .fold(0, |a, b| a | b)
    }

    pub fn decode(&self, mask: u64) -> Dag {
        let parents = (0..self.p)
            .map(|i| {
                let local = self.local_mask(i, mask);
                (0..self.p - 1 - i)
                    .filter(|&k| local >> k & 1 == 1)
                    .map(|k| i + 1 + k)
                    .collect()
            })
            .collect();
        Dag::from_parents(parents).expect("decoded parents respect the ordering")
    }
}

pub fn gamma_mask(gamma: &VariableIndicator) -> u32 {
    gamma.indices().iter().fold(0u32, |m, &j| m | 1 << j)
}

pub fn gamma_from_mask(p: usize, mask: u32) -> VariableIndicator {
    VariableIndicator::from_bits((0..p).map(|j| mask >> j & 1 == 1).collect())
}

/// Order of indicator vectors read from position 0, with `0 < 1`.
#[inline]
fn lex_key(mask: u64, width: usize) -> u64 {
    if width == 0 {
        0
    } else {
        mask.reverse_bits() >> (64 - width)
    }
}

#[derive(Debug, Clone)]
struct ColumnEntry {
    /// Mask over candidates `i+1..p` (bit `k` is vertex `i+1+k`).
    local: u64,
    /// Same set as a mask over all vertices.
    vertices: u32,
    base: f64,
}

/// Exact posterior over all `(γ, D)` pairs, kept in factorized form.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    p: usize,
    b: f64,
    /// Per `γ` mask: MRF base term plus the marginal likelihood.
    gamma_terms: Vec<f64>,
    columns: Vec<Vec<ColumnEntry>>,
    /// Per `γ` mask: the log of the unnormalized mass summed over DAGs.
    gamma_mass: Vec<f64>,
    log_normalizer: f64,
}

impl ExactPosterior {
    pub fn new(data: &Dataset, hyper: &Hyperparameters) -> Result<Self> {
        let p = data.p();
        if p > EXACT_LIMIT {
            return Err(Error::EnumerationLimit {
                p,
                limit: EXACT_LIMIT,
            });
        }
        let ctx = ScoreContext::new(data, hyper)?;
        let mut columns = Vec::with_capacity(p);
        for i in 0..p {
            let width = p - 1 - i;
            let mut entries = Vec::with_capacity(1 << width);
            for local in 0u64..(1u64 << width) {
                let parents: Vec<usize> = (0..width)
                    .filter(|&k| local >> k & 1 == 1)
                    .map(|k| i + 1 + k)
                    .collect();
                let prior = ctx.column_log_prior(i, parents.len());
                let base = if prior == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    prior
                        + ctx
                            .column_delta_log_z(i, &parents)
                            .map_err(|e| e.in_component("dag_wishart"))?
                };
                let vertices = parents.iter().fold(0u32, |m, &j| m | 1 << j);
                entries.push(ColumnEntry {
                    local,
                    vertices,
                    base,
                });
            }
            columns.push(entries);
        }
        let n_gamma = 1usize << p;
        let gamma_terms = map_indices(n_gamma, |mask| {
            let gamma = gamma_from_mask(p, mask as u32);
            let mrf = ctx.log_mrf(gamma.size(), 0);
            if mrf == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            Ok(mrf + ctx.log_marginal(&gamma.indices())?)
        })?;
        let mut out = Self {
            p,
            b: hyper.b,
            gamma_terms,
            columns,
            gamma_mass: Vec::new(),
            log_normalizer: 0.0,
        };
        let masses = map_indices(n_gamma, |mask| Ok(out.gamma_log_mass(mask as u32)))?;
        let mut acc = LogSumExp::default();
        for &m in &masses {
            acc.push(m);
        }
        out.gamma_mass = masses;
        out.log_normalizer = acc.value();
        Ok(out)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    #[inline]
    fn entry_score(&self, i: usize, entry: &ColumnEntry, gamma: u32) -> f64 {
        if gamma >> i & 1 == 1 {
            entry.base + 2.0 * self.b * (entry.vertices & gamma).count_ones() as f64
        } else {
            entry.base
        }
    }

    fn column_log_mass(&self, i: usize, gamma: u32) -> f64 {
        let mut acc = LogSumExp::default();
        for e in &self.columns[i] {
            acc.push(self.entry_score(i, e, gamma));
        }
        acc.value()
    }

    fn gamma_log_mass(&self, gamma: u32) -> f64 {
        let base = self.gamma_terms[gamma as usize];
        if base == f64::NEG_INFINITY {
            return base;
        }
        base + (0..self.p)
            .map(|i| self.column_log_mass(i, gamma))
            .sum::<f64>()
    }

    /// Unnormalized log score of one pair, assembled from the factorized terms.
    pub fn log_score_mask(&self, gamma: u32, dag: u64, codec: &EdgeCodec) -> f64 {
        let mut s = self.gamma_terms[gamma as usize];
        for i in 0..self.p {
            let local = codec.local_mask(i, dag);
            s += self.entry_score(i, &self.columns[i][local as usize], gamma);
        }
        s
    }

    pub fn log_probability(&self, gamma: &VariableIndicator, dag: &Dag) -> f64 {
        let codec = EdgeCodec::new(self.p);
        self.log_score_mask(gamma_mask(gamma), codec.encode(dag), &codec) - self.log_normalizer
    }

    pub fn probability(&self, gamma: &VariableIndicator, dag: &Dag) -> f64 {
        math::exp(self.log_probability(gamma, dag))
    }

    /// Posterior mode; exact ties go to the lexicographically smallest indicator
    /// vectors (`γ` first, then edge indicators in column order).
    pub fn mode(&self) -> (VariableIndicator, Dag, f64) {
        let codec = EdgeCodec::new(self.p);
        let mut best: Option<(f64, u64, u32, u64)> = None;
        for gamma in 0..(1u32 << self.p) {
            let base = self.gamma_terms[gamma as usize];
            if base == f64::NEG_INFINITY {
                continue;
            }
            let mut score = base;
            let mut dag = 0u64;
            for i in 0..self.p {
                let width = self.p - 1 - i;
                let mut pick: Option<(f64, u64)> = None;
                for e in &self.columns[i] {
                    let s = self.entry_score(i, e, gamma);
                    if s == f64::NEG_INFINITY {
                        continue;
                    }
                    let better = match pick {
                        None => true,
                        Some((bs, bl)) => {
                            s > bs || (s == bs && lex_key(e.local, width) < lex_key(bl, width))
                        }
                    };
                    if better {
                        pick = Some((s, e.local));
                    }
                }
                let (s, local) =
                    pick.expect("the empty parent set is always admissible when r > 0");
                score += s;
                dag |= codec.column_bits(i, local);
            }
            let key = lex_key(u64::from(gamma), self.p);
            let better = match best {
                None => true,
                Some((bs, bk, _, _)) => score > bs || (score == bs && key < bk),
            };
            if better {
                best = Some((score, key, gamma, dag));
            }
        }
        let (score, _, gamma, dag) = best.expect("the empty model is always admissible when r > 0");
        (gamma_from_mask(self.p, gamma), codec.decode(dag), score)
    }

    /// Marginal posterior inclusion probability of each variable.
    pub fn inclusion_marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (gamma, &mass) in self.gamma_mass.iter().enumerate() {
            let w = math::exp(mass - self.log_normalizer);
            for (j, o) in out.iter_mut().enumerate() {
                if gamma >> j & 1 == 1 {
                    *o += w;
                }
            }
        }
        out
    }

    /// `out[i][j]`: marginal probability that `j` is a parent of `i`.
    pub fn edge_marginals(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.p]; self.p];
        for (gamma, &mass) in self.gamma_mass.iter().enumerate() {
            if mass == f64::NEG_INFINITY {
                continue;
            }
            let w = math::exp(mass - self.log_normalizer);
            for i in 0..self.p {
                let col = self.column_log_mass(i, gamma as u32);
                for e in &self.columns[i] {
                    let pe = w * math::exp(self.entry_score(i, e, gamma as u32) - col);
                    for k in 0..self.p - 1 - i {
                        if e.local >> k & 1 == 1 {
                            out[i][i + 1 + k] += pe;
                        }
                    }
                }
            }
        }
        out
    }

    /// Posterior mass of each `γ` summed over DAGs, indexed by `γ` mask.
    pub fn gamma_probabilities(&self) -> Vec<f64> {
        self.gamma_mass
            .iter()
            .map(|m| math::exp(m - self.log_normalizer))
            .collect()
    }
}

#[cfg(feature = "std")]
fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
fn map_indices<T>(n: usize, f: impl Fn(usize) -> Result<T>) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorEntry {
    pub gamma: u32,
    pub dag: u64,
    pub log_score: f64,
    pub probability: f64,
}

/// Every admissible `(γ, D)` pair with its normalized probability.
#[derive(Debug, Clone)]
pub struct PosteriorTable {
    p: usize,
    entries: Vec<PosteriorEntry>,
    argmax: usize,
    log_normalizer: f64,
}

impl PosteriorTable {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn entries(&self) -> &[PosteriorEntry] {
        &self.entries
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn codec(&self) -> EdgeCodec {
        EdgeCodec::new(self.p)
    }

    pub fn argmax(&self) -> (VariableIndicator, Dag, &PosteriorEntry) {
        let e = &self.entries[self.argmax];
        (
            gamma_from_mask(self.p, e.gamma),
            self.codec().decode(e.dag),
            e,
        )
    }

    /// Probability of a pair; zero outside the admissible domain.
    pub fn probability(&self, gamma: &VariableIndicator, dag: &Dag) -> f64 {
        let key = (gamma_mask(gamma), self.codec().encode(dag));
        self.entries
            .binary_search_by(|e| (e.gamma, e.dag).cmp(&key))
            .map_or(0.0, |k| self.entries[k].probability)
    }

    pub fn inclusion_marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for e in &self.entries {
            for (j, o) in out.iter_mut().enumerate() {
                if e.gamma >> j & 1 == 1 {
                    *o += e.probability;
                }
            }
        }
        out
    }

    /// CSV with header `gamma,dag,log_score,probability`. The DAG column lists
    /// 1-based `child:parent` pairs separated by `;`.
    pub fn to_csv(&self) -> String {
        let codec = self.codec();
        let mut out = String::from("gamma,dag,log_score,probability\n");
        for e in &self.entries {
            let gamma = gamma_from_mask(self.p, e.gamma).to_bitstring();
            let dag = codec.decode(e.dag);
            let edges: Vec<String> = dag
                .edges()
                .map(|(c, j)| alloc::format!("{}:{}", c + 1, j + 1))
                .collect();
            let _ = writeln!(
                out,
                "{},{},{:e},{:e}",
                gamma,
                edges.join(";"),
                e.log_score,
                e.probability
            );
        }
        out
    }
}

/// Materializes the full posterior table for `p ≤ limit`.
pub fn enumerate_posterior(
    data: &Dataset,
    hyper: &Hyperparameters,
    limit: usize,
) -> Result<PosteriorTable> {
    let p = data.p();
    let limit = limit.min(11);
    if p > limit {
        return Err(Error::EnumerationLimit { p, limit });
    }
    let exact = ExactPosterior::new(data, hyper)?;
    let codec = EdgeCodec::new(p);
    let per_gamma = map_indices(1usize << p, |gamma| {
        let gamma = gamma as u32;
        let mut rows = Vec::new();
        if exact.gamma_terms[gamma as usize] == f64::NEG_INFINITY {
            return Ok(rows);
        }
        let admissible: Vec<Vec<&ColumnEntry>> = exact
            .columns
            .iter()
            .map(|c| c.iter().filter(|e| e.base != f64::NEG_INFINITY).collect())
            .collect();
        let mut cursor = vec![0usize; p];
        loop {
            let mut score = exact.gamma_terms[gamma as usize];
            let mut dag = 0u64;
            for i in 0..p {
                let e = admissible[i][cursor[i]];
                score += exact.entry_score(i, e, gamma);
                dag |= codec.column_bits(i, e.local);
            }
            rows.push(PosteriorEntry {
                gamma,
                dag,
                log_score: score,
                probability: 0.0,
            });
            // Odometer over columns, last column fastest.
            let mut k = p;
            loop {
                if k == 0 {
                    return Ok(rows);
                }
                k -= 1;
                cursor[k] += 1;
                if cursor[k] < admissible[k].len() {
                    break;
                }
                cursor[k] = 0;
            }
        }
    })?;
    let mut entries: Vec<PosteriorEntry> = per_gamma.into_iter().flatten().collect();
    entries.sort_by_key(|e| (e.gamma, e.dag));
    let mut acc = LogSumExp::default();
    for e in &entries {
        acc.push(e.log_score);
    }
    let log_normalizer = acc.value();
    let n_edges = codec.n_edges();
    let mut argmax = 0;
    for e in entries.iter_mut() {
        e.probability = math::exp(e.log_score - log_normalizer);
    }
    for k in 1..entries.len() {
        let (a, b) = (&entries[argmax], &entries[k]);
        let ord = b
            .log_score
            .partial_cmp(&a.log_score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                (lex_key(u64::from(a.gamma), p), lex_key(a.dag, n_edges))
                    .cmp(&(lex_key(u64::from(b.gamma), p), lex_key(b.dag, n_edges)))
            });
        if ord == Ordering::Greater {
            argmax = k;
        }
    }
    Ok(PosteriorTable {
        p,
        entries,
        argmax,
        log_normalizer,
    })
}
