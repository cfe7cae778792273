//! Metropolis-Hastings-within-Gibbs over `(γ, D)`.
//!
//! One sweep makes one add/delete move on `γ` and then, by default, one
//! add/delete move on the parent set of every DAG column. Given `γ`, the DAG
//! columns are conditionally independent (every DAG-dependent term of the
//! score splits over columns), so the column moves are exact Gibbs blocks and
//! may run in parallel. Each column draws from its own random stream, which
//! keeps the chain bit-identical for any number of workers.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::dag_wishart::ColumnMemo;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::math;
use crate::rng::{stream, StreamRng};
use crate::scoring::{ColumnTerm, JointScore, ScoreContext};
use crate::spike_slab::{Hyperparameters, VariableIndicator};

const MEMO_CAPACITY: usize = 256;
const DIVERGENCE_TOL: f64 = 1e-6;

/// How DAG moves are scheduled within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DagMove {
    /// One move per column per sweep.
    PerColumn,
    /// One move per sweep on a uniformly chosen column.
    WholeDag,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Empty model and empty DAG.
    Empty,
    /// Empty model; each column takes as parents the later variables whose
    /// absolute sample correlation exceeds `threshold` (strongest first, capped
    /// by the complexity bound).
    Correlation {
        threshold: f64,
    },
    Given {
        gamma: VariableIndicator,
        dag: Dag,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainControl {
    /// Total sweeps, burn-in included.
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,
    /// Threads for the column updates. Results do not depend on it.
    pub workers: usize,
    pub init: Init,
    pub dag_move: DagMove,
    /// Compare the cached score with a full recomputation every this many
    /// sweeps; `0` disables the check.
    pub check_every: usize,
}

impl Default for ChainControl {
    fn default() -> Self {
        Self {
            iters: 10_000,
            burnin: 5_000,
            seed: 0,
            workers: 1,
            init: Init::Empty,
            dag_move: DagMove::PerColumn,
            check_every: 1_000,
        }
    }
}

/// Log probability of an add (or delete) move from a vector with `size` ones
/// out of `m` positions under the flip kernel.
fn kernel_log_prob(size: usize, m: usize, add: bool) -> f64 {
    if add {
        debug_assert!(size < m);
        if size == 0 {
            -math::ln(m as f64)
        } else {
            -math::LN_2 - math::ln((m - size) as f64)
        }
    } else {
        debug_assert!(size > 0);
        if size == m {
            -math::ln(m as f64)
        } else {
            -math::LN_2 - math::ln(size as f64)
        }
    }
}

struct FlipMove {
    add: bool,
    /// Rank of the chosen position among the zeros (add) or the ones (delete).
    rank: usize,
    log_q_forward: f64,
    log_q_backward: f64,
}

/// With probability ½ turn a random one into a zero, otherwise a random zero
/// into a one; an all-zero or all-one vector takes its only possible move.
fn flip_move<R: Rng + ?Sized>(size: usize, m: usize, rng: &mut R) -> FlipMove {
    debug_assert!(m > 0 && size <= m);
    let add = if size == 0 {
        true
    } else if size == m {
        false
    } else {
        rng.random::<f64>() >= 0.5
    };
    let rank = if add {
        rng.random_range(0..m - size)
    } else {
        rng.random_range(0..size)
    };
    let after = if add { size + 1 } else { size - 1 };
    FlipMove {
        add,
        rank,
        log_q_forward: kernel_log_prob(size, m, add),
        log_q_backward: kernel_log_prob(after, m, !add),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaProposal {
    pub gamma: VariableIndicator,
    pub flipped: usize,
    pub log_q_forward: f64,
    pub log_q_backward: f64,
}

pub fn propose_gamma<R: Rng + ?Sized>(gamma: &VariableIndicator, rng: &mut R) -> GammaProposal {
    let p = gamma.p();
    assert!(p > 0, "cannot propose on an empty indicator");
    let mv = flip_move(gamma.size(), p, rng);
    let flipped = (0..p)
        .filter(|&j| gamma.get(j) != mv.add)
        .nth(mv.rank)
        .expect("rank is within the eligible positions");
    GammaProposal {
        gamma: gamma.flipped(flipped),
        flipped,
        log_q_forward: mv.log_q_forward,
        log_q_backward: mv.log_q_backward,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DagProposal {
    pub dag: Dag,
    /// Toggled parent, or `None` for the no-op on the last column.
    pub toggled: Option<usize>,
    pub log_q_forward: f64,
    pub log_q_backward: f64,
}

/// The same flip kernel on the parent indicators of column `i` over `i+1..p`.
pub fn propose_dag_column<R: Rng + ?Sized>(dag: &Dag, i: usize, rng: &mut R) -> DagProposal {
    let p = dag.p();
    let m = p.saturating_sub(i + 1);
    if m == 0 {
        return DagProposal {
            dag: dag.clone(),
            toggled: None,
            log_q_forward: 0.0,
            log_q_backward: 0.0,
        };
    }
    let mv = flip_move(dag.nu(i), m, rng);
    let target = pick_candidate(dag.parents(i), i, p, &mv);
    DagProposal {
        dag: dag
            .column_flip(i, target)
            .expect("candidate is larger than the child"),
        toggled: Some(target),
        log_q_forward: mv.log_q_forward,
        log_q_backward: mv.log_q_backward,
    }
}

fn pick_candidate(parents: &[usize], i: usize, p: usize, mv: &FlipMove) -> usize {
    if mv.add {
        (i + 1..p)
            .filter(|j| parents.binary_search(j).is_err())
            .nth(mv.rank)
            .expect("rank is within the non-parents")
    } else {
        parents[mv.rank]
    }
}

#[derive(Debug, Clone)]
struct ColumnState {
    parents: Vec<usize>,
    term: ColumnTerm,
    memo: ColumnMemo,
    proposed: u64,
    accepted: u64,
}

impl ColumnState {
    /// One MH step on this column given `γ`. Returns whether the move was accepted.
    fn step(
        &mut self,
        i: usize,
        gamma: &[bool],
        ctx: &ScoreContext<'_>,
        rng: &mut StreamRng,
    ) -> Result<bool> {
        let p = ctx.p();
        let m = p - 1 - i;
        if m == 0 {
            return Ok(false);
        }
        let mv = flip_move(self.parents.len(), m, rng);
        let target = pick_candidate(&self.parents, i, p, &mv);
        let log_u = math::ln(rng.random::<f64>());
        self.proposed += 1;
        let new_parents = toggled(&self.parents, target);
        let new_prior = ctx.column_log_prior(i, new_parents.len());
        if new_prior == f64::NEG_INFINITY {
            return Ok(false);
        }
        let new_dz = self
            .memo
            .get_or_try_insert(&new_parents, || ctx.column_delta_log_z(i, &new_parents))
            .map_err(|e| e.in_component("dag_wishart"))?;
        let b = ctx.hyper().b;
        let mrf = if gamma[i] && gamma[target] {
            if mv.add {
                2.0 * b
            } else {
                -2.0 * b
            }
        } else {
            0.0
        };
        let log_ratio =
            (new_prior + new_dz) - self.term.total() + mrf + mv.log_q_backward - mv.log_q_forward;
        if log_u < log_ratio {
            self.parents = new_parents;
            self.term = ColumnTerm {
                log_prior: new_prior,
                delta_log_z: new_dz,
            };
            self.accepted += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

fn toggled(parents: &[usize], target: usize) -> Vec<usize> {
    let mut out = parents.to_vec();
    match out.binary_search(&target) {
        Ok(k) => {
            out.remove(k);
        }
        Err(k) => out.insert(k, target),
    }
    out
}

/// Current `(γ, D)` with cached score components.
#[derive(Debug, Clone)]
pub struct ChainState {
    gamma: Vec<bool>,
    selected: Vec<usize>,
    /// `γᵀGγ`.
    quad: usize,
    log_marginal: f64,
    columns: Vec<ColumnState>,
    iteration: usize,
    gamma_proposed: u64,
    gamma_accepted: u64,
}

impl ChainState {
    pub fn gamma(&self) -> VariableIndicator {
        VariableIndicator::from_bits(self.gamma.clone())
    }

    pub fn gamma_bits(&self) -> &[bool] {
        &self.gamma
    }

    pub fn dag(&self) -> Dag {
        Dag::from_parents(self.columns.iter().map(|c| c.parents.clone()).collect())
            .expect("chain parents respect the ordering")
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.columns[i].parents
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn edge_count(&self) -> usize {
        self.columns.iter().map(|c| c.parents.len()).sum()
    }

    /// Cached score components.
    pub fn score(&self, ctx: &ScoreContext<'_>) -> JointScore {
        let log_prior_gamma = ctx.log_mrf(self.selected.len(), self.quad);
        let log_prior_dag: f64 = self.columns.iter().map(|c| c.term.log_prior).sum();
        let delta_log_z: f64 = self.columns.iter().map(|c| c.term.delta_log_z).sum();
        JointScore {
            log_score: log_prior_gamma + log_prior_dag + delta_log_z + self.log_marginal,
            log_prior_gamma,
            log_prior_dag,
            delta_log_z,
            log_marginal: self.log_marginal,
        }
    }

    fn recount_quad(&mut self) {
        let mut edges = 0;
        for (i, c) in self.columns.iter().enumerate() {
            if self.gamma[i] {
                edges += c.parents.iter().filter(|&&j| self.gamma[j]).count();
            }
        }
        self.quad = 2 * edges;
    }

    /// Included neighbours of `j` in the current DAG skeleton.
    fn active_neighbors(&self, j: usize) -> usize {
        let parents = self.columns[j]
            .parents
            .iter()
            .filter(|&&k| self.gamma[k])
            .count();
        let children = (0..j)
            .filter(|&c| self.gamma[c] && self.columns[c].parents.binary_search(&j).is_ok())
            .count();
        parents + children
    }
}

/// Per-sweep record, suitable for a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub iteration: usize,
    pub size: usize,
    pub edges: usize,
    pub log_score: f64,
    pub gamma_accepted: bool,
    pub dag_accepted: usize,
}

pub struct Sampler<'a> {
    ctx: ScoreContext<'a>,
    state: ChainState,
    gamma_rng: StreamRng,
    dag_rng: StreamRng,
    column_rngs: Vec<StreamRng>,
    dag_move: DagMove,
    check_every: usize,
    #[cfg(feature = "std")]
    pool: Option<rayon::ThreadPool>,
}

impl<'a> Sampler<'a> {
    pub fn new(
        data: &'a Dataset,
        hyper: &'a Hyperparameters,
        control: &ChainControl,
    ) -> Result<Self> {
        let ctx = ScoreContext::new(data, hyper)?;
        let p = data.p();
        if p == 0 {
            return Err(Error::InvalidControl("no covariates".into()));
        }
        let (gamma, dag) = initial_state(data, hyper, &control.init)?;
        let mut columns = Vec::with_capacity(p);
        for i in 0..p {
            let parents = dag.parents(i).to_vec();
            let term = ctx.column_term(i, &parents)?;
            let mut memo = ColumnMemo::new(MEMO_CAPACITY);
            memo.get_or_try_insert(&parents, || Ok(term.delta_log_z))?;
            columns.push(ColumnState {
                parents,
                term,
                memo,
                proposed: 0,
                accepted: 0,
            });
        }
        let selected = gamma.indices();
        let log_marginal = ctx.log_marginal(&selected)?;
        let mut state = ChainState {
            gamma: gamma.bits().to_vec(),
            selected,
            quad: 0,
            log_marginal,
            columns,
            iteration: 0,
            gamma_proposed: 0,
            gamma_accepted: 0,
        };
        state.recount_quad();
        let init_score = state.score(&ctx).log_score;
        if !init_score.is_finite() {
            return Err(Error::Initialization(init_score));
        }
        Ok(Self {
            ctx,
            state,
            gamma_rng: stream(control.seed, 0),
            dag_rng: stream(control.seed, p as u64 + 1),
            column_rngs: (0..p).map(|i| stream(control.seed, i as u64 + 1)).collect(),
            dag_move: control.dag_move,
            check_every: control.check_every,
            #[cfg(feature = "std")]
            pool: if control.workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(control.workers)
                        .build()
                        .map_err(|e| Error::InvalidControl(alloc::format!("thread pool: {e}")))?,
                )
            } else {
                None
            },
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn context(&self) -> &ScoreContext<'a> {
        &self.ctx
    }

    pub fn cached_score(&self) -> JointScore {
        self.state.score(&self.ctx)
    }

    /// Full recomputation of the current score.
    pub fn fresh_score(&self) -> Result<JointScore> {
        self.ctx.score(&self.state.gamma(), &self.state.dag())
    }

    /// Cached-score change from flipping variable `j`.
    pub fn delta_gamma_flip(&self, j: usize) -> Result<f64> {
        let s = &self.state;
        let add = !s.gamma[j];
        let size = if add {
            s.selected.len() + 1
        } else {
            s.selected.len() - 1
        };
        let act = 2 * s.active_neighbors(j);
        let quad = if add { s.quad + act } else { s.quad - act };
        let new_mrf = self.ctx.log_mrf(size, quad);
        if new_mrf == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let selected = toggled(&s.selected, j);
        let ml = self.ctx.log_marginal(&selected)?;
        Ok(new_mrf - self.ctx.log_mrf(s.selected.len(), s.quad) + ml - s.log_marginal)
    }

    /// Cached-score change from toggling `target` in the parents of `i`.
    pub fn delta_column_flip(&self, i: usize, target: usize) -> Result<f64> {
        let s = &self.state;
        let col = &s.columns[i];
        let new_parents = toggled(&col.parents, target);
        let new = self.ctx.column_term(i, &new_parents)?;
        if new.log_prior == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let add = new_parents.len() > col.parents.len();
        let mrf = if s.gamma[i] && s.gamma[target] {
            let b = self.ctx.hyper().b;
            if add {
                2.0 * b
            } else {
                -2.0 * b
            }
        } else {
            0.0
        };
        Ok(new.total() - col.term.total() + mrf)
    }

    fn gamma_step(&mut self) -> Result<bool> {
        let p = self.ctx.p();
        let s = &mut self.state;
        let mv = flip_move(s.selected.len(), p, &mut self.gamma_rng);
        let j = (0..p)
            .filter(|&j| s.gamma[j] != mv.add)
            .nth(mv.rank)
            .expect("rank is within the eligible positions");
        let log_u = math::ln(self.gamma_rng.random::<f64>());
        s.gamma_proposed += 1;
        let size = if mv.add {
            s.selected.len() + 1
        } else {
            s.selected.len() - 1
        };
        let act = 2 * s.active_neighbors(j);
        let quad = if mv.add { s.quad + act } else { s.quad - act };
        let new_mrf = self.ctx.log_mrf(size, quad);
        if new_mrf == f64::NEG_INFINITY {
            return Ok(false);
        }
        let selected = toggled(&s.selected, j);
        let ml = self.ctx.log_marginal(&selected)?;
        let log_ratio = new_mrf - self.ctx.log_mrf(s.selected.len(), s.quad) + ml - s.log_marginal
            + mv.log_q_backward
            - mv.log_q_forward;
        if log_u < log_ratio {
            s.gamma[j] = mv.add;
            s.selected = selected;
            s.quad = quad;
            s.log_marginal = ml;
            s.gamma_accepted += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn dag_step(&mut self) -> Result<usize> {
        let p = self.ctx.p();
        let accepted = match self.dag_move {
            DagMove::WholeDag => {
                if p < 2 {
                    0
                } else {
                    let i = self.dag_rng.random_range(0..p - 1);
                    let ok = self.state.columns[i].step(
                        i,
                        &self.state.gamma,
                        &self.ctx,
                        &mut self.dag_rng,
                    )?;
                    usize::from(ok)
                }
            }
            DagMove::PerColumn => self.column_sweep()?,
        };
        self.state.recount_quad();
        Ok(accepted)
    }

    fn column_sweep(&mut self) -> Result<usize> {
        let ctx = &self.ctx;
        let gamma = &self.state.gamma;
        let columns = &mut self.state.columns;
        let rngs = &mut self.column_rngs;
        #[cfg(feature = "std")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| {
                columns
                    .par_iter_mut()
                    .zip(rngs.par_iter_mut())
                    .enumerate()
                    .with_min_len(8)
                    .map(|(i, (col, rng))| col.step(i, gamma, ctx, rng).map(usize::from))
                    .try_reduce(|| 0, |a, b| Ok(a + b))
            });
        }
        let mut accepted = 0;
        for (i, (col, rng)) in columns.iter_mut().zip(rngs.iter_mut()).enumerate() {
            accepted += usize::from(col.step(i, gamma, ctx, rng)?);
        }
        Ok(accepted)
    }

    /// One sweep: a `γ` move followed by the DAG moves.
    pub fn gibbs_sweep(&mut self) -> Result<SweepRecord> {
        let gamma_accepted = self.gamma_step()?;
        let dag_accepted = self.dag_step()?;
        self.state.iteration += 1;
        let score = self.cached_score();
        if self.check_every > 0 && self.state.iteration.is_multiple_of(self.check_every) {
            let fresh = self.fresh_score()?;
            if !((score.log_score - fresh.log_score).abs() <= DIVERGENCE_TOL) {
                return Err(Error::CacheDivergence {
                    sweep: self.state.iteration,
                    cached: score.log_score,
                    fresh: fresh.log_score,
                });
            }
        }
        Ok(SweepRecord {
            iteration: self.state.iteration,
            size: self.state.selected.len(),
            edges: self.state.edge_count(),
            log_score: score.log_score,
            gamma_accepted,
            dag_accepted,
        })
    }

    pub fn gamma_acceptance(&self) -> f64 {
        ratio(self.state.gamma_accepted, self.state.gamma_proposed)
    }

    pub fn column_acceptance(&self) -> Vec<f64> {
        self.state
            .columns
            .iter()
            .map(|c| ratio(c.accepted, c.proposed))
            .collect()
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn initial_state(
    data: &Dataset,
    hyper: &Hyperparameters,
    init: &Init,
) -> Result<(VariableIndicator, Dag)> {
    let p = data.p();
    match init {
        Init::Empty => Ok((VariableIndicator::empty(p), Dag::empty(p))),
        Init::Given { gamma, dag } => {
            if gamma.p() != p || dag.p() != p {
                return Err(Error::DimensionMismatch(
                    "initial state differs from data in p".into(),
                ));
            }
            Ok((gamma.clone(), dag.clone()))
        }
        Init::Correlation { threshold } => {
            let corr = correlation_matrix(data);
            let cap = hyper.r.saturating_sub(1);
            let parents = (0..p)
                .map(|i| {
                    let mut cand: Vec<(f64, usize)> = (i + 1..p)
                        .map(|j| (corr[i * p + j].abs(), j))
                        .filter(|&(c, _)| c > *threshold)
                        .collect();
                    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                    cand.truncate(cap);
                    cand.into_iter().map(|(_, j)| j).collect()
                })
                .collect();
            Ok((VariableIndicator::empty(p), Dag::from_parents(parents)?))
        }
    }
}

fn correlation_matrix(data: &Dataset) -> Vec<f64> {
    let (n, p) = (data.n(), data.p());
    let x = data.x();
    let means: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|r| x[(r, j)]).sum::<f64>() / n.max(1) as f64)
        .collect();
    let mut cov = vec![0.0; p * p];
    for r in 0..n {
        let row = x.row(r);
        for i in 0..p {
            let di = row[i] - means[i];
            for j in i..p {
                cov[i * p + j] += di * (row[j] - means[j]);
            }
        }
    }
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for j in i..p {
            let denom = math::sqrt(cov[i * p + i] * cov[j * p + j]);
            let c = if denom > 0.0 {
                cov[i * p + j] / denom
            } else {
                0.0
            };
            out[i * p + j] = c;
            out[j * p + i] = c;
        }
    }
    out
}

/// Posterior summaries from the retained sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub inclusion_probs: Vec<f64>,
    /// `edge_probs[i][j]` for `j > i`: fraction of retained sweeps with `j`
    /// a parent of `i`. Zero elsewhere.
    pub edge_probs: Vec<Vec<f64>>,
    pub gamma_acceptance: f64,
    pub dag_acceptance: Vec<f64>,
    pub retained: usize,
    pub seed: u64,
}

pub fn run_chain(
    data: &Dataset,
    hyper: &Hyperparameters,
    control: &ChainControl,
) -> Result<ChainSummary> {
    run_chain_with(data, hyper, control, |_, _| {})
}

/// Runs the chain and calls `observer` after every sweep (burn-in included).
pub fn run_chain_with(
    data: &Dataset,
    hyper: &Hyperparameters,
    control: &ChainControl,
    mut observer: impl FnMut(&SweepRecord, &ChainState),
) -> Result<ChainSummary> {
    if control.iters <= control.burnin {
        return Err(Error::InvalidControl(alloc::format!(
            "iters ({}) must exceed burnin ({})",
            control.iters,
            control.burnin
        )));
    }
    let mut sampler = Sampler::new(data, hyper, control)?;
    let p = data.p();
    let mut inclusion = vec![0u64; p];
    let mut edges = vec![0u64; p * p];
    for sweep in 1..=control.iters {
        let record = sampler.gibbs_sweep()?;
        if sweep > control.burnin {
            let st = sampler.state();
            for &j in &st.selected {
                inclusion[j] += 1;
            }
            for (i, c) in st.columns.iter().enumerate() {
                for &j in &c.parents {
                    edges[i * p + j] += 1;
                }
            }
        }
        observer(&record, sampler.state());
    }
    let retained = control.iters - control.burnin;
    let denom = retained as f64;
    Ok(ChainSummary {
        inclusion_probs: inclusion.iter().map(|&c| c as f64 / denom).collect(),
        edge_probs: (0..p)
            .map(|i| (0..p).map(|j| edges[i * p + j] as f64 / denom).collect())
            .collect(),
        gamma_acceptance: sampler.gamma_acceptance(),
        dag_acceptance: sampler.column_acceptance(),
        retained,
        seed: control.seed,
    })
}

/// Variables and edges whose posterior probability is strictly above ½.
pub fn median_probability_model(summary: &ChainSummary) -> (VariableIndicator, Dag) {
    let p = summary.inclusion_probs.len();
    let gamma =
        VariableIndicator::from_bits(summary.inclusion_probs.iter().map(|&q| q > 0.5).collect());
    let parents = (0..p)
        .map(|i| {
            (i + 1..p)
                .filter(|&j| summary.edge_probs[i][j] > 0.5)
                .collect()
        })
        .collect();
    (
        gamma,
        Dag::from_parents(parents).expect("edges above the diagonal respect the ordering"),
    )
}
