//! DAGs under a fixed parent ordering.
//!
//! Vertices are `0..p` internally. Every edge points from a larger vertex to
//! a smaller one, so the parents of `i` are a subset of `i+1..p` and any
//! choice of per-column parent sets is acyclic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn empty(p: usize) -> Self {
        Self {
            parents: vec![Vec::new(); p],
        }
    }

    /// Builds a DAG from per-vertex parent lists; lists are sorted and deduplicated.
    pub fn from_parents(parents: Vec<Vec<usize>>) -> Result<Self> {
        let p = parents.len();
        let mut parents = parents;
        for (child, pa) in parents.iter_mut().enumerate() {
            pa.sort_unstable();
            pa.dedup();
            if let Some(&bad) = pa.iter().find(|&&j| j <= child || j >= p) {
                return Err(Error::InvalidDag(format!(
                    "parent {bad} of vertex {child} violates the ordering (p = {p})"
                )));
            }
        }
        Ok(Self { parents })
    }

    /// Builds a DAG from `(child, parent)` pairs.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut parents = vec![Vec::new(); p];
        for &(child, parent) in edges {
            if child >= p {
                return Err(Error::InvalidDag(format!(
                    "child {child} out of range (p = {p})"
                )));
            }
            parents[child].push(parent);
        }
        Self::from_parents(parents)
    }

    /// The complete DAG: every larger vertex is a parent.
    pub fn complete(p: usize) -> Self {
        Self {
            parents: (0..p).map(|i| (i + 1..p).collect()).collect(),
        }
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.parents.len()
    }

    #[inline]
    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    /// Number of parents of `i`.
    #[inline]
    pub fn nu(&self, i: usize) -> usize {
        self.parents[i].len()
    }

    pub fn max_nu(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, child: usize, parent: usize) -> bool {
        self.parents[child].binary_search(&parent).is_ok()
    }

    /// `(child, parent)` pairs ordered by child, then parent.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, pa)| pa.iter().map(move |&j| (c, j)))
    }

    /// Copy with `candidate` toggled in the parent set of `child`.
    pub fn column_flip(&self, child: usize, candidate: usize) -> Result<Dag> {
        if candidate <= child || candidate >= self.p() {
            return Err(Error::InvalidMove { child, candidate });
        }
        let mut out = self.clone();
        out.toggle(child, candidate);
        Ok(out)
    }

    fn toggle(&mut self, child: usize, candidate: usize) {
        let pa = &mut self.parents[child];
        match pa.binary_search(&candidate) {
            Ok(pos) => {
                pa.remove(pos);
            }
            Err(pos) => pa.insert(pos, candidate),
        }
    }

    pub fn adjacency(&self) -> Adjacency {
        let p = self.p();
        let mut adj = Adjacency {
            p,
            cells: vec![false; p * p],
        };
        for (c, j) in self.edges() {
            adj.cells[c * p + j] = true;
            adj.cells[j * p + c] = true;
        }
        adj
    }

    /// Relabels vertices: vertex `v` becomes `perm[v]`. The result must still
    /// respect the ordering.
    pub fn relabel(&self, perm: &[usize]) -> Result<Dag> {
        let edges: Vec<(usize, usize)> = self.edges().map(|(c, j)| (perm[c], perm[j])).collect();
        Self::from_edges(self.p(), &edges)
    }
}

/// Symmetric 0/1 adjacency matrix of a DAG's skeleton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    p: usize,
    cells: Vec<bool>,
}

impl Adjacency {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            cells: vec![false; p * p],
        }
    }

    /// From a dense 0/1 matrix; must be symmetric with a zero diagonal.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let p = rows.len();
        let mut cells = vec![false; p * p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch("adjacency rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 || (i == j && v != 0) || rows[j][i] != v {
                    return Err(Error::InvalidDag(format!(
                        "adjacency must be a symmetric 0/1 matrix with zero diagonal (entry {i},{j})"
                    )));
                }
                cells[i * p + j] = v == 1;
            }
        }
        Ok(Self { p, cells })
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.p + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&j| self.get(i, j))
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.p)
            .map(|i| (0..self.p).map(|j| u8::from(self.get(i, j))).collect())
            .collect()
    }

    /// `γᵀGγ`; each edge between included vertices counts twice.
    pub fn quadratic_form(&self, gamma: &[bool]) -> usize {
        assert_eq!(gamma.len(), self.p);
        let mut total = 0;
        for i in (0..self.p).filter(|&i| gamma[i]) {
            total += (0..self.p).filter(|&j| gamma[j] && self.get(i, j)).count();
        }
        total
    }

    pub fn edge_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count() / 2
    }
}

/// Erdős–Rényi contribution of one column with `nu` parents out of
/// `candidates` possible ones. Does not apply the complexity bound.
#[inline]
pub fn log_prior_column(nu: usize, candidates: usize, q: f64) -> f64 {
    let mut out = 0.0;
    if nu > 0 {
        out += nu as f64 * math::ln(q);
    }
    if candidates > nu {
        out += (candidates - nu) as f64 * math::ln_1p(-q);
    }
    out
}

/// Unnormalized log prior of a DAG: independent Bernoulli(`q`) edges,
/// truncated to DAGs whose every column has fewer than `r` parents.
pub fn log_prior_dag(dag: &Dag, q: f64, r: usize) -> f64 {
    let p = dag.p();
    if dag.max_nu() >= r {
        return f64::NEG_INFINITY;
    }
    (0..p)
        .map(|j| log_prior_column(dag.nu(j), p - 1 - j, q))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacency_examples() {
        assert_eq!(Dag::empty(3).adjacency().to_dense(), vec![vec![0; 3]; 3]);
        let d = Dag::from_parents(vec![vec![1], vec![]]).unwrap();
        assert_eq!(d.adjacency().to_dense(), vec![vec![0, 1], vec![1, 0]]);
        let full = Dag::from_parents(vec![vec![1, 2], vec![2], vec![]]).unwrap();
        assert_eq!(full, Dag::complete(3));
        assert_eq!(
            full.adjacency().to_dense(),
            vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]
        );
    }

    #[test]
    fn prior_examples() {
        let v = log_prior_dag(&Dag::empty(3), 0.005, 2);
        assert!((v - 3.0 * math::ln(0.995)).abs() < 1e-15);
        assert!((v + 0.015_037_6).abs() < 1e-7);
        assert_eq!(
            log_prior_dag(&Dag::complete(3), 0.005, 1),
            f64::NEG_INFINITY
        );
        let one = Dag::from_parents(vec![vec![1], vec![]]).unwrap();
        assert!((log_prior_dag(&one, 0.5, 2) - math::ln(0.5)).abs() < 1e-15);
    }

    #[test]
    fn flip_examples() {
        let d = Dag::empty(2);
        let f = d.column_flip(0, 1).unwrap();
        assert_eq!(f.parents(0), &[1]);
        assert_eq!(f.column_flip(0, 1).unwrap(), d);
        assert_eq!(
            d.column_flip(1, 0),
            Err(Error::InvalidMove {
                child: 1,
                candidate: 0
            })
        );
        assert!(d.column_flip(0, 2).is_err());
    }

    #[test]
    fn rejects_ordering_violation() {
        assert!(Dag::from_parents(vec![vec![], vec![0]]).is_err());
        assert!(Dag::from_parents(vec![vec![0]]).is_err());
    }

    #[test]
    fn quadratic_form_counts_twice() {
        let d = Dag::from_parents(vec![vec![1], vec![], vec![]]).unwrap();
        let g = d.adjacency();
        assert_eq!(g.quadratic_form(&[true, true, false]), 2);
        assert_eq!(g.quadratic_form(&[true, false, true]), 0);
    }
}
