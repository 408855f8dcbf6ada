//! Dense symmetric graphs and the elementary density and degree quantities
//! built on top of them.
//!
//! A [`Graph`] is a full `n x n` row-major matrix of edge weights in `[0, 1]`
//! with a zero diagonal. Unweighted graphs use `0.0`/`1.0`. Every edge count
//! in the density formulas generalizes to a weight sum.

use std::fmt;

use crate::error::{invalid, Result};

/// Undirected weighted graph stored as a dense symmetric matrix.
#[derive(Clone, PartialEq)]
pub struct Graph {
    n: usize,
    weights: Vec<f64>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("density", &self.density())
            .finish()
    }
}

impl Graph {
    /// Edgeless graph on `n` vertices.
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            weights: vec![0.0; n * n],
        }
    }

    /// Builds a graph from a row-major `n x n` matrix, checking symmetry,
    /// the zero diagonal and the `[0, 1]` weight range.
    pub fn from_dense(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * n {
            return invalid(format!(
                "expected {} matrix entries for n={n}, got {}",
                n * n,
                weights.len()
            ));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return invalid(format!("non-zero diagonal entry at vertex {i}"));
            }
            for j in (i + 1)..n {
                let w = weights[i * n + j];
                if !(0.0..=1.0).contains(&w) {
                    return invalid(format!("weight {w} at ({i},{j}) outside [0,1]"));
                }
                if w != weights[j * n + i] {
                    return invalid(format!("matrix not symmetric at ({i},{j})"));
                }
            }
        }
        Ok(Graph { n, weights })
    }

    /// Builds a graph by evaluating `f(i, j)` once for every `i < j`.
    pub fn from_upper<F>(n: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let w = f(i, j);
                if !(0.0..=1.0).contains(&w) {
                    return invalid(format!("weight {w} at ({i},{j}) outside [0,1]"));
                }
                g.set(i, j, w);
            }
        }
        Ok(g)
    }

    /// Builds an unweighted graph from an edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return invalid(format!("edge ({u},{v}) out of range for n={n}"));
            }
            if u == v {
                return invalid(format!("self-loop at vertex {u}"));
            }
            g.set(u, v, 1.0);
        }
        Ok(g)
    }

    /// Sets the symmetric weight of `{i, j}`. Callers keep `i != j` and
    /// `w` in `[0, 1]`.
    pub(crate) fn set(&mut self, i: usize, j: usize, w: f64) {
        debug_assert!(i != j && (0.0..=1.0).contains(&w));
        self.weights[i * self.n + j] = w;
        self.weights[j * self.n + i] = w;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// Row-major view of the whole matrix.
    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Total weight over ordered vertex pairs divided by `n^2`.
    pub fn density(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.weights.iter().sum::<f64>() / (self.n * self.n) as f64
    }

    /// True when every weight is exactly `0` or `1`.
    pub fn is_binary(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0 || w == 1.0)
    }
}

/// An ordered list of distinct vertex indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VertexClass(Vec<usize>);

impl VertexClass {
    pub fn new(members: Vec<usize>) -> Self {
        VertexClass(members)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.contains(&v)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Checks that members are distinct and below `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &v in &self.0 {
            if v >= n {
                return invalid(format!("vertex {v} out of range for n={n}"));
            }
            if std::mem::replace(&mut seen[v], true) {
                return invalid(format!("vertex {v} listed twice in a class"));
            }
        }
        Ok(())
    }
}

impl From<Vec<usize>> for VertexClass {
    fn from(v: Vec<usize>) -> Self {
        VertexClass(v)
    }
}

impl<'a> IntoIterator for &'a VertexClass {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

fn check_disjoint(n: usize, x: &VertexClass, y: &VertexClass) -> Result<()> {
    x.validate(n)?;
    y.validate(n)?;
    let mut mark = vec![false; n];
    for &v in x {
        mark[v] = true;
    }
    if let Some(v) = y.iter().find(|&&v| mark[v]) {
        return invalid(format!("classes overlap at vertex {v}"));
    }
    Ok(())
}

/// Sum of weights between two vertex sets, without validation.
pub(crate) fn cross_weight(g: &Graph, x: &[usize], y: &[usize]) -> f64 {
    x.iter()
        .map(|&u| {
            let row = g.row(u);
            y.iter().map(|&v| row[v]).sum::<f64>()
        })
        .sum()
}

pub(crate) fn density_unchecked(g: &Graph, x: &[usize], y: &[usize]) -> f64 {
    if x.is_empty() || y.is_empty() {
        return 0.0;
    }
    cross_weight(g, x, y) / (x.len() * y.len()) as f64
}

/// `d(X, Y) = e(X, Y) / (|X| |Y|)` for disjoint non-empty classes.
pub fn pair_density(g: &Graph, x: &VertexClass, y: &VertexClass) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return invalid("pair density needs two non-empty classes");
    }
    check_disjoint(g.n(), x, y)?;
    Ok(density_unchecked(g, x.members(), y.members()))
}

/// Internal density `e(C, C) / |C|^2`, with `e(C, C)` counting ordered
/// pairs (twice the undirected weight sum).
pub fn internal_density(g: &Graph, c: &VertexClass) -> Result<f64> {
    if c.is_empty() {
        return invalid("internal density of an empty class");
    }
    c.validate(g.n())?;
    Ok(density_unchecked(g, c.members(), c.members()))
}

/// Weighted degree of `v` towards the other members of `c`.
pub fn indegree_within(g: &Graph, v: usize, c: &VertexClass) -> Result<f64> {
    c.validate(g.n())?;
    if !c.contains(v) {
        return invalid(format!("vertex {v} is not a member of the class"));
    }
    Ok(indegree_unchecked(g, v, c.members()))
}

pub(crate) fn indegree_unchecked(g: &Graph, v: usize, c: &[usize]) -> f64 {
    let row = g.row(v);
    c.iter().map(|&u| row[u]).sum()
}
