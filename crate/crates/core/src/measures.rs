//! Evaluation measures: normalized matrix distances, the KNN voting system
//! (KVS) and the adjusted Rand index.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::graph::Graph;
use crate::synth::LabelVector;

/// Neighbourhood sizes tried by [`kvs_best_ari`].
pub const KVS_K: [usize; 3] = [5, 7, 9];

/// Summary of one codec run, optionally scored against a ground truth.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasureReport {
    pub eps: f64,
    pub k_classes: usize,
    pub irregular_count: usize,
    pub sze_index: f64,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub kvs_ari: Option<f64>,
    pub kvs_k: Option<usize>,
}

impl MeasureReport {
    /// Fills the distances of `reconstructed` to `gt` and its KVS score
    /// against `labels`.
    pub fn score(&mut self, reconstructed: &Graph, gt: &Graph, labels: &LabelVector) -> Result<()> {
        self.l1 = Some(l1_dist(reconstructed, gt)?);
        self.l2 = Some(l2_dist(reconstructed, gt)?);
        let (ari, k) = kvs_best_ari(reconstructed, labels)?;
        self.kvs_ari = Some(ari);
        self.kvs_k = Some(k);
        Ok(())
    }
}

/// Connected components of `g` as labels `1..`, numbered by their lowest
/// vertex. On a ground truth of disjoint cliques these are the clusters.
pub fn component_labels(g: &Graph) -> LabelVector {
    let n = g.n();
    let mut labels = vec![0u32; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for (u, &w) in g.row(v).iter().enumerate() {
                if w > 0.0 && labels[u] == 0 {
                    labels[u] = next;
                    stack.push(u);
                }
            }
        }
    }
    LabelVector::new(labels)
}

/// Pair counts behind the Rand index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContingencyCounts {
    /// Pairs grouped together in both labelings.
    pub a: u64,
    /// Pairs separated in both labelings.
    pub b: u64,
    pub total_pairs: u64,
}

impl ContingencyCounts {
    pub fn rand_index(&self) -> f64 {
        if self.total_pairs == 0 {
            return 1.0;
        }
        (self.a + self.b) as f64 / self.total_pairs as f64
    }
}

fn same_size(a: &Graph, b: &Graph) -> Result<()> {
    if a.n() != b.n() {
        return invalid(format!("matrix sizes differ: {} vs {}", a.n(), b.n()));
    }
    Ok(())
}

/// `sqrt(ΣΣ (a_ij - b_ij)^2) / n`.
pub fn l2_dist(a: &Graph, b: &Graph) -> Result<f64> {
    same_size(a, b)?;
    if a.n() == 0 {
        return Ok(0.0);
    }
    let sq: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sq.sqrt() / a.n() as f64)
}

/// `ΣΣ |a_ij - b_ij| / n^2`.
pub fn l1_dist(a: &Graph, b: &Graph) -> Result<f64> {
    same_size(a, b)?;
    if a.n() == 0 {
        return Ok(0.0);
    }
    let abs: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .sum();
    let n = a.n() as f64;
    Ok(abs / (n * n))
}

/// Predicts each vertex's label by majority vote over the labels of the `k`
/// highest entries of its row.
///
/// The diagonal is skipped. Equal values rank by ascending column, and a
/// tied vote goes to the label of the best-ranked neighbour among the tied
/// labels.
pub fn kvs_predict(m: &Graph, labels: &LabelVector, k: usize) -> Result<LabelVector> {
    let n = m.n();
    if labels.len() != n {
        return invalid(format!("{} labels for {n} vertices", labels.len()));
    }
    if k.is_multiple_of(2) {
        return invalid(format!("k must be odd, got {k}"));
    }
    if k == 0 || k + 1 > n {
        return invalid(format!("k = {k} needs at least {} vertices, got {n}", k + 1));
    }
    let truth = labels.as_slice();
    let predicted = (0..n)
        .into_par_iter()
        .map(|row| {
            let values = m.row(row);
            let rank = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
            let mut cols: Vec<usize> = (0..n).filter(|&c| c != row).collect();
            cols.select_nth_unstable_by(k - 1, rank);
            cols.truncate(k);
            cols.sort_unstable_by(rank);

            let mut votes: Vec<(u32, usize, usize)> = Vec::with_capacity(k);
            for (pos, &c) in cols.iter().enumerate() {
                match votes.iter_mut().find(|v| v.0 == truth[c]) {
                    Some(v) => v.1 += 1,
                    None => votes.push((truth[c], 1, pos)),
                }
            }
            votes
                .into_iter()
                .max_by(|x, y| x.1.cmp(&y.1).then(y.2.cmp(&x.2)))
                .map(|v| v.0)
                .unwrap_or(0)
        })
        .collect();
    Ok(LabelVector::new(predicted))
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

fn pair_sum<K>(counts: HashMap<K, u64>) -> u64 {
    counts.into_values().map(choose2).sum()
}

struct Table {
    cells: u64,
    rows: u64,
    cols: u64,
    total: u64,
}

fn table(truth: &LabelVector, predicted: &LabelVector) -> Result<Table> {
    if truth.len() != predicted.len() {
        return invalid(format!(
            "label vectors differ in length: {} vs {}",
            truth.len(),
            predicted.len()
        ));
    }
    let mut cells: HashMap<(u32, u32), u64> = HashMap::new();
    let mut rows: HashMap<u32, u64> = HashMap::new();
    let mut cols: HashMap<u32, u64> = HashMap::new();
    for (&t, &p) in truth.as_slice().iter().zip(predicted.as_slice()) {
        *cells.entry((t, p)).or_default() += 1;
        *rows.entry(t).or_default() += 1;
        *cols.entry(p).or_default() += 1;
    }
    Ok(Table {
        cells: pair_sum(cells),
        rows: pair_sum(rows),
        cols: pair_sum(cols),
        total: choose2(truth.len() as u64),
    })
}

pub fn contingency_counts(truth: &LabelVector, predicted: &LabelVector) -> Result<ContingencyCounts> {
    let t = table(truth, predicted)?;
    Ok(ContingencyCounts {
        a: t.cells,
        b: t.total + t.cells - t.rows - t.cols,
        total_pairs: t.total,
    })
}

/// Hubert–Arabie adjusted Rand index. Degenerate tables where both
/// labelings are trivial in the same way score 1.
pub fn ari(truth: &LabelVector, predicted: &LabelVector) -> Result<f64> {
    if truth.len() < 2 {
        return invalid("the adjusted Rand index needs at least two elements");
    }
    let t = table(truth, predicted)?;
    let expected = t.rows as f64 * t.cols as f64 / t.total as f64;
    let max = (t.rows + t.cols) as f64 / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((t.cells as f64 - expected) / (max - expected))
}

/// Best KVS ARI over `k ∈ {5, 7, 9}`, with the smallest `k` on ties.
pub fn kvs_best_ari(m: &Graph, labels: &LabelVector) -> Result<(f64, usize)> {
    if m.n() <= 9 {
        return invalid(format!("KVS needs more than 9 vertices, got {}", m.n()));
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for k in KVS_K {
        let score = ari(labels, &kvs_predict(m, labels, k)?)?;
        if score > best.0 {
            best = (score, k);
        }
    }
    Ok(best)
}
