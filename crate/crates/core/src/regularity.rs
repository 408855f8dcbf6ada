//! Approximate ε-regularity test for a class pair and the partition index.
//!
//! For a bipartite pair `(A, B)` with `|A| = |B| = m`, the test looks at the
//! average bipartite degree `d̄`, at vertices of `B` whose degree deviates
//! from `d̄`, and at the neighbourhood deviation
//! `σ(y1, y2) = |N(y1) ∩ N(y2)| - d̄² / m` between vertices of `B`:
//!
//! 1. `d̄ < ε³ m`: the pair is regular.
//! 2. more than `ε⁴ m / 8` vertices of `B` deviate from `d̄` by at least
//!    `ε⁴ m`: irregular, the deviating vertices are the certificate.
//! 3. some `y0` with `|deg(y0) - d̄| < ε⁴ m` has
//!    `B_y0 = { y : σ(y0, y) ≥ 2 ε⁴ m }` with `|B_y0| ≥ ε⁴ m / 4`:
//!    irregular with certificates `N(y0)` and `B_y0`.
//!
//! If none of these fires the pair is declared regular. The `ε⁴` thresholds
//! and the order of cases 2 and 3 are set by [`RegularityOptions`]. Weighted graphs use
//! weight sums for degrees and `Σ_x w(y1, x) w(y2, x)` for common neighbours.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{density_unchecked, Graph, VertexClass};
use crate::refinement::Partition;

/// Size that the `ε⁴` thresholds of cases 2 and 3 are multiplied by.
///
/// With `ClassSize` the deviation threshold `ε⁴ m` shrinks with every
/// refinement and case 2 fires on nearly every pair of a noisy graph, so no
/// partition ever passes the stop rule. `GraphOrder` keeps the thresholds at
/// `ε⁴ n` for all levels. Case 1 always uses `ε³ m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationScale {
    ClassSize,
    #[default]
    GraphOrder,
}

/// Order in which cases 2 and 3 are tried after case 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionOrder {
    DegreesFirst,
    /// Neighbourhood certificates split along shared structure and give
    /// purer classes than degree certificates.
    #[default]
    NeighbourhoodFirst,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityOptions {
    pub deviation_scale: DeviationScale,
    pub order: ConditionOrder,
}

impl RegularityOptions {
    /// Thresholds at class size, degree case first.
    pub fn class_scaled() -> Self {
        RegularityOptions {
            deviation_scale: DeviationScale::ClassSize,
            order: ConditionOrder::DegreesFirst,
        }
    }
}

/// Average degree of the pair and the common class size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStats {
    pub avg_degree: f64,
    pub class_size: usize,
}

/// Which case of the test decided the verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// Case 1, the pair is too sparse to be irregular.
    LowDensity,
    /// Case 2, many vertices with deviating degree.
    DeviatingDegrees,
    /// Case 3, a vertex whose neighbourhood is shared unusually often.
    NeighbourhoodDeviation,
}

impl Condition {
    pub fn number(self) -> u8 {
        match self {
            Condition::LowDensity => 1,
            Condition::DeviatingDegrees => 2,
            Condition::NeighbourhoodDeviation => 3,
        }
    }
}

/// Outcome of [`check_pair`] for `(C_i, C_j)`.
///
/// Certificates are empty for regular pairs. For irregular pairs
/// `cert_i ∪ compl_i = C_i` (likewise for `j`).
#[derive(Clone, Debug, PartialEq)]
pub struct PairVerdict {
    pub is_regular: bool,
    pub condition: Option<Condition>,
    pub density: f64,
    pub cert_i: VertexClass,
    pub cert_j: VertexClass,
    pub compl_i: VertexClass,
    pub compl_j: VertexClass,
}

impl PairVerdict {
    fn regular(condition: Option<Condition>, density: f64) -> Self {
        PairVerdict {
            is_regular: true,
            condition,
            density,
            cert_i: VertexClass::default(),
            cert_j: VertexClass::default(),
            compl_i: VertexClass::default(),
            compl_j: VertexClass::default(),
        }
    }

    /// Same verdict seen from the other class of the pair.
    pub fn swapped(&self) -> Self {
        PairVerdict {
            cert_i: self.cert_j.clone(),
            cert_j: self.cert_i.clone(),
            compl_i: self.compl_j.clone(),
            compl_j: self.compl_i.clone(),
            ..self.clone()
        }
    }
}

/// Bipartite weights of a pair, stored column by column: column `b` holds
/// `w(A[a], B[b])` for every `a`.
struct Bipartite<'a> {
    a: &'a [usize],
    b: &'a [usize],
    m: usize,
    cols: Vec<f64>,
    deg_b: Vec<f64>,
    avg_degree: f64,
}

impl<'a> Bipartite<'a> {
    fn new(g: &Graph, a: &'a [usize], b: &'a [usize]) -> Self {
        let m = a.len();
        let mut cols = Vec::with_capacity(m * b.len());
        for &y in b {
            let row = g.row(y);
            cols.extend(a.iter().map(|&x| row[x]));
        }
        let deg_b: Vec<f64> = cols.chunks_exact(m.max(1)).map(|c| c.iter().sum()).collect();
        // Σ deg over A equals Σ deg over B, both being the total cross weight
        let total: f64 = deg_b.iter().sum();
        Bipartite {
            a,
            b,
            m,
            cols,
            deg_b,
            avg_degree: 2.0 * total / (2 * m) as f64,
        }
    }

    fn col(&self, y: usize) -> &[f64] {
        &self.cols[y * self.m..(y + 1) * self.m]
    }

    fn common(&self, y1: usize, y2: usize) -> f64 {
        self.col(y1).iter().zip(self.col(y2)).map(|(p, q)| p * q).sum()
    }

    fn density(&self) -> f64 {
        self.avg_degree / self.m as f64
    }

    /// Vertices of `A` adjacent to any of the given `B` positions.
    fn neighbours_in_a(&self, ys: &[usize]) -> Vec<usize> {
        (0..self.m)
            .filter(|&x| ys.iter().any(|&y| self.col(y)[x] > 0.0))
            .map(|x| self.a[x])
            .collect()
    }
}

fn check_equal_disjoint(g: &Graph, a: &VertexClass, b: &VertexClass) -> Result<()> {
    if a.len() != b.len() {
        return invalid(format!("classes differ in size: {} vs {}", a.len(), b.len()));
    }
    a.validate(g.n())?;
    b.validate(g.n())?;
    let mut mark = vec![false; g.n()];
    for &v in a {
        mark[v] = true;
    }
    if let Some(v) = b.iter().find(|&&v| mark[v]) {
        return invalid(format!("classes overlap at vertex {v}"));
    }
    Ok(())
}

/// `d̄ = (1 / 2m) Σ_{v ∈ A ∪ B} deg(v)` with degrees taken in the bipartite
/// subgraph between `a` and `b`.
pub fn average_degree(g: &Graph, a: &VertexClass, b: &VertexClass) -> Result<f64> {
    if a.is_empty() {
        return invalid("average degree of empty classes");
    }
    check_equal_disjoint(g, a, b)?;
    Ok(Bipartite::new(g, a.members(), b.members()).avg_degree)
}

/// Statistics of the pair `(a, b)` needed by the deviation functions.
pub fn pair_stats(g: &Graph, a: &VertexClass, b: &VertexClass) -> Result<PairStats> {
    Ok(PairStats {
        avg_degree: average_degree(g, a, b)?,
        class_size: a.len(),
    })
}

/// `σ(y1, y2) = |N(y1) ∩ N(y2)| - d̄² / m`, neighbourhoods restricted to `a`.
pub fn neighborhood_deviation(
    g: &Graph,
    y1: usize,
    y2: usize,
    a: &VertexClass,
    stats: PairStats,
) -> Result<f64> {
    if y1 == y2 {
        return invalid("neighbourhood deviation needs two distinct vertices");
    }
    if a.contains(y1) || a.contains(y2) {
        return invalid("deviation vertices must lie outside the reference class");
    }
    if stats.class_size == 0 {
        return invalid("class size must be positive");
    }
    let (r1, r2) = (g.row(y1), g.row(y2));
    let common: f64 = a.iter().map(|&x| r1[x] * r2[x]).sum();
    Ok(common - stats.avg_degree * stats.avg_degree / stats.class_size as f64)
}

/// `σ(Y) = Σ σ(y1, y2) / |Y|²` over ordered pairs of distinct members.
pub fn set_deviation(g: &Graph, y_set: &VertexClass, a: &VertexClass, stats: PairStats) -> Result<f64> {
    if y_set.len() < 2 {
        return invalid("set deviation needs at least two vertices");
    }
    y_set.validate(g.n())?;
    let mut sum = 0.0;
    for &y1 in y_set {
        for &y2 in y_set {
            if y1 != y2 {
                sum += neighborhood_deviation(g, y1, y2, a, stats)?;
            }
        }
    }
    Ok(sum / (y_set.len() * y_set.len()) as f64)
}

/// Approximate regularity verdict for the pair `(ci, cj)` under the
/// default [`RegularityOptions`].
pub fn check_pair(g: &Graph, ci: &VertexClass, cj: &VertexClass, eps: f64) -> Result<PairVerdict> {
    check_pair_with(g, ci, cj, eps, RegularityOptions::default())
}

pub fn check_pair_with(
    g: &Graph,
    ci: &VertexClass,
    cj: &VertexClass,
    eps: f64,
    opts: RegularityOptions,
) -> Result<PairVerdict> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("epsilon {eps} outside (0,1)"));
    }
    if ci.len() < 2 {
        return invalid("regularity check needs classes of at least two vertices");
    }
    check_equal_disjoint(g, ci, cj)?;
    Ok(check_pair_unchecked(g, ci.members(), cj.members(), eps, opts))
}

pub(crate) fn check_pair_unchecked(
    g: &Graph,
    ci: &[usize],
    cj: &[usize],
    eps: f64,
    opts: RegularityOptions,
) -> PairVerdict {
    let bp = Bipartite::new(g, ci, cj);
    let m = bp.m as f64;
    let d = bp.avg_degree;

    if d < eps.powi(3) * m {
        return PairVerdict::regular(Some(Condition::LowDensity), bp.density());
    }

    let eps4 = eps.powi(4)
        * match opts.deviation_scale {
            DeviationScale::ClassSize => m,
            DeviationScale::GraphOrder => g.n() as f64,
        };
    let found = match opts.order {
        ConditionOrder::DegreesFirst => {
            deviating_degrees(&bp, eps4).or_else(|| shared_neighbourhood(&bp, eps4))
        }
        ConditionOrder::NeighbourhoodFirst => {
            shared_neighbourhood(&bp, eps4).or_else(|| deviating_degrees(&bp, eps4))
        }
    };
    found.unwrap_or_else(|| PairVerdict::regular(None, bp.density()))
}

fn deviating_degrees(bp: &Bipartite<'_>, eps4: f64) -> Option<PairVerdict> {
    let d = bp.avg_degree;
    let deviating: Vec<usize> = (0..bp.m).filter(|&y| (bp.deg_b[y] - d).abs() >= eps4).collect();
    if deviating.len() as f64 <= eps4 / 8.0 {
        return None;
    }
    let mut cert_i = bp.neighbours_in_a(&deviating);
    if cert_i.is_empty() {
        // every deviating vertex is isolated from A: the whole class
        // witnesses the density gap
        cert_i = bp.a.to_vec();
    }
    let cert_j: Vec<usize> = deviating.iter().map(|&y| bp.b[y]).collect();
    Some(irregular(bp, Condition::DeviatingDegrees, cert_i, cert_j))
}

fn shared_neighbourhood(bp: &Bipartite<'_>, eps4: f64) -> Option<PairVerdict> {
    let d = bp.avg_degree;
    let shared = d * d / bp.m as f64;
    let mut candidates: Vec<usize> = (0..bp.m).filter(|&y| (bp.deg_b[y] - d).abs() < eps4).collect();
    candidates.sort_by_key(|&y| bp.b[y]);
    for y0 in candidates {
        let by0: Vec<usize> = (0..bp.m)
            .filter(|&y| y != y0 && bp.common(y0, y) - shared >= 2.0 * eps4)
            .collect();
        if !by0.is_empty() && by0.len() as f64 >= eps4 / 4.0 {
            let cert_i = bp.neighbours_in_a(&[y0]);
            let cert_j = by0.iter().map(|&y| bp.b[y]).collect();
            return Some(irregular(bp, Condition::NeighbourhoodDeviation, cert_i, cert_j));
        }
    }
    None
}

fn irregular(
    bp: &Bipartite<'_>,
    condition: Condition,
    cert_i: Vec<usize>,
    cert_j: Vec<usize>,
) -> PairVerdict {
    let complement = |class: &[usize], cert: &[usize]| -> Vec<usize> {
        class.iter().copied().filter(|v| !cert.contains(v)).collect()
    };
    PairVerdict {
        is_regular: false,
        condition: Some(condition),
        density: bp.density(),
        compl_i: complement(bp.a, &cert_i).into(),
        compl_j: complement(bp.b, &cert_j).into(),
        cert_i: cert_i.into(),
        cert_j: cert_j.into(),
    }
}

/// `sze_ind(P) = (1 / k²) Σ_{s<t} d(C_s, C_t)²`; `C_0` is excluded.
pub fn sze_index(g: &Graph, partition: &Partition) -> Result<f64> {
    let k = partition.k();
    if k < 2 {
        return invalid("partition index needs at least two classes");
    }
    let classes = partition.classes();
    let sum: f64 = (0..k)
        .into_par_iter()
        .map(|s| {
            ((s + 1)..k)
                .map(|t| density_unchecked(g, classes[s].members(), classes[t].members()).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok(sum / (k * k) as f64)
}

/// Verdicts for every class pair `s < t` of a partition, in row-major pair
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct PairVerdicts {
    k: usize,
    verdicts: Vec<PairVerdict>,
}

impl PairVerdicts {
    pub fn new(k: usize, verdicts: Vec<PairVerdict>) -> Result<Self> {
        if verdicts.len() != k * k.saturating_sub(1) / 2 {
            return invalid("verdict list does not cover every class pair");
        }
        Ok(PairVerdicts { k, verdicts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn index(&self, s: usize, t: usize) -> usize {
        debug_assert!(s < t && t < self.k);
        s * self.k - s * (s + 1) / 2 + (t - s - 1)
    }

    /// Verdict for the unordered pair `{s, t}` as stored (`i = min`).
    pub fn get(&self, s: usize, t: usize) -> &PairVerdict {
        let (s, t) = if s < t { (s, t) } else { (t, s) };
        &self.verdicts[self.index(s, t)]
    }

    /// Verdict oriented so that `cert_i` refers to class `i`.
    pub fn oriented(&self, i: usize, j: usize) -> PairVerdict {
        if i < j {
            self.get(i, j).clone()
        } else {
            self.get(j, i).swapped()
        }
    }

    pub fn is_regular(&self, s: usize, t: usize) -> bool {
        self.get(s, t).is_regular
    }

    /// `(s, t, verdict)` for all pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &PairVerdict)> + '_ {
        let k = self.k;
        (0..k)
            .flat_map(move |s| ((s + 1)..k).map(move |t| (s, t)))
            .zip(self.verdicts.iter())
            .map(|((s, t), v)| (s, t, v))
    }

    pub fn irregular_count(&self) -> usize {
        self.verdicts.iter().filter(|v| !v.is_regular).count()
    }
}

/// Checks every class pair of `partition`; returns the number of irregular
/// pairs together with all verdicts.
pub fn count_irregular(g: &Graph, partition: &Partition, eps: f64) -> Result<(usize, PairVerdicts)> {
    count_irregular_with(g, partition, eps, RegularityOptions::default())
}

pub fn count_irregular_with(
    g: &Graph,
    partition: &Partition,
    eps: f64,
    opts: RegularityOptions,
) -> Result<(usize, PairVerdicts)> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("epsilon {eps} outside (0,1)"));
    }
    let k = partition.k();
    if partition.class_size() < 2 && k > 1 {
        return invalid("regularity check needs classes of at least two vertices");
    }
    let classes = partition.classes();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|s| ((s + 1)..k).map(move |t| (s, t))).collect();
    let verdicts: Vec<PairVerdict> = pairs
        .par_iter()
        .map(|&(s, t)| check_pair_unchecked(g, classes[s].members(), classes[t].members(), eps, opts))
        .collect();
    let verdicts = PairVerdicts::new(k, verdicts)?;
    Ok((verdicts.irregular_count(), verdicts))
}
