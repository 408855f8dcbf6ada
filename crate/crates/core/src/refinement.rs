//! Class-structure refinement: every iteration splits each class of an
//! equitable partition in two, so the class count doubles.
//!
//! Classes are visited in random order. A class that is regular with every
//! other class is *unzipped*: its members are sorted by indegree and dealt
//! alternately into two new classes. A class with irregular partners is
//! paired with the partner maximizing
//! `S = d(C_i, C_j) + 1 - |d(C_i, C_i) - d(C_j, C_j)|`, and each certificate
//! of the pair is split by densification (internal density ≥ 0.5) or
//! sparsification, then filled up from the union of both complements.
//! Odd vertices end up in the exceptional class `C_0`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::graph::{density_unchecked, indegree_unchecked, Graph, VertexClass};
use crate::regularity::PairVerdicts;

/// Equitable partition `C_0, C_1..C_k` with its ε.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    classes: Vec<VertexClass>,
    c0: VertexClass,
    pub eps: f64,
    pub generation: u32,
}

impl Partition {
    /// Assembles a partition without validation; see [`Partition::validate`].
    pub fn from_classes(classes: Vec<VertexClass>, c0: VertexClass, eps: f64) -> Self {
        Partition {
            classes,
            c0,
            eps,
            generation: 0,
        }
    }

    pub fn classes(&self) -> &[VertexClass] {
        &self.classes
    }

    pub fn c0(&self) -> &VertexClass {
        &self.c0
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    /// Common class cardinality `m` (0 for an empty partition).
    pub fn class_size(&self) -> usize {
        self.classes.first().map_or(0, VertexClass::len)
    }

    /// Class id per vertex: `0` for `C_0`, `1..=k` for the classes.
    pub fn membership(&self, n: usize) -> Vec<u32> {
        let mut m = vec![0u32; n];
        for (c, class) in self.classes.iter().enumerate() {
            for &v in class {
                m[v] = c as u32 + 1;
            }
        }
        m
    }

    /// Checks disjointness, coverage of `0..n` and equal class sizes.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        let size = self.class_size();
        for (c, class) in self.classes.iter().enumerate() {
            if class.len() != size {
                return invalid(format!("class {c} has {} vertices, expected {size}", class.len()));
            }
        }
        for &v in self.classes.iter().flat_map(|c| c.iter()).chain(self.c0.iter()) {
            if v >= n {
                return invalid(format!("vertex {v} out of range for n={n}"));
            }
            if std::mem::replace(&mut seen[v], true) {
                return invalid(format!("vertex {v} assigned twice"));
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return invalid(format!("vertex {v} is not assigned"));
        }
        Ok(())
    }
}

/// Result status of one refinement step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineStatus {
    Regular,
    /// `C_0` overflowed and could not be redistributed.
    Irregular,
    /// Classes are too small to split again.
    Exhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineOutcome {
    pub next: Partition,
    pub status: RefineStatus,
}

/// What to do when `C_0` exceeds `ε n` but holds fewer vertices than there
/// are classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C0Overflow {
    /// Report the refinement as irregular.
    #[default]
    Irregular,
    /// Keep refining with the oversized `C_0`.
    Keep,
}

/// Four random classes of `⌊n/4⌋` vertices; the remainder goes to `C_0`.
pub fn initial_partition(g: &Graph, eps: f64, rng: &mut (impl Rng + ?Sized)) -> Result<Partition> {
    let n = g.n();
    if n < 8 {
        return invalid(format!("initial partition needs at least 8 vertices, got {n}"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let m = n / 4;
    let mut classes: Vec<VertexClass> = order
        .chunks_exact(m)
        .take(4)
        .map(|c| {
            let mut c = c.to_vec();
            c.sort_unstable();
            VertexClass::new(c)
        })
        .collect();
    classes.truncate(4);
    let mut c0 = order[4 * m..].to_vec();
    c0.sort_unstable();
    Ok(Partition::from_classes(classes, VertexClass::new(c0), eps))
}

/// `S = d(C_i, C_j) + (1 - |d(C_i, C_i) - d(C_j, C_j)|)`, in `[0, 2]`.
pub fn pair_score(g: &Graph, ci: &VertexClass, cj: &VertexClass) -> f64 {
    score(g, ci.members(), cj.members())
}

fn score(g: &Graph, ci: &[usize], cj: &[usize]) -> f64 {
    let cross = density_unchecked(g, ci, cj);
    let din_i = density_unchecked(g, ci, ci);
    let din_j = density_unchecked(g, cj, cj);
    cross + (1.0 - (din_i - din_j).abs())
}

/// Members sorted by indegree, highest first; ties by vertex index.
fn sort_by_indegree(g: &Graph, c: &[usize]) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = c.iter().map(|&v| (indegree_unchecked(g, v, c), v)).collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, v)| v).collect()
}

/// Splits `c` by dealing its indegree-sorted members alternately into two
/// classes. With odd `|c|` the lowest-ranked vertex is returned separately.
pub fn unzip_by_indegree(g: &Graph, c: &VertexClass) -> Result<(VertexClass, VertexClass, Option<usize>)> {
    if c.len() < 2 {
        return invalid("unzip needs at least two vertices");
    }
    c.validate(g.n())?;
    Ok(unzip(g, c.members()))
}

fn unzip(g: &Graph, c: &[usize]) -> (VertexClass, VertexClass, Option<usize>) {
    let mut hubs = sort_by_indegree(g, c);
    let leftover = if hubs.len() % 2 == 1 { hubs.pop() } else { None };
    let (mut first, mut second) = (
        Vec::with_capacity(hubs.len() / 2),
        Vec::with_capacity(hubs.len() / 2),
    );
    for (rank, v) in hubs.into_iter().enumerate() {
        if rank % 2 == 0 {
            first.push(v);
        } else {
            second.push(v);
        }
    }
    (first.into(), second.into(), leftover)
}

/// Two new classes grown from a certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub first: VertexClass,
    pub second: VertexClass,
    /// Certificate vertices that did not fit into the two halves.
    pub overflow: Vec<usize>,
    /// Places left empty because the pool ran dry.
    pub deficit: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Fill {
    MostConnected,
    LeastConnected,
}

/// Densification branch: unzip the certificate by indegree, then fill each
/// half up to `target` with the pool vertices most connected to it.
/// Consumed vertices are removed from `pool`.
pub fn densification_split(
    g: &Graph,
    cert: &VertexClass,
    pool: &mut Vec<usize>,
    target: usize,
) -> Result<Split> {
    if cert.is_empty() {
        return invalid("empty certificate");
    }
    cert.validate(g.n())?;
    if density_unchecked(g, cert.members(), cert.members()) < 0.5 {
        return invalid("densification needs a certificate of internal density at least 0.5");
    }
    Ok(densify(g, cert.members(), pool, target))
}

fn densify(g: &Graph, cert: &[usize], pool: &mut Vec<usize>, target: usize) -> Split {
    let hubs = sort_by_indegree(g, cert);
    let keep = hubs.len().min(2 * target);
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (rank, &v) in hubs[..keep].iter().enumerate() {
        if rank % 2 == 0 {
            first.push(v);
        } else {
            second.push(v);
        }
    }
    let overflow = hubs[keep..].to_vec();
    fill(g, first, second, overflow, pool, target, Fill::MostConnected)
}

/// Sparsification branch: halve the certificate at random, then fill each
/// half up to `target` with the pool vertices least connected to it.
pub fn sparsification_split(
    g: &Graph,
    cert: &VertexClass,
    pool: &mut Vec<usize>,
    target: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Split> {
    if cert.is_empty() {
        return invalid("empty certificate");
    }
    cert.validate(g.n())?;
    if density_unchecked(g, cert.members(), cert.members()) >= 0.5 {
        return invalid("sparsification needs a certificate of internal density below 0.5");
    }
    Ok(sparsify(g, cert.members(), pool, target, rng))
}

fn sparsify(
    g: &Graph,
    cert: &[usize],
    pool: &mut Vec<usize>,
    target: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Split {
    let mut shuffled = cert.to_vec();
    shuffled.shuffle(rng);
    let half = shuffled.len().div_ceil(2);
    let mut first = shuffled[..half].to_vec();
    let mut second = shuffled[half..].to_vec();
    let mut overflow = first.split_off(first.len().min(target));
    overflow.extend(second.split_off(second.len().min(target)));
    fill(g, first, second, overflow, pool, target, Fill::LeastConnected)
}

/// Greedy fill alternating between the two halves. Connection is measured
/// against the current contents of the receiving half; ties go to the
/// lowest vertex index.
fn fill(
    g: &Graph,
    mut first: Vec<usize>,
    mut second: Vec<usize>,
    overflow: Vec<usize>,
    pool: &mut Vec<usize>,
    target: usize,
    mode: Fill,
) -> Split {
    let mut conn = [
        pool.iter()
            .map(|&p| indegree_unchecked(g, p, &first))
            .collect::<Vec<f64>>(),
        pool.iter()
            .map(|&p| indegree_unchecked(g, p, &second))
            .collect::<Vec<f64>>(),
    ];
    let mut turn = 0usize;
    loop {
        let open = [first.len() < target, second.len() < target];
        if pool.is_empty() || !(open[0] || open[1]) {
            break;
        }
        if !open[turn] {
            turn = 1 - turn;
        }
        let scores = &conn[turn];
        let mut best = 0;
        for idx in 1..pool.len() {
            let better = match mode {
                Fill::MostConnected => scores[idx] > scores[best],
                Fill::LeastConnected => scores[idx] < scores[best],
            };
            if better || (scores[idx] == scores[best] && pool[idx] < pool[best]) {
                best = idx;
            }
        }
        let v = pool.swap_remove(best);
        conn[0].swap_remove(best);
        conn[1].swap_remove(best);
        let row = g.row(v);
        for (c, &p) in conn[turn].iter_mut().zip(pool.iter()) {
            *c += row[p];
        }
        if turn == 0 {
            first.push(v);
        } else {
            second.push(v);
        }
        turn = 1 - turn;
    }
    let deficit = (target - first.len().min(target)) + (target - second.len().min(target));
    Split {
        first: first.into(),
        second: second.into(),
        overflow,
        deficit,
    }
}

/// Refinement tuning knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineOptions {
    /// Internal-density threshold between densification and sparsification.
    pub densify_threshold: f64,
    pub c0_overflow: C0Overflow,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            densify_threshold: 0.5,
            c0_overflow: C0Overflow::Irregular,
        }
    }
}

/// One refinement step with default options.
pub fn refine(
    g: &Graph,
    p: &Partition,
    verdicts: &PairVerdicts,
    rng: &mut (impl Rng + ?Sized),
) -> Result<RefineOutcome> {
    refine_with(g, p, verdicts, rng, RefineOptions::default())
}

pub fn refine_with(
    g: &Graph,
    p: &Partition,
    verdicts: &PairVerdicts,
    rng: &mut (impl Rng + ?Sized),
    opts: RefineOptions,
) -> Result<RefineOutcome> {
    let k = p.k();
    if verdicts.k() != k {
        return invalid(format!(
            "verdicts cover {} classes, partition has {k}",
            verdicts.k()
        ));
    }
    let target = p.class_size() / 2;
    if target < 2 {
        let mut next = p.clone();
        next.generation += 1;
        return Ok(RefineOutcome {
            next,
            status: RefineStatus::Exhausted,
        });
    }

    let classes = p.classes();
    let mut partners: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (s, t, v) in verdicts.iter() {
        if !v.is_regular {
            partners[s].push(t);
            partners[t].push(s);
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut consumed = vec![false; k];
    let mut next_classes: Vec<Vec<usize>> = Vec::with_capacity(2 * k);
    let mut c0 = p.c0().members().to_vec();

    let push_unzip = |next_classes: &mut Vec<Vec<usize>>, c0: &mut Vec<usize>, members: &[usize]| {
        let (a, b, leftover) = unzip(g, members);
        next_classes.push(a.into_vec());
        next_classes.push(b.into_vec());
        c0.extend(leftover);
    };

    for &i in &order {
        if consumed[i] {
            continue;
        }
        consumed[i] = true;
        let mut best: Option<(f64, usize)> = None;
        for &j in partners[i].iter().filter(|&&j| !consumed[j]) {
            let s = score(g, classes[i].members(), classes[j].members());
            if best.is_none_or(|(bs, bj)| s > bs || (s == bs && j < bj)) {
                best = Some((s, j));
            }
        }
        let Some((_, j)) = best else {
            push_unzip(&mut next_classes, &mut c0, classes[i].members());
            continue;
        };
        consumed[j] = true;

        let v = verdicts.oriented(i, j);
        let sides = [(&v.cert_i, &v.compl_i, i), (&v.cert_j, &v.compl_j, j)];
        let mut pool: Vec<usize> = sides
            .iter()
            .filter(|(cert, _, _)| cert.len() >= 2)
            .flat_map(|(_, compl, _)| compl.iter().copied())
            .collect();
        pool.sort_unstable();
        for (cert, _, class) in sides {
            if cert.len() < 2 {
                push_unzip(&mut next_classes, &mut c0, classes[class].members());
                continue;
            }
            let cert = cert.members();
            let split = if density_unchecked(g, cert, cert) >= opts.densify_threshold {
                densify(g, cert, &mut pool, target)
            } else {
                sparsify(g, cert, &mut pool, target, rng)
            };
            next_classes.push(split.first.into_vec());
            next_classes.push(split.second.into_vec());
            c0.extend(split.overflow);
        }
        c0.extend(pool);
    }

    equalize(g, &mut next_classes, &mut c0);

    let mut status = RefineStatus::Regular;
    let limit = p.eps * g.n() as f64;
    let slots = next_classes.len();
    if c0.len() as f64 > limit {
        if c0.len() >= slots {
            c0.shuffle(rng);
            let per = c0.len() / slots;
            let rest = c0.split_off(per * slots);
            for (idx, v) in c0.drain(..).enumerate() {
                next_classes[idx % slots].push(v);
            }
            c0 = rest;
        }
        if c0.len() as f64 > limit && opts.c0_overflow == C0Overflow::Irregular {
            status = RefineStatus::Irregular;
        }
    }

    for c in &mut next_classes {
        c.sort_unstable();
    }
    c0.sort_unstable();
    let next = Partition {
        classes: next_classes.into_iter().map(VertexClass::new).collect(),
        c0: VertexClass::new(c0),
        eps: p.eps,
        generation: p.generation + 1,
    };
    Ok(RefineOutcome { next, status })
}

/// Brings all classes to the common size `⌊assigned / classes⌋`: surplus
/// (most recently added members first) goes to `C_0`, shortfalls are topped
/// up from `C_0` with the most connected vertices.
fn equalize(g: &Graph, classes: &mut [Vec<usize>], c0: &mut Vec<usize>) {
    if classes.is_empty() {
        return;
    }
    let assigned: usize = classes.iter().map(Vec::len).sum();
    let size = assigned / classes.len();
    if classes.iter().all(|c| c.len() == size) {
        return;
    }
    for c in classes.iter_mut() {
        if c.len() > size {
            c0.extend(c.drain(size..));
        }
    }
    for c in classes.iter_mut() {
        while c.len() < size {
            let (pos, _) = c0
                .iter()
                .enumerate()
                .map(|(pos, &v)| (pos, indegree_unchecked(g, v, c)))
                .fold((0, f64::NEG_INFINITY), |best, cur| {
                    if cur.1 > best.1 || (cur.1 == best.1 && c0[cur.0] < c0[best.0]) {
                        cur
                    } else {
                        best
                    }
                });
            c.push(c0.swap_remove(pos));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularity::count_irregular;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn class(v: &[usize]) -> VertexClass {
        VertexClass::new(v.to_vec())
    }

    #[test]
    fn initial_partition_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = initial_partition(&Graph::empty(16), 0.1, &mut rng).unwrap();
        assert_eq!(p.k(), 4);
        assert_eq!(p.class_size(), 4);
        assert!(p.c0().is_empty());
        p.validate(16).unwrap();

        let p = initial_partition(&Graph::empty(18), 0.1, &mut rng).unwrap();
        assert_eq!(p.class_size(), 4);
        assert_eq!(p.c0().len(), 2);
        p.validate(18).unwrap();

        let a = initial_partition(&Graph::empty(40), 0.1, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = initial_partition(&Graph::empty(40), 0.1, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);

        assert!(initial_partition(&Graph::empty(7), 0.1, &mut rng).is_err());
    }

    #[test]
    fn pair_score_examples() {
        // complete graph on 6: cross density 1, equal internal densities
        let g = Graph::from_upper(6, |_, _| 1.0).unwrap();
        assert_eq!(pair_score(&g, &class(&[0, 1, 2]), &class(&[3, 4, 5])), 2.0);

        let g = Graph::empty(4);
        assert_eq!(pair_score(&g, &class(&[0, 1]), &class(&[2, 3])), 1.0);
    }

    #[test]
    fn pair_score_arithmetic() {
        // ci = {0,1}: one internal edge -> 2/4 = 0.5
        // cj = {2,3}: no internal edge -> 0
        // cross: 0-2 and 1-3 -> 2/4 = 0.5
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (1, 3)]).unwrap();
        let s = pair_score(&g, &class(&[0, 1]), &class(&[2, 3]));
        assert!((s - (0.5 + 1.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn unzip_deals_hubs_alternately() {
        // indegrees inside the class: 0:5 1:4 2:3 3:2 4:1 5:1 (construct a
        // threshold graph: vertex i joined to every j > i with i < 5 - j?)
        let edges = [
            (0, 1),
            (0, 2),
            (0, 3),
            (0, 4),
            (0, 5),
            (1, 2),
            (1, 3),
            (1, 4),
            (2, 3),
        ];
        let g = Graph::from_edges(6, &edges).unwrap();
        let c = class(&[5, 4, 3, 2, 1, 0]);
        let (a, b, left) = unzip_by_indegree(&g, &c).unwrap();
        // ranked: 0 (5), 1 (4), 2 (3), 3 (3), 4 (2), 5 (1)
        assert_eq!(a.members(), &[0, 2, 4]);
        assert_eq!(b.members(), &[1, 3, 5]);
        assert_eq!(left, None);
    }

    #[test]
    fn unzip_odd_class_leaves_one_vertex() {
        let g = Graph::empty(5);
        let (a, b, left) = unzip_by_indegree(&g, &class(&[4, 3, 2, 1, 0])).unwrap();
        // all ties: ascending vertex index
        assert_eq!(a.members(), &[0, 2]);
        assert_eq!(b.members(), &[1, 3]);
        assert_eq!(left, Some(4));
        assert!(unzip_by_indegree(&g, &class(&[1])).is_err());
    }

    #[test]
    fn densification_of_clique_gives_triangle_seeds() {
        let mut edges = vec![];
        for u in 0..6 {
            for v in (u + 1)..6 {
                edges.push((u, v));
            }
        }
        let g = Graph::from_edges(8, &edges).unwrap();
        let mut pool = vec![];
        let split = densification_split(&g, &class(&[0, 1, 2, 3, 4, 5]), &mut pool, 3).unwrap();
        assert_eq!(split.first.members(), &[0, 2, 4]);
        assert_eq!(split.second.members(), &[1, 3, 5]);
        assert_eq!(split.deficit, 0);
    }

    #[test]
    fn densification_fill_picks_most_connected() {
        // cert {0,1,2,3} complete; 4 is adjacent to 0 and 2 (first seed),
        // 5 is isolated
        let mut edges = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        edges.extend([(4, 0), (4, 2)]);
        let g = Graph::from_edges(6, &edges).unwrap();
        let mut pool = vec![5, 4];
        let split = densification_split(&g, &class(&[0, 1, 2, 3]), &mut pool, 3).unwrap();
        assert_eq!(split.first.members(), &[0, 2, 4]);
        assert_eq!(split.second.members(), &[1, 3, 5]);
        assert!(pool.is_empty());
    }

    #[test]
    fn densification_boundary_and_preconditions() {
        // internal density exactly 0.5: two disjoint edges on 4 vertices
        // give 4 / 16 = 0.25; a triangle plus isolated vertex gives 6 / 16.
        // K4 minus two disjoint edges: 4 edges -> 8 / 16 = 0.5
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let mut pool = vec![];
        assert!(densification_split(&g, &class(&[0, 1, 2, 3]), &mut pool, 2).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sparsification_split(&g, &class(&[0, 1, 2, 3]), &mut pool, 2, &mut rng).is_err());
    }

    #[test]
    fn densification_reports_deficit() {
        let g = Graph::from_edges(4, &[(0, 1)]).unwrap();
        let mut pool = vec![2];
        let split = densification_split(&g, &class(&[0, 1]), &mut pool, 2).unwrap();
        assert_eq!(split.first.len() + split.second.len(), 3);
        assert_eq!(split.deficit, 1);
    }

    #[test]
    fn sparsification_is_seeded_and_prefers_isolated_vertices() {
        // 6..9 are joined to everything in 0..6, 9 is isolated
        let mut edges = vec![];
        for p in 6..9 {
            for c in 0..6 {
                edges.push((p, c));
            }
        }
        let g = Graph::from_edges(10, &edges).unwrap();
        let cert = class(&[0, 1, 2, 3, 4, 5]);
        let run = |seed| {
            let mut pool = vec![6, 7, 8, 9];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sparsification_split(&g, &cert, &mut pool, 4, &mut rng).unwrap()
        };
        let a = run(3);
        assert_eq!(a, run(3));
        assert_eq!(a.first.len(), 4);
        assert_eq!(a.second.len(), 4);
        // the isolated vertex is the first pick, so it joins the first half
        assert_eq!(a.first.members()[3], 9);
    }

    #[test]
    fn sparsification_of_single_vertex_certificate() {
        let g = Graph::empty(6);
        let mut pool = vec![1, 2, 3, 4, 5];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let split = sparsification_split(&g, &class(&[0]), &mut pool, 2, &mut rng).unwrap();
        assert_eq!(split.first.members(), &[0, 1]);
        assert_eq!(split.second.members(), &[2, 3]);
        assert_eq!(pool, vec![5, 4]);
    }

    fn check_refined(p: &Partition, next: &Partition, n: usize) {
        next.validate(n).unwrap();
        assert_eq!(next.k(), 2 * p.k());
        assert_eq!(next.generation, p.generation + 1);
    }

    #[test]
    fn regular_partition_is_unzipped() {
        // complete multipartite: all pairs regular
        let m = 8;
        let n = 4 * m;
        let g = Graph::from_upper(n, |i, j| if i / m != j / m { 1.0 } else { 0.0 }).unwrap();
        let classes = (0..4)
            .map(|c| VertexClass::new((c * m..(c + 1) * m).collect()))
            .collect();
        let p = Partition::from_classes(classes, VertexClass::default(), 0.2);
        let (_, verdicts) = count_irregular(&g, &p, 0.2).unwrap();
        let out = refine(&g, &p, &verdicts, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(out.status, RefineStatus::Regular);
        check_refined(&p, &out.next, n);
        // each new class stays inside one old class
        for c in out.next.classes() {
            let block = c.members()[0] / m;
            assert!(c.iter().all(|&v| v / m == block));
        }
    }

    #[test]
    fn irregular_pair_uses_both_branches() {
        // C1 = 0..8, C2 = 8..16; 0..4 is a clique joined to 8..12, every
        // other pair empty. X_1 = 0..4 is dense, X_2 = 8..16 is sparse.
        let m = 8;
        let g = Graph::from_upper(2 * m, |i, j| {
            let clique = i < 4 && j < 4;
            let cross = i < 4 && (8..12).contains(&j);
            if clique || cross {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let p = Partition::from_classes(
            vec![
                VertexClass::new((0..8).collect()),
                VertexClass::new((8..16).collect()),
            ],
            VertexClass::default(),
            0.25,
        );
        let (count, verdicts) = count_irregular(&g, &p, 0.25).unwrap();
        assert_eq!(count, 1);
        let v = verdicts.oriented(0, 1);
        assert!(crate::graph::internal_density(&g, &v.cert_i).unwrap() >= 0.5);
        assert!(crate::graph::internal_density(&g, &v.cert_j).unwrap() < 0.5);
        let out = refine(&g, &p, &verdicts, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        check_refined(&p, &out.next, 2 * m);
        // densification keeps the clique members apart in alternating order
        let with_hub: Vec<_> = out
            .next
            .classes()
            .iter()
            .filter(|c| c.contains(0) || c.contains(1))
            .collect();
        assert_eq!(with_hub.len(), 2);
    }

    #[test]
    fn refine_is_deterministic_and_conserves_vertices() {
        let n = 203;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Graph::from_upper(n, |_, _| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).unwrap();
        let p = initial_partition(&g, 0.3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let (_, verdicts) = count_irregular(&g, &p, 0.3).unwrap();
        let a = refine(&g, &p, &verdicts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = refine(&g, &p, &verdicts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        check_refined(&p, &a.next, n);
    }

    #[test]
    fn tiny_classes_exhaust() {
        let g = Graph::empty(12);
        let classes = (0..4)
            .map(|c| VertexClass::new((c * 3..c * 3 + 3).collect()))
            .collect();
        let p = Partition::from_classes(classes, VertexClass::default(), 0.2);
        let (_, verdicts) = count_irregular(&g, &p, 0.2).unwrap();
        let out = refine(&g, &p, &verdicts, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.status, RefineStatus::Exhausted);
        assert_eq!(out.next.generation, 1);
    }

    #[test]
    fn c0_overflow_is_redistributed_or_flagged() {
        // 4 classes of 5 give one leftover each, plus 4 already in C0: 8
        // vertices exceed eps * n and fill one slot in each of the 8 classes
        let g = Graph::empty(24);
        let classes = (0..4)
            .map(|c| VertexClass::new((c * 5..c * 5 + 5).collect()))
            .collect();
        let p = Partition::from_classes(classes, VertexClass::new(vec![20, 21, 22, 23]), 0.1);
        let (_, verdicts) = count_irregular(&g, &p, 0.1).unwrap();
        let out = refine(&g, &p, &verdicts, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.status, RefineStatus::Regular);
        assert!(out.next.c0().is_empty());
        assert_eq!(out.next.class_size(), 3);
        out.next.validate(24).unwrap();

        // 4 classes of 5 plus 3 in C0 on n = 23: 7 leftovers < 8 classes
        let g = Graph::empty(23);
        let classes = (0..4)
            .map(|c| VertexClass::new((c * 5..c * 5 + 5).collect()))
            .collect();
        let p = Partition::from_classes(classes, VertexClass::new(vec![20, 21, 22]), 0.1);
        let (_, verdicts) = count_irregular(&g, &p, 0.1).unwrap();
        let out = refine(&g, &p, &verdicts, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.next.c0().len(), 7);
        assert_eq!(out.status, RefineStatus::Irregular);
        let opts = RefineOptions {
            c0_overflow: C0Overflow::Keep,
            ..RefineOptions::default()
        };
        let out = refine_with(&g, &p, &verdicts, &mut ChaCha8Rng::seed_from_u64(0), opts).unwrap();
        assert_eq!(out.status, RefineStatus::Regular);
    }
}
