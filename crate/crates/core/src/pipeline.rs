//! The CoDec procedure: search an ε-regular partition over a grid of ε
//! values, compress the graph to the reduced density matrix `RED` plus a
//! membership vector, decompress to the reconstructed graph `SZE` and
//! median-filter it into `FSZE`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CodecError, Result};
use crate::graph::{density_unchecked, Graph};
use crate::measures::MeasureReport;
use crate::refinement::{initial_partition, refine_with, C0Overflow, Partition, RefineOptions, RefineStatus};
use crate::regularity::{count_irregular_with, sze_index, RegularityOptions};

/// Codec parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub eps_grid: Vec<f64>,
    /// Side of the square median window; odd.
    pub kernel: usize,
    /// Fill irregular pairs with their density instead of leaving them empty.
    pub reconstruct_irregular: bool,
    /// Store internal class densities and rebuild classes as random graphs.
    pub reconstruct_internal: bool,
    pub threshold_step: f64,
    pub seed: u64,
    pub c0_overflow: C0Overflow,
    pub regularity: RegularityOptions,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            eps_grid: default_eps_grid(),
            kernel: 3,
            reconstruct_irregular: false,
            reconstruct_internal: false,
            threshold_step: 0.01,
            seed: 0,
            c0_overflow: C0Overflow::Irregular,
            regularity: RegularityOptions::default(),
        }
    }
}

/// `0.05, 0.10, …, 0.50`.
pub fn default_eps_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 20.0).collect()
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            return invalid("the epsilon grid is empty");
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return invalid(format!("epsilon {e} outside (0,1)"));
        }
        if self.kernel.is_multiple_of(2) {
            return invalid(format!("kernel must be odd, got {}", self.kernel));
        }
        if !(self.threshold_step > 0.0 && self.threshold_step < 1.0) {
            return invalid(format!("threshold step {} outside (0,1)", self.threshold_step));
        }
        Ok(())
    }

    fn refine_options(&self) -> RefineOptions {
        RefineOptions {
            c0_overflow: self.c0_overflow,
            ..RefineOptions::default()
        }
    }
}

fn accepts(p: &Partition, irregular: usize, n: usize) -> bool {
    let k = p.k();
    let pairs = (k * k.saturating_sub(1) / 2) as f64;
    irregular as f64 <= p.eps * pairs && p.c0().len() as f64 <= p.eps * n as f64
}

/// Alon-style search with the doubling refinement. Returns the first
/// partition with at most `ε·C(k,2)` irregular pairs, or `None` once
/// refinement reports an irregular or exhausted state.
pub fn approx_alon(g: &Graph, eps: f64, rng: &mut (impl Rng + ?Sized)) -> Result<Option<Partition>> {
    approx_alon_with(
        g,
        eps,
        rng,
        RefineOptions::default(),
        RegularityOptions::default(),
    )
}

pub fn approx_alon_with(
    g: &Graph,
    eps: f64,
    rng: &mut (impl Rng + ?Sized),
    opts: RefineOptions,
    reg: RegularityOptions,
) -> Result<Option<Partition>> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("epsilon {eps} outside (0,1)"));
    }
    let mut p = initial_partition(g, eps, rng)?;
    loop {
        let (irregular, verdicts) = count_irregular_with(g, &p, eps, reg)?;
        log::debug!(
            "eps={eps:.4} gen={} k={} m={} c0={} irregular={irregular}",
            p.generation,
            p.k(),
            p.class_size(),
            p.c0().len()
        );
        if accepts(&p, irregular, g.n()) {
            return Ok(Some(p));
        }
        let out = refine_with(g, &p, &verdicts, rng, opts)?;
        if out.status != RefineStatus::Regular {
            log::debug!("eps={eps:.4} stops: {:?}", out.status);
            return Ok(None);
        }
        p = out.next;
    }
}

fn stream_rng(seed: u64, stream: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Runs [`approx_alon`] for every grid value in parallel, each on its own
/// RNG stream. Successes are returned in grid order.
pub fn sweep(g: &Graph, cfg: &CodecConfig) -> Result<Vec<(f64, Partition)>> {
    cfg.validate()?;
    let opts = cfg.refine_options();
    let found: Vec<Option<Partition>> = cfg
        .eps_grid
        .par_iter()
        .enumerate()
        .map(|(idx, &eps)| approx_alon_with(g, eps, &mut stream_rng(cfg.seed, idx), opts, cfg.regularity))
        .collect::<Result<_>>()?;
    Ok(cfg
        .eps_grid
        .iter()
        .zip(found)
        .filter_map(|(&eps, p)| p.map(|p| (eps, p)))
        .collect())
}

/// Largest `k`, then smallest ε, then earliest candidate.
pub fn best_partition(candidates: Vec<(f64, Partition)>) -> Result<(f64, Partition)> {
    let mut best: Option<(f64, Partition)> = None;
    for (eps, p) in candidates {
        let better = match &best {
            None => true,
            Some((be, bp)) => p.k() > bp.k() || (p.k() == bp.k() && eps < *be),
        };
        if better {
            best = Some((eps, p));
        }
    }
    best.ok_or(CodecError::NoPartitionFound)
}

/// A graph reduced to its partition: membership vector plus pair densities.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedGraph {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    /// `0` for `C_0`, `1..=k` for the classes.
    pub membership: Vec<u32>,
    /// Upper triangle of the class density matrix, row-major,
    /// `k(k-1)/2` entries. Irregular pairs keep their measured density.
    pub red: Vec<f64>,
    /// Internal density per class, when kept.
    pub internal: Option<Vec<f64>>,
    /// Irregular class pairs `(s, t)`, 0-based with `s < t`.
    pub irregular_pairs: Vec<(u32, u32)>,
    pub weighted_source: bool,
}

/// Upper-triangle size of the input over the stored size, counting `RED` as
/// `k²/2` entries plus `n` membership entries.
pub fn compression_ratio(n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    (n * n / 2.0) / (k * k / 2.0 + n)
}

/// Position of `(s, t)`, `s < t`, in a row-major upper triangle of side `k`.
pub fn triangle_index(k: usize, s: usize, t: usize) -> usize {
    debug_assert!(s < t && t < k);
    s * k - s * (s + 1) / 2 + (t - s - 1)
}

impl CompressedGraph {
    /// Density between classes `s` and `t` (0-based, either order).
    pub fn red_at(&self, s: usize, t: usize) -> f64 {
        let (s, t) = if s < t { (s, t) } else { (t, s) };
        self.red[triangle_index(self.k, s, t)]
    }

    /// Number of stored scalars: `k(k-1)/2 + n`, plus `k` with internal
    /// densities.
    pub fn payload_entries(&self) -> usize {
        self.red.len() + self.n + self.internal.as_ref().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| invalid::<()>(msg);
        if self.membership.len() != self.n {
            return err(format!(
                "membership has {} entries for n={}",
                self.membership.len(),
                self.n
            ));
        }
        if self.red.len() != self.k * self.k.saturating_sub(1) / 2 {
            return err(format!("RED has {} entries for k={}", self.red.len(), self.k));
        }
        let mut sizes = vec![0usize; self.k + 1];
        for &c in &self.membership {
            match sizes.get_mut(c as usize) {
                Some(s) => *s += 1,
                None => return err(format!("class id {c} exceeds k={}", self.k)),
            }
        }
        if sizes[1..].windows(2).any(|w| w[0] != w[1]) {
            return err("classes differ in size".into());
        }
        let in_unit = |x: &f64| (0.0..=1.0).contains(x);
        if !self.red.iter().all(in_unit) || !self.internal.iter().flatten().all(in_unit) {
            return err("densities must lie in [0,1]".into());
        }
        if let Some(d) = &self.internal {
            if d.len() != self.k {
                return err(format!("{} internal densities for k={}", d.len(), self.k));
            }
        }
        for &(s, t) in &self.irregular_pairs {
            if s >= t || t as usize >= self.k {
                return err(format!("irregular pair ({s},{t}) out of range"));
            }
        }
        Ok(())
    }
}

/// Reduces `g` to `p`'s class densities.
pub fn compress(g: &Graph, p: &Partition, keep_internal: bool) -> Result<CompressedGraph> {
    compress_with(g, p, keep_internal, RegularityOptions::default())
}

/// As [`compress`]; `reg` decides which pairs are recorded as irregular.
pub fn compress_with(
    g: &Graph,
    p: &Partition,
    keep_internal: bool,
    reg: RegularityOptions,
) -> Result<CompressedGraph> {
    p.validate(g.n())?;
    let k = p.k();
    let (_, verdicts) = count_irregular_with(g, p, p.eps, reg)?;
    let mut red = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    let mut irregular_pairs = Vec::new();
    for (s, t, v) in verdicts.iter() {
        red.push(v.density);
        if !v.is_regular {
            irregular_pairs.push((s as u32, t as u32));
        }
    }
    let internal = keep_internal.then(|| {
        p.classes()
            .iter()
            .map(|c| density_unchecked(g, c.members(), c.members()))
            .collect()
    });
    Ok(CompressedGraph {
        n: g.n(),
        k,
        eps: p.eps,
        membership: p.membership(g.n()),
        red,
        internal,
        irregular_pairs,
        weighted_source: !g.is_binary(),
    })
}

/// Expands a compressed graph to the reconstructed graph `SZE`.
///
/// Vertices of a regular pair are joined with weight equal to the pair
/// density. Pairs inside a class or touching `C_0` stay empty, as do
/// irregular pairs unless `cfg.reconstruct_irregular` is set. With
/// `cfg.reconstruct_internal` and stored internal densities, each class
/// becomes a random graph of that density, seeded by `cfg.seed`.
pub fn decompress(c: &CompressedGraph, cfg: &CodecConfig) -> Result<Graph> {
    c.validate()?;
    let k = c.k;
    // block weights indexed by membership id, row 0 / column 0 for C_0
    let side = k + 1;
    let mut block = vec![0.0; side * side];
    for s in 0..k {
        for t in (s + 1)..k {
            let w = c.red[triangle_index(k, s, t)];
            block[(s + 1) * side + t + 1] = w;
            block[(t + 1) * side + s + 1] = w;
        }
    }
    if !cfg.reconstruct_irregular {
        for &(s, t) in &c.irregular_pairs {
            let (s, t) = (s as usize + 1, t as usize + 1);
            block[s * side + t] = 0.0;
            block[t * side + s] = 0.0;
        }
    }
    let internal = c.internal.as_ref().filter(|_| cfg.reconstruct_internal);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mem = &c.membership;
    Graph::from_upper(c.n, |i, j| {
        let (a, b) = (mem[i] as usize, mem[j] as usize);
        if a == 0 || b == 0 {
            0.0
        } else if a == b {
            match internal {
                Some(d) if rng.gen::<f64>() < d[a - 1] => 1.0,
                _ => 0.0,
            }
        } else {
            block[a * side + b]
        }
    })
}

/// Reflect padding that repeats the edge sample: `d c b a | a b c d`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Median filter over a square row-major `n × n` matrix with a
/// `kernel × kernel` window and reflect padding.
pub fn median_filter_matrix(data: &[f64], n: usize, kernel: usize) -> Result<Vec<f64>> {
    if kernel.is_multiple_of(2) {
        return invalid(format!("kernel must be odd, got {kernel}"));
    }
    if kernel > n.max(1) {
        return invalid(format!("kernel {kernel} exceeds matrix side {n}"));
    }
    if data.len() != n * n {
        return invalid(format!("{} entries for a {n}x{n} matrix", data.len()));
    }
    let r = (kernel / 2) as isize;
    let mid = kernel * kernel / 2;
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        let rows: Vec<usize> = (-r..=r).map(|d| reflect(i as isize + d, n)).collect();
        let mut window = Vec::with_capacity(kernel * kernel);
        for (j, cell) in row.iter_mut().enumerate() {
            window.clear();
            for &ri in &rows {
                for d in -r..=r {
                    window.push(data[ri * n + reflect(j as isize + d, n)]);
                }
            }
            let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
            *cell = *m;
        }
    });
    Ok(out)
}

/// Median-filtered graph, re-symmetrized with a zero diagonal.
pub fn median_filter(m: &Graph, kernel: usize) -> Result<Graph> {
    let n = m.n();
    let raw = median_filter_matrix(m.as_slice(), n, kernel)?;
    Graph::from_upper(n, |i, j| (raw[i * n + j] + raw[j * n + i]) / 2.0)
}

/// Binarizes `m` at `t`: weights `≥ t` become 1.
pub fn binarize(m: &Graph, t: f64) -> Graph {
    Graph::from_upper(m.n(), |i, j| if m.weight(i, j) >= t { 1.0 } else { 0.0 })
        .expect("binary weights are valid")
}

/// Scans `t ∈ {step, 2·step, …} ∩ (0,1)` for the binarization of `fsze`
/// closest to `gt` in l2, returning the smallest minimizing `t` and the
/// binarized graph.
pub fn threshold_search(fsze: &Graph, gt: &Graph, step: f64) -> Result<(f64, Graph)> {
    let (t, _) = threshold_scan(fsze, gt, step)?;
    Ok((t, binarize(fsze, t)))
}

/// Squared l2 error for every grid threshold; returns the best `t` and the
/// whole curve.
pub fn threshold_scan(fsze: &Graph, gt: &Graph, step: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    if fsze.n() != gt.n() {
        return invalid(format!("matrix sizes differ: {} vs {}", fsze.n(), gt.n()));
    }
    if !(step > 0.0 && step < 1.0) {
        return invalid(format!("threshold step {step} outside (0,1)"));
    }
    // entries sorted by filtered weight; an entry costs (1-g)^2 when kept,
    // g^2 when dropped
    let mut entries: Vec<(f64, f64)> = fsze
        .as_slice()
        .iter()
        .copied()
        .zip(gt.as_slice().iter().copied())
        .collect();
    entries.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut drop_cost = Vec::with_capacity(entries.len() + 1);
    let mut keep_cost = vec![0.0; entries.len() + 1];
    drop_cost.push(0.0);
    for &(_, g) in &entries {
        drop_cost.push(drop_cost.last().unwrap() + g * g);
    }
    for (idx, &(_, g)) in entries.iter().enumerate().rev() {
        keep_cost[idx] = keep_cost[idx + 1] + (1.0 - g) * (1.0 - g);
    }
    let n = fsze.n().max(1) as f64;
    let mut curve = Vec::new();
    let mut best = (f64::NAN, f64::INFINITY);
    let mut i = 1;
    loop {
        // snap away accumulated error so that 6 * 0.1 is 0.6
        let t = (i as f64 * step * 1e12).round() / 1e12;
        if t >= 1.0 {
            break;
        }
        let cut = entries.partition_point(|e| e.0 < t);
        let l2 = (drop_cost[cut] + keep_cost[cut]).sqrt() / n;
        curve.push((t, l2));
        if l2 < best.1 {
            best = (t, l2);
        }
        i += 1;
    }
    Ok((best.0, curve))
}

/// Wall-clock seconds per phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub compress: f64,
    pub decompress: f64,
    pub filter: f64,
}

/// Everything one codec run produces.
#[derive(Clone, Debug)]
pub struct CodecRun {
    pub partition: Partition,
    pub compressed: CompressedGraph,
    pub sze: Graph,
    pub fsze: Graph,
    pub report: MeasureReport,
    pub timings: PhaseTimings,
}

/// sweep → best partition → compress → decompress → median filter.
pub fn run_codec(g: &Graph, cfg: &CodecConfig) -> Result<CodecRun> {
    cfg.validate()?;
    let clock = Instant::now();
    let (eps, partition) = best_partition(sweep(g, cfg)?)?;
    let compressed = compress_with(g, &partition, cfg.reconstruct_internal, cfg.regularity)?;
    let t_compress = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let sze = decompress(&compressed, cfg)?;
    let t_decompress = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let fsze = median_filter(&sze, cfg.kernel)?;
    let t_filter = clock.elapsed().as_secs_f64();

    let report = MeasureReport {
        eps,
        k_classes: partition.k(),
        irregular_count: compressed.irregular_pairs.len(),
        sze_index: sze_index(g, &partition)?,
        ..MeasureReport::default()
    };
    log::info!(
        "eps={eps} k={} irregular={} sze_index={:.4}",
        report.k_classes,
        report.irregular_count,
        report.sze_index
    );
    Ok(CodecRun {
        partition,
        compressed,
        sze,
        fsze,
        report,
        timings: PhaseTimings {
            compress: t_compress,
            decompress: t_decompress,
            filter: t_filter,
        },
    })
}
