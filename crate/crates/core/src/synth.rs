//! Planted-cluster graph generator: `G = GT + N`.
//!
//! `GT` is a block diagonal of disjoint cliques, `N` an Erdős–Rényi noise
//! layer restricted to off-block pairs. Intra-cluster corrosion deletes
//! structural edges independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::Graph;

/// Parameters of a synthetic planted-cluster graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n: usize,
    pub clusters: usize,
    /// Probability of a noise edge between two different clusters.
    pub internoise: f64,
    /// Probability of deleting a structural in-cluster edge.
    pub intranoise: f64,
    pub balanced: bool,
    pub weighted: bool,
    /// Weight of structural edges in weighted mode.
    pub structure_weight: f64,
    /// Noise edges in weighted mode draw their weight from `U(lo, hi)`.
    pub noise_weight_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n: 1000,
            clusters: 10,
            internoise: 0.2,
            intranoise: 0.0,
            balanced: true,
            weighted: false,
            structure_weight: 1.0,
            noise_weight_range: (0.25, 0.75),
            seed: 1,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return invalid("at least one cluster is required");
        }
        if self.clusters > self.n {
            return invalid(format!(
                "{} clusters requested for {} vertices",
                self.clusters, self.n
            ));
        }
        for (name, p) in [("internoise", self.internoise), ("intranoise", self.intranoise)] {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("{name} = {p} outside [0,1]"));
            }
        }
        let (lo, hi) = self.noise_weight_range;
        if !(0.0..=1.0).contains(&self.structure_weight) || !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return invalid("edge weights must lie in [0,1]");
        }
        Ok(())
    }
}

/// Ground-truth cluster ids, `1..=C`, one per vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector(Vec<u32>);

impl LabelVector {
    pub fn new(labels: Vec<u32>) -> Self {
        LabelVector(labels)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of distinct labels.
    pub fn distinct(&self) -> usize {
        let mut v = self.0.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }
}

impl From<Vec<u32>> for LabelVector {
    fn from(v: Vec<u32>) -> Self {
        LabelVector(v)
    }
}

/// A generated instance: noisy graph, its ground truth and the labels.
#[derive(Clone, Debug)]
pub struct SynthGraph {
    pub g: Graph,
    pub gt: Graph,
    pub labels: LabelVector,
}

/// Cluster sizes for `params`, in vertex order.
pub fn cluster_sizes(params: &SynthParams, rng: &mut impl Rng) -> Vec<usize> {
    let (n, c) = (params.n, params.clusters);
    if params.balanced {
        let (base, rem) = (n / c, n % c);
        return (0..c).map(|i| base + usize::from(i < rem)).collect();
    }
    let floor = 8.max(n / (4 * c)).min(n / c);
    let free = n - floor * c;
    let mut cuts: Vec<usize> = (0..c - 1).map(|_| rng.gen_range(0..=free)).collect();
    cuts.sort_unstable();
    let mut sizes = Vec::with_capacity(c);
    let mut prev = 0;
    for cut in cuts.into_iter().chain(std::iter::once(free)) {
        sizes.push(floor + cut - prev);
        prev = cut;
    }
    sizes
}

/// Generates `(G, GT, labels)`; deterministic for a fixed `params.seed`.
pub fn generate(params: &SynthParams) -> Result<SynthGraph> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let sizes = cluster_sizes(params, &mut rng);

    let mut labels = Vec::with_capacity(params.n);
    for (c, &s) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(c as u32 + 1, s));
    }

    let n = params.n;
    let mut g = Graph::empty(n);
    let mut gt = Graph::empty(n);
    let (lo, hi) = params.noise_weight_range;
    let structural = if params.weighted {
        params.structure_weight
    } else {
        1.0
    };

    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.gen();
            if labels[i] == labels[j] {
                gt.set(i, j, structural);
                if u >= params.intranoise {
                    g.set(i, j, structural);
                }
            } else if u < params.internoise {
                let w = if params.weighted {
                    rng.gen_range(lo..=hi)
                } else {
                    1.0
                };
                g.set(i, j, w);
            }
        }
    }

    Ok(SynthGraph {
        g,
        gt,
        labels: LabelVector(labels),
    })
}

/// Expected density of `G` (weight over ordered pairs divided by `n^2`).
pub fn expected_density(params: &SynthParams) -> f64 {
    let n = params.n as f64;
    if params.n == 0 {
        return 0.0;
    }
    let mean_noise_weight = if params.weighted {
        let (lo, hi) = params.noise_weight_range;
        (lo + hi) / 2.0
    } else {
        1.0
    };
    let structural = if params.weighted {
        params.structure_weight
    } else {
        1.0
    };
    let expected_in_block =
        |sizes: &[usize]| -> f64 { sizes.iter().map(|&s| (s * s.saturating_sub(1)) as f64).sum() };
    let in_block = if params.balanced {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        expected_in_block(&cluster_sizes(params, &mut rng))
    } else {
        // average the block mass over the generator's own size distribution
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let trials = 256;
        (0..trials)
            .map(|_| expected_in_block(&cluster_sizes(params, &mut rng)))
            .sum::<f64>()
            / trials as f64
    };
    let off_block = n * n - n - in_block;
    (in_block * structural * (1.0 - params.intranoise) + off_block * mean_noise_weight * params.internoise)
        / (n * n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, c: usize, inter: f64, intra: f64) -> SynthParams {
        SynthParams {
            n,
            clusters: c,
            internoise: inter,
            intranoise: intra,
            ..SynthParams::default()
        }
    }

    #[test]
    fn noise_free_graph_equals_ground_truth() {
        let s = generate(&params(60, 4, 0.0, 0.0)).unwrap();
        assert_eq!(s.g, s.gt);
        assert_eq!(s.labels.distinct(), 4);
    }

    #[test]
    fn saturated_noise_gives_complete_graph() {
        let s = generate(&params(40, 3, 1.0, 0.0)).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(s.g.weight(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn planted_layout_is_block_diagonal() {
        let s = generate(&params(1000, 10, 0.2, 0.0)).unwrap();
        let labels = s.labels.as_slice();
        assert_eq!(labels[0], 1);
        assert_eq!(labels[99], 1);
        assert_eq!(labels[100], 2);
        assert_eq!(labels[999], 10);
        for i in (0..1000).step_by(37) {
            for j in (0..1000).step_by(41) {
                let same = labels[i] == labels[j] && i != j;
                assert_eq!(s.gt.weight(i, j), if same { 1.0 } else { 0.0 });
                if same {
                    assert_eq!(s.g.weight(i, j), 1.0);
                }
            }
        }
    }

    #[test]
    fn balanced_sizes_spread_remainder() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sizes = cluster_sizes(&params(23, 5, 0.0, 0.0), &mut rng);
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
    }

    #[test]
    fn imbalanced_sizes_respect_floor() {
        let p = SynthParams {
            balanced: false,
            ..params(400, 5, 0.0, 0.0)
        };
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sizes = cluster_sizes(&p, &mut rng);
            assert_eq!(sizes.iter().sum::<usize>(), 400);
            assert!(sizes.iter().all(|&s| s >= 20));
        }
    }

    #[test]
    fn too_many_clusters_is_rejected() {
        assert!(generate(&params(5, 6, 0.1, 0.0)).is_err());
        assert!(generate(&params(5, 2, 1.1, 0.0)).is_err());
    }

    #[test]
    fn same_seed_same_graph() {
        let p = SynthParams {
            weighted: true,
            intranoise: 0.1,
            ..params(80, 4, 0.3, 0.1)
        };
        let a = generate(&p).unwrap();
        let b = generate(&p).unwrap();
        assert_eq!(a.g, b.g);
        assert_eq!(a.labels, b.labels);
        let c = generate(&SynthParams { seed: 2, ..p }).unwrap();
        assert_ne!(a.g, c.g);
    }

    #[test]
    fn weights_follow_their_layer() {
        let p = SynthParams {
            weighted: true,
            structure_weight: 0.9,
            ..params(90, 3, 0.5, 0.3)
        };
        let s = generate(&p).unwrap();
        let l = s.labels.as_slice();
        for i in 0..90 {
            for j in (i + 1)..90 {
                let w = s.g.weight(i, j);
                if l[i] == l[j] {
                    assert!(w == 0.0 || w == 0.9);
                } else {
                    assert!(w == 0.0 || (0.25..=0.75).contains(&w));
                }
            }
        }
    }

    #[test]
    fn expected_density_examples() {
        let d = expected_density(&params(1000, 10, 0.2, 0.0));
        // in-block: 10 * 100 * 99 ordered pairs, off-block: 1e6 - 1000 - 99000
        let want = (99_000.0 + 900_000.0 * 0.2) / 1e6;
        assert!((d - want).abs() < 1e-12);
        assert!((d - 0.279).abs() < 1e-9);

        let one = expected_density(&params(50, 1, 0.0, 0.0));
        assert!((one - 49.0 / 50.0).abs() < 1e-12);

        let sat = expected_density(&params(1000, 10, 1.0, 0.25));
        let want = (99_000.0 * 0.75 + 900_000.0) / 1e6;
        assert!((sat - want).abs() < 1e-12);
    }

    #[test]
    fn expected_density_matches_sample_average() {
        let base = params(200, 4, 0.3, 0.2);
        let want = expected_density(&base);
        let mean: f64 = (0..100)
            .map(|seed| {
                generate(&SynthParams { seed, ..base.clone() })
                    .unwrap()
                    .g
                    .density()
            })
            .sum::<f64>()
            / 100.0;
        assert!((mean - want).abs() < 2e-3, "mean {mean} expected {want}");
    }
}
