//! Fixtures shared by the benchmarks in `benches/`.

use szcodec::{generate, Graph, SynthGraph, SynthParams, VertexClass};

/// Planted graph with ten balanced clusters.
pub fn planted(n: usize, internoise: f64) -> SynthGraph {
    generate(&SynthParams {
        n,
        clusters: 10,
        internoise,
        seed: 1,
        ..SynthParams::default()
    })
    .expect("valid parameters")
}

/// Two interleaved classes of size `m` taken from the first `2m` vertices.
pub fn class_pair(m: usize) -> (VertexClass, VertexClass) {
    let a = (0..m).map(|i| 2 * i).collect();
    let b = (0..m).map(|i| 2 * i + 1).collect();
    (VertexClass::new(a), VertexClass::new(b))
}

pub fn graph_for_pair(m: usize) -> Graph {
    planted(2 * m, 0.3).g
}
