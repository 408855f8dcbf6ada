//! Lossy graph compression through approximate Szemerédi-regular partitions.
//!
//! A dense graph is reduced to an equitable partition whose class pairs are
//! mostly ε-regular. The compressed form keeps one density per class pair
//! plus a membership vector; decompression spreads each density over its
//! pair and a median filter cleans the result.
//!
//! ```no_run
//! use szcodec::{generate, run_codec, CodecConfig, SynthParams};
//!
//! let synth = generate(&SynthParams::default()).unwrap();
//! let run = run_codec(&synth.g, &CodecConfig::default()).unwrap();
//! println!("k = {}, eps = {}", run.report.k_classes, run.report.eps);
//! ```

pub mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod measures;
pub mod pipeline;
pub mod refinement;
pub mod regularity;
pub mod synth;

pub use error::{CodecError, Result};
pub use experiment::{emit_report, run_experiment, ExperimentSpec, RunRecord};
pub use graph::{internal_density, pair_density, Graph, VertexClass};
pub use io::{load_compressed, load_graph, save_compressed, GraphFormat, LoadedGraph};
pub use measures::{ari, kvs_best_ari, kvs_predict, l1_dist, l2_dist, MeasureReport};
pub use pipeline::{
    compress, decompress, median_filter, run_codec, threshold_search, CodecConfig, CodecRun, CompressedGraph,
};
pub use refinement::{C0Overflow, Partition};
pub use regularity::{check_pair, sze_index, ConditionOrder, DeviationScale, PairVerdict, RegularityOptions};
pub use synth::{generate, LabelVector, SynthGraph, SynthParams};
