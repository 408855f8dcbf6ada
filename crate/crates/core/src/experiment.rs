//! Experiment harness: sweeps planted-cluster graphs over sizes and noise
//! levels, runs the codec on each and writes CSV tables and snapshots.
//!
//! Repetition `r` (0-based) of every cell uses seed `master_seed + r` for
//! both the generator and the codec, so reruns are byte-identical and cells
//! with the same repetition index share their random streams.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CodecError, Result};
use crate::graph::Graph;
use crate::io::write_pgm;
use crate::measures::l2_dist;
use crate::pipeline::{run_codec, threshold_search, CodecConfig, PhaseTimings};
use crate::synth::{generate, SynthParams};

/// Environment variable capping the experiment worker pool.
pub const THREADS_ENV: &str = "CODEC_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub sizes: Vec<usize>,
    pub internoise_levels: Vec<f64>,
    pub intranoise_levels: Vec<f64>,
    pub clusters: usize,
    pub balanced: bool,
    pub weighted: bool,
    pub repetitions: usize,
    pub master_seed: u64,
    /// Run the binarization threshold search against the ground truth.
    pub threshold: bool,
    /// Write G, SZE, FSZE and UFSZE images for the first repetition of each
    /// cell.
    pub snapshots: bool,
    pub codec: CodecConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            sizes: vec![1000],
            internoise_levels: vec![0.2, 0.4, 0.5, 0.6, 0.8],
            intranoise_levels: vec![0.0],
            clusters: 10,
            balanced: true,
            weighted: false,
            repetitions: 5,
            master_seed: 1,
            threshold: true,
            snapshots: false,
            codec: CodecConfig::default(),
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return invalid("at least one repetition is required");
        }
        if self.sizes.is_empty() || self.internoise_levels.is_empty() || self.intranoise_levels.is_empty() {
            return invalid("sizes and noise levels must be non-empty");
        }
        let levels = self.internoise_levels.iter().chain(&self.intranoise_levels);
        if let Some(p) = levels.into_iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return invalid(format!("noise level {p} outside [0,1]"));
        }
        self.codec.validate()
    }

    /// Cells in output order: size, then internoise, then intranoise.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.sizes {
            for &internoise in &self.internoise_levels {
                for &intranoise in &self.intranoise_levels {
                    out.push(Cell {
                        n,
                        internoise,
                        intranoise,
                    });
                }
            }
        }
        out
    }

    fn synth_params(&self, cell: Cell, seed: u64) -> SynthParams {
        SynthParams {
            n: cell.n,
            clusters: self.clusters,
            internoise: cell.internoise,
            intranoise: cell.intranoise,
            balanced: self.balanced,
            weighted: self.weighted,
            seed,
            ..SynthParams::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub internoise: f64,
    pub intranoise: f64,
}

/// Measurements of one repetition. Fields other than the identifiers are
/// `None` when the run failed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    pub internoise: f64,
    pub intranoise: f64,
    pub repetition: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub density: f64,
    pub eps: Option<f64>,
    pub k: Option<usize>,
    pub irregular: Option<usize>,
    pub sze_index: Option<f64>,
    pub kvs_ari: Option<f64>,
    pub kvs_k: Option<usize>,
    pub l2: Option<f64>,
    pub l1: Option<f64>,
    pub threshold: Option<f64>,
    pub l2_thresholded: Option<f64>,
    pub timings: PhaseTimings,
}

impl RunRecord {
    fn cell(&self) -> Cell {
        Cell {
            n: self.n,
            internoise: self.internoise,
            intranoise: self.intranoise,
        }
    }
}

/// Graphs kept for snapshot images.
pub struct RunGraphs {
    pub g: Graph,
    pub sze: Graph,
    pub fsze: Graph,
    pub ufsze: Option<Graph>,
}

/// Generates one planted graph, runs the codec and scores it.
pub fn run_single(
    params: &SynthParams,
    codec: &CodecConfig,
    threshold: bool,
    repetition: usize,
) -> (RunRecord, Option<RunGraphs>) {
    let mut rec = RunRecord {
        n: params.n,
        internoise: params.internoise,
        intranoise: params.intranoise,
        repetition,
        seed: params.seed,
        ..RunRecord::default()
    };
    let synth = match generate(params) {
        Ok(s) => s,
        Err(e) => {
            rec.error = Some(e.to_string());
            return (rec, None);
        }
    };
    rec.density = synth.g.density();
    let scored = run_codec(&synth.g, codec).and_then(|mut run| {
        run.report.score(&run.fsze, &synth.gt, &synth.labels)?;
        let ufsze = if threshold {
            let (t, ufsze) = threshold_search(&run.fsze, &synth.gt, codec.threshold_step)?;
            rec.threshold = Some(t);
            rec.l2_thresholded = Some(l2_dist(&ufsze, &synth.gt)?);
            Some(ufsze)
        } else {
            None
        };
        Ok((run, ufsze))
    });
    match scored {
        Ok((run, ufsze)) => {
            let r = &run.report;
            rec.eps = Some(r.eps);
            rec.k = Some(r.k_classes);
            rec.irregular = Some(r.irregular_count);
            rec.sze_index = Some(r.sze_index);
            rec.kvs_ari = r.kvs_ari;
            rec.kvs_k = r.kvs_k;
            rec.l2 = r.l2;
            rec.l1 = r.l1;
            rec.timings = run.timings;
            let graphs = RunGraphs {
                g: synth.g,
                sze: run.sze,
                fsze: run.fsze,
                ufsze,
            };
            (rec, Some(graphs))
        }
        Err(e) => {
            log::warn!(
                "n={} internoise={} seed={}: {e}",
                params.n,
                params.internoise,
                params.seed
            );
            rec.error = Some(e.to_string());
            rec.threshold = None;
            rec.l2_thresholded = None;
            (rec, None)
        }
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let threads: usize =
        v.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
            CodecError::InvalidArgument(format!("{THREADS_ENV}={v} is not a positive count"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| CodecError::InvalidArgument(e.to_string()))
}

/// Runs every (cell, repetition) pair. Records come back in spec order
/// whatever order the workers finish in; failed runs are recorded and the
/// sweep continues.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let jobs: Vec<(Cell, usize)> = spec
        .cells()
        .into_iter()
        .flat_map(|c| (0..spec.repetitions).map(move |r| (c, r)))
        .collect();
    let snap_dir = spec.output_dir.join("snapshots");
    if spec.snapshots {
        fs::create_dir_all(&snap_dir)?;
    }
    let work = || -> Result<Vec<RunRecord>> {
        jobs.par_iter()
            .map(|&(cell, rep)| {
                let seed = spec.master_seed + rep as u64;
                let codec = CodecConfig {
                    seed,
                    ..spec.codec.clone()
                };
                let (rec, graphs) = run_single(&spec.synth_params(cell, seed), &codec, spec.threshold, rep);
                log::info!(
                    "n={} internoise={} intranoise={} rep={rep} ari={:?}",
                    cell.n,
                    cell.internoise,
                    cell.intranoise,
                    rec.kvs_ari
                );
                if let (true, 0, Some(graphs)) = (spec.snapshots, rep, graphs) {
                    write_snapshots(&snap_dir, &cell_stem(cell), &graphs)?;
                }
                Ok(rec)
            })
            .collect()
    };
    match thread_pool()? {
        Some(pool) => pool.install(work),
        None => work(),
    }
}

fn cell_stem(c: Cell) -> String {
    format!("n{}_inter{}_intra{}", c.n, c.internoise, c.intranoise)
}

/// Writes `{stem}_g.pgm`, `{stem}_sze.pgm`, `{stem}_fsze.pgm` and, when
/// present, `{stem}_ufsze.pgm`.
pub fn write_snapshots(dir: &Path, stem: &str, graphs: &RunGraphs) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let named = [
        ("g", Some(&graphs.g)),
        ("sze", Some(&graphs.sze)),
        ("fsze", Some(&graphs.fsze)),
        ("ufsze", graphs.ufsze.as_ref()),
    ];
    for (name, g) in named {
        if let Some(g) = g {
            let path = dir.join(format!("{stem}_{name}.pgm"));
            write_pgm(g, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
}

pub const RESULTS_HEADER: &str =
    "n,internoise,intranoise,repetition,seed,status,density,eps,k,irregular,sze_index,kvs_ari,kvs_k,l2,l1,threshold,l2_thresholded,error";
pub const TIMINGS_HEADER: &str = "n,internoise,intranoise,repetition,compress_s,decompress_s,filter_s";
pub const SUMMARY_HEADER: &str = "n,internoise,intranoise,runs,failures,eps_mean,eps_sd,k_mean,k_sd,sze_index_mean,sze_index_sd,kvs_ari_mean,kvs_ari_sd,l2_mean,l2_sd,l1_mean,l1_sd,threshold_mean,threshold_sd";
pub const THRESHOLD_HEADER: &str = "n,internoise,intranoise,repetition,density,threshold";

/// One row per run; timings are kept out so reruns compare byte for byte.
pub fn results_csv(records: &[RunRecord]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in records {
        let status = if r.error.is_some() { "error" } else { "ok" };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{status},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.internoise,
            r.intranoise,
            r.repetition,
            r.seed,
            r.density,
            opt(r.eps),
            opt(r.k),
            opt(r.irregular),
            opt(r.sze_index),
            opt(r.kvs_ari),
            opt(r.kvs_k),
            opt(r.l2),
            opt(r.l1),
            opt(r.threshold),
            opt(r.l2_thresholded),
            r.error.as_deref().map(quote).unwrap_or_default(),
        );
    }
    out
}

pub fn timings_csv(records: &[RunRecord]) -> String {
    let mut out = format!("{TIMINGS_HEADER}\n");
    for r in records.iter().filter(|r| r.error.is_none()) {
        let t = r.timings;
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            r.n, r.internoise, r.intranoise, r.repetition, t.compress, t.decompress, t.filter
        );
    }
    out
}

/// Mean and sample standard deviation; the deviation is `None` for fewer
/// than two values.
pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Aggregate of one cell's successful runs.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub runs: usize,
    pub failures: usize,
    pub eps: (Option<f64>, Option<f64>),
    pub k: (Option<f64>, Option<f64>),
    pub sze_index: (Option<f64>, Option<f64>),
    pub kvs_ari: (Option<f64>, Option<f64>),
    pub l2: (Option<f64>, Option<f64>),
    pub l1: (Option<f64>, Option<f64>),
    pub threshold: (Option<f64>, Option<f64>),
}

/// Groups records by cell, in order of first appearance.
pub fn summarize(records: &[RunRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<Cell> = Vec::new();
    for r in records {
        if !cells.contains(&r.cell()) {
            cells.push(r.cell());
        }
    }
    cells
        .into_iter()
        .map(|cell| {
            let rows: Vec<&RunRecord> = records.iter().filter(|r| r.cell() == cell).collect();
            let col = |f: fn(&RunRecord) -> Option<f64>| {
                mean_sd(&rows.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            CellSummary {
                cell,
                runs: rows.len(),
                failures: rows.iter().filter(|r| r.error.is_some()).count(),
                eps: col(|r| r.eps),
                k: col(|r| r.k.map(|k| k as f64)),
                sze_index: col(|r| r.sze_index),
                kvs_ari: col(|r| r.kvs_ari),
                l2: col(|r| r.l2),
                l1: col(|r| r.l1),
                threshold: col(|r| r.threshold),
            }
        })
        .collect()
}

pub fn summary_csv(records: &[RunRecord]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in summarize(records) {
        let c = s.cell;
        let _ = write!(
            out,
            "{},{},{},{},{}",
            c.n, c.internoise, c.intranoise, s.runs, s.failures
        );
        for (m, sd) in [s.eps, s.k, s.sze_index, s.kvs_ari, s.l2, s.l1, s.threshold] {
            let _ = write!(out, ",{},{}", opt(m), opt(sd));
        }
        out.push('\n');
    }
    out
}

/// Optimal binarization threshold against realized density, one row per run.
pub fn threshold_study_csv(records: &[RunRecord]) -> String {
    let mut out = format!("{THRESHOLD_HEADER}\n");
    for r in records {
        if let Some(t) = r.threshold {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{t}",
                r.n, r.internoise, r.intranoise, r.repetition, r.density
            );
        }
    }
    out
}

/// Mean KVS-ARI per (intranoise, internoise) for size `n`: rows are
/// intranoise levels, columns internoise levels.
pub fn heatmap_csv(records: &[RunRecord], n: usize) -> String {
    let mut inter: Vec<f64> = Vec::new();
    let mut intra: Vec<f64> = Vec::new();
    for r in records.iter().filter(|r| r.n == n) {
        if !inter.contains(&r.internoise) {
            inter.push(r.internoise);
        }
        if !intra.contains(&r.intranoise) {
            intra.push(r.intranoise);
        }
    }
    let summaries = summarize(records);
    let mut out = String::from("intranoise\\internoise");
    for p in &inter {
        let _ = write!(out, ",{p}");
    }
    out.push('\n');
    for q in &intra {
        let _ = write!(out, "{q}");
        for p in &inter {
            let cell = Cell {
                n,
                internoise: *p,
                intranoise: *q,
            };
            let ari = summaries
                .iter()
                .find(|s| s.cell == cell)
                .and_then(|s| s.kvs_ari.0);
            let _ = write!(out, ",{}", opt(ari));
        }
        out.push('\n');
    }
    out
}

/// Writes `results.csv`, `timings.csv`, `summary.csv`,
/// `threshold_study.csv` and, for grids over several intranoise levels, one
/// `heatmap_ari_n{n}.csv` per size. Returns the written paths.
pub fn emit_report(records: &[RunRecord], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return invalid("no results to report");
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files = vec![
        ("results.csv".to_string(), results_csv(records)),
        ("timings.csv".to_string(), timings_csv(records)),
        ("summary.csv".to_string(), summary_csv(records)),
        ("threshold_study.csv".to_string(), threshold_study_csv(records)),
    ];
    let mut sizes: Vec<usize> = records.iter().map(|r| r.n).collect();
    sizes.dedup();
    let several_intra = records.iter().any(|r| r.intranoise != records[0].intranoise);
    if several_intra {
        for n in sizes {
            files.push((format!("heatmap_ari_n{n}.csv"), heatmap_csv(records, n)));
        }
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(inter: f64, rep: usize, ari: Option<f64>) -> RunRecord {
        RunRecord {
            n: 100,
            internoise: inter,
            intranoise: 0.0,
            repetition: rep,
            seed: rep as u64 + 1,
            eps: ari.map(|_| 0.25),
            k: ari.map(|_| 8),
            kvs_ari: ari,
            error: ari.is_none().then(|| "no partition, \"really\"".to_string()),
            ..RunRecord::default()
        }
    }

    #[test]
    fn mean_and_sample_sd() {
        assert_eq!(mean_sd(&[]), (None, None));
        assert_eq!(mean_sd(&[0.5]), (Some(0.5), None));
        let (m, sd) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((sd.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn summary_groups_cells_and_skips_failures() {
        let recs = vec![
            record(0.2, 0, Some(0.8)),
            record(0.2, 1, Some(0.6)),
            record(0.2, 2, None),
            record(0.5, 0, Some(0.1)),
        ];
        let s = summarize(&recs);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].runs, s[0].failures), (3, 1));
        assert!((s[0].kvs_ari.0.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(s[1].kvs_ari, (Some(0.1), None));

        let csv = summary_csv(&recs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        // r = 1 leaves the deviation columns empty
        assert!(lines[2].contains(",0.1,,"));
    }

    #[test]
    fn results_csv_quotes_errors() {
        let csv = results_csv(&[record(0.2, 0, None)]);
        let row = csv.lines().nth(1).unwrap();
        assert!(row.contains(",error,"));
        assert!(row.ends_with("\"no partition, \"\"really\"\"\""));
    }

    #[test]
    fn heatmap_layout() {
        let mut recs = Vec::new();
        for (i, q) in [0.0, 0.1].into_iter().enumerate() {
            for (j, p) in [0.2, 0.3].into_iter().enumerate() {
                let mut r = record(p, 0, Some((i * 2 + j) as f64));
                r.intranoise = q;
                recs.push(r);
            }
        }
        assert_eq!(
            heatmap_csv(&recs, 100),
            "intranoise\\internoise,0.2,0.3\n0,0,1\n0.1,2,3\n"
        );
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&recs, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        assert!(dir.path().join("heatmap_ari_n100.csv").exists());
        assert!(emit_report(&[], dir.path()).is_err());
    }

    #[test]
    fn spec_validation_and_order() {
        let spec = ExperimentSpec {
            sizes: vec![64, 128],
            internoise_levels: vec![0.1, 0.2],
            intranoise_levels: vec![0.0, 0.3],
            ..ExperimentSpec::default()
        };
        spec.validate().unwrap();
        let cells = spec.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!(
            (cells[1].n, cells[1].internoise, cells[1].intranoise),
            (64, 0.1, 0.3)
        );
        assert_eq!(cells[4].n, 128);
        for bad in [
            ExperimentSpec {
                repetitions: 0,
                ..spec.clone()
            },
            ExperimentSpec {
                internoise_levels: vec![1.5],
                ..spec.clone()
            },
            ExperimentSpec {
                sizes: vec![],
                ..spec.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec {
            sizes: vec![96],
            internoise_levels: vec![0.2, 0.5],
            clusters: 3,
            repetitions: 2,
            snapshots: true,
            output_dir: dir.path().to_path_buf(),
            ..ExperimentSpec::default()
        };
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(results_csv(&a), results_csv(&b));
        assert_eq!((a[0].seed, a[1].seed, a[2].seed), (1, 2, 1));
        assert_eq!((a[1].internoise, a[2].internoise), (0.2, 0.5));
        let snaps = fs::read_dir(dir.path().join("snapshots")).unwrap().count();
        let ok_first = a
            .iter()
            .filter(|r| r.repetition == 0 && r.error.is_none())
            .count();
        assert_eq!(snaps, 4 * ok_first);
    }
}
