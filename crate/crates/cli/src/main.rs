mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use szcodec::experiment::{self, RunGraphs};
use szcodec::io::{self, write_id_map, write_labels};
use szcodec::measures::component_labels;
use szcodec::pipeline::{self, best_partition, compress_with, compression_ratio, sweep};
use szcodec::{
    generate, kvs_best_ari, l1_dist, l2_dist, load_compressed, median_filter, save_compressed,
    threshold_search, CodecConfig, Graph, GraphFormat, LabelVector, SynthParams,
};

use config::{parse_eps_grid, FileConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "szcodec",
    version,
    about = "Lossy graph compression with regular partitions"
)]
struct Cli {
    /// Seed for the generator and the codec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Epsilon candidates: `0.1,0.2` or `start:stop:step`.
    #[arg(long, global = true, value_parser = grid_arg)]
    eps_grid: Option<Grid>,
    /// Median filter window side (odd).
    #[arg(long, global = true)]
    kernel: Option<usize>,
    /// TOML file with `[codec]`, `[synth]` and `[experiment]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

fn grid_arg(s: &str) -> Result<Grid, String> {
    parse_eps_grid(s).map(Grid).map_err(|e| format!("{e:#}"))
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-cluster graph.
    Generate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        internoise: Option<f64>,
        #[arg(long)]
        intranoise: Option<f64>,
        #[arg(long)]
        imbalanced: bool,
        #[arg(long)]
        weighted: bool,
        /// Output graph; `.csv` writes a dense matrix, `.pgm` an image.
        #[arg(short, long)]
        out: PathBuf,
        /// Also write the ground truth graph.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Also write the cluster labels, one per line.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Search a regular partition and write the compressed file.
    Compress {
        input: PathBuf,
        #[arg(long)]
        format: Option<GraphFormat>,
        #[arg(short, long)]
        out: PathBuf,
        /// Keep internal class densities.
        #[arg(long)]
        internal: bool,
        /// Write `original_id,vertex` pairs for edge-list input.
        #[arg(long)]
        id_map: Option<PathBuf>,
    },
    /// Expand a compressed file to the reconstructed graph.
    Decompress {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        reconstruct_irregular: bool,
        #[arg(long)]
        reconstruct_internal: bool,
        /// Median-filter the reconstruction.
        #[arg(long)]
        filtered: bool,
    },
    /// Median-filter a graph.
    Filter {
        input: PathBuf,
        #[arg(long)]
        format: Option<GraphFormat>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Binarize a weighted graph at the threshold closest to a ground truth.
    Threshold {
        input: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        step: Option<f64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Distances to a ground truth and the KVS score of a matrix.
    Measure {
        input: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Labels file; defaults to the components of `--gt`.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Full pipeline with a report directory.
    Codec {
        input: PathBuf,
        #[arg(long)]
        format: Option<GraphFormat>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Receives the compressed file, snapshots and `report.csv`.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the experiment described by the `[experiment]` table.
    Experiment {
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
}

struct Ctx {
    file: FileConfig,
    overrides: Overrides,
}

impl Ctx {
    fn codec(&self) -> Result<CodecConfig> {
        let mut cfg = self.file.codec.clone().unwrap_or_default();
        self.overrides.apply_codec(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_graph(path: &Path, format: Option<GraphFormat>) -> Result<io::LoadedGraph> {
    let format = format.unwrap_or_else(|| GraphFormat::from_path(path));
    io::load_graph(path, format).with_context(|| format!("loading {}", path.display()))
}

fn write_graph(g: &Graph, path: &Path) -> Result<()> {
    let res = match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => io::write_pgm(g, path),
        _ => io::write_graph(g, path, GraphFormat::from_path(path)),
    };
    res.with_context(|| format!("writing {}", path.display()))
}

fn read_labels(labels: Option<&Path>, gt: Option<&Graph>) -> Result<Option<LabelVector>> {
    Ok(match (labels, gt) {
        (Some(p), _) => Some(io::load_labels(p).with_context(|| format!("loading {}", p.display()))?),
        (None, Some(gt)) => Some(component_labels(gt)),
        (None, None) => None,
    })
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        file,
        overrides: Overrides {
            seed: cli.seed,
            eps_grid: cli.eps_grid.map(|g| g.0),
            kernel: cli.kernel,
        },
    };
    match cli.command {
        Command::Generate {
            n,
            clusters,
            internoise,
            intranoise,
            imbalanced,
            weighted,
            out,
            gt,
            labels,
        } => {
            let base = &ctx.file.synth;
            let params = SynthParams {
                n: n.unwrap_or(base.n),
                clusters: clusters.unwrap_or(base.clusters),
                internoise: internoise.unwrap_or(base.internoise),
                intranoise: intranoise.unwrap_or(base.intranoise),
                balanced: base.balanced && !imbalanced,
                weighted: base.weighted || weighted,
                seed: ctx.overrides.seed.unwrap_or(base.seed),
                ..base.clone()
            };
            let s = generate(&params)?;
            write_graph(&s.g, &out)?;
            if let Some(p) = gt {
                write_graph(&s.gt, &p)?;
            }
            if let Some(p) = labels {
                write_labels(&s.labels, &p)?;
            }
            println!(
                "n={} clusters={} density={:.6}",
                params.n,
                s.labels.distinct(),
                s.g.density()
            );
        }
        Command::Compress {
            input,
            format,
            out,
            internal,
            id_map,
        } => {
            let cfg = ctx.codec()?;
            let loaded = read_graph(&input, format)?;
            let g = &loaded.graph;
            let (eps, p) = best_partition(sweep(g, &cfg)?)?;
            let c = compress_with(g, &p, internal, cfg.regularity)?;
            save_compressed(&c, &out)?;
            if let Some(path) = id_map {
                write_id_map(&loaded.ids, &path)?;
            }
            println!(
                "n={} eps={eps} k={} irregular={} payload_entries={} compression_ratio={:.2}",
                c.n,
                c.k,
                c.irregular_pairs.len(),
                c.payload_entries(),
                compression_ratio(c.n, c.k)
            );
        }
        Command::Decompress {
            input,
            out,
            reconstruct_irregular,
            reconstruct_internal,
            filtered,
        } => {
            let mut cfg = ctx.codec()?;
            cfg.reconstruct_irregular |= reconstruct_irregular;
            cfg.reconstruct_internal |= reconstruct_internal;
            let c = load_compressed(&input).with_context(|| format!("loading {}", input.display()))?;
            let mut g = pipeline::decompress(&c, &cfg)?;
            if filtered {
                g = median_filter(&g, cfg.kernel)?;
            }
            write_graph(&g, &out)?;
            println!("n={} k={} eps={}", c.n, c.k, c.eps);
        }
        Command::Filter { input, format, out } => {
            let cfg = ctx.codec()?;
            let g = read_graph(&input, format)?.graph;
            write_graph(&median_filter(&g, cfg.kernel)?, &out)?;
        }
        Command::Threshold { input, gt, step, out } => {
            let cfg = ctx.codec()?;
            let m = read_graph(&input, None)?.graph;
            let gt = read_graph(&gt, None)?.graph;
            let (t, b) = threshold_search(&m, &gt, step.unwrap_or(cfg.threshold_step))?;
            if let Some(p) = out {
                write_graph(&b, &p)?;
            }
            println!("threshold={t} l2={}", l2_dist(&b, &gt)?);
        }
        Command::Measure { input, gt, labels } => {
            let m = read_graph(&input, None)?.graph;
            let gt = gt.map(|p| read_graph(&p, None)).transpose()?.map(|l| l.graph);
            let labels = read_labels(labels.as_deref(), gt.as_ref())?;
            let mut line = format!("n={} density={:.6}", m.n(), m.density());
            if let Some(gt) = &gt {
                write!(line, " l2={} l1={}", l2_dist(&m, gt)?, l1_dist(&m, gt)?)?;
            }
            if let Some(labels) = &labels {
                let (ari, k) = kvs_best_ari(&m, labels)?;
                write!(line, " kvs_ari={ari} kvs_k={k}")?;
            }
            println!("{line}");
        }
        Command::Codec {
            input,
            format,
            gt,
            labels,
            out_dir,
        } => codec(&ctx, &input, format, gt.as_deref(), labels.as_deref(), &out_dir)?,
        Command::Experiment { out_dir, repetitions } => {
            let mut spec = ctx.file.experiment.clone();
            ctx.overrides.apply_codec(&mut spec.codec);
            if let Some(s) = ctx.overrides.seed {
                spec.master_seed = s;
            }
            if let Some(r) = repetitions {
                spec.repetitions = r;
            }
            if let Some(d) = out_dir {
                spec.output_dir = d;
            }
            let started = Instant::now();
            let records = experiment::run_experiment(&spec)?;
            let files = experiment::emit_report(&records, &spec.output_dir)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            println!(
                "runs={} failed={failed} seconds={:.1} output={}",
                records.len(),
                started.elapsed().as_secs_f64(),
                spec.output_dir.display()
            );
            for f in files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

pub const REPORT_HEADER: &str = "n,density,eps,k,irregular,sze_index,payload_entries,compression_ratio,kvs_ari,kvs_k,l2,l1,threshold,compress_s,decompress_s,filter_s";

fn codec(
    ctx: &Ctx,
    input: &Path,
    format: Option<GraphFormat>,
    gt: Option<&Path>,
    labels: Option<&Path>,
    out_dir: &Path,
) -> Result<()> {
    let cfg = ctx.codec()?;
    let g = read_graph(input, format)?.graph;
    let gt = gt.map(|p| read_graph(p, None)).transpose()?.map(|l| l.graph);
    if let Some(gt) = &gt {
        if gt.n() != g.n() {
            bail!("ground truth has {} vertices, graph has {}", gt.n(), g.n());
        }
    }
    let labels = read_labels(labels, gt.as_ref())?;

    let mut run = szcodec::run_codec(&g, &cfg)?;
    if let Some(gt) = &gt {
        run.report.l1 = Some(l1_dist(&run.fsze, gt)?);
        run.report.l2 = Some(l2_dist(&run.fsze, gt)?);
    }
    if let Some(labels) = &labels {
        let (ari, k) = kvs_best_ari(&run.fsze, labels)?;
        run.report.kvs_ari = Some(ari);
        run.report.kvs_k = Some(k);
    }
    let ufsze = gt
        .as_ref()
        .map(|gt| threshold_search(&run.fsze, gt, cfg.threshold_step))
        .transpose()?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    save_compressed(&run.compressed, out_dir.join("compressed.codc"))?;
    let threshold = ufsze.as_ref().map(|(t, _)| *t);
    let graphs = RunGraphs {
        g,
        sze: run.sze,
        fsze: run.fsze,
        ufsze: ufsze.map(|(_, b)| b),
    };
    experiment::write_snapshots(out_dir, "run", &graphs)?;

    let r = &run.report;
    let c = &run.compressed;
    let t = run.timings;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let row = format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
        c.n,
        graphs.g.density(),
        r.eps,
        r.k_classes,
        r.irregular_count,
        r.sze_index,
        c.payload_entries(),
        compression_ratio(c.n, c.k),
        opt(r.kvs_ari),
        r.kvs_k.map_or_else(String::new, |k| k.to_string()),
        opt(r.l2),
        opt(r.l1),
        opt(threshold),
        t.compress,
        t.decompress,
        t.filter
    );
    fs::write(out_dir.join("report.csv"), format!("{REPORT_HEADER}\n{row}\n"))?;
    println!(
        "eps={} k={} irregular={} sze_index={:.4}{}",
        r.eps,
        r.k_classes,
        r.irregular_count,
        r.sze_index,
        r.kvs_ari.map_or_else(String::new, |a| format!(" kvs_ari={a:.4}"))
    );
    Ok(())
}
