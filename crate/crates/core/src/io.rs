//! File formats: the `CODC` binary container for compressed graphs, edge
//! lists, dense CSV matrices, label files and PGM snapshots.
//!
//! `CODC` layout, all little-endian:
//!
//! ```text
//! magic      4 bytes   "CODC"
//! version    u16       1
//! flags      u16       bit 0: internal densities, bit 1: weighted source
//! n          u64
//! k          u32
//! eps        f64
//! membership n × u32
//! red        k(k-1)/2 × f64, upper triangle row-major
//! internal   k × f64   (only with flag bit 0)
//! irregular  u32 count, then count × (u32, u32)
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{CodecError, Result};
use crate::graph::Graph;
use crate::pipeline::CompressedGraph;
use crate::synth::LabelVector;

pub const MAGIC: &[u8; 4] = b"CODC";
pub const FORMAT_VERSION: u16 = 1;
const FLAG_INTERNAL: u16 = 1;
const FLAG_WEIGHTED: u16 = 2;
/// Bytes before the membership vector.
pub const HEADER_BYTES: usize = 4 + 2 + 2 + 8 + 4 + 8;

fn format_err<T>(field: &'static str, reason: impl Into<String>) -> Result<T> {
    Err(CodecError::Format {
        field,
        reason: reason.into(),
    })
}

/// Exact size of the encoding of `c`.
pub fn encoded_len(c: &CompressedGraph) -> usize {
    HEADER_BYTES
        + 4 * c.n
        + 8 * c.red.len()
        + c.internal.as_ref().map_or(0, |d| 8 * d.len())
        + 4
        + 8 * c.irregular_pairs.len()
}

pub fn encode_compressed(c: &CompressedGraph) -> Result<Vec<u8>> {
    c.validate()?;
    let k = u32::try_from(c.k).map_err(|_| CodecError::InvalidArgument(format!("k={} too large", c.k)))?;
    let pairs = u32::try_from(c.irregular_pairs.len())
        .map_err(|_| CodecError::InvalidArgument("too many irregular pairs".into()))?;
    let mut flags = 0;
    if c.internal.is_some() {
        flags |= FLAG_INTERNAL;
    }
    if c.weighted_source {
        flags |= FLAG_WEIGHTED;
    }
    let mut out = Vec::with_capacity(encoded_len(c));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(c.n as u64).to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&c.eps.to_le_bytes());
    for &m in &c.membership {
        out.extend_from_slice(&m.to_le_bytes());
    }
    for &d in c.red.iter().chain(c.internal.iter().flatten()) {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&pairs.to_le_bytes());
    for &(s, t) in &c.irregular_pairs {
        out.extend_from_slice(&s.to_le_bytes());
        out.extend_from_slice(&t.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, field: &'static str) -> Result<&'a [u8]> {
        let left = self.buf.len() - self.pos;
        if len > left {
            return format_err(field, format!("needs {len} bytes, {left} left"));
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, field: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, field)?.try_into().expect("length checked"))
    }

    fn u16(&mut self, field: &'static str) -> Result<u16> {
        self.array(field).map(u16::from_le_bytes)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        self.array(field).map(u32::from_le_bytes)
    }

    fn u64(&mut self, field: &'static str) -> Result<u64> {
        self.array(field).map(u64::from_le_bytes)
    }

    fn f64(&mut self, field: &'static str) -> Result<f64> {
        self.array(field).map(f64::from_le_bytes)
    }

    /// Checks that `count` items of `width` bytes fit before allocating.
    fn room(&self, count: u64, width: u64, field: &'static str) -> Result<usize> {
        let left = (self.buf.len() - self.pos) as u64;
        match count.checked_mul(width) {
            Some(b) if b <= left => Ok(count as usize),
            _ => format_err(field, format!("{count} entries do not fit in {left} bytes")),
        }
    }

    fn f64s(&mut self, count: usize, field: &'static str) -> Result<Vec<f64>> {
        let count = self.room(count as u64, 8, field)?;
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            let d = self.f64(field)?;
            if !(0.0..=1.0).contains(&d) {
                return format_err(field, format!("density {d} outside [0,1]"));
            }
            v.push(d);
        }
        Ok(v)
    }
}

pub fn decode_compressed(bytes: &[u8]) -> Result<CompressedGraph> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return format_err("magic", "not a CODC file");
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return format_err("version", format!("unsupported version {version}"));
    }
    let flags = r.u16("flags")?;
    if flags & !(FLAG_INTERNAL | FLAG_WEIGHTED) != 0 {
        return format_err("flags", format!("unknown bits in {flags:#06x}"));
    }
    let n = r.u64("n")?;
    let k = r.u32("k")? as usize;
    let eps = r.f64("eps")?;
    if !(eps > 0.0 && eps < 1.0) {
        return format_err("eps", format!("{eps} outside (0,1)"));
    }

    let n = r.room(n, 4, "membership")?;
    if k > n {
        return format_err("k", format!("{k} classes for {n} vertices"));
    }
    let mut membership = Vec::with_capacity(n);
    let mut sizes = vec![0usize; k + 1];
    for _ in 0..n {
        let m = r.u32("membership")?;
        match sizes.get_mut(m as usize) {
            Some(s) => *s += 1,
            None => return format_err("membership", format!("class id {m} exceeds k={k}")),
        }
        membership.push(m);
    }
    if sizes[1..].windows(2).any(|w| w[0] != w[1]) {
        return format_err("membership", "classes differ in size");
    }

    let red = r.f64s(k * k.saturating_sub(1) / 2, "red")?;
    let internal = if flags & FLAG_INTERNAL != 0 {
        Some(r.f64s(k, "internal")?)
    } else {
        None
    };

    let count = r.u32("irregular_count")?;
    let count = r.room(u64::from(count), 8, "irregular_pairs")?;
    let mut irregular_pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let (s, t) = (r.u32("irregular_pairs")?, r.u32("irregular_pairs")?);
        if s >= t || t as usize >= k {
            return format_err(
                "irregular_pairs",
                format!("pair ({s},{t}) out of range for k={k}"),
            );
        }
        irregular_pairs.push((s, t));
    }
    if r.pos != bytes.len() {
        return format_err(
            "trailer",
            format!("{} unexpected trailing bytes", bytes.len() - r.pos),
        );
    }

    Ok(CompressedGraph {
        n,
        k,
        eps,
        membership,
        red,
        internal,
        irregular_pairs,
        weighted_source: flags & FLAG_WEIGHTED != 0,
    })
}

pub fn save_compressed(c: &CompressedGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_compressed(c)?)?;
    Ok(())
}

pub fn load_compressed(path: impl AsRef<Path>) -> Result<CompressedGraph> {
    decode_compressed(&fs::read(path)?)
}

/// Input graph formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    /// `u v [w]` per line, whitespace separated; `#` and `%` start comments.
    EdgeList,
    /// Dense comma-separated adjacency matrix.
    Csv,
}

impl GraphFormat {
    /// `.csv` files are dense matrices, anything else an edge list.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => GraphFormat::Csv,
            _ => GraphFormat::EdgeList,
        }
    }
}

impl FromStr for GraphFormat {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edges" | "edge-list" | "edgelist" => Ok(GraphFormat::EdgeList),
            "csv" => Ok(GraphFormat::Csv),
            _ => Err(CodecError::InvalidArgument(format!("unknown graph format `{s}`"))),
        }
    }
}

/// A parsed graph plus the original identifier of every vertex.
#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub ids: Vec<String>,
}

fn parse_err<T>(line: usize, reason: impl Into<String>) -> Result<T> {
    Err(CodecError::Parse {
        line,
        reason: reason.into(),
    })
}

fn content(line: &str) -> &str {
    let cut = line.find(['#', '%']).unwrap_or(line.len());
    line[..cut].trim()
}

fn parse_weight(tok: &str, line: usize) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(w) if (0.0..=1.0).contains(&w) => Ok(w),
        Ok(w) => parse_err(line, format!("weight {w} outside [0,1]")),
        Err(_) => parse_err(line, format!("`{tok}` is not a number")),
    }
}

/// Parses an edge list. Vertex ids are compacted to `0..n`: in numeric
/// order when every id is an integer, else in order of first appearance.
pub fn parse_edge_list(text: &str) -> Result<LoadedGraph> {
    let mut edges: Vec<(String, String, f64, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = content(raw);
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let w = match toks.len() {
            2 => 1.0,
            3 => parse_weight(toks[2], line)?,
            c => return parse_err(line, format!("expected `u v [w]`, found {c} fields")),
        };
        edges.push((toks[0].to_string(), toks[1].to_string(), w, line));
    }

    let mut ids: Vec<String> = Vec::new();
    let mut seen = HashMap::new();
    for (u, v, _, _) in &edges {
        for id in [u, v] {
            if !seen.contains_key(id) {
                seen.insert(id.clone(), ids.len());
                ids.push(id.clone());
            }
        }
    }
    if let Some(mut numeric) = ids
        .iter()
        .map(|s| s.parse::<i64>().ok())
        .collect::<Option<Vec<i64>>>()
    {
        numeric.sort_unstable();
        ids = numeric.iter().map(i64::to_string).collect();
        // "007" and "7" name the same vertex once parsed
        ids.dedup();
        seen = HashMap::new();
        for (u, v, _, _) in &edges {
            for id in [u, v] {
                let pos = ids.binary_search_by_key(&id.parse::<i64>().unwrap(), |s| s.parse().unwrap());
                seen.insert(id.clone(), pos.expect("id present"));
            }
        }
    }

    let mut g = Graph::empty(ids.len());
    let mut loops = 0;
    for (u, v, w, line) in &edges {
        let (a, b) = (seen[u], seen[v]);
        if a == b {
            loops += 1;
            log::warn!("line {line}: self-loop on `{u}` dropped");
            continue;
        }
        g.set(a, b, *w);
    }
    if loops > 0 {
        log::warn!("{loops} self-loops dropped");
    }
    Ok(LoadedGraph { graph: g, ids })
}

/// Parses a dense square CSV matrix. Non-zero diagonal entries are dropped
/// with a warning; the matrix must otherwise be symmetric.
pub fn parse_csv(text: &str) -> Result<LoadedGraph> {
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = content(raw);
        if body.is_empty() {
            continue;
        }
        let row = body
            .split(',')
            .map(|t| parse_weight(t.trim(), line))
            .collect::<Result<Vec<f64>>>()?;
        if let Some((_, first)) = rows.first() {
            if row.len() != first.len() {
                return parse_err(line, format!("{} columns, expected {}", row.len(), first.len()));
            }
        }
        rows.push((line, row));
    }
    let n = rows.len();
    if let Some((line, row)) = rows.last() {
        if row.len() != n {
            return parse_err(*line, format!("matrix is {n}x{}, not square", row.len()));
        }
    }
    let mut weights = Vec::with_capacity(n * n);
    for (i, (line, row)) in rows.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if i == j && w != 0.0 {
                log::warn!("line {line}: self-loop on vertex {i} dropped");
                weights.push(0.0);
                continue;
            }
            if j < i && w != rows[j].1[i] {
                return parse_err(*line, format!("entry ({i},{j}) differs from ({j},{i})"));
            }
            weights.push(w);
        }
    }
    Ok(LoadedGraph {
        graph: Graph::from_dense(n, weights)?,
        ids: (0..n).map(|i| i.to_string()).collect(),
    })
}

pub fn load_graph(path: impl AsRef<Path>, format: GraphFormat) -> Result<LoadedGraph> {
    let text = fs::read_to_string(path)?;
    match format {
        GraphFormat::EdgeList => parse_edge_list(&text),
        GraphFormat::Csv => parse_csv(&text),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn fmt_weight(w: f64) -> String {
    if w == 0.0 || w == 1.0 {
        format!("{w:.0}")
    } else {
        format!("{w}")
    }
}

/// Writes every edge once as `u v`, or `u v w` for weighted graphs.
pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    let weighted = !g.is_binary();
    for i in 0..g.n() {
        for (j, &w) in g.row(i).iter().enumerate().skip(i + 1) {
            if w == 0.0 {
                continue;
            }
            if weighted {
                writeln!(out, "{i} {j} {w}")?;
            } else {
                writeln!(out, "{i} {j}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    for i in 0..g.n() {
        let row: Vec<String> = g.row(i).iter().map(|&w| fmt_weight(w)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_graph(g: &Graph, path: impl AsRef<Path>, format: GraphFormat) -> Result<()> {
    match format {
        GraphFormat::EdgeList => write_edge_list(g, path),
        GraphFormat::Csv => write_csv(g, path),
    }
}

/// One label per line.
pub fn write_labels(labels: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    for l in labels.as_slice() {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut labels = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_text = line?;
        let body = content(&line_text);
        if body.is_empty() {
            continue;
        }
        match body.parse::<u32>() {
            Ok(l) => labels.push(l),
            Err(_) => return parse_err(idx + 1, format!("`{body}` is not a label")),
        }
    }
    Ok(LabelVector::new(labels))
}

/// `original_id,vertex` for every vertex of a loaded edge list.
pub fn write_id_map(ids: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    writeln!(out, "original_id,vertex")?;
    for (v, id) in ids.iter().enumerate() {
        writeln!(out, "{id},{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Binary PGM (P5) image of the adjacency matrix, one pixel per entry;
/// weight 1 is white.
pub fn pgm_bytes(g: &Graph) -> Vec<u8> {
    let n = g.n();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(g.as_slice().iter().map(|&w| (w * 255.0).round() as u8));
    out
}

pub fn write_pgm(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, pgm_bytes(g))?;
    Ok(())
}
