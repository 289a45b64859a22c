//! On-disk formats written by experiment runs.
//!
//! Real numbers in CSV files are printed with [`fmt_real`]: scientific
//! notation with twelve digits after the decimal point, so output is
//! byte-identical across runs. Checkpoints are little-endian binary:
//! the 8-byte magic [`CHECKPOINT_MAGIC`], `u64` lengths of `x` and `p`, then
//! the values as `f64`. Iterate traces use [`TRACE_MAGIC`], a `u64` point
//! count, the two lengths, then the points back to back.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CvarGame, CvarInstance};
use crate::point::JointPoint;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"DRNEZ\x00\x00\x01";
pub const TRACE_MAGIC: [u8; 8] = *b"DRNET\x00\x00\x01";

/// Fixed-precision formatting for every real number in a CSV file.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.12e}")
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn encode_checkpoint(z: &JointPoint) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * z.dim());
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&(z.x().len() as u64).to_le_bytes());
    out.extend_from_slice(&(z.p().len() as u64).to_le_bytes());
    for v in z.x().iter().chain(z.p()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<JointPoint> {
    if bytes.len() < 24 || bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Domain("not a checkpoint file (bad magic)".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap()) as usize;
    let (nx, np) = (word(8), word(16));
    let expected = nx
        .checked_add(np)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(24))
        .ok_or_else(|| Error::Domain("checkpoint header overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::shape("checkpoint payload bytes", expected, bytes.len()));
    }
    let values: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (x, p) = values.split_at(nx);
    Ok(JointPoint::new(x.to_vec(), p.to_vec()))
}

pub fn encode_trace(points: &[JointPoint]) -> Result<Vec<u8>> {
    let (nx, np) = points.first().map_or((0, 0), |z| (z.x().len(), z.p().len()));
    let mut out = Vec::with_capacity(32 + 8 * points.len() * (nx + np));
    out.extend_from_slice(&TRACE_MAGIC);
    for w in [points.len(), nx, np] {
        out.extend_from_slice(&(w as u64).to_le_bytes());
    }
    for z in points {
        if z.x().len() != nx || z.p().len() != np {
            return Err(Error::shape("trace point", nx + np, z.dim()));
        }
        for v in z.x().iter().chain(z.p()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_trace(bytes: &[u8]) -> Result<Vec<JointPoint>> {
    if bytes.len() < 32 || bytes[..8] != TRACE_MAGIC {
        return Err(Error::Domain("not a trace file (bad magic)".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap()) as usize;
    let (count, nx, np) = (word(8), word(16), word(24));
    let expected = nx
        .checked_add(np)
        .and_then(|n| n.checked_mul(count))
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(32))
        .ok_or_else(|| Error::Domain("trace header overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::shape("trace payload bytes", expected, bytes.len()));
    }
    let values: Vec<f64> = bytes[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(values
        .chunks_exact((nx + np).max(1))
        .take(count)
        .map(|c| JointPoint::new(c[..nx].to_vec(), c[nx..].to_vec()))
        .collect())
}

/// Reads either a checkpoint or a trace file.
pub fn read_points(path: &Path) -> Result<Vec<JointPoint>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&TRACE_MAGIC) {
        decode_trace(&bytes)
    } else {
        Ok(vec![decode_checkpoint(&bytes)?])
    }
}

pub fn write_checkpoint(path: &Path, z: &JointPoint) -> Result<()> {
    write_file(path, encode_checkpoint(z))
}

pub fn read_checkpoint(path: &Path) -> Result<JointPoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// One row of `gap_curve.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub batch_size: usize,
    pub seed: u64,
    pub t: usize,
    pub gap: f64,
    pub residual: f64,
}

pub const GAP_CURVE_HEADER: &str = "batch_size,seed,T,gap,residual";

pub fn gap_curve_csv(rows: &[GapRow]) -> String {
    let mut s = String::from(GAP_CURVE_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.batch_size, r.seed, r.t, fmt_real(r.gap), fmt_real(r.residual)).unwrap();
    }
    s
}

pub fn parse_gap_curve_csv(text: &str) -> Result<Vec<GapRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(GAP_CURVE_HEADER) {
        return Err(Error::Domain(format!("gap curve header must be `{GAP_CURVE_HEADER}`")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, line)| {
            let bad = || Error::Domain(format!("gap curve line {}: cannot parse `{line}`", k + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(GapRow {
                batch_size: f[0].parse().map_err(|_| bad())?,
                seed: f[1].parse().map_err(|_| bad())?,
                t: f[2].parse().map_err(|_| bad())?,
                gap: f[3].parse().map_err(|_| bad())?,
                residual: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// One row of `history_<seed>_<b>.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub t: usize,
    pub lambda: f64,
    pub x_norm: f64,
    pub p_entropy: f64,
    pub dist_to_final: f64,
}

pub const HISTORY_HEADER: &str = "t,lambda,x_norm,p_entropy,dist_to_final";

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{}",
            r.t,
            fmt_real(r.lambda),
            fmt_real(r.x_norm),
            fmt_real(r.p_entropy),
            fmt_real(r.dist_to_final)
        )
        .unwrap();
    }
    s
}

/// Mean and spread of the gap over seeds at one batch size and checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub batch_size: usize,
    pub t: usize,
    pub runs: usize,
    pub mean_gap: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    pub mean_residual: f64,
}

/// Aggregates gap rows by `(batch_size, T)`, in that order.
pub fn summarize(rows: &[GapRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.batch_size, r.t)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|(b, t)| {
            let group: Vec<&GapRow> = rows.iter().filter(|r| r.batch_size == b && r.t == t).collect();
            let n = group.len() as f64;
            SummaryRow {
                batch_size: b,
                t,
                runs: group.len(),
                mean_gap: group.iter().map(|r| r.gap).sum::<f64>() / n,
                min_gap: group.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min),
                max_gap: group.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max),
                mean_residual: group.iter().map(|r| r.residual).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("batch_size,T,runs,mean_gap,min_gap,max_gap,mean_residual\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.batch_size,
            r.t,
            r.runs,
            fmt_real(r.mean_gap),
            fmt_real(r.min_gap),
            fmt_real(r.max_gap),
            fmt_real(r.mean_residual)
        )
        .unwrap();
    }
    s
}

/// `player,j,xi1,xi2` with zero-based indices.
pub fn scenarios_csv(game: &CvarGame) -> String {
    let data = game.scenarios();
    let mut s = String::from("player,j,xi1,xi2\n");
    for i in 0..data.players() {
        for (j, sc) in data.player(i).iter().enumerate() {
            writeln!(s, "{i},{j},{},{}", fmt_real(sc.xi1), fmt_real(sc.xi2)).unwrap();
        }
    }
    s
}

pub fn c_vector_csv(game: &CvarGame) -> String {
    let mut s = String::from("k,c\n");
    for (k, v) in game.scenarios().c().iter().enumerate() {
        writeln!(s, "{k},{}", fmt_real(*v)).unwrap();
    }
    s
}

pub fn instance_toml(instance: &CvarInstance) -> String {
    toml::to_string(instance).expect("instance serializes")
}

pub fn parse_instance_toml(text: &str) -> Result<CvarInstance> {
    let instance: CvarInstance = toml::from_str(text).map_err(|e| Error::Config {
        field: "instance".into(),
        message: e.to_string(),
    })?;
    instance.validate()?;
    Ok(instance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Config,
    Instance,
    Scenarios,
    CVector,
    GapCurve,
    Summary,
    History,
    FinalIterate,
    FinalAverage,
    IterateTrace,
    Plot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub kind: ArtifactKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub batch_size: usize,
    pub dual_batch_size: usize,
    pub seed: u64,
    pub history: Option<PathBuf>,
    pub final_iterate: PathBuf,
    pub final_average: PathBuf,
    pub iterates: PathBuf,
    pub curve: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub batch_size: usize,
    pub seed: u64,
    pub message: String,
}

/// Index of everything an experiment wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub complete: bool,
    pub files: Vec<ArtifactEntry>,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<FailureRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Domain(format!("bad manifest {}: {e}", path.display())))
    }

    pub fn paths_of(&self, kind: ArtifactKind) -> impl Iterator<Item = &Path> {
        self.files.iter().filter(move |f| f.kind == kind).map(|f| f.path.as_path())
    }
}
