//! On-disk formats: instance envelopes, assignments, sweep traces and dense
//! matrices.
//!
//! Floats in CSV files are written with 17 significant digits so that a file
//! round-trips exactly and repeated runs are byte-identical. JSON floats use
//! the shortest representation that round-trips.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SimilarityMatrix;
use crate::problems::{self, ClusteringInstance, MatchingInstance};
use crate::rounding::{BlockStructure, ClusterLabels, PartialPermutation};
use crate::sweep::SweepTrace;

/// Instances with at most this many points keep `W` inside the JSON file.
pub const INLINE_LIMIT: usize = 100;

pub const TRACE_HEADER: [&str; 3] = ["alpha", "eta", "objective"];

pub const MATCHES_HEADER: [&str; 5] = ["object_a", "point_a", "object_b", "point_b", "column"];

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

/// Writes `value` as compact JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Dense matrix as comma-separated rows without a header.
pub fn write_matrix_csv(path: &Path, a: ArrayView2<'_, f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in a.rows() {
        w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for record in r.records() {
        let record = record?;
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse(format!(
                    "{}: row {rows} has {} fields, expected {c}",
                    path.display(),
                    record.len()
                )))
            }
            Some(_) => {}
        }
        for field in record.iter() {
            data.push(parse_f64(field)?);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), data).map_err(|e| Error::Parse(e.to_string()))
}

/// Generator and parameters that produced an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    PartialMatching {
        q: usize,
        d: usize,
        rho: f64,
        sigma: f64,
    },
    BinaryClustering {
        m: usize,
        k_star: usize,
        rho: f64,
        nu: f64,
    },
    Gmm {
        k_star: usize,
        n_samples: usize,
        mean_sep: f64,
        mean_var: f64,
        #[serde(default = "default_neighbor_index")]
        neighbor_index: usize,
    },
}

fn default_neighbor_index() -> usize {
    problems::DEFAULT_NEIGHBOR_INDEX
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::PartialMatching { .. } => "partial-matching",
            GeneratorSpec::BinaryClustering { .. } => "binary-clustering",
            GeneratorSpec::Gmm { .. } => "gmm",
        }
    }

    pub fn is_matching(&self) -> bool {
        matches!(self, GeneratorSpec::PartialMatching { .. })
    }

    pub fn generate(&self, seed: u64) -> Result<Instance> {
        let (w, ground_truth, blocks) = match *self {
            GeneratorSpec::PartialMatching { q, d, rho, sigma } => {
                let inst = problems::gen_partial_matching(q, d, rho, sigma, seed)?;
                (inst.w, inst.ground_truth, Some(inst.blocks))
            }
            GeneratorSpec::BinaryClustering { m, k_star, rho, nu } => {
                let inst = problems::gen_binary_clustering(m, k_star, rho, nu, seed)?;
                (inst.w, inst.ground_truth, None)
            }
            GeneratorSpec::Gmm {
                k_star,
                n_samples,
                mean_sep,
                mean_var,
                neighbor_index,
            } => {
                let cloud = problems::gen_gmm(k_star, n_samples, mean_sep, mean_var, seed)?;
                let inst = cloud.to_clustering_instance(neighbor_index, seed)?;
                (inst.w, inst.ground_truth, None)
            }
        };
        Ok(Instance {
            generator: self.clone(),
            seed,
            w,
            ground_truth,
            blocks,
        })
    }
}

/// A generated problem together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub generator: GeneratorSpec,
    pub seed: u64,
    pub w: SimilarityMatrix,
    pub ground_truth: Vec<usize>,
    /// Object blocks; present for multi-matching instances only.
    pub blocks: Option<BlockStructure>,
}

impl Instance {
    pub fn m(&self) -> usize {
        self.w.m()
    }

    pub fn is_matching(&self) -> bool {
        self.blocks.is_some()
    }

    pub fn to_matching(&self) -> Result<MatchingInstance> {
        let blocks = self
            .blocks
            .clone()
            .ok_or_else(|| Error::InvalidParameter("instance has no object blocks".into()))?;
        let d = match self.generator {
            GeneratorSpec::PartialMatching { d, .. } => d,
            _ => self.ground_truth.iter().max().map_or(0, |&g| g + 1),
        };
        Ok(MatchingInstance {
            w: self.w.clone(),
            blocks,
            ground_truth: self.ground_truth.clone(),
            d,
            seed: self.seed,
        })
    }

    pub fn to_clustering(&self) -> ClusteringInstance {
        let k_star = match self.generator {
            GeneratorSpec::BinaryClustering { k_star, .. } | GeneratorSpec::Gmm { k_star, .. } => {
                k_star
            }
            _ => {
                let mut labels = self.ground_truth.clone();
                labels.sort_unstable();
                labels.dedup();
                labels.len()
            }
        };
        ClusteringInstance {
            w: self.w.clone(),
            ground_truth: self.ground_truth.clone(),
            k_star,
            seed: self.seed,
        }
    }

    /// One-line description: size plus blocks and `d`, or `k*`.
    pub fn summary(&self) -> String {
        match (&self.generator, &self.blocks) {
            (GeneratorSpec::PartialMatching { d, .. }, Some(b)) => {
                format!(
                    "{}: m = {}, blocks = {:?}, d = {d}",
                    self.generator.name(),
                    self.m(),
                    b.sizes()
                )
            }
            (_, Some(b)) => format!(
                "{}: m = {}, blocks = {:?}",
                self.generator.name(),
                self.m(),
                b.sizes()
            ),
            _ => format!(
                "{}: m = {}, k* = {}",
                self.generator.name(),
                self.m(),
                self.to_clustering().k_star
            ),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MatrixData {
    Inline(Vec<Vec<f64>>),
    /// File name relative to the directory of the JSON file.
    Csv(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceRecord {
    generator: GeneratorSpec,
    seed: u64,
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    block_sizes: Option<Vec<usize>>,
    ground_truth: Vec<usize>,
    w: MatrixData,
}

fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Writes the JSON envelope. Instances above [`INLINE_LIMIT`] points store `W`
/// in a sidecar `<stem>.w.csv` next to `path`.
pub fn write_instance(path: &Path, inst: &Instance) -> Result<()> {
    let m = inst.m();
    let w = if m <= INLINE_LIMIT {
        MatrixData::Inline(
            inst.w
                .as_array()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
        )
    } else {
        let side = sidecar_path(path, ".w.csv");
        write_matrix_csv(&side, inst.w.view())?;
        MatrixData::Csv(
            side.file_name()
                .expect("file name")
                .to_string_lossy()
                .into_owned(),
        )
    };
    let record = InstanceRecord {
        generator: inst.generator.clone(),
        seed: inst.seed,
        m,
        block_sizes: inst.blocks.as_ref().map(|b| b.sizes().to_vec()),
        ground_truth: inst.ground_truth.clone(),
        w,
    };
    write_json(path, &record)
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let record: InstanceRecord = read_json(path)?;
    let w = match record.w {
        MatrixData::Inline(rows) => SimilarityMatrix::from_rows(&rows)?,
        MatrixData::Csv(name) => {
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            SimilarityMatrix::new(read_matrix_csv(&dir.join(name))?)?
        }
    };
    if w.m() != record.m {
        return Err(Error::DimensionMismatch(format!(
            "header says m = {} but W has {} rows",
            record.m,
            w.m()
        )));
    }
    if record.ground_truth.len() != record.m {
        return Err(Error::DimensionMismatch(format!(
            "{} ground-truth labels for {} points",
            record.ground_truth.len(),
            record.m
        )));
    }
    let blocks = match record.block_sizes {
        Some(sizes) => {
            let b = BlockStructure::new(sizes)?;
            if b.m() != record.m {
                return Err(Error::DimensionMismatch(format!(
                    "blocks cover {} points, instance has {}",
                    b.m(),
                    record.m
                )));
            }
            Some(b)
        }
        None => None,
    };
    Ok(Instance {
        generator: record.generator,
        seed: record.seed,
        w,
        ground_truth: record.ground_truth,
        blocks,
    })
}

/// Universe columns of the points of one object; `None` marks an unassigned
/// point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockAssignment {
    pub object: usize,
    pub assignment: Vec<Option<usize>>,
}

/// Rounded solution as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Assignment {
    Clustering { labels: Vec<usize> },
    Matching { blocks: Vec<BlockAssignment> },
}

impl Assignment {
    pub fn from_labels(labels: &ClusterLabels) -> Self {
        Assignment::Clustering {
            labels: labels.labels.clone(),
        }
    }

    pub fn from_matching(perms: &[PartialPermutation]) -> Self {
        Assignment::Matching {
            blocks: perms
                .iter()
                .enumerate()
                .map(|(object, p)| BlockAssignment {
                    object,
                    assignment: p.assignment().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_labels(&self) -> Result<ClusterLabels> {
        match self {
            Assignment::Clustering { labels } => Ok(ClusterLabels {
                labels: labels.clone(),
            }),
            Assignment::Matching { .. } => Err(Error::InvalidParameter(
                "expected cluster labels, found a matching".into(),
            )),
        }
    }

    /// Per-object assignments ordered by object id; every object in
    /// `0..n_objects` must appear exactly once.
    pub fn to_matching(&self, n_objects: usize) -> Result<Vec<PartialPermutation>> {
        let blocks = match self {
            Assignment::Matching { blocks } => blocks,
            Assignment::Clustering { .. } => {
                return Err(Error::InvalidParameter(
                    "expected a matching, found cluster labels".into(),
                ))
            }
        };
        let mut out: Vec<Option<PartialPermutation>> = vec![None; n_objects];
        for b in blocks {
            let slot = out.get_mut(b.object).ok_or_else(|| {
                Error::DimensionMismatch(format!("object {} out of range 0..{n_objects}", b.object))
            })?;
            if slot.is_some() {
                return Err(Error::DimensionMismatch(format!(
                    "object {} listed twice",
                    b.object
                )));
            }
            *slot = Some(PartialPermutation::new(b.assignment.clone())?);
        }
        out.into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| Error::DimensionMismatch(format!("object {i} missing"))))
            .collect()
    }
}

pub fn write_trace_csv(path: &Path, trace: &SweepTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for i in 0..trace.len() {
        w.write_record([
            fmt_f64(trace.alphas[i]),
            fmt_f64(trace.etas[i]),
            fmt_f64(trace.objectives[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]; snapshots are not restored.
pub fn read_trace_csv(path: &Path) -> Result<SweepTrace> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(TRACE_HEADER) {
        return Err(Error::Parse(format!(
            "{}: unexpected trace header",
            path.display()
        )));
    }
    let mut trace = SweepTrace::default();
    for record in r.records() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Parse(format!(
                "{}: trace row needs 3 fields",
                path.display()
            )));
        }
        trace.alphas.push(parse_f64(&record[0])?);
        trace.etas.push(parse_f64(&record[1])?);
        trace.objectives.push(parse_f64(&record[2])?);
        trace.snapshots.push(None);
    }
    Ok(trace)
}

/// Writes each retained snapshot to `dir/snapshot_NNNN.csv`, where `NNNN` is
/// the trace index. Returns the number of files written.
pub fn write_snapshots(dir: &Path, trace: &SweepTrace) -> Result<usize> {
    fs::create_dir_all(dir)?;
    let mut n = 0;
    for (i, snap) in trace.snapshots.iter().enumerate() {
        if let Some(u) = snap {
            write_matrix_csv(&dir.join(format!("snapshot_{i:04}.csv")), u.view())?;
            n += 1;
        }
    }
    Ok(n)
}

/// Cross-object point pairs that share a universe column. Points are indexed
/// within their object.
pub fn matched_pairs(perms: &[PartialPermutation]) -> Vec<[usize; 5]> {
    let mut pairs = Vec::new();
    for (a, pa) in perms.iter().enumerate() {
        for (b, pb) in perms.iter().enumerate().skip(a + 1) {
            for (i, ca) in pa.assignment().iter().enumerate() {
                let Some(ca) = ca else { continue };
                for (j, cb) in pb.assignment().iter().enumerate() {
                    if Some(ca) == cb.as_ref() {
                        pairs.push([a, i, b, j, *ca]);
                    }
                }
            }
        }
    }
    pairs
}

pub fn write_matches_csv(path: &Path, perms: &[PartialPermutation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(MATCHES_HEADER)?;
    for p in matched_pairs(perms) {
        w.write_record(p.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
