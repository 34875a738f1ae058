//! Datasets, CSV ingestion, sliding windows, splits and the synthetic
//! shifting-pattern generator.
//!
//! Time steps, labels and contexts are 1-based at every external boundary
//! (files, ground truth, reports). Internally sequences are stored as a
//! row-major `T×D` grid.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Result, SpamsError};
use crate::io_util;
use crate::numerics::{Matrix, Rng, Vector};

pub const SEQUENCES_FILE: &str = "sequences.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const CONTEXTS_FILE: &str = "contexts.csv";
pub const GROUND_TRUTH_FILE: &str = "groundtruth.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct MultiVarSequence {
    steps: usize,
    dims: usize,
    values: Vec<f64>,
}

impl MultiVarSequence {
    pub fn new(steps: usize, dims: usize, values: Vec<f64>) -> Result<Self> {
        if steps == 0 || dims == 0 {
            return Err(SpamsError::Config(format!(
                "sequence needs T >= 1 and D >= 1, got T={steps} D={dims}"
            )));
        }
        if values.len() != steps * dims {
            return Err(SpamsError::dim(
                "sequence values",
                format!("{steps}x{dims}"),
                values.len(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpamsError::Range("sequence contains non-finite values".into()));
        }
        Ok(MultiVarSequence {
            steps,
            dims,
            values,
        })
    }

    pub fn zeros(steps: usize, dims: usize) -> Self {
        MultiVarSequence {
            steps,
            dims,
            values: vec![0.0; steps * dims],
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Features at 0-based step `t`.
    pub fn step(&self, t: usize) -> &[f64] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    fn step_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.values[t * self.dims..(t + 1) * self.dims]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    ids: Vec<String>,
    sequences: Vec<MultiVarSequence>,
    labels: Vec<usize>,
    contexts: Vec<usize>,
    num_classes: usize,
    num_contexts: usize,
}

impl LabeledDataset {
    pub fn new(
        ids: Vec<String>,
        sequences: Vec<MultiVarSequence>,
        labels: Vec<usize>,
        contexts: Vec<usize>,
        num_classes: usize,
        num_contexts: usize,
    ) -> Result<Self> {
        let n = sequences.len();
        if ids.len() != n || labels.len() != n || contexts.len() != n {
            return Err(SpamsError::format(
                "dataset",
                format!(
                    "{} sequences but {} ids, {} labels, {} contexts",
                    n,
                    ids.len(),
                    labels.len(),
                    contexts.len()
                ),
            ));
        }
        if num_classes == 0 || num_contexts == 0 {
            return Err(SpamsError::Config("K and M must be at least 1".into()));
        }
        if let Some(first) = sequences.first() {
            for (id, s) in ids.iter().zip(&sequences) {
                if s.steps != first.steps || s.dims != first.dims {
                    return Err(SpamsError::format(
                        "dataset",
                        format!(
                            "sample {id} has T={} D={}, expected T={} D={}",
                            s.steps, s.dims, first.steps, first.dims
                        ),
                    ));
                }
            }
        }
        for (id, &y) in ids.iter().zip(&labels) {
            if y == 0 || y > num_classes {
                return Err(SpamsError::format(
                    "dataset",
                    format!("sample {id} has label {y} outside [1,{num_classes}]"),
                ));
            }
        }
        for (id, &c) in ids.iter().zip(&contexts) {
            if c == 0 || c > num_contexts {
                return Err(SpamsError::format(
                    "dataset",
                    format!("sample {id} has context {c} outside [1,{num_contexts}]"),
                ));
            }
        }
        Ok(LabeledDataset {
            ids,
            sequences,
            labels,
            contexts,
            num_classes,
            num_contexts,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn sequences(&self) -> &[MultiVarSequence] {
        &self.sequences
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn contexts(&self) -> &[usize] {
        &self.contexts
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    /// `(T, D)` shared by every sequence; `None` for an empty dataset.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.sequences.first().map(|s| (s.steps, s.dims))
    }

    /// Keeps K and M; picks samples in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            contexts: indices.iter().map(|&i| self.contexts[i]).collect(),
            num_classes: self.num_classes,
            num_contexts: self.num_contexts,
        }
    }

    pub fn with_num_classes(mut self, num_classes: usize) -> Result<Self> {
        if self.labels.iter().any(|&y| y > num_classes) {
            return Err(SpamsError::Config(format!(
                "dataset has labels above K={num_classes}"
            )));
        }
        self.num_classes = num_classes;
        Ok(self)
    }

    /// Replaces every sequence with `f(sequence)`.
    pub fn map_sequences(&self, mut f: impl FnMut(&MultiVarSequence) -> MultiVarSequence) -> Self {
        LabeledDataset {
            sequences: self.sequences.iter().map(&mut f).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub width: usize,
    pub stride: usize,
}

impl WindowConfig {
    pub fn new(width: usize, stride: usize) -> Result<Self> {
        if width == 0 || stride == 0 {
            return Err(SpamsError::Config(format!(
                "window width and stride must be >= 1, got w={width} s={stride}"
            )));
        }
        Ok(WindowConfig { width, stride })
    }

    pub fn validate_for(&self, steps: usize) -> Result<()> {
        if self.width == 0 || self.stride == 0 {
            return Err(SpamsError::Config("window width and stride must be >= 1".into()));
        }
        if self.width > steps {
            return Err(SpamsError::Config(format!(
                "window width {} exceeds sequence length {steps}",
                self.width
            )));
        }
        Ok(())
    }

    /// `floor((T − w)/s) + 1`, assuming `w ≤ T`.
    pub fn count(&self, steps: usize) -> usize {
        (steps - self.width) / self.stride + 1
    }

    /// 1-based first time step covered by 1-based window `j`.
    pub fn window_start_step(&self, j: usize) -> usize {
        1 + (j - 1) * self.stride
    }

    /// 1-based last time step covered by 1-based window `j`.
    pub fn window_end_step(&self, j: usize) -> usize {
        self.window_start_step(j) + self.width - 1
    }

    pub fn input_dim(&self, dims: usize) -> usize {
        self.width * dims
    }
}

/// Flattens each window time-major: all D features of one step, then the next.
pub fn windows(seq: &MultiVarSequence, cfg: &WindowConfig) -> Result<Vec<Vector>> {
    cfg.validate_for(seq.steps)?;
    let n = cfg.count(seq.steps);
    let len = cfg.width * seq.dims;
    Ok((0..n)
        .map(|j| {
            let start = j * cfg.stride * seq.dims;
            Vector::from_vec(seq.values[start..start + len].to_vec())
        })
        .collect())
}

// ---------------------------------------------------------------------------
// CSV I/O

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_open_error(path, e))
}

fn csv_open_error(path: &Path, e: csv::Error) -> SpamsError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SpamsError::io(path, io),
        other => SpamsError::format(path.display(), format!("{other:?}")),
    }
}

fn parse_cell<T: std::str::FromStr>(path: &Path, row: usize, field: &str, cell: &str) -> Result<T> {
    cell.parse().map_err(|_| SpamsError::Parse {
        source_name: path.display().to_string(),
        row,
        message: format!("cannot parse {field} from {cell:?}"),
    })
}

fn read_records(path: &Path, expected_header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_open_error(path, e))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected_header {
        return Err(SpamsError::format(
            path.display(),
            format!("header {:?}, expected {:?}", got, expected_header),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // row 1 is the header
        let row = i + 2;
        let rec = rec.map_err(|e| SpamsError::Parse {
            source_name: path.display().to_string(),
            row,
            message: e.to_string(),
        })?;
        if rec.len() != expected_header.len() {
            return Err(SpamsError::format(
                path.display(),
                format!("row {row} has {} fields, expected {}", rec.len(), expected_header.len()),
            ));
        }
        out.push((row, rec));
    }
    Ok(out)
}

fn read_id_map(path: &Path, value_name: &str) -> Result<HashMap<String, (usize, usize)>> {
    let mut map = HashMap::new();
    for (row, rec) in read_records(path, &["sample_id", value_name])? {
        let id = rec[0].to_string();
        let v: usize = parse_cell(path, row, value_name, &rec[1])?;
        if v == 0 {
            return Err(SpamsError::format(
                path.display(),
                format!("row {row}: {value_name} must be a 1-based integer, got 0"),
            ));
        }
        if map.insert(id.clone(), (v, row)).is_some() {
            return Err(SpamsError::format(
                path.display(),
                format!("row {row}: duplicate sample_id {id}"),
            ));
        }
    }
    Ok(map)
}

fn read_sequences(path: &Path) -> Result<(Vec<String>, Vec<MultiVarSequence>)> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_open_error(path, e))?.clone();
    if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "t" {
        return Err(SpamsError::format(
            path.display(),
            "header must be sample_id,t,f1,...,fD",
        ));
    }
    let dims = header.len() - 2;
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("f{}", j + 1) {
            return Err(SpamsError::format(
                path.display(),
                format!("feature column {} is named {name:?}, expected f{}", j + 1, j + 1),
            ));
        }
    }

    let mut ids: Vec<String> = Vec::new();
    let mut grids: Vec<Vec<f64>> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| SpamsError::Parse {
            source_name: path.display().to_string(),
            row,
            message: e.to_string(),
        })?;
        let id = rec.get(0).unwrap_or("").to_string();
        if rec.len() != dims + 2 {
            return Err(SpamsError::format(
                path.display(),
                format!("sample {id}: row {row} has {} features, expected {dims}", rec.len().saturating_sub(2)),
            ));
        }
        let t: usize = parse_cell(path, row, "t", &rec[1])?;
        let is_current = ids.last().is_some_and(|last| *last == id);
        if !is_current {
            if seen.contains_key(&id) {
                return Err(SpamsError::format(
                    path.display(),
                    format!("sample {id}: rows are not contiguous (row {row})"),
                ));
            }
            seen.insert(id.clone(), ids.len());
            ids.push(id.clone());
            grids.push(Vec::new());
        }
        let grid = grids.last_mut().expect("pushed above");
        let expected_t = grid.len() / dims + 1;
        if t != expected_t {
            return Err(SpamsError::format(
                path.display(),
                format!("sample {id}: row {row} has t={t}, expected t={expected_t}"),
            ));
        }
        for j in 0..dims {
            let v: f64 = parse_cell(path, row, &format!("f{}", j + 1), &rec[j + 2])?;
            if !v.is_finite() {
                return Err(SpamsError::Parse {
                    source_name: path.display().to_string(),
                    row,
                    message: format!("non-finite value in f{}", j + 1),
                });
            }
            grid.push(v);
        }
    }

    let steps = grids.first().map_or(0, |g| g.len() / dims);
    let mut sequences = Vec::with_capacity(grids.len());
    for (id, grid) in ids.iter().zip(grids) {
        let t = grid.len() / dims;
        if t != steps {
            return Err(SpamsError::format(
                path.display(),
                format!("sample {id} has T={t}, expected T={steps} (ragged sequences)"),
            ));
        }
        sequences.push(MultiVarSequence::new(t, dims, grid)?);
    }
    Ok((ids, sequences))
}

/// Reads the three CSV files. Without a contexts file every sample gets
/// context 1 and M = 1. K is the largest label present.
pub fn load_dataset(
    sequences_path: &Path,
    labels_path: &Path,
    contexts_path: Option<&Path>,
) -> Result<LabeledDataset> {
    let (ids, sequences) = read_sequences(sequences_path)?;
    if ids.is_empty() {
        return Err(SpamsError::format(sequences_path.display(), "no samples"));
    }
    let label_map = read_id_map(labels_path, "label")?;
    let mut labels = Vec::with_capacity(ids.len());
    for id in &ids {
        let (y, _) = label_map.get(id).ok_or_else(|| {
            SpamsError::format(labels_path.display(), format!("no label for sample {id}"))
        })?;
        labels.push(*y);
    }
    if label_map.len() != ids.len() {
        let extra = label_map.keys().find(|k| !ids.contains(k)).cloned().unwrap_or_default();
        return Err(SpamsError::format(
            labels_path.display(),
            format!("label for unknown sample {extra}"),
        ));
    }
    let num_classes = labels.iter().copied().max().unwrap_or(1);

    let (contexts, num_contexts) = match contexts_path {
        None => (vec![1; ids.len()], 1),
        Some(p) => {
            let ctx_map = read_id_map(p, "context")?;
            let mut contexts = Vec::with_capacity(ids.len());
            for id in &ids {
                let (c, _) = ctx_map.get(id).ok_or_else(|| {
                    SpamsError::format(p.display(), format!("no context for sample {id}"))
                })?;
                contexts.push(*c);
            }
            let m = contexts.iter().copied().max().unwrap_or(1);
            (contexts, m)
        }
    };
    LabeledDataset::new(ids, sequences, labels, contexts, num_classes, num_contexts)
}

/// Loads `sequences.csv`, `labels.csv` and, when present, `contexts.csv`.
pub fn load_dataset_dir(dir: &Path) -> Result<LabeledDataset> {
    let ctx = dir.join(CONTEXTS_FILE);
    load_dataset(
        &dir.join(SEQUENCES_FILE),
        &dir.join(LABELS_FILE),
        ctx.exists().then_some(ctx.as_path()),
    )
}

pub fn save_dataset(ds: &LabeledDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SpamsError::io(dir, e))?;
    let dims = ds.shape().map_or(0, |(_, d)| d);
    let mut header = vec!["sample_id".to_string(), "t".to_string()];
    header.extend((1..=dims).map(|j| format!("f{j}")));
    let rows = ds.ids.iter().zip(&ds.sequences).flat_map(|(id, s)| {
        (0..s.steps).map(move |t| {
            let mut row = vec![id.clone(), (t + 1).to_string()];
            row.extend(s.step(t).iter().map(|v| v.to_string()));
            row
        })
    });
    io_util::csv_write(&dir.join(SEQUENCES_FILE), &header, rows)?;
    io_util::csv_write(
        &dir.join(LABELS_FILE),
        &["sample_id".into(), "label".into()],
        ds.ids.iter().zip(&ds.labels).map(|(id, y)| vec![id.clone(), y.to_string()]),
    )?;
    io_util::csv_write(
        &dir.join(CONTEXTS_FILE),
        &["sample_id".into(), "context".into()],
        ds.ids.iter().zip(&ds.contexts).map(|(id, c)| vec![id.clone(), c.to_string()]),
    )
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-feature z-scoring, fit on one dataset and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &LabeledDataset) -> Result<Self> {
        let (_, dims) = ds.shape().ok_or(SpamsError::EmptyInput("standardizer fit"))?;
        let mut sum = vec![0.0; dims];
        let mut sq = vec![0.0; dims];
        let mut count = 0usize;
        for s in &ds.sequences {
            for t in 0..s.steps {
                for (j, v) in s.step(t).iter().enumerate() {
                    sum[j] += v;
                    sq[j] += v * v;
                }
                count += 1;
            }
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, ds: &LabeledDataset) -> LabeledDataset {
        ds.map_sequences(|s| {
            let mut out = s.clone();
            for t in 0..out.steps {
                for (j, v) in out.step_mut(t).iter_mut().enumerate() {
                    *v = (*v - self.mean[j]) / self.std[j];
                }
            }
            out
        })
    }
}

// ---------------------------------------------------------------------------
// Splitting

/// Stratified partition of sample indices into `fractions.len()` groups.
/// Each class contributes to every group; indices within a group ascend.
pub fn partition_indices(ds: &LabeledDataset, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(SpamsError::Split(format!(
            "fractions must all be positive, got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SpamsError::Split(format!("fractions sum to {total}, expected 1")));
    }
    let parts = fractions.len();
    let mut rng = Rng::new(seed);
    let mut out = vec![Vec::new(); parts];
    for k in 1..=ds.num_classes {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == k).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < parts {
            return Err(SpamsError::Split(format!(
                "class {k} has {} samples, fewer than {parts} partitions",
                members.len()
            )));
        }
        rng.shuffle(&mut members);
        let counts = allocate(members.len(), fractions);
        let mut offset = 0;
        for (part, &c) in out.iter_mut().zip(&counts) {
            part.extend_from_slice(&members[offset..offset + c]);
            offset += c;
        }
    }
    for part in &mut out {
        part.sort_unstable();
    }
    Ok(out)
}

/// Largest-remainder apportionment with a floor of one per group.
fn allocate(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let donor = (0..counts.len()).max_by_key(|&i| (counts[i], usize::MAX - i)).unwrap();
        counts[donor] -= 1;
        counts[empty] += 1;
    }
    counts
}

/// Stratified train/validation/test split.
pub fn split(
    ds: &LabeledDataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    let parts = partition_indices(ds, &[fractions.0, fractions.1, fractions.2], seed)?;
    Ok((ds.subset(&parts[0]), ds.subset(&parts[1]), ds.subset(&parts[2])))
}

// ---------------------------------------------------------------------------
// Synthetic shifting-pattern data

#[derive(Debug, Clone, PartialEq)]
pub enum OffsetDist {
    Fixed(usize),
    /// Inclusive range of 1-based start steps.
    Uniform { lo: usize, hi: usize },
    List(Vec<usize>),
}

impl OffsetDist {
    fn bounds(&self) -> Result<(usize, usize)> {
        let (lo, hi) = match self {
            OffsetDist::Fixed(o) => (*o, *o),
            OffsetDist::Uniform { lo, hi } => (*lo, *hi),
            OffsetDist::List(l) => (
                l.iter().copied().min().ok_or_else(|| SpamsError::Config("empty offset list".into()))?,
                l.iter().copied().max().unwrap_or(0),
            ),
        };
        if lo == 0 || lo > hi {
            return Err(SpamsError::Config(format!(
                "offsets must be 1-based with lo <= hi, got [{lo},{hi}]"
            )));
        }
        Ok((lo, hi))
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        match self {
            OffsetDist::Fixed(o) => *o,
            OffsetDist::Uniform { lo, hi } => rng.int_range(*lo, *hi),
            OffsetDist::List(l) => l[rng.int_range(0, l.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Iid,
    /// Per-feature AR(1) with stationary standard deviation sigma.
    Ar1 { rho: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub per_class: usize,
    pub steps: usize,
    pub dims: usize,
    /// One `w_p × D` template per class.
    pub templates: Vec<Matrix>,
    pub offsets: OffsetDist,
    pub delay: usize,
    pub noise_sigma: f64,
    pub noise: NoiseModel,
    pub recurrence: usize,
    /// Contexts are buckets of the first offset; 1 puts everything together.
    pub num_contexts: usize,
    pub seed: u64,
}

/// Template entries drawn uniformly from `[−amplitude, amplitude]`.
pub fn random_templates(classes: usize, length: usize, dims: usize, amplitude: f64, seed: u64) -> Vec<Matrix> {
    let mut rng = Rng::new(seed);
    (0..classes)
        .map(|_| {
            let data = (0..length * dims)
                .map(|_| rng.uniform_range(-amplitude, amplitude))
                .collect();
            Matrix::from_vec(length, dims, data).expect("sized above")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub sample_id: String,
    pub class: usize,
    /// Inclusive 1-based time steps.
    pub offset_start: usize,
    pub offset_end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub dataset: LabeledDataset,
    /// One row per injected occurrence, in sample order.
    pub truth: Vec<GroundTruth>,
}

impl SyntheticSet {
    pub fn truth_for<'a>(&'a self, sample_id: &'a str) -> impl Iterator<Item = &'a GroundTruth> + 'a {
        self.truth.iter().filter(move |g| g.sample_id == sample_id)
    }
}

impl SynthSpec {
    pub fn num_classes(&self) -> usize {
        self.templates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(SpamsError::Config("at least one class template required".into()));
        }
        if self.per_class == 0 || self.steps == 0 || self.dims == 0 {
            return Err(SpamsError::Config("per_class, T and D must be positive".into()));
        }
        if self.recurrence == 0 {
            return Err(SpamsError::Config("recurrence must be >= 1".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(SpamsError::Config("noise sigma must be finite and >= 0".into()));
        }
        if let NoiseModel::Ar1 { rho } = self.noise {
            if !(rho.abs() < 1.0) {
                return Err(SpamsError::Config(format!("AR(1) coefficient {rho} must satisfy |rho| < 1")));
            }
        }
        if self.num_contexts == 0 {
            return Err(SpamsError::Config("num_contexts must be >= 1".into()));
        }
        for (k, t) in self.templates.iter().enumerate() {
            if t.cols() != self.dims || t.rows() == 0 {
                return Err(SpamsError::Config(format!(
                    "template {} is {}x{}, expected w_p x {}",
                    k + 1,
                    t.rows(),
                    t.cols(),
                    self.dims
                )));
            }
            let (_, hi) = self.offsets.bounds()?;
            let last = hi + self.delay + t.rows() - 1;
            if last > self.steps {
                return Err(SpamsError::Config(format!(
                    "pattern overflow: offset {hi} + delay {} + length {} ends at step {last} > T={}",
                    self.delay,
                    t.rows(),
                    self.steps
                )));
            }
        }
        Ok(())
    }

    fn context_of(&self, first_offset: usize) -> usize {
        let (lo, hi) = self.offsets.bounds().expect("validated");
        let span = hi - lo + 1;
        let m = self.num_contexts.min(span);
        1 + (first_offset - lo) * m / span
    }
}

/// Noise plus each sample's class template added at `recurrence` sampled
/// offsets (shifted by the global delay). Draws do not depend on `delay`,
/// so two specs differing only in delay give the same noise and offsets.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticSet> {
    spec.validate()?;
    let k_classes = spec.num_classes();
    let mut rng = Rng::new(spec.seed);
    let n = k_classes * spec.per_class;
    let mut ids = Vec::with_capacity(n);
    let mut sequences = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut contexts = Vec::with_capacity(n);
    let mut truth = Vec::new();

    for class in 1..=k_classes {
        let template = &spec.templates[class - 1];
        for _ in 0..spec.per_class {
            let id = format!("s{:05}", ids.len() + 1);
            let offsets: Vec<usize> = (0..spec.recurrence).map(|_| spec.offsets.sample(&mut rng)).collect();
            let mut seq = MultiVarSequence::zeros(spec.steps, spec.dims);
            fill_noise(&mut seq, spec, &mut rng);
            for &off in &offsets {
                let start = off + spec.delay;
                for r in 0..template.rows() {
                    for (v, &p) in seq.step_mut(start - 1 + r).iter_mut().zip(template.row(r)) {
                        *v += p;
                    }
                }
                truth.push(GroundTruth {
                    sample_id: id.clone(),
                    class,
                    offset_start: start,
                    offset_end: start + template.rows() - 1,
                });
            }
            contexts.push(spec.context_of(offsets[0]));
            labels.push(class);
            sequences.push(seq);
            ids.push(id);
        }
    }
    let num_contexts = contexts.iter().copied().max().unwrap_or(1);
    let dataset = LabeledDataset::new(ids, sequences, labels, contexts, k_classes, num_contexts)?;
    Ok(SyntheticSet { dataset, truth })
}

fn fill_noise(seq: &mut MultiVarSequence, spec: &SynthSpec, rng: &mut Rng) {
    let sigma = spec.noise_sigma;
    match spec.noise {
        NoiseModel::Iid => {
            for v in &mut seq.values {
                *v = sigma * rng.normal();
            }
        }
        NoiseModel::Ar1 { rho } => {
            let innov = (1.0 - rho * rho).sqrt();
            let mut prev = vec![0.0; seq.dims];
            for t in 0..seq.steps {
                for (j, p) in prev.iter_mut().enumerate() {
                    let e = rng.normal();
                    *p = if t == 0 { sigma * e } else { rho * *p + innov * sigma * e };
                    seq.values[t * seq.dims + j] = *p;
                }
            }
        }
    }
}

pub fn write_ground_truth(path: &Path, truth: &[GroundTruth]) -> Result<()> {
    io_util::csv_write(
        path,
        &["sample_id", "class", "offset_start", "offset_end"].map(String::from),
        truth.iter().map(|g| {
            vec![
                g.sample_id.clone(),
                g.class.to_string(),
                g.offset_start.to_string(),
                g.offset_end.to_string(),
            ]
        }),
    )
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    read_records(path, &["sample_id", "class", "offset_start", "offset_end"])?
        .into_iter()
        .map(|(row, rec)| {
            Ok(GroundTruth {
                sample_id: rec[0].to_string(),
                class: parse_cell(path, row, "class", &rec[1])?,
                offset_start: parse_cell(path, row, "offset_start", &rec[2])?,
                offset_end: parse_cell(path, row, "offset_end", &rec[3])?,
            })
        })
        .collect()
}
