//! Multi-instance aggregation over the temporal profile.
//!
//! For each class `k` the sequence score is the best average of `l_k`
//! consecutive window outputs; a softmax over the scores gives the
//! posterior. Training adds a context regularizer pulling each profile
//! towards the mean profile of its (context, class) cell.

use crate::error::{Result, SpamsError};
use crate::numerics::{percentile, softmax, Matrix};

/// Per-window class confidences, row-major `n_w × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalProfile {
    num_windows: usize,
    num_classes: usize,
    values: Vec<f64>,
}

impl TemporalProfile {
    /// Entries must lie strictly inside `(0, 1)`.
    pub fn new(num_windows: usize, num_classes: usize, values: Vec<f64>) -> Result<Self> {
        if num_windows == 0 || num_classes == 0 {
            return Err(SpamsError::EmptyInput("temporal profile needs n_w >= 1 and K >= 1"));
        }
        if values.len() != num_windows * num_classes {
            return Err(SpamsError::dim(
                "temporal profile",
                format!("{num_windows}x{num_classes}"),
                values.len(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(SpamsError::Range(format!("profile entry {v} outside (0,1)")));
        }
        Ok(TemporalProfile {
            num_windows,
            num_classes,
            values,
        })
    }

    pub(crate) fn new_unchecked(num_windows: usize, num_classes: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), num_windows * num_classes);
        TemporalProfile {
            num_windows,
            num_classes,
            values,
        }
    }

    /// Single-class profile from a list of window confidences.
    pub fn from_channel(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn num_windows(&self) -> usize {
        self.num_windows
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `p^t_(k)` with 0-based `t` and `k`.
    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values[t * self.num_classes + k]
    }

    pub fn window(&self, t: usize) -> &[f64] {
        &self.values[t * self.num_classes..(t + 1) * self.num_classes]
    }

    pub fn channel(&self, k: usize) -> Vec<f64> {
        (0..self.num_windows).map(|t| self.get(t, k)).collect()
    }

    /// Profile of the first `n` windows.
    pub fn prefix(&self, n: usize) -> TemporalProfile {
        TemporalProfile::new_unchecked(n, self.num_classes, self.values[..n * self.num_classes].to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationConfig {
    /// `l_k` per class, each at least 1.
    pub lengths: Vec<usize>,
    /// Percentile used by the adaptive length rule.
    pub percentile: f64,
}

impl AggregationConfig {
    pub fn new(lengths: Vec<usize>, percentile: f64) -> Self {
        AggregationConfig { lengths, percentile }
    }

    /// Starting lengths before the first adaptive update: `max(1, round(n_w/10))`.
    pub fn initial(num_classes: usize, num_windows: usize, percentile: f64) -> Self {
        let l = ((num_windows as f64 / 10.0).round() as usize).max(1);
        AggregationConfig {
            lengths: vec![l; num_classes],
            percentile,
        }
    }

    fn check(&self, profile: &TemporalProfile) -> Result<()> {
        if self.lengths.len() != profile.num_classes {
            return Err(SpamsError::dim(
                "aggregation lengths",
                format!("{} classes in profile", profile.num_classes),
                format!("{} lengths", self.lengths.len()),
            ));
        }
        for (k, &l) in self.lengths.iter().enumerate() {
            if l == 0 || l > profile.num_windows {
                return Err(SpamsError::Config(format!(
                    "l_{} = {l} must lie in [1, {}]",
                    k + 1,
                    profile.num_windows
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationResult {
    /// `y_(k)`: best block average per class.
    pub scores: Vec<f64>,
    /// 1-based first window of the maximizing block (earliest on ties).
    pub t_star: Vec<usize>,
    /// Block length used per class.
    pub lengths: Vec<usize>,
    pub posterior: Vec<f64>,
}

impl AggregationResult {
    /// 1-based class with the largest posterior (lowest index on ties).
    pub fn predicted_class(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.posterior.iter().enumerate() {
            if p > self.posterior[best] {
                best = k;
            }
        }
        best + 1
    }
}

/// Best block average over windows `0..upto` for class `k`, as `(score, start)`.
fn best_block(profile: &TemporalProfile, k: usize, len: usize, upto: usize) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut best_start = 0;
    for start in 0..=(upto - len) {
        let sum: f64 = (start..start + len).map(|t| profile.get(t, k)).sum();
        let avg = sum / len as f64;
        if avg > best {
            best = avg;
            best_start = start;
        }
    }
    (best, best_start)
}

pub fn aggregate(profile: &TemporalProfile, cfg: &AggregationConfig) -> Result<AggregationResult> {
    cfg.check(profile)?;
    aggregate_upto(profile, cfg, profile.num_windows)
}

/// Aggregation over windows `1..=upto` only, with each `l_k` truncated to
/// `min(l_k, upto)` so a posterior exists from the first window on.
pub fn aggregate_upto(profile: &TemporalProfile, cfg: &AggregationConfig, upto: usize) -> Result<AggregationResult> {
    if upto == 0 || upto > profile.num_windows {
        return Err(SpamsError::Config(format!(
            "cutoff {upto} outside [1, {}]",
            profile.num_windows
        )));
    }
    if cfg.lengths.len() != profile.num_classes || cfg.lengths.contains(&0) {
        return Err(SpamsError::Config(format!(
            "need {} positive lengths, got {:?}",
            profile.num_classes, cfg.lengths
        )));
    }
    let k_classes = profile.num_classes;
    let mut scores = Vec::with_capacity(k_classes);
    let mut t_star = Vec::with_capacity(k_classes);
    let mut lengths = Vec::with_capacity(k_classes);
    for k in 0..k_classes {
        let len = cfg.lengths[k].min(upto);
        let (score, start) = best_block(profile, k, len, upto);
        scores.push(score);
        t_star.push(start + 1);
        lengths.push(len);
    }
    let posterior = softmax(&scores)?.into_vec();
    Ok(AggregationResult {
        scores,
        t_star,
        lengths,
        posterior,
    })
}

/// Which profile channels the context regularizer acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegularizerScope {
    /// Every class channel of every sample.
    #[default]
    AllClasses,
    /// Only the channel of the sample's own label.
    OwnLabel,
}

impl RegularizerScope {
    pub fn name(self) -> &'static str {
        match self {
            RegularizerScope::AllClasses => "all",
            RegularizerScope::OwnLabel => "own",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(RegularizerScope::AllClasses),
            "own" => Ok(RegularizerScope::OwnLabel),
            other => Err(SpamsError::Config(format!("unknown regularizer scope {other:?}"))),
        }
    }
}

/// Everything besides the profile that determines the training cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub lambda: f64,
    pub scope: RegularizerScope,
    /// Drop the `1/l_k` factor inside the argmax block. This is not the
    /// derivative of the cost; it reproduces the classic un-scaled update.
    pub unscaled_block_gradient: bool,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            lambda: 0.0,
            scope: RegularizerScope::AllClasses,
            unscaled_block_gradient: false,
        }
    }
}

impl Objective {
    pub fn with_lambda(lambda: f64) -> Self {
        Objective {
            lambda,
            ..Objective::default()
        }
    }
}

/// Mean profiles per (context, class) cell, averaged over training samples
/// with that context and label. Empty cells are marked invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextTable {
    num_contexts: usize,
    num_classes: usize,
    num_windows: usize,
    cells: Vec<Option<Vec<f64>>>,
}

impl ContextTable {
    pub fn empty(num_contexts: usize, num_classes: usize, num_windows: usize) -> Self {
        ContextTable {
            num_contexts,
            num_classes,
            num_windows,
            cells: vec![None; num_contexts * num_classes],
        }
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_windows(&self) -> usize {
        self.num_windows
    }

    /// Mean `n_w × K` grid for 1-based `(context, class)`, if any sample fell there.
    pub fn cell(&self, context: usize, class: usize) -> Option<&[f64]> {
        if context == 0 || context > self.num_contexts || class == 0 || class > self.num_classes {
            return None;
        }
        self.cells[(context - 1) * self.num_classes + class - 1].as_deref()
    }

    pub fn set_cell(&mut self, context: usize, class: usize, mean: Option<Vec<f64>>) -> Result<()> {
        if context == 0 || context > self.num_contexts || class == 0 || class > self.num_classes {
            return Err(SpamsError::Range(format!("cell ({context},{class}) outside table")));
        }
        if let Some(m) = &mean {
            if m.len() != self.num_windows * self.num_classes {
                return Err(SpamsError::dim("context cell", self.num_windows * self.num_classes, m.len()));
            }
        }
        self.cells[(context - 1) * self.num_classes + class - 1] = mean;
        Ok(())
    }

    pub fn entry(&self, context: usize) -> ContextEntry<'_> {
        ContextEntry {
            table: Some(self),
            context,
        }
    }
}

/// The slice of a context table relevant to one sample.
#[derive(Debug, Clone, Copy)]
pub struct ContextEntry<'a> {
    table: Option<&'a ContextTable>,
    context: usize,
}

impl<'a> ContextEntry<'a> {
    /// No context information: the regularizer contributes nothing.
    pub fn none() -> Self {
        ContextEntry {
            table: None,
            context: 0,
        }
    }

    pub fn mean(&self, class: usize) -> Option<&'a [f64]> {
        self.table.and_then(|t| t.cell(self.context, class))
    }
}

/// Cost of one sample together with its profile gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    pub cross_entropy: f64,
    pub regularizer: f64,
    /// `∂J/∂p`, `n_w × K`.
    pub grad: Matrix,
    pub aggregation: AggregationResult,
}

fn check_label(label: usize, k: usize) -> Result<()> {
    if label == 0 || label > k {
        return Err(SpamsError::Range(format!("label {label} outside [1,{k}]")));
    }
    Ok(())
}

fn regularized_channels(label: usize, k: usize, scope: RegularizerScope) -> std::ops::RangeInclusive<usize> {
    match scope {
        RegularizerScope::AllClasses => 1..=k,
        RegularizerScope::OwnLabel => label..=label,
    }
}

/// Cross-entropy of the aggregated posterior plus the context regularizer,
/// and the gradient with respect to every profile entry. Context means are
/// constants here.
pub fn evaluate(
    profile: &TemporalProfile,
    label: usize,
    ctx: ContextEntry<'_>,
    cfg: &AggregationConfig,
    objective: &Objective,
) -> Result<Evaluation> {
    let k_classes = profile.num_classes;
    check_label(label, k_classes)?;
    if !(objective.lambda >= 0.0) {
        return Err(SpamsError::Range(format!("lambda {} must be >= 0", objective.lambda)));
    }
    let agg = aggregate(profile, cfg)?;
    let n = profile.num_windows;
    let cross_entropy = -agg.posterior[label - 1].ln();
    let mut grad = Matrix::zeros(n, k_classes);

    for k in 0..k_classes {
        let indicator = if k + 1 == label { 1.0 } else { 0.0 };
        let mut d = agg.posterior[k] - indicator;
        if !objective.unscaled_block_gradient {
            d /= agg.lengths[k] as f64;
        }
        let start = agg.t_star[k] - 1;
        for t in start..start + agg.lengths[k] {
            grad.set(t, k, d);
        }
    }

    let mut regularizer = 0.0;
    if objective.lambda > 0.0 {
        for k in regularized_channels(label, k_classes, objective.scope) {
            let Some(mean) = ctx.mean(k) else { continue };
            if mean.len() != profile.values.len() {
                return Err(SpamsError::dim("context mean", profile.values.len(), mean.len()));
            }
            let c = k - 1;
            for t in 0..n {
                let diff = profile.get(t, c) - mean[t * k_classes + c];
                regularizer += diff * diff;
                let g = grad.get(t, c) + 2.0 * objective.lambda * diff;
                grad.set(t, c, g);
            }
        }
    }
    Ok(Evaluation {
        cost: cross_entropy + objective.lambda * regularizer,
        cross_entropy,
        regularizer,
        grad,
        aggregation: agg,
    })
}

pub fn cost(
    profile: &TemporalProfile,
    label: usize,
    ctx: ContextEntry<'_>,
    cfg: &AggregationConfig,
    objective: &Objective,
) -> Result<f64> {
    evaluate(profile, label, ctx, cfg, objective).map(|e| e.cost)
}

pub fn cost_gradient(
    profile: &TemporalProfile,
    label: usize,
    ctx: ContextEntry<'_>,
    cfg: &AggregationConfig,
    objective: &Objective,
) -> Result<Matrix> {
    evaluate(profile, label, ctx, cfg, objective).map(|e| e.grad)
}

/// Many-to-one head: softmax cross-entropy on the last window's outputs only.
pub fn evaluate_last_window(profile: &TemporalProfile, label: usize) -> Result<Evaluation> {
    let k_classes = profile.num_classes;
    check_label(label, k_classes)?;
    let n = profile.num_windows;
    let scores = profile.window(n - 1).to_vec();
    let posterior = softmax(&scores)?.into_vec();
    let mut grad = Matrix::zeros(n, k_classes);
    for k in 0..k_classes {
        let indicator = if k + 1 == label { 1.0 } else { 0.0 };
        grad.set(n - 1, k, posterior[k] - indicator);
    }
    let cross_entropy = -posterior[label - 1].ln();
    Ok(Evaluation {
        cost: cross_entropy,
        cross_entropy,
        regularizer: 0.0,
        grad,
        aggregation: AggregationResult {
            scores,
            t_star: vec![n; k_classes],
            lengths: vec![1; k_classes],
            posterior,
        },
    })
}

/// Length of the longest run of consecutive entries strictly above
/// `threshold`, clamped to `[1, values.len()]`.
pub fn longest_run_above(values: &[f64], threshold: f64) -> usize {
    let mut best = 0;
    let mut run = 0;
    for &v in values {
        if v > threshold {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best.clamp(1, values.len().max(1))
}

/// Adaptive persistence lengths. For class `k`, `φ_k` is the mean class-k
/// channel over class-k samples and the threshold is the `q`-percentile of
/// all class-k channel values of those samples; `l_k` is the longest run of
/// `φ_k` above the threshold.
pub fn update_lengths(profiles: &[TemporalProfile], labels: &[usize], num_classes: usize, q: f64) -> Result<Vec<usize>> {
    if profiles.len() != labels.len() {
        return Err(SpamsError::dim("update_lengths", profiles.len(), labels.len()));
    }
    let n_w = profiles.first().map_or(0, |p| p.num_windows);
    let mut lengths = Vec::with_capacity(num_classes);
    for k in 1..=num_classes {
        let members: Vec<&TemporalProfile> = profiles
            .iter()
            .zip(labels)
            .filter(|(_, &y)| y == k)
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            return Err(SpamsError::ClassEmpty { class: k });
        }
        let mut phi = vec![0.0; n_w];
        let mut pool = Vec::with_capacity(members.len() * n_w);
        for p in &members {
            if p.num_windows != n_w || p.num_classes != num_classes {
                return Err(SpamsError::dim(
                    "update_lengths profile",
                    format!("{n_w}x{num_classes}"),
                    format!("{}x{}", p.num_windows, p.num_classes),
                ));
            }
            for (t, ph) in phi.iter_mut().enumerate() {
                let v = p.get(t, k - 1);
                *ph += v;
                pool.push(v);
            }
        }
        let count = members.len() as f64;
        phi.iter_mut().for_each(|v| *v /= count);
        let theta = percentile(&pool, q)?;
        lengths.push(longest_run_above(&phi, theta));
    }
    Ok(lengths)
}

/// Elementwise mean profile per (context, label) cell.
pub fn update_context_table(
    profiles: &[TemporalProfile],
    labels: &[usize],
    contexts: &[usize],
    num_classes: usize,
    num_contexts: usize,
) -> Result<ContextTable> {
    if profiles.len() != labels.len() || profiles.len() != contexts.len() {
        return Err(SpamsError::dim(
            "update_context_table",
            profiles.len(),
            format!("{} labels, {} contexts", labels.len(), contexts.len()),
        ));
    }
    let n_w = profiles.first().map_or(0, |p| p.num_windows);
    let width = n_w * num_classes;
    let mut sums: Vec<Option<(Vec<f64>, usize)>> = vec![None; num_contexts * num_classes];
    for ((p, &y), &c) in profiles.iter().zip(labels).zip(contexts) {
        if p.values.len() != width {
            return Err(SpamsError::dim("update_context_table profile", width, p.values.len()));
        }
        if y == 0 || y > num_classes || c == 0 || c > num_contexts {
            return Err(SpamsError::Range(format!("sample with label {y} / context {c} outside table")));
        }
        let slot = sums[(c - 1) * num_classes + y - 1].get_or_insert_with(|| (vec![0.0; width], 0));
        for (s, v) in slot.0.iter_mut().zip(&p.values) {
            *s += v;
        }
        slot.1 += 1;
    }
    Ok(ContextTable {
        num_contexts,
        num_classes,
        num_windows: n_w,
        cells: sums
            .into_iter()
            .map(|cell| {
                cell.map(|(mut s, n)| {
                    s.iter_mut().for_each(|v| *v /= n as f64);
                    s
                })
            })
            .collect(),
    })
}
