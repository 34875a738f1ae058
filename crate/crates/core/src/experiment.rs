//! Shifting-pattern study: train on undelayed synthetic data, then score the
//! model on copies of the test set whose patterns are delayed.

use crate::config::KvConfig;
use crate::data::{
    generate_synthetic, random_templates, LabeledDataset, NoiseModel, OffsetDist, SynthSpec, SyntheticSet,
    WindowConfig,
};
use crate::error::{Result, SpamsError};
use crate::eval::{self, MetricReport};
use crate::mil::TemporalProfile;
use crate::training::{train, TrainConfig, TrainedModel, Variant};

/// Flat description of a synthetic dataset, as read from a spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub classes: usize,
    pub per_class: usize,
    pub steps: usize,
    pub dims: usize,
    pub pattern_len: usize,
    /// Inclusive 1-based range of pattern start steps.
    pub offset_lo: usize,
    pub offset_hi: usize,
    pub delay: usize,
    pub sigma: f64,
    /// AR(1) coefficient; `None` gives i.i.d. noise.
    pub rho: Option<f64>,
    pub recurrence: usize,
    pub contexts: usize,
    pub seed: u64,
    pub template_seed: u64,
    pub amplitude: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            classes: 2,
            per_class: 200,
            steps: 46,
            dims: 4,
            pattern_len: 6,
            offset_lo: 6,
            offset_hi: 14,
            delay: 0,
            sigma: 0.3,
            rho: None,
            recurrence: 1,
            contexts: 3,
            seed: 11,
            template_seed: 7,
            amplitude: 1.0,
        }
    }
}

pub const SYNTH_KEYS: &[&str] = &[
    "classes",
    "per_class",
    "steps",
    "dims",
    "pattern_len",
    "offset_lo",
    "offset_hi",
    "delay",
    "sigma",
    "rho",
    "recurrence",
    "contexts",
    "seed",
    "template_seed",
    "amplitude",
];

impl SynthParams {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        kv.check_keys(SYNTH_KEYS)?;
        let d = SynthParams::default();
        Ok(SynthParams {
            classes: kv.get_or("classes", d.classes)?,
            per_class: kv.get_or("per_class", d.per_class)?,
            steps: kv.get_or("steps", d.steps)?,
            dims: kv.get_or("dims", d.dims)?,
            pattern_len: kv.get_or("pattern_len", d.pattern_len)?,
            offset_lo: kv.get_or("offset_lo", d.offset_lo)?,
            offset_hi: kv.get_or("offset_hi", d.offset_hi)?,
            delay: kv.get_or("delay", d.delay)?,
            sigma: kv.get_or("sigma", d.sigma)?,
            rho: kv.get("rho")?,
            recurrence: kv.get_or("recurrence", d.recurrence)?,
            contexts: kv.get_or("contexts", d.contexts)?,
            seed: kv.get_or("seed", d.seed)?,
            template_seed: kv.get_or("template_seed", d.template_seed)?,
            amplitude: kv.get_or("amplitude", d.amplitude)?,
        })
    }

    pub fn to_spec(&self) -> Result<SynthSpec> {
        if self.classes == 0 || self.pattern_len == 0 {
            return Err(SpamsError::Config("classes and pattern_len must be positive".into()));
        }
        let spec = SynthSpec {
            per_class: self.per_class,
            steps: self.steps,
            dims: self.dims,
            templates: random_templates(self.classes, self.pattern_len, self.dims, self.amplitude, self.template_seed),
            offsets: OffsetDist::Uniform {
                lo: self.offset_lo,
                hi: self.offset_hi,
            },
            delay: self.delay,
            noise_sigma: self.sigma,
            noise: match self.rho {
                Some(rho) => NoiseModel::Ar1 { rho },
                None => NoiseModel::Iid,
            },
            recurrence: self.recurrence,
            num_contexts: self.contexts,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftExperiment {
    /// Data spec with `delay = 0`; `per_class` is overridden per split and
    /// `seed` is the base for every derived seed.
    pub data: SynthSpec,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub delays: Vec<usize>,
    pub window: WindowConfig,
    pub train: TrainConfig,
    /// Localization slack in windows.
    pub slack: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayResult {
    pub delay: usize,
    pub report: MetricReport,
    pub localization: f64,
    /// Mean positive-class detection confidence over positive test samples.
    pub mean_profile: Vec<f64>,
    /// 1-based window of the largest mean confidence.
    pub peak: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftRun {
    pub repeat: usize,
    pub variant: Variant,
    pub model: TrainedModel,
    pub per_delay: Vec<DelayResult>,
}

/// Seeds used for one repeat: (train data, validation data, test data, training).
pub fn repeat_seeds(base: u64, repeat: usize) -> (u64, u64, u64, u64) {
    let r = base.wrapping_add(1000 * repeat as u64);
    (r.wrapping_add(1), r.wrapping_add(2), r.wrapping_add(3), r.wrapping_add(4))
}

impl ShiftExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.delays.is_empty() {
            return Err(SpamsError::Config("at least one delay required".into()));
        }
        if self.train_per_class == 0 || self.val_per_class == 0 || self.test_per_class == 0 {
            return Err(SpamsError::Config("split sizes must be positive".into()));
        }
        for &d in &self.delays {
            SynthSpec {
                delay: d,
                per_class: self.train_per_class,
                ..self.data.clone()
            }
            .validate()?;
        }
        self.train.validate()
    }

    fn generate(&self, per_class: usize, delay: usize, seed: u64) -> Result<SyntheticSet> {
        generate_synthetic(&SynthSpec {
            per_class,
            delay,
            seed,
            ..self.data.clone()
        })
    }

    /// Training and validation sets for one repeat (delay 0).
    pub fn train_sets(&self, repeat: usize) -> Result<(LabeledDataset, LabeledDataset)> {
        let (s_train, s_val, _, _) = repeat_seeds(self.data.seed, repeat);
        Ok((
            self.generate(self.train_per_class, 0, s_train)?.dataset,
            self.generate(self.val_per_class, 0, s_val)?.dataset,
        ))
    }

    /// Test set for one repeat at the given delay. Noise and offsets are the
    /// same for every delay.
    pub fn test_set(&self, repeat: usize, delay: usize) -> Result<SyntheticSet> {
        let (_, _, s_test, _) = repeat_seeds(self.data.seed, repeat);
        self.generate(self.test_per_class, delay, s_test)
    }

    pub fn train_variant(&self, repeat: usize, variant: Variant) -> Result<TrainedModel> {
        let (train_ds, val_ds) = self.train_sets(repeat)?;
        let (_, _, _, s_fit) = repeat_seeds(self.data.seed, repeat);
        let cfg = TrainConfig {
            variant,
            seed: s_fit,
            ..self.train.clone()
        };
        train(&train_ds, &val_ds, self.window, &cfg)
    }

    pub fn evaluate(&self, model: &TrainedModel, repeat: usize) -> Result<Vec<DelayResult>> {
        self.delays
            .iter()
            .map(|&delay| evaluate_on(model, &self.test_set(repeat, delay)?, delay, self.slack))
            .collect()
    }

    pub fn run(&self, variants: &[Variant], repeats: usize) -> Result<Vec<ShiftRun>> {
        self.validate()?;
        let mut runs = Vec::new();
        for repeat in 0..repeats {
            for &variant in variants {
                let model = self.train_variant(repeat, variant)?;
                let per_delay = self.evaluate(&model, repeat)?;
                runs.push(ShiftRun {
                    repeat,
                    variant,
                    model,
                    per_delay,
                });
            }
        }
        Ok(runs)
    }
}

/// Metrics, localization and mean detection profile of a model on one
/// synthetic test set.
pub fn evaluate_on(model: &TrainedModel, set: &SyntheticSet, delay: usize, slack: usize) -> Result<DelayResult> {
    let ds = &set.dataset;
    let mut profiles: Vec<TemporalProfile> = Vec::with_capacity(ds.len());
    let mut posteriors = Vec::with_capacity(ds.len());
    let mut blocks = Vec::with_capacity(ds.len());
    for (seq, &y) in ds.sequences().iter().zip(ds.labels()) {
        let p = model.predict_detailed(seq)?;
        posteriors.push(p.result.posterior.clone());
        blocks.push(eval::true_class_block(&p.result, y));
        profiles.push(p.profile);
    }
    let report = eval::metric_report(&posteriors, ds.labels(), model.num_classes(), model.positive_class)?;
    let n_w = profiles[0].num_windows();
    let truth = eval::truth_intervals(ds, &set.truth)?;
    let localization = eval::localization_score(&blocks, &truth, &model.window, n_w, slack)?;
    let positives: Vec<&TemporalProfile> = profiles
        .iter()
        .zip(ds.labels())
        .filter(|(_, &y)| y == model.positive_class)
        .map(|(p, _)| p)
        .collect();
    let mean_profile = eval::mean_channel(&positives, model.positive_class)?;
    let peak = eval::peak_window(&mean_profile);
    Ok(DelayResult {
        delay,
        report,
        localization,
        mean_profile,
        peak,
    })
}
