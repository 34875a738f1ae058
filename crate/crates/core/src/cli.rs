//! The `spams` command line: synthesis, training, prediction, profiling,
//! evaluation, gradient checking and the delay-shift experiment.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::KvConfig;
use crate::data::{
    self, load_dataset_dir, partition_indices, read_ground_truth, save_dataset, windows, write_ground_truth,
    LabeledDataset, Standardizer, WindowConfig, GROUND_TRUTH_FILE,
};
use crate::encoder::{init_params, EncoderDims};
use crate::error::{Result, SpamsError};
use crate::eval;
use crate::experiment::{ShiftExperiment, SynthParams};
use crate::io_util;
use crate::mil::{self, AggregationConfig, RegularizerScope};
use crate::model_io::{load_model, save_model};
use crate::numerics::Rng;
use crate::training::{self, train, TrainConfig, TrainedModel, Variant};

#[derive(Debug, Parser)]
#[command(name = "spams", version, about = "Shifting-pattern sequence classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic shifting-pattern dataset with ground truth.
    Synth(SynthArgs),
    /// Train a model and write it with its per-epoch history.
    Train(TrainArgs),
    /// Write posteriors, block scores and block starts per sample.
    Predict(PredictArgs),
    /// Export temporal profiles and discriminative periods.
    Profile(ProfileArgs),
    /// Metrics, early-stage curve and (with ground truth) localization.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients at initialization.
    Gradcheck(GradcheckArgs),
    /// Train on undelayed synthetic data and evaluate on delayed copies.
    ExperimentShift(ShiftArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// Window 5, stride 1.
    CropLike,
    /// Stride a quarter of the window (window 8, stride 2).
    EegLike,
}

impl Preset {
    pub fn window(self) -> (usize, usize) {
        match self {
            Preset::CropLike => (5, 1),
            Preset::EegLike => (8, 2),
        }
    }

    /// Informational block lengths; training adapts them anyway.
    pub fn typical_lengths(self) -> [usize; 2] {
        match self {
            Preset::CropLike => [4, 5],
            Preset::EegLike => [8, 12],
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    All,
    Own,
}

/// Model and optimization settings shared by every subcommand that trains.
#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// key=value training config (eta, batch, max_epochs, lambda, percentile,
    /// variant, seed, hidden, window, stride, clip, patience, forget_bias).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Window/stride preset, applied before the config file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Model variant: spams, nc (no context), rnn, m1 (last window only).
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    /// Context regularizer weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Sliding-window width in time steps.
    #[arg(long)]
    pub window: Option<usize>,
    /// Sliding-window stride in time steps.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Hidden units H.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Seed for initialization, shuffling and the validation split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial forget-gate bias.
    #[arg(long, allow_hyphen_values = true)]
    pub forget_bias: Option<f64>,
    /// Profile channels the context regularizer acts on.
    #[arg(long, value_enum)]
    pub regularize: Option<ScopeArg>,
    /// Use the gradient without the 1/l_k factor in the argmax block.
    #[arg(long)]
    pub unscaled_block_gradient: bool,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::parse(s).map_err(|e| e.to_string())
}

impl FitArgs {
    /// Defaults, then preset, then config file, then flags.
    pub fn resolve(&self) -> Result<(TrainConfig, WindowConfig)> {
        let mut cfg = TrainConfig::default();
        let (mut w, mut s) = self.preset.map_or((5, 1), Preset::window);
        if let Some(path) = &self.config {
            let kv = KvConfig::load(path)?;
            let (cw, cs) = cfg.apply_kv(&kv)?;
            w = cw.unwrap_or(w);
            s = cs.unwrap_or(s);
        }
        if let Some(v) = self.window {
            w = v;
            if self.stride.is_none() && matches!(self.preset, Some(Preset::EegLike)) {
                s = (v / 4).max(1);
            }
        }
        if let Some(v) = self.stride {
            s = v;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.forget_bias {
            cfg.init.forget_bias = v;
        }
        if let Some(sc) = self.regularize {
            cfg.scope = match sc {
                ScopeArg::All => RegularizerScope::AllClasses,
                ScopeArg::Own => RegularizerScope::OwnLabel,
            };
        }
        cfg.unscaled_block_gradient |= self.unscaled_block_gradient;
        cfg.validate()?;
        Ok((cfg, WindowConfig::new(w, s)?))
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// key=value spec (classes, per_class, steps, dims, pattern_len, offset_lo,
    /// offset_hi, delay, sigma, rho, recurrence, contexts, seed, template_seed,
    /// amplitude). Missing keys take built-in defaults.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Overrides the seed given in the --spec file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data directory.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Validation data directory; without it 20% of the training data is held out.
    #[arg(long, value_name = "DIR")]
    pub val: Option<PathBuf>,
    /// Model file to write.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// History CSV (default: model path with `.history.csv` appended).
    #[arg(long, value_name = "PATH")]
    pub history: Option<PathBuf>,
    /// Z-score features with statistics of the training split.
    #[arg(long)]
    pub standardize: bool,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained model file.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Data directory (sequences.csv, labels.csv, optional contexts.csv).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Posterior CSV to write.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Trained model file.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Data directory (sequences.csv, labels.csv, optional contexts.csv).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Temporal profile CSV to write.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Optional CSV of argmax blocks mapped to time steps.
    #[arg(long, value_name = "PATH")]
    pub periods: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trained model file.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Data directory (sequences.csv, labels.csv, optional contexts.csv).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Output directory for metrics.csv, early_stage.csv and localization.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Localization slack in windows.
    #[arg(long, default_value_t = 2)]
    pub slack: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Data directory to draw samples from.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Number of samples to check.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Optional per-sample report CSV.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct ShiftArgs {
    /// Output directory for shift_metrics.csv and shift_profiles.csv.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Synthetic data spec (same keys as `synth`); delay is ignored.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    /// Comma-separated pattern delays for the test sets.
    #[arg(long, value_delimiter = ',', default_value = "0,8,16")]
    pub delays: Vec<usize>,
    /// Independent repetitions (fresh data and initialization).
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Comma-separated variants to compare.
    #[arg(long, value_parser = parse_variant, value_delimiter = ',', default_value = "spams,m1")]
    pub variants: Vec<Variant>,
    /// Training samples per class.
    #[arg(long, default_value_t = 200)]
    pub train_per_class: usize,
    /// Validation samples per class.
    #[arg(long, default_value_t = 100)]
    pub val_per_class: usize,
    /// Test samples per class, per delay.
    #[arg(long, default_value_t = 200)]
    pub test_per_class: usize,
    /// Localization slack in windows.
    #[arg(long, default_value_t = 2)]
    pub slack: usize,
    #[command(flatten)]
    pub fit: FitArgs,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code: 0 success, 1 usage error, 2 data or
/// validation error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Profile(a) => profile_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::ExperimentShift(a) => shift_cmd(a),
    }
}

fn synth_params(path: Option<&Path>) -> Result<SynthParams> {
    match path {
        Some(p) => SynthParams::from_kv(&KvConfig::load(p)?),
        None => Ok(SynthParams::default()),
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut params = synth_params(a.spec.as_deref())?;
    if let Some(s) = a.seed {
        params.seed = s;
    }
    let set = data::generate_synthetic(&params.to_spec()?)?;
    save_dataset(&set.dataset, &a.out)?;
    write_ground_truth(&a.out.join(GROUND_TRUTH_FILE), &set.truth)?;
    println!("wrote {} samples to {}", set.dataset.len(), a.out.display());
    Ok(())
}

fn fmt_f(v: f64) -> String {
    v.to_string()
}

fn history_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".history.csv");
    out.with_file_name(name)
}

pub fn write_history(path: &Path, model: &TrainedModel) -> Result<()> {
    let k = model.num_classes();
    let mut header: Vec<String> = ["epoch", "train_cost", "val_cost", "val_auc"].map(String::from).to_vec();
    header.extend((1..=k).map(|i| format!("l_{i}")));
    io_util::csv_write(
        path,
        &header,
        model.history.iter().map(|r| {
            let mut row = vec![r.epoch.to_string(), fmt_f(r.train_cost), fmt_f(r.val_cost), fmt_f(r.val_auc)];
            row.extend(r.lengths.iter().map(|l| l.to_string()));
            row
        }),
    )
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let (cfg, window) = a.fit.resolve()?;
    let full = load_dataset_dir(&a.data)?;
    let (mut train_ds, mut val_ds) = match &a.val {
        Some(dir) => (full, load_dataset_dir(dir)?),
        None => {
            let parts = partition_indices(&full, &[0.8, 0.2], cfg.seed)?;
            (full.subset(&parts[0]), full.subset(&parts[1]))
        }
    };
    let k = train_ds.num_classes().max(val_ds.num_classes());
    train_ds = train_ds.with_num_classes(k)?;
    val_ds = val_ds.with_num_classes(k)?;
    let standardizer = if a.standardize {
        let st = Standardizer::fit(&train_ds)?;
        train_ds = st.apply(&train_ds);
        val_ds = st.apply(&val_ds);
        Some(st)
    } else {
        None
    };
    let mut model = train(&train_ds, &val_ds, window, &cfg)?;
    model.standardizer = standardizer;
    save_model(&model, &a.out)?;
    write_history(&a.history.clone().unwrap_or_else(|| history_path(&a.out)), &model)?;
    let best = model.history.get(model.best_epoch.wrapping_sub(1));
    println!(
        "trained {} for {} epochs; best epoch {} (val cost {}); lengths {:?}",
        model.variant,
        model.history.len(),
        model.best_epoch,
        best.map_or("n/a".into(), |r| format!("{:.6}", r.val_cost)),
        model.aggregation.lengths
    );
    Ok(())
}

fn load_for_model(model: &TrainedModel, dir: &Path) -> Result<LabeledDataset> {
    let ds = load_dataset_dir(dir)?;
    if let Some((_, d)) = ds.shape() {
        if d != model.input_features() {
            return Err(SpamsError::dim("dataset features vs model", model.input_features(), d));
        }
    }
    Ok(ds)
}

fn predict_cmd(a: &PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = load_for_model(&model, &a.data)?;
    let k = model.num_classes();
    let mut header = vec!["sample_id".to_string(), "predicted".to_string()];
    header.extend((1..=k).map(|i| format!("p_{i}")));
    header.extend((1..=k).map(|i| format!("y_{i}")));
    header.extend((1..=k).map(|i| format!("t_star_{i}")));
    let rows = ds
        .ids()
        .iter()
        .zip(ds.sequences())
        .map(|(id, seq)| {
            let r = training::predict(&model, seq)?;
            let mut row = vec![id.clone(), r.predicted_class().to_string()];
            row.extend(r.posterior.iter().map(|&v| fmt_f(v)));
            row.extend(r.scores.iter().map(|&v| fmt_f(v)));
            row.extend(r.t_star.iter().map(|t| t.to_string()));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    io_util::csv_write(&a.out, &header, rows)
}

fn profile_cmd(a: &ProfileArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = load_for_model(&model, &a.data)?;
    let preds = ds
        .sequences()
        .iter()
        .map(|s| model.predict_detailed(s))
        .collect::<Result<Vec<_>>>()?;
    let k = model.num_classes();
    let rows = ds.ids().iter().zip(&preds).flat_map(|(id, p)| {
        (0..p.profile.num_windows()).flat_map(move |t| {
            (0..k).map(move |c| vec![id.clone(), (t + 1).to_string(), (c + 1).to_string(), fmt_f(p.profile.get(t, c))])
        })
    });
    io_util::csv_write(&a.out, &["sample_id", "window", "class", "p"].map(String::from), rows)?;
    if let Some(path) = &a.periods {
        let rows = ds.ids().iter().zip(&preds).flat_map(|(id, p)| {
            (0..k).map(|c| {
                let (t, l) = (p.result.t_star[c], p.result.lengths[c]);
                let (s0, s1) = eval::block_steps(&model.window, t, l);
                vec![id.clone(), (c + 1).to_string(), t.to_string(), l.to_string(), s0.to_string(), s1.to_string()]
            })
        });
        io_util::csv_write(
            path,
            &["sample_id", "class", "t_star", "length", "start_step", "end_step"].map(String::from),
            rows,
        )?;
    }
    Ok(())
}

fn report_row(r: &eval::MetricReport) -> Vec<String> {
    let mut row = vec![r.n.to_string(), fmt_f(r.auc), fmt_f(r.f1)];
    row.extend(r.precision.iter().map(|&v| fmt_f(v)));
    row.extend(r.recall.iter().map(|&v| fmt_f(v)));
    row
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = load_for_model(&model, &a.data)?.with_num_classes(model.num_classes())?;
    std::fs::create_dir_all(&a.out).map_err(|e| SpamsError::io(&a.out, e))?;
    let k = model.num_classes();
    let profiles = ds.sequences().iter().map(|s| model.profile(s)).collect::<Result<Vec<_>>>()?;
    let curve = eval::early_stage_curve_from_profiles(&model, &profiles, ds.labels())?;
    let full = curve.points.last().expect("at least one window").clone();

    let mut header = ["n", "auc", "f1"].map(String::from).to_vec();
    header.extend((1..=k).map(|i| format!("precision_{i}")));
    header.extend((1..=k).map(|i| format!("recall_{i}")));
    io_util::csv_write(&a.out.join("metrics.csv"), &header, [report_row(&full)])?;
    io_util::csv_write(
        &a.out.join("early_stage.csv"),
        &["t", "auc", "f1"].map(String::from),
        curve.points.iter().enumerate().map(|(i, r)| vec![(i + 1).to_string(), fmt_f(r.auc), fmt_f(r.f1)]),
    )?;

    let gt = a.data.join(GROUND_TRUTH_FILE);
    if gt.exists() {
        let truth = eval::truth_intervals(&ds, &read_ground_truth(&gt)?)?;
        let blocks = profiles
            .iter()
            .zip(ds.labels())
            .map(|(p, &y)| model.aggregate(p, p.num_windows()).map(|r| eval::true_class_block(&r, y)))
            .collect::<Result<Vec<_>>>()?;
        let score = eval::localization_score(&blocks, &truth, &model.window, profiles[0].num_windows(), a.slack)?;
        io_util::csv_write(
            &a.out.join("localization.csv"),
            &["slack", "score"].map(String::from),
            [vec![a.slack.to_string(), fmt_f(score)]],
        )?;
        println!("auc {:.4} f1 {:.4} localization {:.4}", full.auc, full.f1, score);
    } else {
        println!("auc {:.4} f1 {:.4}", full.auc, full.f1);
    }
    Ok(())
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Result<()> {
    let (cfg, window) = a.fit.resolve()?;
    let ds = load_dataset_dir(&a.data)?;
    let (steps, dims) = ds.shape().ok_or(SpamsError::EmptyInput("gradcheck data"))?;
    window.validate_for(steps)?;
    let n_w = window.count(steps);
    let k = ds.num_classes();
    let enc = init_params(
        cfg.variant.encoder_kind(),
        EncoderDims {
            input_dim: window.input_dim(dims),
            hidden: cfg.hidden,
            classes: k,
        },
        cfg.init,
        cfg.seed,
    )?;
    let inputs = ds.sequences().iter().map(|s| windows(s, &window)).collect::<Result<Vec<_>>>()?;
    let profiles = inputs.iter().map(|x| Ok(enc.forward(x)?.profile())).collect::<Result<Vec<_>>>()?;
    let table = mil::update_context_table(&profiles, ds.labels(), ds.contexts(), k, ds.num_contexts())?;
    let agg = AggregationConfig::initial(k, n_w, cfg.percentile);
    let objective = cfg.objective();

    let mut order: Vec<usize> = (0..ds.len()).collect();
    Rng::new(cfg.seed).shuffle(&mut order);
    let mut rows = Vec::new();
    let mut failed = 0;
    for &i in order.iter().take(a.samples) {
        let r = training::grad_check(&enc, cfg.variant, &inputs[i], ds.labels()[i], table.entry(ds.contexts()[i]), &agg, &objective)?;
        let status = match (&r.skipped, r.max_rel_error < a.tolerance) {
            (Some(_), _) => "skipped",
            (None, true) => "ok",
            (None, false) => {
                failed += 1;
                "FAILED"
            }
        };
        println!(
            "{} {status} max_rel_error={:e} worst={} {}",
            ds.ids()[i],
            r.max_rel_error,
            r.worst_param,
            r.skipped.as_deref().unwrap_or("")
        );
        rows.push(vec![ds.ids()[i].clone(), status.to_string(), fmt_f(r.max_rel_error), r.worst_param]);
    }
    if let Some(path) = &a.out {
        io_util::csv_write(path, &["sample_id", "status", "max_rel_error", "worst_param"].map(String::from), rows)?;
    }
    let _ = std::io::stdout().flush();
    if failed > 0 {
        return Err(SpamsError::Metric(format!("{failed} sample(s) exceed tolerance {:e}", a.tolerance)));
    }
    Ok(())
}

fn shift_cmd(a: &ShiftArgs) -> Result<()> {
    let (cfg, window) = a.fit.resolve()?;
    if a.repeats == 0 {
        return Err(SpamsError::Config("--repeats must be >= 1".into()));
    }
    let mut params = synth_params(a.spec.as_deref())?;
    params.delay = 0;
    params.per_class = a.train_per_class;
    let exp = ShiftExperiment {
        data: params.to_spec()?,
        train_per_class: a.train_per_class,
        val_per_class: a.val_per_class,
        test_per_class: a.test_per_class,
        delays: a.delays.clone(),
        window,
        train: cfg,
        slack: a.slack,
    };
    exp.validate()?;
    std::fs::create_dir_all(&a.out).map_err(|e| SpamsError::io(&a.out, e))?;

    let mut metric_rows = Vec::new();
    // (variant, delay) -> summed mean profile
    let mut profile_sums: Vec<(Variant, usize, Vec<f64>)> = Vec::new();
    for repeat in 0..a.repeats {
        for &variant in &a.variants {
            let model = exp.train_variant(repeat, variant)?;
            for d in exp.evaluate(&model, repeat)? {
                println!(
                    "repeat {} {variant} delay {}: auc {:.4} f1 {:.4} localization {:.4} peak {}",
                    repeat + 1,
                    d.delay,
                    d.report.auc,
                    d.report.f1,
                    d.localization,
                    d.peak
                );
                metric_rows.push(vec![
                    (repeat + 1).to_string(),
                    variant.name().to_string(),
                    d.delay.to_string(),
                    fmt_f(d.report.auc),
                    fmt_f(d.report.f1),
                    fmt_f(d.localization),
                    d.peak.to_string(),
                ]);
                match profile_sums.iter_mut().find(|(v, dl, _)| *v == variant && *dl == d.delay) {
                    Some((_, _, sum)) => sum.iter_mut().zip(&d.mean_profile).for_each(|(s, x)| *s += x),
                    None => profile_sums.push((variant, d.delay, d.mean_profile.clone())),
                }
            }
        }
    }
    io_util::csv_write(
        &a.out.join("shift_metrics.csv"),
        &["repeat", "variant", "delay", "auc", "f1", "localization", "peak_window"].map(String::from),
        metric_rows,
    )?;
    let n = a.repeats as f64;
    let rows = profile_sums.iter().flat_map(|(v, d, sum)| {
        sum.iter()
            .enumerate()
            .map(move |(t, s)| vec![v.name().to_string(), d.to_string(), (t + 1).to_string(), fmt_f(s / n)])
    });
    io_util::csv_write(
        &a.out.join("shift_profiles.csv"),
        &["variant", "delay", "window", "mean_p"].map(String::from),
        rows,
    )
}
