//! Command-line surface.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use normseq_core::corpus::{corpus_stats, split_corpus, CorpusSplit, Dialog, Split};
use normseq_core::eval::{evaluate, MetricsReport};
use normseq_core::features::{
    build_feature_space, FeatureSpace, Lexicon, Template, ValueMode, DEFAULT_RARE_THRESHOLD,
};
use normseq_core::models::{
    describe_gradcheck, predict_dialog, tiny_gradcheck, train_model, EpochRecord, ModelConfig,
    ModelKind, TrainConfig, GRADCHECK_TOLERANCE,
};
use normseq_core::synth::{generate, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::io::{
    load_corpus, load_feature_space, load_lexicon, load_splits, read_json, save_corpus,
    save_feature_space, save_lexicon, save_splits, write_json, write_with, IoError,
    PredictionRecord,
};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const FEATURE_SPACE_FILE: &str = "feature_space.json";
pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Parser)]
#[command(
    name = "normseq",
    version,
    about = "Detect social norm violations in dialog transcripts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus file and report every invalid record.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Build the feature space on the train split and write it as JSON.
    BuildFeatures(BuildFeaturesArgs),
    /// Train a model; writes a checkpoint, a JSONL training log and the feature space.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a corpus.
    Evaluate(EvaluateArgs),
    /// Write per-clause violation probabilities as JSONL.
    Predict(PredictArgs),
    /// Generate a planted-rule synthetic corpus.
    Synth(SynthArgs),
    /// Finite-difference gradient check of each architecture at a tiny size.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// JSON mapping category name to word patterns (a trailing `*` matches prefixes).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// JSON mapping session id to train/cv/test; without it every session is training data.
    #[arg(long)]
    pub splits: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildFeaturesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Minimum training-set count for a feature to be kept.
    #[arg(long, default_value_t = DEFAULT_RARE_THRESHOLD)]
    pub threshold: u32,
    /// Use 0/1 presence values instead of counts.
    #[arg(long)]
    pub binary: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub unroll: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threshold: Option<u32>,
    /// Reuse a feature space written by `build-features` instead of rebuilding it.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long, default_value_t = Split::Test)]
    pub split: Split,
    /// Feature space to check against the checkpoint's.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// JSONL path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON generator configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sessions: Option<usize>,
    #[arg(long)]
    pub clauses: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub positive_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Architecture to check; all four when absent.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds to check.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Perturb the analytic gradient to exercise the failure path.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

/// Resolved training configuration, as read from `--config` and written
/// next to the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub rare_threshold: u32,
    pub value_mode: ValueMode,
    pub model_config: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Global1,
            rare_threshold: DEFAULT_RARE_THRESHOLD,
            value_mode: ValueMode::Count,
            model_config: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> normseq_core::Result<()> {
        self.train.validate()?;
        self.model_config.global.validate()?;
        self.model_config.local.validate()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub model: ModelKind,
    pub seed: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub cv_precision: Option<f64>,
    pub cv_recall: Option<f64>,
    pub cv_f1: Option<f64>,
    pub best: bool,
}

impl LogLine {
    fn new(model: ModelKind, seed: u64, r: &EpochRecord) -> Self {
        LogLine {
            model,
            seed,
            epoch: r.epoch,
            train_loss: r.train_loss,
            cv_precision: r.cv.map(|p| p.precision),
            cv_recall: r.cv.map(|p| p.recall),
            cv_f1: r.cv.map(|p| p.f1),
            best: r.best,
        }
    }
}

/// A failed command with its exit status: 1 for invalid input or
/// configuration, 2 for failures while running.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Read { .. } | IoError::Write { .. } => Failure::runtime(e),
            _ => Failure::invalid(e),
        }
    }
}

fn core_failure(e: normseq_core::Error) -> Failure {
    use normseq_core::Error as E;
    match e {
        E::NonFinite(_) | E::NonFiniteGradient(_) => Failure::runtime(e),
        _ => Failure::invalid(e),
    }
}

pub type CmdResult = Result<(), Failure>;

/// Parses `args` and runs the command, writing human-readable output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> CmdResult {
    match command {
        Command::Validate { corpus } => cmd_validate(&corpus, out),
        Command::BuildFeatures(a) => cmd_build_features(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
    }
}

fn emit(out: &mut dyn Write, line: impl std::fmt::Display) -> CmdResult {
    writeln!(out, "{line}").map_err(Failure::runtime)
}

fn require(path: &Path, what: &str) -> CmdResult {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::invalid(anyhow!(
            "{what} `{}` does not exist",
            path.display()
        )))
    }
}

pub fn cmd_validate(corpus: &Path, out: &mut dyn Write) -> CmdResult {
    require(corpus, "corpus")?;
    match load_corpus(corpus) {
        Ok(dialogs) => {
            let clauses: usize = dialogs.iter().map(Dialog::len).sum();
            let positives: usize = dialogs
                .iter()
                .flat_map(|d| d.labels())
                .filter(|&l| l)
                .count();
            emit(
                out,
                format_args!(
                    "ok: {} dialogs, {clauses} clauses, {positives} violations",
                    dialogs.len()
                ),
            )
        }
        Err(IoError::InvalidCorpus { diagnostics, .. }) => {
            for d in &diagnostics {
                emit(out, d)?;
            }
            Err(Failure::invalid(anyhow!(
                "{} invalid record(s) in `{}`",
                diagnostics.len(),
                corpus.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

struct Data {
    split: CorpusSplit,
    lexicon: Lexicon,
}

fn load_data(args: &DataArgs) -> Result<Data, Failure> {
    require(&args.corpus, "corpus")?;
    if let Some(p) = &args.lexicon {
        require(p, "lexicon")?;
    }
    if let Some(p) = &args.splits {
        require(p, "splits file")?;
    }
    let dialogs = load_corpus(&args.corpus)?;
    let lexicon = match &args.lexicon {
        Some(p) => load_lexicon(p)?,
        None => Lexicon::default(),
    };
    let split = assign(dialogs, args.splits.as_deref(), Split::Train)?;
    Ok(Data { split, lexicon })
}

/// Splits by the assignment file, or places every dialog in `fallback`.
fn assign(
    dialogs: Vec<Dialog>,
    splits: Option<&Path>,
    fallback: Split,
) -> Result<CorpusSplit, Failure> {
    let assignment: BTreeMap<String, Split> = match splits {
        Some(p) => load_splits(p)?,
        None => dialogs
            .iter()
            .map(|d| (d.session_id.clone(), fallback))
            .collect(),
    };
    split_corpus(dialogs, &assignment).map_err(core_failure)
}

pub fn cmd_build_features(args: &BuildFeaturesArgs, out: &mut dyn Write) -> CmdResult {
    let data = load_data(&args.data)?;
    let mode = if args.binary {
        ValueMode::Binary
    } else {
        ValueMode::Count
    };
    let space = build_feature_space(&data.split.train, &data.lexicon, args.threshold, mode)
        .map_err(core_failure)?;
    save_feature_space(&space, &args.out)?;
    print_space(&space, out)
}

fn print_space(space: &FeatureSpace, out: &mut dyn Write) -> CmdResult {
    emit(out, format_args!("dim {}", space.dim()))?;
    let counts = space.template_counts();
    for t in Template::ALL {
        emit(
            out,
            format_args!(
                "  {:<17} {}",
                t.as_str(),
                counts.get(&t).copied().unwrap_or(0)
            ),
        )?;
    }
    Ok(())
}

pub fn resolve_run_config(args: &TrainArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => {
            require(p, "config")?;
            read_json::<RunConfig>(p)?
        }
        None => RunConfig::default(),
    };
    if let Some(m) = args.model {
        cfg.model = m;
    }
    if let Some(u) = args.unroll {
        cfg.train.unroll = u;
    }
    if let Some(d) = args.dropout {
        cfg.model_config.global.dropout = d;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.train.optimizer.lr = lr;
    }
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(t) = args.threshold {
        cfg.rare_threshold = t;
    }
    cfg.model_config.global.layers = if cfg.model == ModelKind::Global2 {
        2
    } else {
        1
    };
    cfg.validate().map_err(core_failure)?;
    Ok(cfg)
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve_run_config(args)?;
    if let Some(p) = &args.space {
        require(p, "feature space")?;
    }
    let data = load_data(&args.data)?;
    let space = match &args.space {
        Some(p) => load_feature_space(p)?,
        None => build_feature_space(
            &data.split.train,
            &data.lexicon,
            cfg.rare_threshold,
            cfg.value_mode,
        )
        .map_err(core_failure)?,
    };
    let stats = corpus_stats(&data.split);
    emit(
        out,
        format_args!(
            "training {} on {} sessions ({} clauses), feature dim {}, seed {}",
            cfg.model,
            stats.train.sessions,
            stats.train.clauses,
            space.dim(),
            cfg.train.seed
        ),
    )?;
    let (classifier, history) = train_model(
        cfg.model,
        &cfg.model_config,
        &data.split,
        &space,
        &data.lexicon,
        &cfg.train,
    )
    .map_err(core_failure)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create `{}`", args.out.display()))
        .map_err(Failure::runtime)?;
    write_with(&args.out.join(TRAIN_LOG_FILE), |w| {
        for r in &history {
            serde_json::to_writer(&mut *w, &LogLine::new(cfg.model, cfg.train.seed, r))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    save_feature_space(&space, &args.out.join(FEATURE_SPACE_FILE))?;
    write_json(&args.out.join(RUN_CONFIG_FILE), &cfg)?;
    let checkpoint = Checkpoint {
        classifier,
        space,
        lexicon: data.lexicon,
        model_config: cfg.model_config,
        train_config: cfg.train.clone(),
        history,
    };
    let path = args.out.join(CHECKPOINT_FILE);
    save_checkpoint(&checkpoint, &path).map_err(Failure::runtime)?;
    if let Some(best) = checkpoint.history.iter().find(|r| r.best) {
        emit(
            out,
            format_args!(
                "kept epoch {} (train loss {:.5}{})",
                best.epoch,
                best.train_loss,
                best.cv
                    .map(|p| format!(", cv f1 {:.4}", p.f1))
                    .unwrap_or_default()
            ),
        )?;
    }
    emit(out, format_args!("wrote {}", path.display()))
}

fn open_checkpoint(
    path: &Path,
    space: Option<&Path>,
) -> Result<(Checkpoint, FeatureSpace), Failure> {
    require(path, "checkpoint")?;
    let ckpt = load_checkpoint(path).map_err(Failure::runtime)?;
    let space = match space {
        Some(p) => {
            require(p, "feature space")?;
            load_feature_space(p)?
        }
        None => ckpt.space.clone(),
    };
    Ok((ckpt, space))
}

pub fn evaluate_report(args: &EvaluateArgs) -> Result<MetricsReport, Failure> {
    let (ckpt, space) = open_checkpoint(&args.checkpoint, args.space.as_deref())?;
    require(&args.corpus, "corpus")?;
    if let Some(p) = &args.splits {
        require(p, "splits file")?;
    }
    let dialogs = load_corpus(&args.corpus)?;
    let split = assign(dialogs, args.splits.as_deref(), args.split)?;
    evaluate(
        &ckpt.classifier,
        args.split,
        split.get(args.split),
        &space,
        &ckpt.lexicon,
        Some(ckpt.train_config.seed),
    )
    .map_err(core_failure)
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> CmdResult {
    let report = evaluate_report(args)?;
    match &args.out {
        Some(p) => {
            write_json(p, &report)?;
            emit(
                out,
                format_args!(
                    "{} on {}: P={:.4} R={:.4} F1={:.4}",
                    report.model, report.split, report.precision, report.recall, report.f1
                ),
            )
        }
        None => emit(
            out,
            serde_json::to_string_pretty(&report).map_err(Failure::runtime)?,
        ),
    }
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> CmdResult {
    let (ckpt, space) = open_checkpoint(&args.checkpoint, args.space.as_deref())?;
    require(&args.corpus, "corpus")?;
    let dialogs = load_corpus(&args.corpus)?;
    let mut records = Vec::new();
    for d in &dialogs {
        let preds =
            predict_dialog(&ckpt.classifier, d, &space, &ckpt.lexicon).map_err(core_failure)?;
        records.extend(
            preds
                .into_iter()
                .enumerate()
                .map(|(i, p)| PredictionRecord {
                    session: d.session_id.clone(),
                    index: i as u64,
                    p_violation: p.probability,
                    label: p.label as u8,
                }),
        );
    }
    let write_all = |w: &mut dyn Write| -> std::io::Result<()> {
        for r in &records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    };
    match &args.out {
        Some(p) => {
            write_with(p, |w| write_all(w))?;
            emit(
                out,
                format_args!("wrote {} predictions to {}", records.len(), p.display()),
            )
        }
        None => write_all(out).map_err(Failure::runtime),
    }
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> CmdResult {
    let mut cfg = match &args.config {
        Some(p) => {
            require(p, "config")?;
            read_json::<SynthConfig>(p)?
        }
        None => SynthConfig::default(),
    };
    if let Some(n) = args.sessions {
        cfg.sessions = n;
        if args.config.is_none() {
            cfg.splits = proportional_splits(n);
        }
    }
    if let Some(n) = args.clauses {
        cfg.clauses_per_session = n;
    }
    if let Some(d) = args.depth {
        cfg.depth = d;
    }
    if let Some(r) = args.positive_rate {
        cfg.positive_rate = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let corpus = generate(&cfg).map_err(core_failure)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create `{}`", args.out.display()))
        .map_err(Failure::runtime)?;
    save_corpus(&corpus.dialogs, &args.out.join("corpus.jsonl"))?;
    save_splits(&corpus.assignment, &args.out.join("splits.json"))?;
    let lexicon = Lexicon::new(corpus.rule.lexicon()).map_err(core_failure)?;
    save_lexicon(&lexicon, &args.out.join("lexicon.json"))?;
    write_json(&args.out.join("rule.json"), &corpus.rule)?;
    write_json(&args.out.join("synth_config.json"), &cfg)?;
    let clauses: usize = corpus.dialogs.iter().map(Dialog::len).sum();
    let positives: usize = corpus
        .dialogs
        .iter()
        .flat_map(|d| d.labels())
        .filter(|&l| l)
        .count();
    emit(
        out,
        format_args!(
            "wrote {} sessions, {clauses} clauses ({:.3} violations, seed {}) to {}",
            corpus.dialogs.len(),
            positives as f64 / clauses as f64,
            cfg.seed,
            args.out.display()
        ),
    )?;
    emit(out, &corpus.rule.rule)
}

/// 80/10/10 session split with any remainder in train.
fn proportional_splits(sessions: usize) -> normseq_core::synth::SplitSizes {
    let cv = sessions / 10;
    normseq_core::synth::SplitSizes {
        train: sessions - 2 * cv,
        cv,
        test: cv,
    }
}

pub fn cmd_gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> CmdResult {
    let kinds: Vec<ModelKind> = match args.model {
        Some(k) => vec![k],
        None => ModelKind::ALL.to_vec(),
    };
    if args.seeds == 0 {
        return Err(Failure::invalid(anyhow!("--seeds must be at least 1")));
    }
    let mut worst = 0.0f64;
    for kind in kinds {
        for seed in args.seed..args.seed + args.seeds {
            let report = tiny_gradcheck(kind, seed, args.corrupt).map_err(Failure::runtime)?;
            worst = worst.max(report.max_relative_error);
            emit(out, describe_gradcheck(kind, seed, &report))?;
        }
    }
    if worst < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(Failure::invalid(anyhow!(
            "gradient check failed: max relative error {worst:e} >= {GRADCHECK_TOLERANCE:e}"
        )))
    }
}
