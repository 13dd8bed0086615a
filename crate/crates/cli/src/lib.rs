//! The `pdgsim` command line: PDG export, corpus generation, training,
//! evaluation, pairwise detection, attention export and a gradient self-check.

pub mod attn;
pub mod config;
pub mod gradcheck;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use pdgsim::datagen::{builtin_corpus, builtin_groups, generate_dataset, load_seed_groups, seeded_rng, Corpus};
use pdgsim::dataflow::{build_pdg, Pdg};
use pdgsim::frontend::compile;
use pdgsim::graph::serialize_pdg;
use pdgsim::model::{GraphInput, Model, PoolMode, Variant};
use pdgsim::training::{evaluate, roc_curve, score_pairs, train, EvalReport, PairIndex, PairSet};

pub use config::CliConfig;

pub const SEED_ENV: &str = "PDGSIM_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Usage(_) | CliError::Input(_) => 2,
        }
    }
}

fn input_err(e: impl ToString) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "pdgsim", version, about = "Functional code clone detection on program dependence graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the PDG of a source file and print it as canonical JSON.
    Pdg {
        file: PathBuf,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a Graphviz rendering (solid = control, dashed = data).
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Generate a labeled pair corpus from seed programs.
    DatasetGen {
        /// Directory with one subdirectory of `.src` variants per functionality
        /// group; the built-in seeds when omitted.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model on a corpus directory (or `builtin`).
    Train(TrainArgs),
    /// Score a corpus split with a trained model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long, value_enum, default_value = "test")]
        split: EvalSplit,
        /// Write the ROC curve as CSV (threshold,tpr,fpr).
        #[arg(long)]
        roc: Option<PathBuf>,
    },
    /// Score two source files and report the verdict at the model's threshold.
    Detect {
        #[arg(long)]
        model: PathBuf,
        a: PathBuf,
        b: PathBuf,
    },
    /// Export per-edge attention of a trained model on one source file.
    Attn {
        #[arg(long)]
        model: PathBuf,
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true, default_value_t = 1.0)]
        fault_scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalSplit {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory, or `builtin` for the built-in 40-pair corpus.
    #[arg(long)]
    pub data: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub no_lstm: bool,
    #[arg(long)]
    pub no_jk: bool,
    #[arg(long)]
    pub pool: Option<PoolMode>,
    #[arg(long)]
    pub heads1: Option<usize>,
    #[arg(long)]
    pub heads2: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Train and validate on every pair of the corpus, ignoring its split.
    #[arg(long)]
    pub fit_all: bool,
    /// Per-epoch CSV (epoch,loss,val_f1).
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Final metrics as JSON.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Pdg { file, out, dot } => cmd_pdg(&file, out.as_deref(), dot.as_deref()),
        Command::DatasetGen { seeds, out, pairs, seed } => cmd_dataset_gen(seeds.as_deref(), &out, pairs, seed),
        Command::Train(args) => cmd_train(&args).map(|_| ()),
        Command::Eval { model, data, split, roc } => cmd_eval(&model, &data, split, roc.as_deref()).map(|_| ()),
        Command::Detect { model, a, b } => cmd_detect(&model, &a, &b).map(|_| ()),
        Command::Attn { model, file, out } => cmd_attn(&model, &file, out.as_deref()),
        Command::Gradcheck { seed, fault_scale } => cmd_gradcheck(seed, fault_scale),
    }
}

/// The seed from `PDGSIM_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    Ok(match flag {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pdg_of_file(path: &Path) -> Result<(String, Pdg), CliError> {
    let src = read_text(path)?;
    let ir = compile(&src).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let pdg = build_pdg(&ir).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((ir.name, pdg))
}

fn graph_of_file(path: &Path) -> Result<(Pdg, GraphInput), CliError> {
    let (_, pdg) = pdg_of_file(path)?;
    let g = GraphInput::from_pdg(&pdg).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((pdg, g))
}

pub fn cmd_pdg(file: &Path, out: Option<&Path>, dot: Option<&Path>) -> Result<(), CliError> {
    let (name, pdg) = pdg_of_file(file)?;
    let mut json = serialize_pdg(&pdg);
    if !json.ends_with('\n') {
        json.push('\n');
    }
    emit(out, &json)?;
    if let Some(d) = dot {
        write_text(d, &pdg.to_dot(&name))?;
    }
    Ok(())
}

pub fn cmd_dataset_gen(seeds: Option<&Path>, out: &Path, pairs: usize, seed: Option<u64>) -> Result<(), CliError> {
    let seed = resolve_seed(seed)?;
    let groups = match seeds {
        Some(dir) => load_seed_groups(dir).map_err(input_err)?,
        None => builtin_groups(),
    };
    log::info!(
        "dataset-gen: seeds={} groups={} pairs={pairs} seed={seed} out={}",
        seeds.map_or("builtin".to_string(), |p| p.display().to_string()),
        groups.len(),
        out.display()
    );
    let generated = generate_dataset(&groups, pairs, &mut seeded_rng(seed)).map_err(input_err)?;
    let corpus = Corpus::from_pairs(generated, seed);
    corpus.write(out).map_err(input_err)?;
    let clones = corpus.entries.iter().filter(|e| e.pair.label == 1).count();
    println!("wrote {} pairs ({clones} clones) to {}", corpus.len(), out.display());
    Ok(())
}

pub fn load_corpus(data: &str) -> Result<Corpus, CliError> {
    if data == "builtin" {
        Ok(builtin_corpus())
    } else {
        Corpus::read(Path::new(data)).map_err(input_err)
    }
}

fn pair_set(corpus: &Corpus) -> Result<PairSet, CliError> {
    corpus.pair_set().map_err(input_err)
}

/// Settings in increasing priority: defaults, `PDGSIM_SEED`, config file, flags.
pub fn resolve_train_config(args: &TrainArgs) -> Result<CliConfig, CliError> {
    let mut cfg = CliConfig::default();
    if let Some(s) = env_seed()? {
        cfg.train.seed = s;
    }
    if let Some(path) = &args.config {
        cfg.apply_file(&read_text(path)?)?;
    }
    let m = &mut cfg.model;
    if let Some(v) = args.variant {
        m.variant = v;
    }
    m.no_lstm |= args.no_lstm;
    m.no_jk |= args.no_jk;
    if let Some(p) = args.pool {
        m.pool = p;
    }
    if let Some(h) = args.heads1 {
        m.heads1 = h;
    }
    if let Some(h) = args.heads2 {
        m.heads2 = h;
    }
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub threshold: f64,
    pub val: EvalReport,
    pub test: Option<EvalReport>,
}

fn labels(pairs: &[PairIndex]) -> Vec<f64> {
    pairs.iter().map(|p| p.label).collect()
}

fn report_line(name: &str, r: &EvalReport) -> String {
    let auc = r.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
    format!(
        "{name}: precision={:.4} recall={:.4} f1={:.4} auc={auc}",
        r.precision, r.recall, r.f1
    )
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainReport, CliError> {
    let cfg = resolve_train_config(args)?;
    log::info!(
        "train: data={} out={} fit_all={}\n{}",
        args.data,
        args.out.display(),
        args.fit_all,
        cfg.render()
    );
    let corpus = load_corpus(&args.data)?;
    let mut set = pair_set(&corpus)?;
    if args.fit_all {
        let all: Vec<PairIndex> = set.train.iter().chain(&set.val).chain(&set.test).copied().collect();
        set.train = all.clone();
        set.val = all;
        set.test.clear();
    }
    let outcome = train(&set, cfg.model.clone(), &cfg.train, |r| {
        log::debug!("epoch {} loss {:.6} val_f1 {:.4}", r.epoch, r.loss, r.val_f1)
    })
    .map_err(input_err)?;
    write_text(&args.out, &outcome.model.to_json())?;
    if let Some(path) = &args.history {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for r in &outcome.history {
            w.serialize(r).map_err(input_err)?;
        }
        w.flush().map_err(input_err)?;
    }
    let threshold = outcome.model.threshold;
    let val = evaluate(&outcome.val_scores, &labels(&set.val), threshold).map_err(input_err)?;
    let test = if set.test.is_empty() {
        None
    } else {
        let s = score_pairs(&outcome.model, &set.graphs, &set.test).map_err(input_err)?;
        Some(evaluate(&s, &labels(&set.test), threshold).map_err(input_err)?)
    };
    let report = TrainReport {
        epochs: outcome.history.len(),
        threshold,
        val,
        test,
    };
    let mut line = format!("epochs={} threshold={threshold} | {}", report.epochs, report_line("val", &report.val));
    if let Some(t) = &report.test {
        line.push_str(" | ");
        line.push_str(&report_line("test", t));
    }
    println!("{line}");
    if let Some(path) = &args.metrics {
        write_text(path, &(serde_json::to_string_pretty(&report).map_err(input_err)? + "\n"))?;
    }
    Ok(report)
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    Model::from_json(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn cmd_eval(model: &Path, data: &str, split: EvalSplit, roc: Option<&Path>) -> Result<EvalReport, CliError> {
    let model = load_model(model)?;
    log::info!("eval: data={data} split={split:?} threshold={}", model.threshold);
    let corpus = load_corpus(data)?;
    let set = pair_set(&corpus)?;
    let pairs: Vec<PairIndex> = match split {
        EvalSplit::Train => set.train.clone(),
        EvalSplit::Val => set.val.clone(),
        EvalSplit::Test => set.test.clone(),
        EvalSplit::All => set.train.iter().chain(&set.val).chain(&set.test).copied().collect(),
    };
    if pairs.is_empty() {
        return Err(CliError::Input(format!("split {split:?} has no pairs")));
    }
    let scores = score_pairs(&model, &set.graphs, &pairs).map_err(input_err)?;
    let y = labels(&pairs);
    let report = evaluate(&scores, &y, model.threshold).map_err(input_err)?;
    if let Some(path) = roc {
        let curve = roc_curve(&scores, &y).map_err(input_err)?;
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for p in curve {
            w.serialize(p).map_err(input_err)?;
        }
        w.flush().map_err(input_err)?;
    }
    println!("{}", report_line("eval", &report));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub score: f64,
    pub threshold: f64,
    pub clone: bool,
}

pub fn cmd_detect(model: &Path, a: &Path, b: &Path) -> Result<Detection, CliError> {
    let model = load_model(model)?;
    let (_, ga) = graph_of_file(a)?;
    let (_, gb) = graph_of_file(b)?;
    let score = model.score(&ga, &gb).map_err(input_err)?;
    let d = Detection {
        score,
        threshold: model.threshold,
        clone: model.is_clone(score),
    };
    let verdict = if d.clone { "clone" } else { "non-clone" };
    println!("score={score:.9} threshold={} verdict={verdict}", d.threshold);
    Ok(d)
}

pub fn cmd_attn(model: &Path, file: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let model = load_model(model)?;
    let (pdg, g) = graph_of_file(file)?;
    let trace = model.attention(&g).map_err(input_err)?;
    let export = attn::export(&pdg, &trace);
    let json = serde_json::to_string_pretty(&export).map_err(input_err)? + "\n";
    emit(out, &json)
}

pub fn cmd_gradcheck(seed: Option<u64>, fault_scale: f64) -> Result<(), CliError> {
    let seed = resolve_seed(seed)?;
    log::info!("gradcheck: seed={seed} step=1e-4 tolerance={}", gradcheck::TOLERANCE);
    let lines = gradcheck::run(seed, fault_scale).map_err(input_err)?;
    let mut failed = Vec::new();
    for l in &lines {
        println!(
            "{:<18} max_rel_error={:.6e} entries={} kinks_skipped={}",
            l.name, l.report.max_rel_error, l.report.checked, l.report.kinks_skipped
        );
        if !l.passed() {
            failed.push(l.name.clone());
        }
    }
    if failed.is_empty() {
        println!("gradcheck passed");
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("gradcheck failed for {}", failed.join(", "))))
    }
}
