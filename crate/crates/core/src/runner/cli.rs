//! `infosieve` command line.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{
    ablate, evaluate, extract_tree, leave_one_out_rows, load_data, parse_row, train, Checkpoint,
    DataSource, EvalSpace, RunConfig, RunError,
};
use crate::datagen::{gen_hier_dataset, load_embedding_file, write_embedding_file, HierParams};
use crate::treelab::{oracle_optimal_encoding, DEFAULT_MAX_N};

pub const THREADS_ENV: &str = "INFOSIEVE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "infosieve", version, about = "Binary category codes for category discovery")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a hierarchical synthetic dataset as an embedding file.
    Gen(GenArgs),
    /// Train a model and write metrics, checkpoint and summary.
    Train(TrainArgs),
    /// Evaluate a checkpoint with semi-supervised k-means.
    Eval(EvalArgs),
    /// Rerun training with loss terms switched off.
    Ablate(AblateArgs),
    /// Extract the category tree a checkpoint encodes.
    Tree(TreeArgs),
    /// Exhaustive minimum-length valid encoding of a small label list.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 20)]
    per_leaf: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0.7)]
    level_scale: f64,
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the 200-epoch, batch-128 profile with the full-strength loss coefficients.
    #[arg(long)]
    full_scale: bool,
    /// Embedding file to train on instead of synthetic data.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    code_len: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lambda_code: Option<f64>,
    #[arg(long)]
    lambda_in: Option<f64>,
    #[arg(long)]
    p_norm: Option<f64>,
    #[arg(long)]
    temp: Option<f64>,
    #[arg(long)]
    smoothing: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    a_max: Option<f64>,
    /// Global gradient-norm cap per step; 0 disables clipping.
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Hidden width of the code generator and masker; 0 for linear heads.
    #[arg(long)]
    head_hidden: Option<usize>,
    /// Balanced k-means for per-epoch pseudo-labels.
    #[arg(long)]
    balanced_pseudo: bool,
    /// Embedding for the headline metrics: code or feature.
    #[arg(long)]
    eval_space: Option<String>,
    /// Drop wall-clock fields so repeated runs write identical files.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Write the metrics as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Comma-separated terms to switch off in one row ("full" for none);
    /// repeat for more rows. Default: full plus each single term removed.
    #[arg(long = "row")]
    rows: Vec<String>,
    /// Comma-separated seeds; each row runs once per seed.
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Args, Debug)]
struct TreeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory for tree.txt, tree.dot and prefixes.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Comma-separated category labels, one per sample.
    #[arg(long)]
    labels: String,
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    max_n: usize,
}

fn build_config(a: &TrainArgs) -> Result<RunConfig, RunError> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None if a.full_scale => RunConfig::full_scale(),
        None => RunConfig::default(),
    };
    if a.config.is_some() && a.full_scale {
        cfg.n_epochs = 200;
        cfg.batch_size = 128;
    }
    if let Some(p) = &a.data {
        cfg.data = DataSource::Embedding { path: p.clone() };
    }
    macro_rules! set {
        ($($field:expr => $val:expr),* $(,)?) => {
            $(if let Some(v) = $val { $field = v; })*
        };
    }
    set! {
        cfg.seed => a.seed,
        cfg.n_epochs => a.epochs,
        cfg.batch_size => a.batch,
        cfg.code_len => a.code_len,
        cfg.weights.alpha => a.alpha,
        cfg.weights.beta => a.beta,
        cfg.weights.delta => a.delta,
        cfg.weights.gamma => a.gamma,
        cfg.weights.zeta => a.zeta,
        cfg.weights.mu => a.mu,
        cfg.weights.lambda_code => a.lambda_code,
        cfg.weights.lambda_in => a.lambda_in,
        cfg.weights.p => a.p_norm,
        cfg.weights.tau => a.temp,
        cfg.weights.smoothing => a.smoothing,
        cfg.lr => a.lr,
        cfg.a_max => a.a_max,
        cfg.clip_norm => a.clip_norm,
        cfg.head_hidden => a.head_hidden,
    }
    if a.balanced_pseudo {
        cfg.balanced_pseudo = true;
    }
    if let Some(s) = &a.eval_space {
        cfg.eval_space = match s.as_str() {
            "code" => EvalSpace::Code,
            "feature" => EvalSpace::Feature,
            other => return Err(RunError::Config(format!("eval space {other:?}: expected code or feature"))),
        };
    }
    if a.deterministic {
        cfg.deterministic = true;
    }
    if a.out.is_some() {
        cfg.out_dir = a.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_checkpoint_data(ck: &Checkpoint, data: &Option<PathBuf>) -> Result<crate::datagen::HierDataset, RunError> {
    match data {
        Some(p) => Ok(load_embedding_file(p)?),
        None => load_data(&ck.config),
    }
}

fn write_file(path: &std::path::Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // A second call fails harmlessly once the global pool exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Io(e.to_string());
    match cmd {
        Command::Gen(a) => {
            let ds = gen_hier_dataset(&HierParams {
                seed: a.seed,
                depth: a.depth,
                per_leaf: a.per_leaf,
                dim: a.dim,
                noise_sigma: a.noise,
                level_scale: a.level_scale,
            })?;
            write_embedding_file(&ds, &a.out)?;
            writeln!(
                out,
                "wrote {} samples, {} classes, dim {} to {}",
                ds.len(),
                ds.num_classes(),
                ds.dim(),
                a.out.display()
            )
            .map_err(io)?;
        }
        Command::Train(a) => {
            let cfg = build_config(&a)?;
            let r = train(&cfg)?;
            writeln!(out, "{}", r.summary_line()).map_err(io)?;
        }
        Command::Eval(a) => {
            let ck = Checkpoint::load(&a.checkpoint)?;
            let ds = load_checkpoint_data(&ck, &a.data)?;
            let rep = evaluate(&ck, Some(&ds))?;
            writeln!(out, "code={} feature={}", rep.code.triple(), rep.feature.triple()).map_err(io)?;
            if let Some(p) = a.out {
                write_file(&p, &(serde_json::to_string_pretty(&rep).expect("metrics json") + "\n"))?;
            }
        }
        Command::Ablate(a) => {
            let mut cfg = build_config(&a.train)?;
            let dir = cfg.out_dir.take();
            let rows = if a.rows.is_empty() {
                leave_one_out_rows()
            } else {
                a.rows.iter().map(|r| parse_row(r)).collect::<Result<_, _>>()?
            };
            let seeds: Vec<u64> = match &a.seeds {
                Some(s) => s
                    .split(',')
                    .map(|x| x.trim().parse::<u64>().map_err(|e| RunError::Config(format!("seed {x:?}: {e}"))))
                    .collect::<Result<_, _>>()?,
                None => vec![cfg.seed],
            };
            let rep = ablate(&cfg, &rows, &seeds)?;
            write!(out, "{}", rep.table()).map_err(io)?;
            if let Some(d) = dir {
                std::fs::create_dir_all(&d).map_err(io)?;
                write_file(&d.join("ablation.csv"), &rep.csv())?;
                write_file(&d.join("ablation.txt"), &rep.table())?;
            }
        }
        Command::Tree(a) => {
            let ck = Checkpoint::load(&a.checkpoint)?;
            let ds = load_checkpoint_data(&ck, &a.data)?;
            if ds.dim() != ck.model.input_dim() {
                return Err(RunError::Dimension {
                    model: ck.model.input_dim(),
                    data: ds.dim(),
                });
            }
            let t = extract_tree(&ck.model, &ds);
            write!(out, "{}", t.stats_text()).map_err(io)?;
            if let Some(d) = a.out {
                std::fs::create_dir_all(&d).map_err(io)?;
                write_file(&d.join("tree.txt"), &t.text(&ds.labels))?;
                write_file(&d.join("tree.dot"), &t.dot(&ds.labels))?;
                write_file(&d.join("prefixes.txt"), &t.stats_text())?;
            }
        }
        Command::Oracle(a) => {
            let labels: Vec<String> = a.labels.split(',').map(|s| s.trim().to_string()).collect();
            let r = oracle_optimal_encoding(&labels, a.max_n).map_err(|e| RunError::Config(e.to_string()))?;
            writeln!(out, "total_length={} optima={}", r.min_total, r.optima.len()).map_err(io)?;
            let first: Vec<String> = labels
                .iter()
                .zip(r.optima[0].codes())
                .map(|(l, c)| format!("{l}:{c}"))
                .collect();
            writeln!(out, "encoding {}", first.join(" ")).map_err(io)?;
            let mut seen = Vec::new();
            for l in &labels {
                if !seen.contains(l) {
                    seen.push(l.clone());
                }
            }
            let prefixes: Vec<String> = seen
                .iter()
                .zip(&r.category_prefixes)
                .map(|(l, p)| format!("{l}={}", if p.is_empty() { "." } else { p }))
                .collect();
            writeln!(out, "prefixes {}", prefixes.join(" ")).map_err(io)?;
        }
    }
    Ok(())
}

/// Runs the CLI on `args` (program name first), writing normal output to
/// `out` and usage or errors to stderr. Returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(cli.cmd, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
