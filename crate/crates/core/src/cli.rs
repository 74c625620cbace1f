//! Command-line front end: `gen`, `train`, `eval`, `baseline`, `report`.
//!
//! Settings are resolved in this order, later sources winning:
//! built-in defaults, `--preset`, `--profile`, `--config` file, flags.
//! Every command writes the fully resolved configuration next to its
//! outputs as `<command>_config.toml`; passing that file back with
//! `--config` reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::agent::QTable;
use crate::error::{Error, Result};
use crate::harness::{
    self, baseline_fp64, evaluate, train, write_episodes_csv, write_summary, EvalConfig, EvalSummary,
    ReportFiles, TrainConfig, EPISODES_FILE,
};
use crate::problems::{dataset_stats, gen_dataset, DatasetConfig, DatasetManifest, Family, GeneratedDataset, Split};
use crate::reward::RewardWeights;

/// Environment variable holding the default output root.
pub const OUT_ROOT_ENV: &str = "PBANDIT_OUT";
pub const DEFAULT_OUT_ROOT: &str = "runs";
pub const QTABLE_FILE: &str = "qtable.json";

pub const PRESETS: [&str; 8] = [
    "dense-W1-tau6",
    "dense-W2-tau6",
    "dense-W1-tau8",
    "dense-W2-tau8",
    "sparse-W1-tau6",
    "sparse-W2-tau6",
    "sparse-W1-tau8",
    "sparse-W2-tau8",
];

/// Shift in the sparse diagonal used by the sparse presets; it puts the
/// generated condition numbers in the 1e8 to 1e10 band.
pub const SPARSE_PRESET_BETA: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub train_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    pub qtable: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub report_inputs: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    /// Overrides the dataset and training seeds when set.
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub paths: Paths,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Writes `<command>_config.toml` into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}_config.toml", self.command));
        fs::write(&path, self.to_toml()?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let parts: Vec<&str> = name.split('-').collect();
        let bad = || {
            Error::Config(format!(
                "unknown preset `{name}` (valid presets: {})",
                PRESETS.join(", ")
            ))
        };
        let [family, weights, tau] = parts[..] else {
            return Err(bad());
        };
        let family: Family = family.parse().map_err(|_| bad())?;
        let weights: RewardWeights = weights.parse().map_err(|_| bad())?;
        let tau = match tau {
            "tau6" => 1e-6,
            "tau8" => 1e-8,
            _ => return Err(bad()),
        };
        self.dataset.family = family;
        self.dataset.name = family.name().to_string();
        if family == Family::SparseSpd {
            self.dataset.beta = SPARSE_PRESET_BETA;
        }
        self.train.reward.weights = weights;
        self.eval.reward.weights = weights;
        self.train.stop.tau_conv = tau;
        self.eval.stop.tau_conv = tau;
        Ok(())
    }

    pub fn apply_profile(&mut self, name: &str) -> Result<()> {
        match name {
            "ci" => {
                self.dataset.n_min = 50;
                self.dataset.n_max = 120;
                self.dataset.n_train = 20;
                self.dataset.n_test = 20;
                self.train.episodes = 30;
                Ok(())
            }
            "full" => Ok(()),
            other => Err(Error::Config(format!("unknown profile `{other}` (valid profiles: ci, full)"))),
        }
    }

    /// Fills in every path from `root` that was not set explicitly.
    fn fill_paths(&mut self, root: &Path) {
        let p = &mut self.paths;
        let data = p.data_dir.get_or_insert_with(|| root.join("data")).clone();
        p.train_manifest
            .get_or_insert_with(|| data.join(DatasetManifest::file_name(Split::Train)));
        p.test_manifest
            .get_or_insert_with(|| data.join(DatasetManifest::file_name(Split::Test)));
        p.qtable.get_or_insert_with(|| root.join("train").join(QTABLE_FILE));
        let default_out = match self.command.as_str() {
            "gen" => data.clone(),
            "train" => root.join("train"),
            "report" => root.join("report"),
            _ => root.join("eval"),
        };
        p.out_dir.get_or_insert(default_out);
        p.report_inputs
            .get_or_insert_with(|| vec![root.join("eval"), root.join("train")]);
    }

    fn out_dir(&self) -> &Path {
        self.paths.out_dir.as_deref().expect("paths resolved")
    }
}

#[derive(Debug, Parser)]
#[command(name = "pbandit", version, about = "Precision selection for mixed-precision GMRES-IR")]
pub struct Cli {
    /// Output root used for default paths.
    #[arg(long, global = true, env = OUT_ROOT_ENV)]
    pub out_root: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train and test systems with manifests.
    Gen(GenArgs),
    /// Train a Q-table on the training split.
    Train(TrainArgs),
    /// Evaluate a trained Q-table greedily on the test split.
    Eval(EvalArgs),
    /// Evaluate the all-FP64 configuration on the test split.
    Baseline(EvalArgs),
    /// Merge summaries and training curves into report tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named experiment preset, e.g. dense-W1-tau6.
    #[arg(long)]
    pub preset: Option<String>,
    /// Size profile: `ci` (small, fast) or `full`.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for generation and evaluation.
    #[arg(long, value_parser = parse_positive)]
    pub workers: Option<usize>,
    /// Output directory for this command.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub name: Option<String>,
    /// dense or sparse.
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long, value_parser = parse_positive)]
    pub n_train: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub kappa_min: Option<f64>,
    #[arg(long)]
    pub kappa_max: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub lambda_s: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// Outer convergence tolerance.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Weight preset: W1 or W2.
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Training manifest (defaults to the data directory's train split).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_parser = parse_positive)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub eps_min: Option<f64>,
    /// Keep this fraction of the action space.
    #[arg(long)]
    pub subsample: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Test manifest (defaults to the data directory's test split).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub qtable: Option<PathBuf>,
    #[arg(long)]
    pub tau_base: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Directories to scan for summaries and episode curves.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
}

fn out_root(cli_root: Option<&Path>) -> PathBuf {
    cli_root.map_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT), Path::to_path_buf)
}

fn base_config(command: &str, common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &common.preset {
        cfg.apply_preset(p)?;
    }
    if let Some(p) = &common.profile {
        cfg.apply_profile(p)?;
    }
    if let Some(path) = &common.config {
        cfg = RunConfig::load(path)?;
    }
    cfg.command = command.to_string();
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    if let Some(out) = &common.out {
        cfg.paths.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn apply_solver(cfg: &mut RunConfig, s: &SolverArgs) -> Result<()> {
    if let Some(w) = &s.weights {
        let w: RewardWeights = w.parse()?;
        cfg.train.reward.weights = w;
        cfg.eval.reward.weights = w;
    }
    if let Some(t) = s.tau {
        cfg.train.stop.tau_conv = t;
        cfg.eval.stop.tau_conv = t;
    }
    Ok(())
}

fn finish(mut cfg: RunConfig, root: &Path) -> RunConfig {
    if let Some(s) = cfg.seed {
        cfg.dataset.seed = s;
        cfg.train.seed = s;
    }
    cfg.eval.workers = cfg.workers;
    cfg.fill_paths(root);
    cfg
}

/// Builds the resolved configuration for a command.
pub fn resolve(command: &Command, cli_root: Option<&Path>) -> Result<RunConfig> {
    let root = out_root(cli_root);
    let cfg = match command {
        Command::Gen(a) => {
            let mut c = base_config("gen", &a.common)?;
            let d = &mut c.dataset;
            if let Some(v) = &a.name {
                d.name = v.clone();
            }
            if let Some(v) = a.family {
                d.family = v;
            }
            macro_rules! set {
                ($($field:ident),*) => {$(if let Some(v) = a.$field { d.$field = v; })*};
            }
            set!(n_train, n_test, n_min, n_max, kappa_min, kappa_max, sigma_max, lambda_s, beta);
            if let Some(out) = &a.common.out {
                c.paths.data_dir = Some(out.clone());
            }
            c
        }
        Command::Train(a) => {
            let mut c = base_config("train", &a.common)?;
            apply_solver(&mut c, &a.solver)?;
            let t = &mut c.train;
            if let Some(v) = a.episodes {
                t.episodes = v;
            }
            if let Some(v) = a.alpha {
                t.alpha = v;
            }
            if let Some(v) = a.eps_min {
                t.eps_min = v;
            }
            if a.subsample.is_some() {
                t.subsample = a.subsample;
            }
            if let Some(m) = &a.manifest {
                c.paths.train_manifest = Some(m.clone());
            }
            c
        }
        Command::Eval(a) | Command::Baseline(a) => {
            let name = if matches!(command, Command::Eval(_)) { "eval" } else { "baseline" };
            let mut c = base_config(name, &a.common)?;
            apply_solver(&mut c, &a.solver)?;
            if let Some(v) = a.tau_base {
                c.eval.tau_base = v;
            }
            if let Some(m) = &a.manifest {
                c.paths.test_manifest = Some(m.clone());
            }
            if let Some(q) = &a.qtable {
                c.paths.qtable = Some(q.clone());
            }
            c
        }
        Command::Report(a) => {
            let mut c = base_config("report", &a.common)?;
            if !a.inputs.is_empty() {
                c.paths.report_inputs = Some(a.inputs.clone());
            }
            c
        }
    };
    Ok(finish(cfg, &root))
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<GeneratedDataset> {
    let dir = cfg.paths.data_dir.as_deref().expect("paths resolved");
    let data = gen_dataset(&cfg.dataset, dir, cfg.workers)?;
    cfg.persist(dir)?;
    Ok(data)
}

pub struct TrainOutputs {
    pub qtable: QTable,
    pub logs: Vec<harness::EpisodeLog>,
    pub qtable_path: PathBuf,
    pub episodes_path: PathBuf,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutputs> {
    let manifest = DatasetManifest::load(cfg.paths.train_manifest.as_deref().expect("paths resolved"))?;
    let (q, logs) = train(&manifest, &cfg.train)?;
    let out = cfg.out_dir();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let qtable_path = out.join(QTABLE_FILE);
    let episodes_path = out.join(EPISODES_FILE);
    q.save(&qtable_path)?;
    write_episodes_csv(&episodes_path, &logs)?;
    cfg.persist(out)?;
    Ok(TrainOutputs {
        qtable: q,
        logs,
        qtable_path,
        episodes_path,
    })
}

/// Returns a warning when a sibling evaluation in `dir` used another
/// convergence tolerance.
fn tau_mismatch(cfg: &RunConfig, other: &str) -> Option<String> {
    let path = cfg.out_dir().join(format!("{other}_config.toml"));
    let theirs = RunConfig::load(&path).ok()?;
    let (a, b) = (cfg.eval.stop.tau_conv, theirs.eval.stop.tau_conv);
    (a != b).then(|| {
        format!(
            "warning: {} uses tau {a:e} but {} used tau {b:e}; the comparison is not like for like",
            cfg.command,
            path.display()
        )
    })
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalSummary> {
    let q = QTable::load(cfg.paths.qtable.as_deref().expect("paths resolved"))?;
    let manifest = DatasetManifest::load(cfg.paths.test_manifest.as_deref().expect("paths resolved"))?;
    let summary = evaluate(&q, &manifest, &cfg.eval)?;
    write_summary(cfg.out_dir(), &summary.method, &summary)?;
    cfg.persist(cfg.out_dir())?;
    if let Some(w) = tau_mismatch(cfg, "baseline") {
        eprintln!("{w}");
    }
    Ok(summary)
}

pub fn cmd_baseline(cfg: &RunConfig) -> Result<EvalSummary> {
    let manifest = DatasetManifest::load(cfg.paths.test_manifest.as_deref().expect("paths resolved"))?;
    let summary = baseline_fp64(&manifest, &cfg.eval)?;
    write_summary(cfg.out_dir(), &summary.method, &summary)?;
    cfg.persist(cfg.out_dir())?;
    if let Some(w) = tau_mismatch(cfg, "eval") {
        eprintln!("{w}");
    }
    Ok(summary)
}

pub fn cmd_report(cfg: &RunConfig) -> Result<ReportFiles> {
    let inputs: Vec<PathBuf> = cfg
        .paths
        .report_inputs
        .clone()
        .unwrap_or_default()
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if inputs.is_empty() {
        return Err(Error::NothingToReport("none of the input directories exist".into()));
    }
    let files = harness::report(&inputs, cfg.out_dir())?;
    cfg.persist(cfg.out_dir())?;
    Ok(files)
}

fn print_summary(s: &EvalSummary) {
    for r in &s.ranges {
        let xi = r.xi.map_or_else(|| "--".to_string(), |x| format!("{:.1}%", 100.0 * x));
        println!(
            "{:<5} {:<17} n={:<3} xi={:<6} ferr={:.2e} nbe={:.2e} outer={:.2} gmres={:.2}",
            s.method,
            r.range.label(),
            r.count,
            xi,
            r.avg_ferr,
            r.avg_nbe,
            r.avg_outer_iters,
            r.avg_gmres_iters
        );
    }
    for note in &s.notes {
        println!("{note}");
    }
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli.command, cli.out_root.as_deref())?;
    match &cli.command {
        Command::Gen(_) => {
            let d = cmd_gen(&cfg)?;
            println!("{}", d.train_path.display());
            println!("{}", d.test_path.display());
            println!("{}", dataset_stats(&d.train));
            println!("{}", dataset_stats(&d.test));
        }
        Command::Train(_) => {
            let out = cmd_train(&cfg)?;
            if let Some(last) = out.logs.last() {
                println!(
                    "trained {} episodes: final mean reward {:.4}, mean |RPE| {:.4}",
                    last.episode, last.mean_reward, last.mean_abs_rpe
                );
            }
            println!("{}", out.qtable_path.display());
        }
        Command::Eval(_) => print_summary(&cmd_eval(&cfg)?),
        Command::Baseline(_) => print_summary(&cmd_baseline(&cfg)?),
        Command::Report(_) => {
            let files = cmd_report(&cfg)?;
            println!("{}", files.markdown.display());
        }
    }
    Ok(())
}
