//! Training, greedy evaluation, the all-FP64 baseline, and result tables.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actionspace::{default_formats, enumerate_actions, subsample, ActionSpace};
use crate::agent::{epsilon_at, select_action, EpsilonSchedule, QTable, UnvisitedFallback};
use crate::context::{extract_context_with, fit_bins, ConditionMethod, Context};
use crate::error::{Error, Result};
use crate::fpemu::Format;
use crate::gmres_ir::{solve_gmres_ir, PrecisionAction, SolveStatus, StopConfig};
use crate::problems::{DatasetManifest, ProblemInstance};
use crate::reward::{total_reward, RewardBreakdown, RewardConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub eps_min: f64,
    /// Accepted for completeness; the one-step update has no bootstrap term.
    pub gamma: f64,
    pub reward: RewardConfig,
    pub stop: StopConfig,
    pub seed: u64,
    /// Keep only this fraction of the action space (all-FP64 always kept).
    pub subsample: Option<f64>,
    pub bins_cond: usize,
    pub bins_norm: usize,
    pub formats: Vec<Format>,
    pub condition: ConditionMethod,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            alpha: 0.5,
            eps_min: 0.01,
            gamma: 0.0,
            reward: RewardConfig::default(),
            stop: StopConfig::default(),
            seed: 0,
            subsample: None,
            bins_cond: 10,
            bins_norm: 10,
            formats: default_formats(),
            condition: ConditionMethod::Estimate1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.stop.validate()?;
        self.reward.weights.validate()?;
        EpsilonSchedule::new(self.episodes, self.eps_min)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} not in (0,1]", self.alpha)));
        }
        if self.bins_cond == 0 || self.bins_norm == 0 {
            return Err(Error::Config("bin counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn action_space(&self) -> Result<ActionSpace> {
        let full = enumerate_actions(&self.formats)?;
        match self.subsample {
            Some(f) => subsample(&full, f, self.seed),
            None => Ok(full),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_abs_rpe: f64,
    pub epsilon: f64,
}

/// Outcome of one solve, as needed for rewards and tables.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Outcome {
    status: SolveStatus,
    outer_iters: usize,
    gmres_iters: usize,
    ferr: f64,
    nbe: f64,
    reward: RewardBreakdown,
}

fn run_case(
    inst: &ProblemInstance,
    ctx: &Context,
    action: PrecisionAction,
    stop: &StopConfig,
    reward: &RewardConfig,
) -> Outcome {
    let rep = solve_gmres_ir(&inst.a, &inst.b, action, stop, Some(&inst.x_true));
    let r = total_reward(&rep, ctx, &inst.a, &inst.b, &inst.x_true, reward);
    Outcome {
        status: rep.status,
        outer_iters: rep.outer_iters,
        gmres_iters: rep.gmres_iters_total,
        ferr: rep.ferr,
        nbe: rep.nbe,
        reward: r,
    }
}

pub fn contexts(instances: &[ProblemInstance], method: ConditionMethod) -> Vec<Context> {
    instances
        .par_iter()
        .map(|p| extract_context_with(&p.a, method))
        .collect()
}

/// Loads the training split and runs [`train_on`].
pub fn train(manifest: &DatasetManifest, cfg: &TrainConfig) -> Result<(QTable, Vec<EpisodeLog>)> {
    train_on(&manifest.load_all()?, cfg)
}

/// Epsilon-greedy bandit training over `instances` in the given order.
///
/// Solves are deterministic, so each (system, action) pair is solved once
/// and its reward reused when the pair comes up again.
pub fn train_on(instances: &[ProblemInstance], cfg: &TrainConfig) -> Result<(QTable, Vec<EpisodeLog>)> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let ctxs = contexts(instances, cfg.condition);
    let bins = fit_bins(&ctxs, cfg.bins_cond, cfg.bins_norm)?;
    let schedule = EpsilonSchedule::new(cfg.episodes, cfg.eps_min)?;
    let mut q = QTable::new(bins, cfg.action_space()?, cfg.alpha, schedule, cfg.seed)?
        .with_gamma(cfg.gamma);
    let states: Vec<_> = ctxs.iter().map(|c| q.discretize(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut memo: HashMap<(usize, usize), f64> = HashMap::new();
    let mut logs = Vec::with_capacity(cfg.episodes);

    for t in 1..=cfg.episodes {
        let eps = epsilon_at(t, &schedule);
        let mut sum_r = 0.0;
        let mut sum_rpe = 0.0;
        for (j, inst) in instances.iter().enumerate() {
            let a = select_action(&q, &states[j], eps, &mut rng);
            let r = *memo.entry((j, a)).or_insert_with(|| {
                run_case(inst, &ctxs[j], q.space().get(a), &cfg.stop, &cfg.reward).reward.total
            });
            let rpe = q.update(&states[j], a, r);
            sum_r += r;
            sum_rpe += rpe.abs();
        }
        let m = instances.len() as f64;
        logs.push(EpisodeLog {
            episode: t,
            mean_reward: sum_r / m,
            mean_abs_rpe: sum_rpe / m,
            epsilon: eps,
        });
    }
    Ok((q, logs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub stop: StopConfig,
    pub reward: RewardConfig,
    /// Success threshold base; each range uses `tau_base * median(kappa)`.
    pub tau_base: f64,
    pub fallback: UnvisitedFallback,
    pub condition: ConditionMethod,
    /// Evaluation threads; `None` uses all cores.
    pub workers: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            stop: StopConfig::default(),
            reward: RewardConfig::default(),
            tau_base: 1e-10,
            fallback: UnvisitedFallback::NearestVisited,
            condition: ConditionMethod::Estimate1,
            workers: None,
        }
    }
}

impl EvalConfig {
    /// Evaluation settings matching a training run.
    pub fn matching(train: &TrainConfig) -> Self {
        Self {
            stop: train.stop,
            reward: train.reward,
            condition: train.condition,
            ..Self::default()
        }
    }
}

/// One row of the per-system results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub id: String,
    pub n: usize,
    pub family: String,
    pub kappa_est: f64,
    pub norm_inf: f64,
    pub state_index: Option<usize>,
    pub action: PrecisionAction,
    pub status: SolveStatus,
    pub outer_iters: usize,
    pub gmres_iters: usize,
    pub ferr: f64,
    pub nbe: f64,
    pub reward: f64,
    pub f_precision: f64,
    pub f_accuracy: f64,
    pub f_penalty: f64,
    /// Condition number used for grouping: the generator's exact target when
    /// known, otherwise the estimate.
    pub kappa_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionRange {
    Low,
    Medium,
    High,
}

impl ConditionRange {
    pub const ALL: [ConditionRange; 3] = [ConditionRange::Low, ConditionRange::Medium, ConditionRange::High];

    /// Low `[1, 1e3)`, medium `[1e3, 1e6)`, high `[1e6, inf)`.
    pub fn of(kappa: f64) -> Self {
        if kappa < 1e3 {
            ConditionRange::Low
        } else if kappa < 1e6 {
            ConditionRange::Medium
        } else {
            ConditionRange::High
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConditionRange::Low => "low (1e0-1e3)",
            ConditionRange::Medium => "medium (1e3-1e6)",
            ConditionRange::High => "high (1e6-1e9)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeRow {
    pub range: ConditionRange,
    pub count: usize,
    pub tau: f64,
    /// `None` for the baseline.
    pub xi: Option<f64>,
    pub avg_ferr: f64,
    pub avg_nbe: f64,
    pub median_ferr: f64,
    pub avg_outer_iters: f64,
    pub avg_gmres_iters: f64,
}

/// Average number of steps per format for systems whose reference condition
/// number lies in `[10^decade, 10^(decade+1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecadeRow {
    pub decade: i32,
    pub count: usize,
    /// Aligned with [`Format::ALL`]; sums to 4.
    pub usage: [f64; 5],
}

impl DecadeRow {
    pub fn label(&self) -> String {
        format!("1e{}-1e{}", self.decade, self.decade + 1)
    }

    pub fn usage_of(&self, f: Format) -> f64 {
        self.usage[Format::ALL.iter().position(|&g| g == f).expect("known format")]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub method: String,
    pub tau_base: f64,
    pub ranges: Vec<RangeRow>,
    pub decades: Vec<DecadeRow>,
    pub systems: Vec<SystemResult>,
    /// Ranges without systems, reported instead of a row.
    pub notes: Vec<String>,
}

impl EvalSummary {
    pub fn range(&self, r: ConditionRange) -> Option<&RangeRow> {
        self.ranges.iter().find(|row| row.range == r)
    }

    pub fn decade(&self, d: i32) -> Option<&DecadeRow> {
        self.decades.iter().find(|row| row.decade == d)
    }

    /// Mean number of FP64 steps per solve over all systems.
    pub fn mean_usage(&self, f: Format) -> f64 {
        let total: usize = self.systems.iter().map(|s| s.action.count(f)).sum();
        total as f64 / self.systems.len().max(1) as f64
    }
}

pub fn decade_of(kappa: f64) -> i32 {
    kappa.max(1.0).log10().floor() as i32
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Groups per-system results into range rows and decade rows by
/// `kappa_ref`. Each range's success threshold is `tau_base` times the
/// median condition estimate of its members.
pub fn summarize(
    method: &str,
    systems: Vec<SystemResult>,
    tau_base: f64,
    with_xi: bool,
) -> EvalSummary {
    let mut ranges = Vec::new();
    let mut notes = Vec::new();
    for r in ConditionRange::ALL {
        let rows: Vec<&SystemResult> = systems
            .iter()
            .filter(|s| ConditionRange::of(s.kappa_ref) == r)
            .collect();
        if rows.is_empty() {
            notes.push(format!("{method}: no systems in range {}", r.label()));
            continue;
        }
        let kappas: Vec<f64> = rows.iter().map(|s| s.kappa_est).collect();
        let tau = tau_base * median(&kappas);
        let ok = rows.iter().filter(|s| s.ferr.max(s.nbe) < tau).count();
        let ferrs: Vec<f64> = rows.iter().map(|s| s.ferr).collect();
        ranges.push(RangeRow {
            range: r,
            count: rows.len(),
            tau,
            xi: with_xi.then(|| ok as f64 / rows.len() as f64),
            avg_ferr: mean(rows.iter().map(|s| s.ferr)),
            avg_nbe: mean(rows.iter().map(|s| s.nbe)),
            median_ferr: median(&ferrs),
            avg_outer_iters: mean(rows.iter().map(|s| s.outer_iters as f64)),
            avg_gmres_iters: mean(rows.iter().map(|s| s.gmres_iters as f64)),
        });
    }

    let mut by_decade: HashMap<i32, (usize, [usize; 5])> = HashMap::new();
    for s in &systems {
        let e = by_decade.entry(decade_of(s.kappa_ref)).or_default();
        e.0 += 1;
        for (k, f) in Format::ALL.iter().enumerate() {
            e.1[k] += s.action.count(*f);
        }
    }
    let mut decades: Vec<DecadeRow> = by_decade
        .into_iter()
        .map(|(decade, (count, totals))| DecadeRow {
            decade,
            count,
            usage: totals.map(|t| t as f64 / count as f64),
        })
        .collect();
    decades.sort_by_key(|d| d.decade);

    EvalSummary {
        method: method.to_string(),
        tau_base,
        ranges,
        decades,
        systems,
        notes,
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn evaluate_with(
    method: &str,
    instances: &[ProblemInstance],
    cfg: &EvalConfig,
    choose: impl Fn(&Context) -> (Option<usize>, PrecisionAction) + Sync,
    with_xi: bool,
) -> Result<EvalSummary> {
    cfg.stop.validate()?;
    let systems: Vec<SystemResult> = pool(cfg.workers)?.install(|| {
        instances
            .par_iter()
            .map(|inst| {
                let ctx = extract_context_with(&inst.a, cfg.condition);
                let (state_index, action) = choose(&ctx);
                let o = run_case(inst, &ctx, action, &cfg.stop, &cfg.reward);
                SystemResult {
                    id: inst.meta.id.clone(),
                    n: inst.meta.n,
                    family: inst.meta.family.to_string(),
                    kappa_est: ctx.kappa(),
                    norm_inf: ctx.norm_inf(),
                    state_index,
                    action,
                    status: o.status,
                    outer_iters: o.outer_iters,
                    gmres_iters: o.gmres_iters,
                    ferr: o.ferr,
                    nbe: o.nbe,
                    reward: o.reward.total,
                    f_precision: o.reward.f_precision,
                    f_accuracy: o.reward.f_accuracy,
                    f_penalty: o.reward.f_penalty,
                    kappa_ref: inst.meta.kappa_target.unwrap_or(ctx.kappa()),
                }
            })
            .collect()
    });
    Ok(summarize(method, systems, cfg.tau_base, with_xi))
}

/// Greedy evaluation of a trained table on held-out systems.
pub fn evaluate_on(q: &QTable, instances: &[ProblemInstance], cfg: &EvalConfig) -> Result<EvalSummary> {
    evaluate_with(
        "rl",
        instances,
        cfg,
        |ctx| (Some(q.discretize(ctx).index), q.infer_with(ctx, cfg.fallback)),
        true,
    )
}

pub fn evaluate(q: &QTable, manifest: &DatasetManifest, cfg: &EvalConfig) -> Result<EvalSummary> {
    evaluate_on(q, &manifest.load_all()?, cfg)
}

/// The same evaluation with every step in FP64; success rates are omitted.
pub fn baseline_fp64_on(instances: &[ProblemInstance], cfg: &EvalConfig) -> Result<EvalSummary> {
    let fp64 = PrecisionAction::uniform(Format::Fp64);
    evaluate_with("fp64", instances, cfg, |_| (None, fp64), false)
}

pub fn baseline_fp64(manifest: &DatasetManifest, cfg: &EvalConfig) -> Result<EvalSummary> {
    baseline_fp64_on(&manifest.load_all()?, cfg)
}

// ---------------------------------------------------------------------------
// CSV files

pub const SYSTEMS_SUFFIX: &str = "systems.csv";
pub const SUMMARY_SUFFIX: &str = "summary.csv";
pub const USAGE_SUFFIX: &str = "usage.csv";
pub const EPISODES_FILE: &str = "episodes.csv";

/// Range table row as stored on disk; `xi` is `--` for the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub method: String,
    pub range: String,
    pub count: usize,
    pub tau: f64,
    pub xi: String,
    pub avg_ferr: f64,
    pub avg_nbe: f64,
    pub median_ferr: f64,
    pub avg_outer_iters: f64,
    pub avg_gmres_iters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub method: String,
    pub decade: String,
    pub count: usize,
    pub bf16: f64,
    pub fp16: f64,
    pub tf32: f64,
    pub fp32: f64,
    pub fp64: f64,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_systems_csv(path: &Path, systems: &[SystemResult]) -> Result<()> {
    write_rows(path, systems)
}

pub fn read_systems_csv(path: &Path) -> Result<Vec<SystemResult>> {
    read_rows(path)
}

pub fn write_episodes_csv(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    write_rows(path, logs)
}

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeLog>> {
    read_rows(path)
}

pub fn summary_records(s: &EvalSummary) -> Vec<SummaryRecord> {
    s.ranges
        .iter()
        .map(|r| SummaryRecord {
            method: s.method.clone(),
            range: r.range.label().to_string(),
            count: r.count,
            tau: r.tau,
            xi: r.xi.map_or_else(|| "--".to_string(), |x| format!("{x}")),
            avg_ferr: r.avg_ferr,
            avg_nbe: r.avg_nbe,
            median_ferr: r.median_ferr,
            avg_outer_iters: r.avg_outer_iters,
            avg_gmres_iters: r.avg_gmres_iters,
        })
        .collect()
}

pub fn usage_records(s: &EvalSummary) -> Vec<UsageRecord> {
    s.decades
        .iter()
        .map(|d| UsageRecord {
            method: s.method.clone(),
            decade: d.label(),
            count: d.count,
            bf16: d.usage[0],
            fp16: d.usage[1],
            tf32: d.usage[2],
            fp32: d.usage[3],
            fp64: d.usage[4],
        })
        .collect()
}

/// Writes `<prefix>_systems.csv`, `<prefix>_summary.csv` and
/// `<prefix>_usage.csv` into `dir`; returns the paths in that order.
pub fn write_summary(dir: &Path, prefix: &str, s: &EvalSummary) -> Result<[PathBuf; 3]> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = [SYSTEMS_SUFFIX, SUMMARY_SUFFIX, USAGE_SUFFIX].map(|suf| dir.join(format!("{prefix}_{suf}")));
    write_systems_csv(&paths[0], &s.systems)?;
    write_rows(&paths[1], summary_records(s))?;
    write_rows(&paths[2], usage_records(s))?;
    Ok(paths)
}

fn files_ending(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(suffix) && !name.starts_with("report") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub performance: PathBuf,
    pub usage: PathBuf,
    pub curves: Option<PathBuf>,
    pub markdown: PathBuf,
}

fn fmt_sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2e}")
    } else {
        format!("{v}")
    }
}

/// Merges every summary, usage and episode file found in `inputs` into
/// combined tables under `out_dir`.
pub fn report(inputs: &[PathBuf], out_dir: &Path) -> Result<ReportFiles> {
    let (mut summaries, mut usages, mut episodes) = (Vec::new(), Vec::new(), Vec::new());
    for input in inputs {
        summaries.extend(files_ending(input, &format!("_{SUMMARY_SUFFIX}"))?);
        usages.extend(files_ending(input, &format!("_{USAGE_SUFFIX}"))?);
        episodes.extend(files_ending(input, EPISODES_FILE)?);
    }
    if summaries.is_empty() && usages.is_empty() && episodes.is_empty() {
        let names: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
        return Err(Error::NothingToReport(format!(
            "no summary, usage or episode files in {}",
            names.join(", ")
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut perf: Vec<SummaryRecord> = Vec::new();
    for p in &summaries {
        perf.extend(read_rows::<SummaryRecord>(p)?);
    }
    let mut usage: Vec<UsageRecord> = Vec::new();
    for p in &usages {
        usage.extend(read_rows::<UsageRecord>(p)?);
    }
    let mut curves: Vec<(String, EpisodeLog)> = Vec::new();
    for p in &episodes {
        let run = p
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("")
            .trim_end_matches(EPISODES_FILE)
            .trim_end_matches('_')
            .to_string();
        let run = if run.is_empty() { "train".to_string() } else { run };
        curves.extend(read_episodes_csv(p)?.into_iter().map(|l| (run.clone(), l)));
    }

    let files = ReportFiles {
        performance: out_dir.join("report_performance.csv"),
        usage: out_dir.join("report_usage.csv"),
        curves: (!curves.is_empty()).then(|| out_dir.join("report_curves.csv")),
        markdown: out_dir.join("report.md"),
    };
    write_rows(&files.performance, &perf)?;
    write_rows(&files.usage, &usage)?;
    if let Some(path) = &files.curves {
        #[derive(Serialize)]
        struct CurveRow<'a> {
            run: &'a str,
            episode: usize,
            mean_reward: f64,
            mean_abs_rpe: f64,
            epsilon: f64,
        }
        write_rows(
            path,
            curves.iter().map(|(run, l)| CurveRow {
                run,
                episode: l.episode,
                mean_reward: l.mean_reward,
                mean_abs_rpe: l.mean_abs_rpe,
                epsilon: l.epsilon,
            }),
        )?;
    }

    let mut md = String::new();
    if !perf.is_empty() {
        md.push_str("## Performance by condition range\n\n");
        md.push_str("| method | range | systems | xi | avg ferr | avg nbe | avg outer | avg gmres |\n");
        md.push_str("|---|---|---:|---:|---:|---:|---:|---:|\n");
        for r in &perf {
            let xi = match r.xi.parse::<f64>() {
                Ok(x) => format!("{:.0}%", 100.0 * x),
                Err(_) => r.xi.clone(),
            };
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {:.2} | {:.2} |",
                r.method,
                r.range,
                r.count,
                xi,
                fmt_sci(r.avg_ferr),
                fmt_sci(r.avg_nbe),
                r.avg_outer_iters,
                r.avg_gmres_iters
            );
        }
        md.push('\n');
    }
    if !usage.is_empty() {
        md.push_str("## Average formats selected per decade\n\n");
        md.push_str("| method | decade | systems | bf16 | fp16 | tf32 | fp32 | fp64 |\n");
        md.push_str("|---|---|---:|---:|---:|---:|---:|---:|\n");
        for u in &usage {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |",
                u.method, u.decade, u.count, u.bf16, u.fp16, u.tf32, u.fp32, u.fp64
            );
        }
        md.push('\n');
    }
    if !curves.is_empty() {
        md.push_str("## Training curves\n\n| run | episodes | first reward | last reward | last mean abs RPE |\n|---|---:|---:|---:|---:|\n");
        let mut runs: Vec<&str> = curves.iter().map(|(r, _)| r.as_str()).collect();
        runs.dedup();
        for run in runs {
            let rows: Vec<&EpisodeLog> = curves.iter().filter(|(r, _)| r == run).map(|(_, l)| l).collect();
            let (first, last) = (rows[0], rows[rows.len() - 1]);
            let _ = writeln!(
                md,
                "| {run} | {} | {:.3} | {:.3} | {:.3} |",
                rows.len(),
                first.mean_reward,
                last.mean_reward,
                last.mean_abs_rpe
            );
        }
    }
    fs::write(&files.markdown, md).map_err(|e| Error::io(&files.markdown, e))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DenseMatrix;
    use crate::problems::{Family, ProblemMeta};

    fn toy(id: &str, a: DenseMatrix) -> ProblemInstance {
        let n = a.n_rows();
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let b = a.mul_vec(&x_true);
        ProblemInstance {
            meta: ProblemMeta {
                id: id.into(),
                family: Family::DenseRandsvd,
                n,
                kappa_target: None,
                kappa_est: 1.0,
                norm_inf: 1.0,
                sparsity: 1.0,
                seed: 0,
            },
            a,
            x_true,
            b,
        }
    }

    fn result(kappa: f64, ferr: f64, action: &str) -> SystemResult {
        SystemResult {
            id: "s".into(),
            n: 4,
            family: "dense_randsvd".into(),
            kappa_est: kappa,
            norm_inf: 1.0,
            state_index: Some(0),
            action: action.parse().unwrap(),
            status: SolveStatus::Converged,
            outer_iters: 2,
            gmres_iters: 3,
            ferr,
            nbe: 0.0,
            reward: 0.0,
            f_precision: 0.0,
            f_accuracy: 0.0,
            f_penalty: 0.0,
            kappa_ref: kappa,
        }
    }

    #[test]
    fn single_system_single_action() {
        let inst = toy("a", DenseMatrix::from_diagonal(&[2.0, 3.0, 4.0]));
        let cfg = TrainConfig {
            episodes: 1,
            formats: vec![Format::Fp64],
            ..TrainConfig::default()
        };
        let (q, logs) = train_on(std::slice::from_ref(&inst), &cfg).unwrap();
        let ctx = extract_context_with(&inst.a, ConditionMethod::Estimate1);
        let r = run_case(&inst, &ctx, PrecisionAction::uniform(Format::Fp64), &cfg.stop, &cfg.reward)
            .reward
            .total;
        let s = q.discretize(&ctx);
        assert_eq!(q.value(s.index, 0), 0.5 * r);
        assert_eq!(logs.len(), 1);
        assert_eq!(logs[0].mean_reward, r);
        assert_eq!(logs[0].mean_abs_rpe, r.abs());
    }

    #[test]
    fn epsilon_floor_in_logs() {
        let inst = toy("a", DenseMatrix::identity(3));
        let cfg = TrainConfig {
            episodes: 20,
            eps_min: 0.1,
            formats: vec![Format::Fp32, Format::Fp64],
            ..TrainConfig::default()
        };
        let (_, logs) = train_on(&[inst], &cfg).unwrap();
        let floor_from = ((1.0 - cfg.eps_min) * cfg.episodes as f64).ceil() as usize;
        for l in &logs {
            if l.episode >= floor_from {
                assert_eq!(l.epsilon, 0.1);
            } else {
                assert!(l.epsilon > 0.1);
            }
        }
    }

    #[test]
    fn success_rate_counts() {
        let sys = vec![result(10.0, 0.0, "fp64|fp64|fp64|fp64"), result(20.0, 1.0, "bf16|fp64|fp64|fp64")];
        let s = summarize("rl", sys, 1e-10, true);
        assert_eq!(s.ranges.len(), 1);
        assert_eq!(s.ranges[0].xi, Some(0.5));
        assert_eq!(s.ranges[0].tau, 1e-10 * 15.0);
        assert_eq!(s.notes.len(), 2);
        let d = s.decade(1).unwrap();
        assert_eq!(d.count, 2);
        assert_eq!(d.usage_of(Format::Fp64), 3.5);
        assert_eq!(d.usage.iter().sum::<f64>(), 4.0);
        let b = summarize("fp64", s.systems.clone(), 1e-10, false);
        assert_eq!(b.ranges[0].xi, None);
        assert_eq!(summary_records(&b)[0].xi, "--");
    }

    #[test]
    fn ranges_and_decades() {
        assert_eq!(ConditionRange::of(0.5), ConditionRange::Low);
        assert_eq!(ConditionRange::of(999.0), ConditionRange::Low);
        assert_eq!(ConditionRange::of(1e3), ConditionRange::Medium);
        assert_eq!(ConditionRange::of(5e9), ConditionRange::High);
        assert_eq!(decade_of(0.3), 0);
        assert_eq!(decade_of(1e8), 8);
        assert_eq!(decade_of(9.99e8), 8);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn identity_baseline_is_exact() {
        let inst = toy("id", DenseMatrix::identity(5));
        let s = baseline_fp64_on(&[inst], &EvalConfig::default()).unwrap();
        let row = s.range(ConditionRange::Low).unwrap();
        assert_eq!(row.avg_ferr, 0.0);
        assert_eq!(row.xi, None);
    }

    #[test]
    fn csv_round_trip_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let sys = vec![result(10.0, 1e-16, "fp64|fp64|fp64|fp64"), result(2e7, f64::INFINITY, "bf16|bf16|bf16|bf16")];
        let s = summarize("rl", sys, 1e-10, true);
        let [systems, _, _] = write_summary(dir.path(), "rl", &s).unwrap();
        assert_eq!(read_systems_csv(&systems).unwrap(), s.systems);
        write_episodes_csv(
            &dir.path().join(EPISODES_FILE),
            &[EpisodeLog { episode: 1, mean_reward: 1.0, mean_abs_rpe: 2.0, epsilon: 0.5 }],
        )
        .unwrap();
        let inputs = [dir.path().to_path_buf()];
        let files = report(&inputs, dir.path()).unwrap();
        let md = fs::read_to_string(&files.markdown).unwrap();
        assert!(md.contains("| rl | high (1e6-1e9) | 1 | 0% |"));
        let first = fs::read(&files.performance).unwrap();
        report(&inputs, dir.path()).unwrap();
        assert_eq!(fs::read(&files.performance).unwrap(), first);

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            report(&[empty.path().to_path_buf()], empty.path()),
            Err(Error::NothingToReport(_))
        ));
    }
}
