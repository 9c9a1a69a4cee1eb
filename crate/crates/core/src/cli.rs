//! Command-line front end: `generate` materializes an instance file,
//! `run` sweeps (seed, gamma) cells of the online algorithm under a chosen
//! arrival model, `analyze` aggregates the sweep into report files.
//!
//! A run directory is self-contained: it holds the canonical instance, the
//! resolved configuration, one CSV series and one JSON summary per cell,
//! and optional replayable traces. Cells whose summary already matches the
//! effective cell configuration are skipped on rerun, and every file is
//! written atomically (temp + rename), so interrupted sweeps resume
//! cleanly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    aggregate, compute_metrics, loglog_slope, unevenness, MetricSeries, UnevennessReport,
};
use crate::dual_learner::{
    dual_regret, estimate_dual_optimum, run_online, run_online_boxed, PriceNormCheck,
    RunTrace, ScheduleMode, StepSchedule,
};
use crate::error::{Error, Result};
use crate::input_models::{
    batched_order, grouped_permutation, identity_order, named_partition, uniform_permutation,
    ArrivalOrder, PartitionKind,
};
use crate::instances::{
    gen_assortment_visibility, gen_fair_assignment, gen_fair_knapsack, gen_two_phase,
    instance_hash, read_binary_path, read_jsonl_path, write_binary_path, write_jsonl,
    write_jsonl_path, Instance, TwoPhaseScenario,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ODMP_OUT_DIR";

const SERIES_HEADER: &str = "t,reward_avg,goalvio_avg,p_norm,eta";

#[derive(Debug, Parser)]
#[command(
    name = "odmp",
    version,
    about = "Online decision making with soft aggregate goals: generate instances, run sweeps, analyze results"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate an instance file (plus metadata) from a config.
    Generate(GenerateArgs),
    /// Run the online algorithm over a (seed, gamma) sweep.
    Run(RunArgs),
    /// Aggregate a run directory into report files.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML config with an [instance] table.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default: config [output].dir, then $ODMP_OUT_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the packed binary form next to the JSON-lines file.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config describing instance, schedule, input model, and outputs.
    #[arg(long)]
    pub config: PathBuf,
    /// Permutation seeds, comma separated; overrides the config list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Gamma sweep values, comma separated; overrides the config value.
    #[arg(long = "gamma-list", value_delimiter = ',')]
    pub gamma_list: Option<Vec<f64>>,
    /// Worker threads for the sweep (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (default: config [output].dir, then $ODMP_OUT_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run directory to aggregate (default: $ODMP_OUT_DIR).
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Generate(args) => cmd_generate(&args),
        Cmd::Run(args) => cmd_run(&args),
        Cmd::Analyze(args) => cmd_analyze(&args),
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub instance: InstanceSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub input_model: InputModelSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    /// Existing instance file (.jsonl or .bin); exclusive with `family`.
    pub path: Option<PathBuf>,
    /// Generator family: fair_knapsack | assortment_visibility |
    /// fair_assignment | two_phase_budget.
    pub family: Option<String>,
    /// Generator parameters, merged over the family defaults.
    pub params: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub mode: ScheduleMode,
    pub gamma: f64,
    /// Constant-mode horizon; defaults to the instance horizon.
    pub horizon: Option<usize>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            mode: ScheduleMode::Diminishing,
            gamma: 1.0,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// Steps in generated order.
    Natural,
    /// One uniform random permutation per seed.
    Uniform,
    /// Independent uniform permutation within each partition group.
    Grouped,
    /// Deterministic group-contiguous order.
    Batched,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputModelSection {
    pub kind: InputKind,
    pub partition: Option<PartitionKind>,
    /// Period for the k_periodic partition.
    pub k: Option<usize>,
    pub seeds: Vec<u64>,
}

impl Default for InputModelSection {
    fn default() -> Self {
        InputModelSection {
            kind: InputKind::Natural,
            partition: None,
            k: None,
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Run the box-restricted variant instead of the cone projection.
    pub boxed: bool,
    /// Per-coordinate box bounds for the boxed variant.
    pub y_lower: Option<f64>,
    pub y_upper: Option<f64>,
    /// Dump a replayable JSON trace per cell (enables dual-regret reports).
    pub full_traces: bool,
    /// Flush cadence for series files, in steps.
    pub checkpoint_every: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            boxed: false,
            y_lower: None,
            y_upper: None,
            full_traces: false,
            checkpoint_every: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Iterations for the dual-optimum estimator.
    pub estimator_iters: usize,
    pub estimator_seed: u64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            estimator_iters: 60,
            estimator_seed: 0,
        }
    }
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve_out_dir(flag: &Option<PathBuf>, cfg: &OutputSection) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.clone());
    }
    if let Some(p) = &cfg.dir {
        return Ok(p.clone());
    }
    if let Ok(p) = std::env::var(OUT_DIR_ENV) {
        return Ok(PathBuf::from(p));
    }
    Err(Error::Config(format!(
        "no output directory: pass --out, set [output].dir, or export {OUT_DIR_ENV}"
    )))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds an instance from a family name and parameter object.
pub fn build_instance(family: &str, params: serde_json::Value) -> Result<Instance> {
    match family {
        "fair_knapsack" => gen_fair_knapsack(&serde_json::from_value(params)?),
        "assortment_visibility" => gen_assortment_visibility(&serde_json::from_value(params)?),
        "fair_assignment" => gen_fair_assignment(&serde_json::from_value(params)?),
        "two_phase_budget" => {
            #[derive(Deserialize)]
            struct Params {
                horizon: usize,
                scenario: TwoPhaseScenario,
            }
            let p: Params = serde_json::from_value(params)?;
            gen_two_phase(p.horizon, p.scenario)
        }
        other => Err(Error::Config(format!("unknown instance family '{other}'"))),
    }
}

fn obtain_instance(section: &InstanceSection) -> Result<Instance> {
    match (&section.path, &section.family) {
        (Some(path), None) => {
            let inst = if path.extension().is_some_and(|e| e == "bin") {
                read_binary_path(path)?
            } else {
                read_jsonl_path(path)?
            };
            Ok(inst)
        }
        (None, Some(family)) => {
            let params = section
                .params
                .clone()
                .unwrap_or_else(|| serde_json::Value::Object(Default::default()));
            build_instance(family, params)
        }
        (Some(_), Some(_)) => Err(Error::Config(
            "[instance] must set either path or family, not both".into(),
        )),
        (None, None) => Err(Error::Config(
            "[instance] must set path or family".into(),
        )),
    }
}

#[derive(Serialize)]
struct GenerateMeta<'a> {
    family: &'a str,
    seed: u64,
    horizon: usize,
    m: usize,
    instance_hash: &'a str,
    config: &'a serde_json::Value,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    if cfg.instance.path.is_some() {
        return Err(Error::Config(
            "generate needs [instance].family, not an existing path".into(),
        ));
    }
    let inst = obtain_instance(&cfg.instance)?;
    inst.validate()?;
    let hash = instance_hash(&inst)?;
    let out_dir = resolve_out_dir(&args.out, &cfg.output)?;
    std::fs::create_dir_all(&out_dir)?;

    let stem = format!("{}_seed{}", inst.family, inst.seed);
    let jsonl = out_dir.join(format!("{stem}.jsonl"));
    let tmp = tmp_path(&jsonl);
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write_jsonl(&inst, &mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, &jsonl)?;
    if args.binary {
        let bin = out_dir.join(format!("{stem}.bin"));
        let tmp = tmp_path(&bin);
        write_binary_path(&inst, &tmp)?;
        std::fs::rename(&tmp, &bin)?;
        println!("wrote {}", bin.display());
    }
    let meta = GenerateMeta {
        family: &inst.family,
        seed: inst.seed,
        horizon: inst.horizon(),
        m: inst.m(),
        instance_hash: &hash,
        config: &inst.config,
    };
    write_json_atomic(&out_dir.join(format!("{stem}.meta.json")), &meta)?;
    println!("wrote {} (sha256 {})", jsonl.display(), &hash[..16]);
    Ok(())
}

/// Everything that feeds one cell's outputs; its hash gates resume skips.
#[derive(Debug, Clone, Serialize)]
struct CellConfig<'a> {
    instance_hash: &'a str,
    schedule_mode: ScheduleMode,
    schedule_horizon: Option<usize>,
    gamma: f64,
    seed: u64,
    input_kind: InputKind,
    partition: Option<PartitionKind>,
    k: Option<usize>,
    boxed: bool,
    y_lower: Option<f64>,
    y_upper: Option<f64>,
    full_traces: bool,
}

/// Sweep-level manifest written next to the cells for `analyze`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub family: String,
    pub instance_file: String,
    pub instance_hash: String,
    pub horizon: usize,
    pub m: usize,
    pub schedule_mode: ScheduleMode,
    pub schedule_horizon: Option<usize>,
    pub gammas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub input_kind: InputKind,
    pub partition: Option<PartitionKind>,
    pub k: Option<usize>,
    pub boxed: bool,
    pub y_lower: Option<f64>,
    pub y_upper: Option<f64>,
    pub full_traces: bool,
    pub estimator_iters: usize,
    pub estimator_seed: u64,
}

/// Per-cell scalar results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub family: String,
    pub gamma: f64,
    pub seed: u64,
    pub input_model: String,
    pub horizon: usize,
    pub m: usize,
    pub instance_hash: String,
    pub config_hash: String,
    pub series_file: String,
    pub trace_file: Option<String>,
    pub total_reward: f64,
    pub final_reward_avg: f64,
    pub final_goalvio_avg: f64,
    pub final_p_norm: f64,
    pub price_norm_check: Option<PriceNormCheck>,
    pub box_warnings: usize,
}

fn cell_tag(gamma: f64, seed: u64) -> String {
    format!("g{gamma}_s{seed}")
}

fn arrival_order(
    kind: InputKind,
    partition: Option<PartitionKind>,
    k: Option<usize>,
    t_total: usize,
    seed: u64,
) -> Result<ArrivalOrder> {
    match kind {
        InputKind::Natural => Ok(identity_order(t_total)),
        InputKind::Uniform => Ok(uniform_permutation(t_total, seed)),
        InputKind::Grouped | InputKind::Batched => {
            let pk = partition.ok_or_else(|| {
                Error::Config("grouped/batched input models need a partition".into())
            })?;
            let p = named_partition(pk, t_total, k)?;
            Ok(match kind {
                InputKind::Grouped => grouped_permutation(&p, seed),
                _ => batched_order(&p),
            })
        }
    }
}

fn write_series_csv(path: &Path, ms: &MetricSeries, checkpoint_every: usize) -> Result<()> {
    let tmp = tmp_path(path);
    let mut w = BufWriter::new(File::create(&tmp)?);
    writeln!(w, "{SERIES_HEADER}")?;
    for i in 0..ms.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            ms.t[i], ms.reward_avg[i], ms.goalvio_avg[i], ms.p_norm[i], ms.eta[i]
        )?;
        if checkpoint_every > 0 && (i + 1) % checkpoint_every == 0 {
            w.flush()?;
        }
    }
    w.flush()?;
    drop(w);
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<MetricSeries> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty series file", path.display())))??;
    if header != SERIES_HEADER {
        return Err(Error::Format(format!(
            "{}: unexpected header '{header}'",
            path.display()
        )));
    }
    let mut ms = MetricSeries {
        t: Vec::new(),
        reward_avg: Vec::new(),
        goalvio_avg: Vec::new(),
        p_norm: Vec::new(),
        eta: Vec::new(),
    };
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Format(format!(
                "{}: bad series row '{line}'",
                path.display()
            )));
        }
        let bad = |e: std::num::ParseFloatError| {
            Error::Format(format!("{}: {e} in '{line}'", path.display()))
        };
        ms.t.push(
            cols[0]
                .parse()
                .map_err(|e| Error::Format(format!("{}: {e} in '{line}'", path.display())))?,
        );
        ms.reward_avg.push(cols[1].parse().map_err(bad)?);
        ms.goalvio_avg.push(cols[2].parse().map_err(bad)?);
        ms.p_norm.push(cols[3].parse().map_err(bad)?);
        ms.eta.push(cols[4].parse().map_err(bad)?);
    }
    Ok(ms)
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let out_dir = resolve_out_dir(&args.out, &cfg.output)?;
    std::fs::create_dir_all(&out_dir)?;

    let inst = obtain_instance(&cfg.instance)?;
    inst.validate()?;
    let hash = instance_hash(&inst)?;
    write_jsonl_path(&inst, tmp_path(&out_dir.join("instance.jsonl")))?;
    std::fs::rename(
        tmp_path(&out_dir.join("instance.jsonl")),
        out_dir.join("instance.jsonl"),
    )?;

    let seeds = args
        .seeds
        .clone()
        .unwrap_or_else(|| cfg.input_model.seeds.clone());
    if seeds.is_empty() {
        return Err(Error::Config("seed list must be nonempty".into()));
    }
    let gammas = args
        .gamma_list
        .clone()
        .unwrap_or_else(|| vec![cfg.schedule.gamma]);
    if gammas.is_empty() {
        return Err(Error::Config("gamma list must be nonempty".into()));
    }
    if gammas.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err(Error::Config(format!("gammas must be positive: {gammas:?}")));
    }
    if cfg.run.boxed && (cfg.run.y_lower.is_none() || cfg.run.y_upper.is_none()) {
        return Err(Error::Config(
            "boxed runs need [run].y_lower and [run].y_upper".into(),
        ));
    }

    let schedule_horizon = match cfg.schedule.mode {
        ScheduleMode::Constant => Some(cfg.schedule.horizon.unwrap_or(inst.horizon())),
        ScheduleMode::Diminishing => cfg.schedule.horizon,
    };
    let resolved = ResolvedRun {
        family: inst.family.clone(),
        instance_file: "instance.jsonl".into(),
        instance_hash: hash.clone(),
        horizon: inst.horizon(),
        m: inst.m(),
        schedule_mode: cfg.schedule.mode,
        schedule_horizon,
        gammas: gammas.clone(),
        seeds: seeds.clone(),
        input_kind: cfg.input_model.kind,
        partition: cfg.input_model.partition,
        k: cfg.input_model.k,
        boxed: cfg.run.boxed,
        y_lower: cfg.run.y_lower,
        y_upper: cfg.run.y_upper,
        full_traces: cfg.run.full_traces,
        estimator_iters: cfg.analysis.estimator_iters,
        estimator_seed: cfg.analysis.estimator_seed,
    };
    write_json_atomic(&out_dir.join("resolved_config.json"), &resolved)?;

    let cells: Vec<(f64, u64)> = gammas
        .iter()
        .flat_map(|&g| seeds.iter().map(move |&s| (g, s)))
        .collect();

    let run_cell = |&(gamma, seed): &(f64, u64)| -> Result<()> {
        let tag = cell_tag(gamma, seed);
        let summary_path = out_dir.join(format!("summary_{tag}.json"));
        let cell_cfg = CellConfig {
            instance_hash: &hash,
            schedule_mode: cfg.schedule.mode,
            schedule_horizon,
            gamma,
            seed,
            input_kind: cfg.input_model.kind,
            partition: cfg.input_model.partition,
            k: cfg.input_model.k,
            boxed: cfg.run.boxed,
            y_lower: cfg.run.y_lower,
            y_upper: cfg.run.y_upper,
            full_traces: cfg.run.full_traces,
        };
        let config_hash = sha256_hex(&serde_json::to_vec(&cell_cfg)?);
        if let Ok(file) = File::open(&summary_path) {
            if let Ok(prev) = serde_json::from_reader::<_, CellSummary>(BufReader::new(file)) {
                if prev.config_hash == config_hash {
                    println!("cell {tag}: up to date, skipped");
                    return Ok(());
                }
            }
        }

        let order = arrival_order(
            cfg.input_model.kind,
            cfg.input_model.partition,
            cfg.input_model.k,
            inst.horizon(),
            seed,
        )?;
        let steps = order.apply(&inst.steps)?;
        let sched = StepSchedule {
            gamma,
            mode: cfg.schedule.mode,
            horizon: schedule_horizon,
        };
        let trace = if cfg.run.boxed {
            let lo = vec![cfg.run.y_lower.unwrap(); inst.m()];
            let hi = vec![cfg.run.y_upper.unwrap(); inst.m()];
            run_online_boxed(&steps, &inst.goal, &lo, &hi, &sched, inst.constants.clone())?
        } else {
            run_online(&steps, &inst.goal, &sched, inst.constants.clone())?
        };
        let metrics = compute_metrics(&trace);

        let series_file = format!("series_{tag}.csv");
        write_series_csv(&out_dir.join(&series_file), &metrics, cfg.run.checkpoint_every)?;
        let trace_file = if cfg.run.full_traces {
            let name = format!("trace_{tag}.json");
            write_json_atomic(&out_dir.join(&name), &trace)?;
            Some(name)
        } else {
            None
        };

        let summary = CellSummary {
            family: inst.family.clone(),
            gamma,
            seed,
            input_model: order.provenance().to_string(),
            horizon: inst.horizon(),
            m: inst.m(),
            instance_hash: hash.clone(),
            config_hash,
            series_file,
            trace_file,
            total_reward: trace.total_reward(),
            final_reward_avg: metrics.final_reward_avg().unwrap_or(0.0),
            final_goalvio_avg: metrics.final_goalvio_avg().unwrap_or(0.0),
            final_p_norm: metrics.p_norm.last().copied().unwrap_or(0.0),
            price_norm_check: trace.price_norm_check(),
            box_warnings: trace.box_warnings,
        };
        write_json_atomic(&summary_path, &summary)?;
        println!(
            "cell {tag}: reward_avg={:.6} goalvio_avg={:.6}",
            summary.final_reward_avg, summary.final_goalvio_avg
        );
        Ok(())
    };

    let results: Vec<Result<()>> = if let Some(workers) = args.workers {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    } else {
        cells.par_iter().map(run_cell).collect()
    };
    for r in results {
        r?;
    }
    println!("run complete: {} cells in {}", cells.len(), out_dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct GammaReport {
    pub gamma: f64,
    pub seeds: usize,
    pub final_reward_mean: f64,
    pub final_reward_min: f64,
    pub final_reward_max: f64,
    pub final_goalvio_mean: f64,
    pub final_goalvio_min: f64,
    pub final_goalvio_max: f64,
    /// Log-log slope of mean goal violation over [T/10, T]; absent when the
    /// series reaches zero inside the window.
    pub goalvio_slope: Option<f64>,
    pub aggregate_file: String,
}

#[derive(Debug, Serialize)]
struct UnevennessRow {
    gamma: f64,
    group_w: Vec<f64>,
    total: f64,
}

#[derive(Debug, Serialize)]
struct UnevennessSection {
    partition: PartitionKind,
    k: Option<usize>,
    per_gamma: Vec<UnevennessRow>,
}

#[derive(Debug, Serialize)]
struct DualCell {
    gamma: f64,
    seed: u64,
    dual_regret: f64,
}

#[derive(Debug, Serialize)]
struct DualSection {
    zf_upper: f64,
    estimator_iters: usize,
    mean_dual_regret: f64,
    cells: Vec<DualCell>,
}

#[derive(Debug, Serialize)]
struct Report {
    family: String,
    instance_hash: String,
    horizon: usize,
    m: usize,
    per_gamma: Vec<GammaReport>,
    unevenness: Option<UnevennessSection>,
    dual: Option<DualSection>,
    dual_skipped: Option<String>,
}

fn write_aggregate_csv(path: &Path, agg: &crate::analysis::AggregateSeries) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(
        buf,
        "t,reward_avg_mean,reward_avg_min,reward_avg_max,goalvio_avg_mean,goalvio_avg_min,goalvio_avg_max,p_norm_mean,p_norm_min,p_norm_max"
    )?;
    for i in 0..agg.t.len() {
        writeln!(
            buf,
            "{},{},{},{},{},{},{},{},{},{}",
            agg.t[i],
            agg.reward_avg.mean[i],
            agg.reward_avg.min[i],
            agg.reward_avg.max[i],
            agg.goalvio_avg.mean[i],
            agg.goalvio_avg.min[i],
            agg.goalvio_avg.max[i],
            agg.p_norm.mean[i],
            agg.p_norm.min[i],
            agg.p_norm.max[i]
        )?;
    }
    write_atomic(path, &buf)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let dir = match &args.dir {
        Some(d) => d.clone(),
        None => std::env::var(OUT_DIR_ENV).map(PathBuf::from).map_err(|_| {
            Error::Config(format!("no run directory: pass --dir or export {OUT_DIR_ENV}"))
        })?,
    };
    let resolved: ResolvedRun = serde_json::from_reader(BufReader::new(File::open(
        dir.join("resolved_config.json"),
    )?))?;
    let inst = read_jsonl_path(dir.join(&resolved.instance_file))?;
    let inst_hash = instance_hash(&inst)?;
    if inst_hash != resolved.instance_hash {
        return Err(Error::Format(format!(
            "instance file hash {} does not match manifest {}",
            &inst_hash[..16],
            &resolved.instance_hash[..16]
        )));
    }

    // Cells grouped by gamma, keyed by bit pattern to keep f64 keys exact.
    let mut by_gamma: BTreeMap<u64, Vec<CellSummary>> = BTreeMap::new();
    for &gamma in &resolved.gammas {
        for &seed in &resolved.seeds {
            let tag = cell_tag(gamma, seed);
            let path = dir.join(format!("summary_{tag}.json"));
            let summary: CellSummary = serde_json::from_reader(BufReader::new(
                File::open(&path).map_err(|e| {
                    Error::Config(format!("missing cell summary {}: {e}", path.display()))
                })?,
            ))?;
            by_gamma.entry(gamma.to_bits()).or_default().push(summary);
        }
    }

    let t_total = resolved.horizon;
    let window = (t_total / 10).max(1)..=t_total;
    let mut per_gamma = Vec::new();
    for summaries in by_gamma.values() {
        let gamma = summaries[0].gamma;
        let series: Vec<MetricSeries> = summaries
            .iter()
            .map(|s| read_series_csv(&dir.join(&s.series_file)))
            .collect::<Result<_>>()?;
        let agg = aggregate(&series)?;
        let aggregate_file = format!("aggregate_g{gamma}.csv");
        write_aggregate_csv(&dir.join(&aggregate_file), &agg)?;
        let slope = loglog_slope(&agg.t, &agg.goalvio_avg.mean, window.clone())?;
        let last = agg.t.len() - 1;
        per_gamma.push(GammaReport {
            gamma,
            seeds: summaries.len(),
            final_reward_mean: agg.reward_avg.mean[last],
            final_reward_min: agg.reward_avg.min[last],
            final_reward_max: agg.reward_avg.max[last],
            final_goalvio_mean: agg.goalvio_avg.mean[last],
            final_goalvio_min: agg.goalvio_avg.min[last],
            final_goalvio_max: agg.goalvio_avg.max[last],
            goalvio_slope: slope.is_finite().then_some(slope),
            aggregate_file,
        });
        println!(
            "gamma {gamma}: goalvio mean {:.6}, reward mean {:.6}, slope {}",
            per_gamma.last().unwrap().final_goalvio_mean,
            per_gamma.last().unwrap().final_reward_mean,
            per_gamma
                .last()
                .unwrap()
                .goalvio_slope
                .map_or("n/a (hit zero)".to_string(), |s| format!("{s:.3}")),
        );
    }

    let unevenness_section = match resolved.partition {
        Some(pk) => {
            let partition = named_partition(pk, t_total, resolved.k)?;
            let mut rows = Vec::new();
            for &gamma in &resolved.gammas {
                let sched = StepSchedule {
                    gamma,
                    mode: resolved.schedule_mode,
                    horizon: resolved.schedule_horizon,
                };
                let rep: UnevennessReport = unevenness(&partition, &sched, resolved.m)?;
                rows.push(UnevennessRow {
                    gamma,
                    group_w: rep.group_w,
                    total: rep.total,
                });
            }
            Some(UnevennessSection {
                partition: pk,
                k: resolved.k,
                per_gamma: rows,
            })
        }
        None => None,
    };

    let mut dual = None;
    let mut dual_skipped = None;
    if resolved.full_traces {
        let (_, zf_upper) = estimate_dual_optimum(
            &inst.steps,
            &inst.goal,
            resolved.estimator_iters,
            resolved.estimator_seed,
        )?;
        let mut cells = Vec::new();
        let mut total = 0.0;
        for summaries in by_gamma.values() {
            for s in summaries {
                let Some(trace_file) = &s.trace_file else {
                    return Err(Error::Format(format!(
                        "summary for cell g{}_s{} lacks a trace file",
                        s.gamma, s.seed
                    )));
                };
                let trace: RunTrace =
                    serde_json::from_reader(BufReader::new(File::open(dir.join(trace_file))?))?;
                let regret = dual_regret(&trace, zf_upper);
                total += regret;
                cells.push(DualCell {
                    gamma: s.gamma,
                    seed: s.seed,
                    dual_regret: regret,
                });
            }
        }
        let mean = total / cells.len() as f64;
        println!(
            "dual: zF upper {zf_upper:.6}, mean dual regret {mean:.6} over {} cells",
            cells.len()
        );
        dual = Some(DualSection {
            zf_upper,
            estimator_iters: resolved.estimator_iters,
            mean_dual_regret: mean,
            cells,
        });
    } else {
        dual_skipped = Some(
            "dual regret needs replayable traces; rerun with [run].full_traces = true".into(),
        );
    }

    let report = Report {
        family: resolved.family.clone(),
        instance_hash: resolved.instance_hash.clone(),
        horizon: t_total,
        m: resolved.m,
        per_gamma,
        unevenness: unevenness_section,
        dual,
        dual_skipped,
    };
    let report_path = dir.join("report.json");
    write_json_atomic(&report_path, &report)?;
    println!("report: {}", report_path.display());
    Ok(())
}
