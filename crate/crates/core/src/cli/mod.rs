//! Operator commands: `run`, `sweep`, `adapt` and `plotdata`.
//!
//! Every command that produces results writes into a fresh directory
//! `<out>/<scenario>/<timestamp>/` together with the fully resolved scenario.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::{adapt_scenario, TraceRow};
use crate::costs::CostProfile;
use crate::scenario::Scenario;
use crate::trial::{run_setup, summarize, Heterogeneity, Simulation, TrialOutcome, TrialSetup};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "drhc", version, about = "Decentralized receding-horizon swarm search simulator")]
pub struct Cli {
    /// Root directory for results.
    #[arg(long, env = "DRHC_OUT", default_value = "results", global = true)]
    pub out: PathBuf,
    /// Worker threads for trial batches (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single trial.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
        seed: Option<u64>,
        /// Cost profile JSON replacing the scenario's profile.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Also write message and auction traces.
        #[arg(long)]
        trace: bool,
        /// Record when and by whom each tile was searched.
        #[arg(long)]
        tile_times: bool,
    },
    /// Run `n_seeds` trials per axis value and profile.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        /// Cost profile JSON, or `scenario` for the scenario's own profile. Repeatable.
        #[arg(long)]
        profile: Vec<String>,
    },
    /// Adapt the cost profile with simulated annealing.
    Adapt {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Reshape every sweep.csv under a directory into one long-format table.
    Plotdata {
        /// Results directory (default: the output root).
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Axis {
    Delay,
    VelocityNoise,
    AccelerationNoise,
    NAgents,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Delay => "delay",
            Axis::VelocityNoise => "velocity_noise",
            Axis::AccelerationNoise => "acceleration_noise",
            Axis::NAgents => "n_agents",
        }
    }

    /// Applies an axis value to a scenario.
    pub fn apply(self, scenario: &mut Scenario, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::config("--values", format!("{value} is not a finite value >= 0")));
        }
        match self {
            Axis::Delay => scenario.network.mean_delay = value,
            Axis::VelocityNoise => {
                scenario.heterogeneity.get_or_insert_with(Heterogeneity::default).velocity_noise_sigma = value
            }
            Axis::AccelerationNoise => {
                scenario
                    .heterogeneity
                    .get_or_insert_with(Heterogeneity::default)
                    .acceleration_noise_sigma = value
            }
            Axis::NAgents => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::config("--values", format!("n_agents needs whole numbers >= 1, got {value}")));
                }
                scenario.n_agents = value as usize;
            }
        }
        scenario.validate()
    }
}

/// Creates `<out>/<name>/<timestamp>[-k]`, never reusing an existing directory.
pub fn run_directory(out: &Path, name: &str) -> Result<PathBuf> {
    let parent = out.join(name);
    fs::create_dir_all(&parent)?;
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f").to_string();
    for k in 0.. {
        let dir = if k == 0 {
            parent.join(&stamp)
        } else {
            parent.join(format!("{stamp}-{k}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

/// Reads a cost profile JSON file.
pub fn load_profile(path: &Path) -> Result<CostProfile> {
    let text = fs::read_to_string(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let p: CostProfile = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| Error::config(format!("profile.{}", e.path()), e.inner().to_string()))?;
    p.validate()?;
    Ok(p)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn pool(workers: Option<usize>) -> Result<Option<rayon::ThreadPool>> {
    match workers {
        None => Ok(None),
        Some(0) => Err(Error::config("--workers", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(Some)
            .map_err(|e| Error::Trial(e.to_string())),
    }
}

fn in_pool<T: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> T + Send) -> T {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn run_batch(setup: &TrialSetup, seeds: &[u64]) -> Result<Vec<TrialOutcome>> {
    seeds.par_iter().map(|&s| run_setup(setup, s)).collect()
}

#[derive(Debug, Serialize)]
struct TrialRow<'a> {
    scenario: &'a str,
    profile: &'a str,
    axis: &'a str,
    value: Option<f64>,
    seed: u64,
    duration_s: f64,
    pct_searched: f64,
    collisions: usize,
    #[serde(rename = "E_c")]
    e_c: f64,
}

#[derive(Debug, Serialize)]
struct AuctionRow {
    time: f64,
    row: u32,
    col: u32,
    event: &'static str,
    agent: crate::AgentId,
    bid_value: Option<f64>,
}

/// One aggregate row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub profile: String,
    pub axis: String,
    pub value: f64,
    pub n_trials: usize,
    pub duration_mean: f64,
    pub duration_var: f64,
    pub pct_searched_mean: f64,
    pub pct_searched_var: f64,
    pub collisions_mean: f64,
    pub collisions_var: f64,
    pub e_c_mean: f64,
    pub e_c_var: f64,
}

/// Where a command put its results.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub dir: PathBuf,
    pub summary: String,
}

pub fn execute(cli: Cli) -> Result<Report> {
    let pool = pool(cli.workers)?;
    match cli.command {
        Command::Run {
            scenario,
            seed,
            profile,
            trace,
            tile_times,
        } => cmd_run(&cli.out, &scenario, seed, profile.as_deref(), trace, tile_times),
        Command::Sweep {
            scenario,
            axis,
            values,
            profile,
        } => in_pool(&pool, || cmd_sweep(&cli.out, &scenario, axis, &values, &profile)),
        Command::Adapt { scenario } => in_pool(&pool, || cmd_adapt(&cli.out, &scenario)),
        Command::Plotdata { dir } => cmd_plotdata(dir.as_deref().unwrap_or(&cli.out)),
    }
}

pub fn cmd_run(
    out: &Path,
    scenario_path: &Path,
    seed: Option<u64>,
    profile: Option<&Path>,
    trace: bool,
    tile_times: bool,
) -> Result<Report> {
    let mut scenario = Scenario::load(scenario_path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    if let Some(p) = profile {
        scenario.profile = load_profile(p)?;
    }
    let mut setup = scenario.setup();
    setup.record_tile_times = tile_times;
    let mut sim = Simulation::new(&setup, scenario.seed)?;
    if trace {
        sim.enable_traces();
    }
    let outcome = sim.run();

    let dir = run_directory(out, &scenario.name)?;
    fs::write(dir.join("config.toml"), scenario.to_toml()?)?;
    fs::create_dir(dir.join("trials"))?;
    write_json(&dir.join("trials").join(format!("seed_{}.json", outcome.seed)), &outcome)?;
    write_trials_csv(&dir.join("trials.csv"), &scenario.name, "scenario", None, &[(None, &[outcome.clone()][..])])?;
    if trace {
        let (messages, auctions) = sim.take_traces();
        let mut w = csv::Writer::from_path(dir.join("messages.csv"))?;
        for m in &messages {
            w.serialize(m)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("auctions.csv"))?;
        for a in &auctions {
            w.serialize(AuctionRow {
                time: a.time,
                row: a.tile.0,
                col: a.tile.1,
                event: a.event,
                agent: a.agent,
                bid_value: a.bid_value,
            })?;
        }
        w.flush()?;
    }
    Ok(Report {
        summary: format!(
            "{} seed {}: {:.2} s, {:.1}% searched, {} collisions, E_c {:.4}",
            scenario.name,
            outcome.seed,
            outcome.duration,
            100.0 * outcome.fraction_searched,
            outcome.collisions,
            outcome.heuristic
        ),
        dir,
    })
}

fn write_trials_csv(
    path: &Path,
    scenario: &str,
    profile: &str,
    axis: Option<Axis>,
    groups: &[(Option<f64>, &[TrialOutcome])],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (value, outcomes) in groups {
        for o in *outcomes {
            w.serialize(TrialRow {
                scenario,
                profile,
                axis: axis.map_or("", Axis::as_str),
                value: *value,
                seed: o.seed,
                duration_s: o.duration,
                pct_searched: 100.0 * o.fraction_searched,
                collisions: o.collisions,
                e_c: o.heuristic,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

fn profile_label(spec: &str) -> String {
    if spec == "scenario" {
        return spec.to_string();
    }
    Path::new(spec)
        .file_stem()
        .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn cmd_sweep(out: &Path, scenario_path: &Path, axis: Axis, values: &[f64], profiles: &[String]) -> Result<Report> {
    if values.is_empty() {
        return Err(Error::config("--values", "needs at least one value"));
    }
    let base = Scenario::load(scenario_path)?;
    let mut arms: Vec<(String, CostProfile)> = Vec::new();
    if profiles.is_empty() {
        arms.push(("scenario".into(), base.profile));
    }
    for spec in profiles {
        let p = if spec == "scenario" {
            base.profile
        } else {
            load_profile(Path::new(spec))?
        };
        let mut label = profile_label(spec);
        if arms.iter().any(|(l, _)| *l == label) {
            label = format!("{label}-{}", arms.len());
        }
        arms.push((label, p));
    }
    let mut variants = Vec::with_capacity(values.len());
    for &v in values {
        let mut s = base.clone();
        axis.apply(&mut s, v)?;
        variants.push((v, s));
    }

    let dir = run_directory(out, &base.name)?;
    fs::write(dir.join("config.toml"), base.to_toml()?)?;
    let trials_dir = dir.join("trials");
    fs::create_dir(&trials_dir)?;
    let mut sweep = csv::Writer::from_path(dir.join("sweep.csv"))?;
    let mut trials = csv::Writer::from_path(dir.join("trials.csv"))?;
    let mut lines = Vec::new();
    for (label, profile) in &arms {
        for (v, s) in &variants {
            let mut setup = s.setup();
            setup.profile = *profile;
            let outcomes = run_batch(&setup, &s.seeds())?;
            let sum = summarize(&outcomes)?;
            let sub = trials_dir.join(format!("{label}_{}_{v}", axis.as_str()));
            fs::create_dir(&sub)?;
            for o in &outcomes {
                write_json(&sub.join(format!("seed_{}.json", o.seed)), o)?;
                trials.serialize(TrialRow {
                    scenario: &base.name,
                    profile: label,
                    axis: axis.as_str(),
                    value: Some(*v),
                    seed: o.seed,
                    duration_s: o.duration,
                    pct_searched: 100.0 * o.fraction_searched,
                    collisions: o.collisions,
                    e_c: o.heuristic,
                })?;
            }
            sweep.serialize(SweepRow {
                scenario: base.name.clone(),
                profile: label.clone(),
                axis: axis.as_str().into(),
                value: *v,
                n_trials: sum.n_trials,
                duration_mean: sum.duration.mean,
                duration_var: sum.duration.variance,
                pct_searched_mean: sum.pct_searched.mean,
                pct_searched_var: sum.pct_searched.variance,
                collisions_mean: sum.collisions.mean,
                collisions_var: sum.collisions.variance,
                e_c_mean: sum.e_c.mean,
                e_c_var: sum.e_c.variance,
            })?;
            sweep.flush()?;
            lines.push(format!(
                "{label} {}={v}: mu_t {:.2} s, var {:.2}, {:.1}% searched, {:.2} collisions",
                axis.as_str(),
                sum.duration.mean,
                sum.duration.variance,
                sum.pct_searched.mean,
                sum.collisions.mean
            ));
        }
    }
    trials.flush()?;
    Ok(Report {
        dir,
        summary: lines.join("\n"),
    })
}

pub fn cmd_adapt(out: &Path, scenario_path: &Path) -> Result<Report> {
    let scenario = Scenario::load(scenario_path)?;
    let asa = scenario
        .asa
        .ok_or_else(|| Error::config("asa", "the scenario has no [asa] section"))?;
    let dir = run_directory(out, &scenario.name)?;
    fs::write(dir.join("config.toml"), scenario.to_toml()?)?;
    // the header is written up front so that an interrupted run still has it
    let mut trace = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(dir.join("adapt_trace.csv"))?;
    trace.write_record(trace_header())?;
    trace.flush()?;
    let mut write_err = None;
    let result = adapt_scenario(&asa, &scenario.setup(), |row: &TraceRow| {
        let r = trace.serialize(row).and_then(|_| trace.flush().map_err(csv::Error::from));
        if let Err(e) = r {
            write_err.get_or_insert(e);
        }
    });
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let result = result?;
    write_json(&dir.join("profile.json"), &result.best_profile)?;
    let mut f = File::create(dir.join("adapt_summary.json"))?;
    writeln!(
        f,
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "initial_e_c": result.initial_e_c,
            "best_e_c": result.best_e_c,
            "iterations": result.trace.len(),
            "initial_profile": result.initial_profile,
            "best_profile": result.best_profile,
        }))?
    )?;
    Ok(Report {
        dir,
        summary: format!(
            "initial E_c {:.4} -> final E_c {:.4} after {} iterations",
            result.initial_e_c,
            result.best_e_c,
            result.trace.len()
        ),
    })
}

fn trace_header() -> [&'static str; 10] {
    [
        "iteration",
        "temperature",
        "w_eta",
        "w_z",
        "w_g",
        "delta_min",
        "c_penalty",
        "e_c",
        "accepted",
        "best_e_c",
    ]
}

/// One row of the long-format plot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub scenario: String,
    pub axis: String,
    pub value: f64,
    pub metric: String,
    pub mean: f64,
    pub variance: f64,
}

fn find_sweeps(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if e.file_type()?.is_dir() {
            find_sweeps(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == "sweep.csv") {
            found.push(p);
        }
    }
    Ok(())
}

fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<SweepRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    Ok(rows)
}

/// Long-format rows for a set of sweep rows, grouped by scenario.
pub fn reshape(rows: &[SweepRow]) -> Vec<PlotRow> {
    let mut out = Vec::with_capacity(rows.len() * 4);
    for r in rows {
        let scenario = if r.profile == "scenario" {
            r.scenario.clone()
        } else {
            format!("{}:{}", r.scenario, r.profile)
        };
        for (metric, mean, variance) in [
            ("duration", r.duration_mean, r.duration_var),
            ("pct_searched", r.pct_searched_mean, r.pct_searched_var),
            ("collisions", r.collisions_mean, r.collisions_var),
            ("e_c", r.e_c_mean, r.e_c_var),
        ] {
            out.push(PlotRow {
                scenario: scenario.clone(),
                axis: r.axis.clone(),
                value: r.value,
                metric: metric.into(),
                mean,
                variance,
            });
        }
    }
    // stable: keeps file order within a scenario
    out.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    out
}

pub fn cmd_plotdata(dir: &Path) -> Result<Report> {
    let mut files = Vec::new();
    if dir.is_dir() {
        find_sweeps(dir, &mut files)?;
    }
    let mut rows = Vec::new();
    let mut skipped = 0;
    for f in &files {
        match read_sweep(f) {
            Ok(r) => rows.extend(r),
            Err(e) => {
                skipped += 1;
                eprintln!("warning: skipping {}: {e}", f.display());
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty("no results: no readable sweep.csv found"));
    }
    let long = reshape(&rows);
    let path = dir.join("plotdata.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &long {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(Report {
        dir: dir.to_path_buf(),
        summary: format!(
            "{} rows from {} sweep files ({} skipped) -> {}",
            long.len(),
            files.len() - skipped,
            skipped,
            path.display()
        ),
    })
}

/// Process exit code for an error: 2 for configuration problems, 3 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 2,
        _ => 3,
    }
}
