use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pssa_core::filters::{FilterError, Method, RelaxationConfig};
use pssa_core::metrics::{csv_row, MetricsReport};
use pssa_core::qp::SlackNorm;
use pssa_core::simulator::{
    init_scenario, load_preset, preset_names, scripted_scenario, step, EpisodeLog, ScenarioConfig, SimError,
};
use rayon::prelude::*;

use crate::error::CliError;
use crate::manifest::{build_id, unix_millis, BenchManifest, RunManifest};
use crate::workers::worker_pool;

pub const LOG_FILE: &str = "log.ndjson";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const QP_DIR: &str = "qp";

/// A scenario config together with where it came from.
#[derive(Debug, Clone)]
pub struct ResolvedTask {
    pub name: String,
    pub source: String,
    pub config: ScenarioConfig,
}

/// Looks `task` up as a preset, then as a scripted scenario, then as a
/// scenario file.
pub fn resolve_task(task: &str) -> Result<ResolvedTask, CliError> {
    if let Ok(config) = load_preset(task) {
        return Ok(ResolvedTask {
            name: task.to_string(),
            source: format!("preset:{task}"),
            config,
        });
    }
    if let Some(sc) = scripted_scenario(task) {
        return Ok(ResolvedTask {
            name: task.to_string(),
            source: format!("scripted:{task}"),
            config: sc.config,
        });
    }
    let path = Path::new(task);
    if path.extension().is_some_and(|e| e == "json") && path.is_file() {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let config = ScenarioConfig::from_json(&text)?;
        return Ok(ResolvedTask {
            name: config.name.clone(),
            source: path.display().to_string(),
            config,
        });
    }
    Err(CliError::Config(format!(
        "unknown task '{task}'; available presets: {}",
        preset_names().join(", ")
    )))
}

/// Command-line adjustments applied on top of a task's config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub qs_scale: Option<f64>,
    pub p: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig, seed: u64) {
        cfg.seed = seed;
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
    }

    pub fn method_config(&self, method: Method, dofs: usize) -> Result<RelaxationConfig, CliError> {
        let mut mc = RelaxationConfig::for_method(method, dofs);
        if let Some(q) = self.qs_scale {
            mc.qs_scale = q;
        }
        if let Some(p) = self.p {
            mc.p = SlackNorm::from_order(p).ok_or_else(|| CliError::Config(format!("--p must be 1 or 2, got {p}")))?;
        }
        mc.validate(dofs).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(mc)
    }
}

/// Slack weight scale reported in CSV rows; naive SSA has none.
pub fn reported_qs(method: Method, mc: &RelaxationConfig) -> Option<f64> {
    match method {
        Method::Ssa => None,
        Method::Rssa | Method::Pssa => Some(mc.qs_scale),
    }
}

pub fn seed_dir(out: &Path, task: &str, method: Method, seed: u64) -> PathBuf {
    out.join(task).join(method.name()).join(format!("seed{seed}"))
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub report: MetricsReport,
    pub csv_row: String,
}

/// Settings of one bench invocation.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub task: ResolvedTask,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub overrides: Overrides,
    pub out: PathBuf,
    pub dump_qp: bool,
}

/// Runs every seed on the worker pool; results come back in seed order.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchOutcome>, CliError> {
    let pool = worker_pool()?;
    let results: Vec<Result<BenchOutcome, CliError>> = pool.install(|| {
        spec.seeds
            .par_iter()
            .map(|&seed| {
                let mut cfg = spec.task.config.clone();
                spec.overrides.apply(&mut cfg, seed);
                let world = init_scenario(&cfg)?;
                let mc = spec.overrides.method_config(spec.method, world.model.dofs)?;
                let dir = seed_dir(&spec.out, &spec.task.name, spec.method, seed);
                run_seed(&spec.task, &cfg, spec.method, &mc, &dir, spec.dump_qp)
            })
            .collect()
    });
    results.into_iter().collect()
}

fn write_qps(dir: &Path, step: usize, problems: &[pssa_core::qp::QpProblem]) -> Result<(), CliError> {
    let qp_dir = dir.join(QP_DIR);
    fs::create_dir_all(&qp_dir).map_err(CliError::io(&qp_dir))?;
    for (i, p) in problems.iter().enumerate() {
        let path = qp_dir.join(format!("step{step:05}_{i}.qp"));
        fs::write(&path, p.to_text()).map_err(CliError::io(&path))?;
    }
    Ok(())
}

/// Runs one episode and writes log, metrics and manifest into `dir`. With
/// `dump_qp`, the QPs of infeasible or failing steps go to `dir/qp/`.
pub fn run_seed(
    task: &ResolvedTask,
    cfg: &ScenarioConfig,
    method: Method,
    mc: &RelaxationConfig,
    dir: &Path,
    dump_qp: bool,
) -> Result<BenchOutcome, CliError> {
    let started = unix_millis();
    let clock = Instant::now();
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut world = init_scenario(cfg)?;
    let mut log = EpisodeLog::new(&world, method, mc);
    let mut fault = None;
    for _ in 0..cfg.steps {
        if dump_qp {
            world.solver.start_recording();
        }
        let index = world.step_index;
        let result = step(&mut world, method, mc);
        if dump_qp {
            let problems = world.solver.take_recorded();
            if !matches!(&result, Ok(r) if r.feasible) {
                write_qps(dir, index, &problems)?;
            }
        }
        match result {
            Ok(r) => log.records.push(r),
            Err(e) => {
                fault = Some((index, e));
                break;
            }
        }
    }

    let log_path = dir.join(LOG_FILE);
    let file = fs::File::create(&log_path).map_err(CliError::io(&log_path))?;
    log.write_ndjson(BufWriter::new(file)).map_err(CliError::io(&log_path))?;
    let mut files = vec![LOG_FILE.to_string()];

    let outcome = match fault {
        Some((index, e)) => Err(step_error(index, e)),
        None => {
            let report = MetricsReport::from_log(&log)?;
            let path = dir.join(METRICS_FILE);
            let mut text = serde_json::to_string_pretty(&report).map_err(|source| CliError::Json {
                path: path.clone(),
                source,
            })?;
            text.push('\n');
            fs::write(&path, text).map_err(CliError::io(&path))?;
            files.push(METRICS_FILE.to_string());
            let row = csv_row(&task.name, method.name(), reported_qs(method, mc), cfg.seed, &report);
            Ok(BenchOutcome {
                seed: cfg.seed,
                dir: dir.to_path_buf(),
                report,
                csv_row: row,
            })
        }
    };

    files.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest::Bench(BenchManifest {
        task: task.name.clone(),
        config_source: task.source.clone(),
        config: cfg.clone(),
        seed: cfg.seed,
        method,
        method_config: mc.clone(),
        dump_qp,
        output_dir: dir.display().to_string(),
        files,
        status: match &outcome {
            Ok(_) => "ok".to_string(),
            Err(e) => e.to_string(),
        },
        build: build_id(),
        started_unix_ms: started,
        wall_clock_s: clock.elapsed().as_secs_f64(),
    });
    manifest.write(&dir.join(MANIFEST_FILE))?;
    outcome
}

fn step_error(step: usize, e: SimError) -> CliError {
    match e {
        SimError::Filter(err @ FilterError::PhaseTwoInconsistent { .. }) => CliError::PhaseTwo {
            step,
            message: err.to_string(),
        },
        other => CliError::Sim(other),
    }
}
