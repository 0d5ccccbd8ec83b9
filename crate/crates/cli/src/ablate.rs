use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pssa_core::filters::{Method, RelaxationConfig};
use pssa_core::metrics::{csv_header, csv_row, pareto_front, MetricsReport, ParetoPoint, CSV_COLUMNS};
use pssa_core::qp::SlackNorm;
use pssa_core::simulator::{fmt_float, init_scenario, run_world, ScenarioConfig};
use rayon::prelude::*;

use crate::bench::{ResolvedTask, MANIFEST_FILE};
use crate::error::CliError;
use crate::manifest::{build_id, unix_millis, AblateManifest, RunManifest};
use crate::workers::worker_pool;

pub const SWEEP_FILE: &str = "sweep.csv";
pub const FRONT_FILE: &str = "front.csv";
pub const DEFAULT_A: [u32; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];
pub const DEFAULT_B: [u32; 6] = [0, 1, 2, 3, 4, 5];

/// `a * 10^b` for every `b`, then every `a`.
pub fn grid_scales(a: &[u32], b: &[u32]) -> Vec<f64> {
    b.iter()
        .flat_map(|&b| a.iter().map(move |&a| a as f64 * 10f64.powi(b as i32)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub method: Method,
    pub qs_scale: f64,
    pub result: Result<MetricsReport, String>,
}

impl Cell {
    pub fn label(&self) -> String {
        match self.method {
            Method::Pssa => "pssa".to_string(),
            m => format!("{m}:{}", fmt_float(self.qs_scale)),
        }
    }

    pub fn point(&self) -> Option<ParetoPoint> {
        let rep = self.result.as_ref().ok()?;
        Some(ParetoPoint {
            label: self.label(),
            j: rep.j_arm.unwrap_or(0.0),
            c: rep.c_env,
        })
    }
}

fn run_cell(cfg: &ScenarioConfig, method: Method, qs_scale: f64, p: SlackNorm) -> Cell {
    let result = init_scenario(cfg).map_err(|e| e.to_string()).and_then(|world| {
        let dofs = world.model.dofs;
        let mc = RelaxationConfig {
            p,
            q: vec![1.0; dofs],
            qs_scale,
        };
        let log = run_world(world, method, &mc).map_err(|e| e.to_string())?;
        MetricsReport::from_log(&log).map_err(|e| e.to_string())
    });
    Cell {
        method,
        qs_scale,
        result,
    }
}

/// r-SSA at every grid scale followed by the p-SSA reference with unit
/// slack weights. Cells run on the worker pool.
pub fn run_grid(cfg: &ScenarioConfig, a: &[u32], b: &[u32], p: SlackNorm) -> Result<Vec<Cell>, CliError> {
    let mut jobs: Vec<(Method, f64)> = grid_scales(a, b).into_iter().map(|s| (Method::Rssa, s)).collect();
    jobs.push((Method::Pssa, 1.0));
    let pool = worker_pool()?;
    Ok(pool.install(|| jobs.par_iter().map(|&(m, s)| run_cell(cfg, m, s, p)).collect()))
}

pub fn sweep_csv(task: &str, seed: u64, cells: &[Cell]) -> String {
    let mut out = format!("{},status\n", csv_header());
    for c in cells {
        match &c.result {
            Ok(rep) => out.push_str(&format!("{},ok\n", csv_row(task, c.method.name(), Some(c.qs_scale), seed, rep))),
            Err(e) => {
                let mut fields = vec![task.to_string(), c.method.name().to_string(), fmt_float(c.qs_scale)];
                fields.extend(std::iter::repeat_n("null".to_string(), CSV_COLUMNS.len() - 4));
                fields.push(seed.to_string());
                out.push_str(&format!("{},\"failed: {}\"\n", fields.join(","), e.replace('"', "'")));
            }
        }
    }
    out
}

/// Indices into `cells` of the successful cells on the Pareto front.
pub fn front_cells(cells: &[Cell]) -> Vec<usize> {
    let ok: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].result.is_ok()).collect();
    let points: Vec<ParetoPoint> = ok.iter().filter_map(|&i| cells[i].point()).collect();
    pareto_front(&points).into_iter().map(|k| ok[k]).collect()
}

pub fn front_csv(task: &str, seed: u64, cells: &[Cell]) -> String {
    let mut out = format!("{}\n", csv_header());
    for i in front_cells(cells) {
        if let Ok(rep) = &cells[i].result {
            out.push_str(&csv_row(task, cells[i].method.name(), Some(cells[i].qs_scale), seed, rep));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct AblateSpec {
    pub task: ResolvedTask,
    pub seed: u64,
    pub steps: Option<usize>,
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub p: u32,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct AblateOutcome {
    pub dir: PathBuf,
    pub cells: Vec<Cell>,
    pub front: Vec<usize>,
}

pub fn ablate_dir(out: &Path, task: &str, seed: u64) -> PathBuf {
    out.join(task).join("ablate").join(format!("seed{seed}"))
}

/// Runs the grid and writes sweep, front and manifest. Fails after writing
/// if any cell failed.
pub fn run_ablate(spec: &AblateSpec) -> Result<AblateOutcome, CliError> {
    if spec.a.is_empty() || spec.b.is_empty() {
        return Err(CliError::Config("the Qs grid is empty".into()));
    }
    let norm = SlackNorm::from_order(spec.p).ok_or_else(|| CliError::Config(format!("--p must be 1 or 2, got {}", spec.p)))?;
    let started = unix_millis();
    let clock = Instant::now();
    let mut cfg = spec.task.config.clone();
    cfg.seed = spec.seed;
    if let Some(s) = spec.steps {
        cfg.steps = s;
    }
    cfg.validate()?;
    let cells = run_grid(&cfg, &spec.a, &spec.b, norm)?;
    let dir = ablate_dir(&spec.out, &spec.task.name, spec.seed);
    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let sweep = dir.join(SWEEP_FILE);
    fs::write(&sweep, sweep_csv(&spec.task.name, spec.seed, &cells)).map_err(CliError::io(&sweep))?;
    let front = dir.join(FRONT_FILE);
    fs::write(&front, front_csv(&spec.task.name, spec.seed, &cells)).map_err(CliError::io(&front))?;
    let failed = cells.iter().filter(|c| c.result.is_err()).count();
    let manifest = RunManifest::Ablate(AblateManifest {
        task: spec.task.name.clone(),
        config_source: spec.task.source.clone(),
        config: cfg,
        seed: spec.seed,
        grid_a: spec.a.clone(),
        grid_b: spec.b.clone(),
        p: spec.p,
        output_root: spec.out.display().to_string(),
        output_dir: dir.display().to_string(),
        files: vec![SWEEP_FILE.into(), FRONT_FILE.into(), MANIFEST_FILE.into()],
        failed_cells: failed,
        build: build_id(),
        started_unix_ms: started,
        wall_clock_s: clock.elapsed().as_secs_f64(),
    });
    manifest.write(&dir.join(MANIFEST_FILE))?;
    if failed > 0 {
        return Err(CliError::CellsFailed {
            failed,
            total: cells.len(),
        });
    }
    let front = front_cells(&cells);
    Ok(AblateOutcome { dir, cells, front })
}

impl AblateSpec {
    /// Spec that reproduces a recorded ablation into `out`.
    pub fn from_manifest(m: &AblateManifest, out: Option<&Path>) -> Self {
        AblateSpec {
            task: ResolvedTask {
                name: m.task.clone(),
                source: m.config_source.clone(),
                config: m.config.clone(),
            },
            seed: m.seed,
            steps: None,
            a: m.grid_a.clone(),
            b: m.grid_b.clone(),
            p: m.p,
            out: out.map_or_else(|| PathBuf::from(&m.output_root), Path::to_path_buf),
        }
    }
}
