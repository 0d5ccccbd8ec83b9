//! Deterministic episode engine: first-order integration, obstacle
//! processes, goal spawning, scripted conflict scenarios and step logging.

use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{
    enumerate_pairs, CollisionError, CollisionPair, Obstacle, ObstacleShape, PairClass, PairKind, PairMargins,
};
use crate::constraints::{assemble_from_state, pair_distances, ConstraintError, Dynamics};
use crate::filters::{apply_filter, nominal_control, FilterError, Gains, Method, RelaxationConfig};
use crate::kinematics::{load_robot_model, model_hash, JointState, KinematicsError, RobotModel, TrackedRole};
use crate::qp::QpSolver;

/// Pair distances below `d_min + LOG_DISTANCE_CUTOFF` are logged.
pub const LOG_DISTANCE_CUTOFF: f64 = 0.05;
/// Maximum rejection-sampling attempts per obstacle.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Independent random streams derived from the scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngStream {
    Obstacles = 1,
    Goals = 2,
    Brownian = 3,
}

pub fn stream_rng(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("placed {placed} of {requested} obstacles before giving up after {MAX_PLACEMENT_ATTEMPTS} attempts")]
    Placement { placed: usize, requested: usize },
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] <= self.max[i])
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vector3<f64> {
        Vector3::from_fn(|i, _| {
            let (lo, hi) = (self.min[i], self.max[i]);
            let r: f64 = rng.random();
            lo + (hi - lo) * r
        })
    }

    /// Folds a point back into the box by mirror reflection at the faces.
    pub fn reflect(&self, p: Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|i, _| {
            let (lo, hi) = (self.min[i], self.max[i]);
            let width = hi - lo;
            if width <= 0.0 {
                return lo;
            }
            let period = 2.0 * width;
            let mut x = (p[i] - lo).rem_euclid(period);
            if x > width {
                x = period - x;
            }
            lo + x
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObstacleMode {
    /// Static obstacles.
    #[serde(rename = "SO")]
    Static,
    /// Obstacles in Brownian motion.
    #[serde(rename = "DO")]
    Dynamic,
    /// Explicit obstacles with scripted constant velocities.
    #[serde(rename = "scripted")]
    Scripted,
}

/// An explicitly placed obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedObstacle {
    pub shape: ObstacleShape,
    #[serde(default)]
    pub velocity: [f64; 3],
    /// Relative slack weight of every pair involving this obstacle.
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}
fn default_radius() -> f64 {
    0.05
}
fn default_d_min_env() -> f64 {
    0.05
}
fn default_d_min_self() -> f64 {
    0.01
}
fn default_eta() -> f64 {
    0.5
}
fn default_dt() -> f64 {
    0.01
}
fn default_steps() -> usize {
    2000
}
fn default_goal_threshold() -> f64 {
    0.05
}
fn default_sigma() -> f64 {
    0.01
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Built-in model name or path to a model file.
    pub robot: String,
    pub mode: ObstacleMode,
    #[serde(default)]
    pub obstacle_count: usize,
    #[serde(default = "default_radius")]
    pub obstacle_radius: f64,
    pub task_space: Aabb,
    /// Goal sampling region per tracked point; empty means `task_space`.
    #[serde(default)]
    pub goal_regions: Vec<Aabb>,
    #[serde(default = "default_d_min_env")]
    pub d_min_env: f64,
    #[serde(default = "default_d_min_self")]
    pub d_min_self: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_goal_threshold")]
    pub goal_threshold: f64,
    #[serde(default = "default_sigma")]
    pub brownian_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub self_collision: bool,
    #[serde(default)]
    pub gains: Gains,
    /// Explicit obstacles, placed in addition to `obstacle_count` random ones.
    #[serde(default)]
    pub obstacles: Vec<ScriptedObstacle>,
    /// Fixed initial goals per tracked point; sampled when empty.
    #[serde(default)]
    pub goals: Vec<[f64; 3]>,
    #[serde(default = "default_true")]
    pub respawn_goals: bool,
    #[serde(default)]
    pub initial_q: Option<Vec<f64>>,
    /// Multiplies the model's velocity limits.
    #[serde(default = "one")]
    pub velocity_scale: f64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(format!("{}: {m}", self.name)));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.steps == 0 {
            return bad("steps must be positive");
        }
        if !(self.obstacle_radius > 0.0) {
            return bad("obstacle_radius must be positive");
        }
        if !self.task_space.is_valid() {
            return bad("task_space must be a nonempty box");
        }
        if self.goal_regions.iter().any(|g| !g.is_valid()) {
            return bad("goal regions must be nonempty boxes");
        }
        if !(self.d_min_env >= 0.0 && self.d_min_self >= 0.0 && self.eta > 0.0) {
            return bad("d_min must be nonnegative and eta positive");
        }
        if !(self.goal_threshold > 0.0) {
            return bad("goal_threshold must be positive");
        }
        if !(self.brownian_sigma >= 0.0) {
            return bad("brownian_sigma must be nonnegative");
        }
        if !(self.velocity_scale > 0.0) {
            return bad("velocity_scale must be positive");
        }
        if self.obstacles.iter().any(|o| !(o.weight > 0.0)) {
            return bad("obstacle weights must be positive");
        }
        Ok(())
    }

    pub fn margins(&self) -> PairMargins {
        PairMargins {
            d_min_env: self.d_min_env,
            d_min_self: self.d_min_self,
            eta: self.eta,
        }
    }
}

/// Built-in robot model descriptions.
pub const BUILTIN_MODELS: [(&str, &str); 3] = [
    ("g1_fixed_base", include_str!("../data/models/g1_fixed_base.json")),
    ("g1_whole_body", include_str!("../data/models/g1_whole_body.json")),
    ("floating_wrist", include_str!("../data/models/floating_wrist.json")),
];

/// Benchmark presets, one per task.
pub const PRESETS: [(&str, &str); 8] = [
    ("G1WholeBody_SO_V0", include_str!("../data/scenarios/G1WholeBody_SO_V0.json")),
    ("G1WholeBody_SO_V1", include_str!("../data/scenarios/G1WholeBody_SO_V1.json")),
    ("G1WholeBody_DO_V0", include_str!("../data/scenarios/G1WholeBody_DO_V0.json")),
    ("G1WholeBody_DO_V1", include_str!("../data/scenarios/G1WholeBody_DO_V1.json")),
    ("G1FixedBase_SO_V0", include_str!("../data/scenarios/G1FixedBase_SO_V0.json")),
    ("G1FixedBase_SO_V1", include_str!("../data/scenarios/G1FixedBase_SO_V1.json")),
    ("G1FixedBase_DO_V0", include_str!("../data/scenarios/G1FixedBase_DO_V0.json")),
    ("G1FixedBase_DO_V1", include_str!("../data/scenarios/G1FixedBase_DO_V1.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn load_preset(name: &str) -> Result<ScenarioConfig, SimError> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| SimError::Config(format!("unknown task `{name}`; available: {}", preset_names().join(", "))))?;
    ScenarioConfig::from_json(text)
}

/// Model text for a built-in name or a file path.
pub fn robot_model_text(robot: &str) -> Result<String, SimError> {
    if let Some((_, text)) = BUILTIN_MODELS.iter().find(|(n, _)| *n == robot) {
        return Ok((*text).to_string());
    }
    std::fs::read_to_string(Path::new(robot))
        .map_err(|e| SimError::Config(format!("cannot read robot model `{robot}`: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Motion {
    Static,
    Brownian,
    Linear(Vector3<f64>),
}

/// Mutable simulation state of one episode.
#[derive(Debug)]
pub struct World {
    pub cfg: ScenarioConfig,
    pub model: Arc<RobotModel>,
    pub model_hash: String,
    pub q: DVector<f64>,
    pub obstacles: Vec<Obstacle>,
    motions: Vec<Motion>,
    pub pairs: Vec<CollisionPair>,
    pub goals: Vec<Vector3<f64>>,
    goal_regions: Vec<Aabb>,
    goal_rng: ChaCha8Rng,
    brownian_rng: ChaCha8Rng,
    pub step_index: usize,
    pub solver: QpSolver,
    dynamics: Dynamics,
}

/// Builds the world described by `cfg`.
pub fn init_scenario(cfg: &ScenarioConfig) -> Result<World, SimError> {
    cfg.validate()?;
    let text = robot_model_text(&cfg.robot)?;
    let hash = model_hash(&text);
    let mut model = load_robot_model(&text)?;
    if cfg.velocity_scale != 1.0 {
        model.velocity_lower *= cfg.velocity_scale;
        model.velocity_upper *= cfg.velocity_scale;
    }
    if !cfg.self_collision {
        model.self_pairs.clear();
    }
    let model = Arc::new(model);
    let q = match &cfg.initial_q {
        Some(v) if v.len() != model.dofs => {
            return Err(SimError::Config(format!("initial_q has {} entries for {} joints", v.len(), model.dofs)))
        }
        Some(v) => model.clamp_position(&DVector::from_column_slice(v)),
        None => model.home.clone(),
    };
    let n_tracked = model.tracked_points.len();
    let goal_regions = match cfg.goal_regions.len() {
        0 => vec![cfg.task_space; n_tracked],
        k if k == n_tracked => cfg.goal_regions.clone(),
        k => {
            return Err(SimError::Config(format!("{k} goal regions for {n_tracked} tracked points")));
        }
    };

    let start = model.forward_kinematics(&JointState(q.clone()))?;
    let mut obstacles = Vec::new();
    let mut motions = Vec::new();
    let mut weights = Vec::new();
    for o in &cfg.obstacles {
        let id = obstacles.len();
        let obstacle = match o.shape {
            ObstacleShape::Sphere { center, radius } => Obstacle::sphere(id, center.into(), radius)?,
            ObstacleShape::HalfSpace { point, normal } => Obstacle::half_space(id, point.into(), normal.into())?,
        };
        let v = Vector3::from(o.velocity);
        motions.push(if v == Vector3::zeros() { Motion::Static } else { Motion::Linear(v) });
        obstacles.push(obstacle);
        weights.push(o.weight);
    }
    let random_motion = match cfg.mode {
        ObstacleMode::Dynamic => Motion::Brownian,
        ObstacleMode::Static | ObstacleMode::Scripted => Motion::Static,
    };
    let mut obstacle_rng = stream_rng(cfg.seed, RngStream::Obstacles);
    for placed in 0..cfg.obstacle_count {
        let mut accepted = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let c = cfg.task_space.sample(&mut obstacle_rng);
            let clear = start
                .iter()
                .zip(&model.spheres)
                .all(|(p, s)| (c - p).norm() - s.radius - cfg.obstacle_radius >= cfg.d_min_env);
            if clear {
                accepted = Some(c);
                break;
            }
        }
        let c = accepted.ok_or(SimError::Placement {
            placed,
            requested: cfg.obstacle_count,
        })?;
        obstacles.push(Obstacle::sphere(obstacles.len(), c, cfg.obstacle_radius)?);
        motions.push(random_motion);
        weights.push(1.0);
    }

    let mut pairs = enumerate_pairs(&model, &obstacles, &cfg.margins());
    for p in &mut pairs {
        if let PairKind::BodyObstacle { obstacle, .. } = p.kind {
            p.weight = weights[obstacle];
        }
    }

    let mut goal_rng = stream_rng(cfg.seed, RngStream::Goals);
    let goals = if cfg.goals.is_empty() {
        goal_regions.iter().map(|r| r.sample(&mut goal_rng)).collect()
    } else if cfg.goals.len() == n_tracked {
        cfg.goals.iter().map(|g| Vector3::from(*g)).collect()
    } else {
        return Err(SimError::Config(format!("{} goals for {n_tracked} tracked points", cfg.goals.len())));
    };

    Ok(World {
        cfg: cfg.clone(),
        model,
        model_hash: hash,
        q,
        obstacles,
        motions,
        pairs,
        goals,
        goal_regions,
        goal_rng,
        brownian_rng: stream_rng(cfg.seed, RngStream::Brownian),
        step_index: 0,
        solver: QpSolver::default(),
        dynamics: Dynamics::FirstOrderIntegrator,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub q: Vec<f64>,
    pub u_ref: Vec<f64>,
    pub u: Vec<f64>,
    pub feasible: bool,
    /// `(pair, s)` for every pair with positive slack.
    pub slacks: Vec<(usize, f64)>,
    /// `(pair, d)` for every pair with `d < d_min + LOG_DISTANCE_CUTOFF`.
    pub distances: Vec<(usize, f64)>,
    pub min_d_env: Option<f64>,
    pub min_d_self: Option<f64>,
    /// Distance of each tracked point to its goal.
    pub goal_errors: Vec<f64>,
    pub active: usize,
    pub qp_solves: usize,
    pub iterations: usize,
}

impl StepRecord {
    pub fn total_slack(&self) -> f64 {
        self.slacks.iter().map(|(_, s)| s).sum()
    }
}

/// Static description of one collision pair, for log consumers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInfo {
    pub label: String,
    pub class: PairClass,
    pub d_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub config: ScenarioConfig,
    pub model_name: String,
    pub model_hash: String,
    pub method: Method,
    pub method_config: RelaxationConfig,
    pub tracked_points: Vec<String>,
    pub tracked_roles: Vec<TrackedRole>,
    pub pairs: Vec<PairInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub records: Vec<StepRecord>,
}

impl EpisodeLog {
    pub fn new(world: &World, method: Method, method_cfg: &RelaxationConfig) -> Self {
        EpisodeLog {
            header: LogHeader {
                config: world.cfg.clone(),
                model_name: world.model.name.clone(),
                model_hash: world.model_hash.clone(),
                method,
                method_config: method_cfg.clone(),
                tracked_points: world.model.tracked_points.iter().map(|t| t.name.clone()).collect(),
                tracked_roles: world.model.tracked_points.iter().map(|t| t.role).collect(),
                pairs: world
                    .pairs
                    .iter()
                    .map(|p| PairInfo {
                        label: p.describe(&world.model),
                        class: p.class(),
                        d_min: p.d_min,
                    })
                    .collect(),
            },
            records: Vec::new(),
        }
    }

    /// Header line followed by one line per step record.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn read_ndjson(text: &str) -> Result<Self, SimError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| SimError::Config("empty log".into()))?;
        let header: LogHeader = serde_json::from_str(header).map_err(|e| SimError::Config(e.to_string()))?;
        let records = lines
            .map(|l| serde_json::from_str(l).map_err(|e| SimError::Config(e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(EpisodeLog { header, records })
    }

    /// Compact CSV: step, t, feasible, total slack, minimum distances and
    /// goal errors.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let goal_cols: Vec<String> = self.header.tracked_points.iter().map(|n| format!("goal_err_{n}")).collect();
        writeln!(w, "step,t,feasible,slack_sum,min_d_env,min_d_self,{}", goal_cols.join(","))?;
        for r in &self.records {
            let goals: Vec<String> = r.goal_errors.iter().map(|v| fmt_float(*v)).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.step,
                fmt_float(r.t),
                r.feasible as u8,
                fmt_float(r.total_slack()),
                fmt_opt(r.min_d_env),
                fmt_opt(r.min_d_self),
                goals.join(",")
            )?;
        }
        w.flush()
    }
}

/// Fixed 12-significant-digit formatting for CSV output.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_else(|| "null".into())
}

/// Advances the world by one control step with the given filter.
pub fn step(world: &mut World, method: Method, method_cfg: &RelaxationConfig) -> Result<StepRecord, SimError> {
    let model = Arc::clone(&world.model);
    let q_state = JointState(world.q.clone());
    let state = model.evaluate(&q_state)?;
    let distances = pair_distances(&world.pairs, &state.centers, &model, &world.obstacles)?;

    let goal_errors: Vec<f64> = model
        .tracked_points
        .iter()
        .zip(&world.goals)
        .map(|(tp, g)| {
            let idx = model.sphere_index(&tp.sphere).expect("tracked sphere validated at load");
            (state.center(idx) - g).norm()
        })
        .collect();

    let u_ref = nominal_control(&state, &world.goals, &world.cfg.gains)?;
    let cs = assemble_from_state(&state, &q_state, &world.pairs, &distances, &world.dynamics)?;
    let result = apply_filter(&mut world.solver, method, &cs, &u_ref, method_cfg)?;

    let mut logged = Vec::new();
    let mut min_env: Option<f64> = None;
    let mut min_self: Option<f64> = None;
    for (i, (p, d)) in world.pairs.iter().zip(&distances).enumerate() {
        let slot = match p.class() {
            PairClass::Env => &mut min_env,
            PairClass::SelfCollision => &mut min_self,
        };
        *slot = Some(slot.map_or(d.d, |m: f64| m.min(d.d)));
        if d.d < p.d_min + LOG_DISTANCE_CUTOFF {
            logged.push((i, d.d));
        }
    }
    let slacks: Vec<(usize, f64)> = result
        .s
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .map(|(i, &s)| (i, s))
        .collect();

    let record = StepRecord {
        step: world.step_index,
        t: world.step_index as f64 * world.cfg.dt,
        q: world.q.iter().copied().collect(),
        u_ref: u_ref.iter().copied().collect(),
        u: result.u.iter().copied().collect(),
        feasible: result.feasible,
        slacks,
        distances: logged,
        min_d_env: min_env,
        min_d_self: min_self,
        goal_errors: goal_errors.clone(),
        active: cs.rows(),
        qp_solves: result.stats.qp_solves,
        iterations: result.stats.iterations,
    };

    world.q = model.clamp_position(&(&world.q + &result.u * world.cfg.dt));
    advance_obstacles(world);
    if world.cfg.respawn_goals {
        for (k, err) in goal_errors.iter().enumerate() {
            if *err < world.cfg.goal_threshold {
                world.goals[k] = world.goal_regions[k].sample(&mut world.goal_rng);
            }
        }
    }
    world.step_index += 1;
    Ok(record)
}

fn advance_obstacles(world: &mut World) {
    let sigma = world.cfg.brownian_sigma;
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("sigma is validated nonnegative");
    for (o, m) in world.obstacles.iter_mut().zip(&world.motions) {
        match m {
            Motion::Static => {}
            Motion::Brownian => {
                if sigma > 0.0 {
                    let z = Vector3::from_fn(|_, _| normal.sample(&mut world.brownian_rng));
                    o.set_position(world.cfg.task_space.reflect(o.position() + z));
                }
            }
            Motion::Linear(v) => o.set_position(o.position() + v * world.cfg.dt),
        }
    }
}

/// A failed episode with everything logged up to the failure.
#[derive(Debug, Error)]
#[error("episode aborted at step {step}: {source}")]
pub struct EpisodeError {
    pub step: usize,
    pub log: Box<EpisodeLog>,
    #[source]
    pub source: SimError,
}

/// Runs `cfg.steps` steps from a freshly initialized world.
pub fn run_episode(cfg: &ScenarioConfig, method: Method, method_cfg: &RelaxationConfig) -> Result<EpisodeLog, EpisodeError> {
    let world = init_scenario(cfg).map_err(|source| EpisodeError {
        step: 0,
        log: Box::new(EpisodeLog {
            header: empty_header(cfg, method, method_cfg),
            records: Vec::new(),
        }),
        source,
    })?;
    run_world(world, method, method_cfg)
}

/// Runs the configured number of steps on an existing world.
pub fn run_world(mut world: World, method: Method, method_cfg: &RelaxationConfig) -> Result<EpisodeLog, EpisodeError> {
    let mut log = EpisodeLog::new(&world, method, method_cfg);
    log.records.reserve(world.cfg.steps);
    for _ in 0..world.cfg.steps {
        match step(&mut world, method, method_cfg) {
            Ok(r) => log.records.push(r),
            Err(source) => {
                return Err(EpisodeError {
                    step: world.step_index,
                    log: Box::new(log),
                    source,
                })
            }
        }
    }
    Ok(log)
}

fn empty_header(cfg: &ScenarioConfig, method: Method, method_cfg: &RelaxationConfig) -> LogHeader {
    LogHeader {
        config: cfg.clone(),
        model_name: String::new(),
        model_hash: String::new(),
        method,
        method_config: method_cfg.clone(),
        tracked_points: Vec::new(),
        tracked_roles: Vec::new(),
        pairs: Vec::new(),
    }
}

/// A named scripted scenario with its documented expected behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedScenario {
    pub name: &'static str,
    pub expected: &'static str,
    pub config: ScenarioConfig,
}

impl ScriptedScenario {
    pub fn build(&self) -> Result<World, SimError> {
        init_scenario(&self.config)
    }
}

const SCRIPTED: [(&str, &str, &str); 4] = [
    (
        "method_infeasibility",
        "Wrist sphere between two parallel planes 0.02 m from each, below d_min on both sides. \
         Both rows demand escape at eta in opposite directions; s* = (0.5, 0.5), the filtered \
         normal velocity is zero and the tangential motion follows u_ref.",
        include_str!("../data/scenarios/method_infeasibility.json"),
    ),
    (
        "method_infeasibility_weighted",
        "Same planes with pair weights (4, 1); s* = (0.2, 0.8).",
        include_str!("../data/scenarios/method_infeasibility_weighted.json"),
    ),
    (
        "inherent_infeasibility",
        "Sphere moving at 0.3 m/s toward the pelvis of the fixed-base robot. The pelvis cannot move, \
         so its row is 0 <= -eta and every method needs slack 0.5 on that pair while it is active.",
        include_str!("../data/scenarios/inherent_infeasibility.json"),
    ),
    (
        "kinematics_infeasibility",
        "Left arm stretched forward, right arm folded, with reduced joint speed. A sphere approaches \
         the outstretched hand along the arm axis, where the hand can barely retreat, so the \
         constraint set becomes infeasible before contact.",
        include_str!("../data/scenarios/kinematics_infeasibility.json"),
    ),
];

pub fn scripted_scenarios() -> Vec<ScriptedScenario> {
    SCRIPTED
        .iter()
        .map(|(name, expected, text)| ScriptedScenario {
            name,
            expected,
            config: ScenarioConfig::from_json(text).expect("shipped scenario files parse"),
        })
        .collect()
}

pub fn scripted_scenario(name: &str) -> Option<ScriptedScenario> {
    scripted_scenarios().into_iter().find(|s| s.name == name)
}
