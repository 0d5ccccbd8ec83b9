use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3};
use pssa_core::collision::{enumerate_pairs, Obstacle, PairClass, PairMargins};
use pssa_core::constraints::{assemble_constraints, evaluate_phi, Dynamics};
use pssa_core::filters::{Method, RelaxationConfig};
use pssa_core::kinematics::{load_robot_model, JointState, RobotModel, TrackedRole};
use pssa_core::metrics::{compute_c, compute_j, compute_rfeas, compute_s};
use pssa_core::qp::{QpProblem, QpSolver, QpStatus};
use pssa_core::simulator::{robot_model_text, run_episode, scripted_scenario, PairInfo, StepRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Jacobian,
    Qp,
    Conflict,
    Metrics,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Jacobian, Suite::Qp, Suite::Conflict, Suite::Metrics];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Jacobian => "jacobian",
            Suite::Qp => "qp",
            Suite::Conflict => "conflict",
            Suite::Metrics => "metrics",
        }
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown suite '{s}'; expected jacobian, qp, conflict or metrics")))
    }
}

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {:e} (tolerance {:e})", self.name, self.value, self.tolerance)
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>, CliError> {
    match suite {
        Suite::Jacobian => jacobian_checks(),
        Suite::Qp => Ok(qp_checks(100, 20)),
        Suite::Conflict => conflict_checks(),
        Suite::Metrics => Ok(metric_checks()),
    }
}

fn builtin_model(name: &str) -> Result<RobotModel, CliError> {
    let text = robot_model_text(name)?;
    load_robot_model(&text).map_err(|e| CliError::Sim(e.into()))
}

fn random_q(rng: &mut ChaCha8Rng, model: &RobotModel) -> DVector<f64> {
    let limits = model.position_limits();
    DVector::from_iterator(limits.len(), limits.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)))
}

fn centers(model: &RobotModel, q: &DVector<f64>) -> Result<Vec<Vector3<f64>>, CliError> {
    model.forward_kinematics(&JointState(q.clone())).map_err(|e| CliError::Sim(e.into()))
}

/// Largest entry of analytic minus central-difference sphere Jacobians over
/// `configs` random configurations.
pub fn jacobian_fd_error(model: &RobotModel, configs: usize, seed: u64) -> Result<f64, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let q = random_q(&mut rng, model);
        let state = model.evaluate(&JointState(q.clone())).map_err(|e| CliError::Sim(e.into()))?;
        let mut fd = vec![DMatrix::zeros(3, model.dofs); model.spheres.len()];
        for j in 0..model.dofs {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[j] += h;
            qm[j] -= h;
            let (cp, cm) = (centers(model, &qp)?, centers(model, &qm)?);
            for (s, m) in fd.iter_mut().enumerate() {
                m.set_column(j, &((cp[s] - cm[s]) / (2.0 * h)));
            }
        }
        for (s, m) in fd.iter().enumerate() {
            worst = worst.max((state.sphere_jacobian(s) - m).amax());
        }
    }
    Ok(worst)
}

/// Largest gap between constraint rows and central differences of the
/// energy function along random unit controls, over at least `rows` active
/// rows. Obstacles are placed just outside a random sphere so its pairs are
/// active.
pub fn constraint_row_error(model: &RobotModel, rows: usize, seed: u64) -> Result<(f64, usize), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margins = PairMargins::default();
    let sim = |e: pssa_core::collision::CollisionError| CliError::Sim(e.into());
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < rows {
        let q = random_q(&mut rng, model);
        let c = centers(model, &q)?;
        let body = rng.random_range(0..model.spheres.len());
        let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
        let radius = model.spheres[body].radius;
        let obstacles = vec![
            Obstacle::sphere(0, c[body] + dir * (radius + 0.03 + rng.random_range(0.0..0.015)), 0.01).map_err(sim)?,
            Obstacle::half_space(1, c[body] - dir * (radius + 0.04), dir).map_err(sim)?,
        ];
        let pairs = enumerate_pairs(model, &obstacles, &margins);
        let cs = assemble_constraints(model, &JointState(q.clone()), &pairs, &obstacles, &Dynamics::FirstOrderIntegrator)
            .map_err(|e| CliError::Sim(e.into()))?;
        let u = DVector::from_fn(model.dofs, |_, _| rng.random_range(-1.0..1.0)).normalize();
        let h = 1e-6;
        let phi_p = evaluate_phi(&pairs, &centers(model, &(&q + &u * h))?, model, &obstacles).map_err(|e| CliError::Sim(e.into()))?;
        let phi_m = evaluate_phi(&pairs, &centers(model, &(&q - &u * h))?, model, &obstacles).map_err(|e| CliError::Sim(e.into()))?;
        for (r, &pid) in cs.pair_ids.iter().enumerate() {
            let fd = (phi_p[pid] - phi_m[pid]) / (2.0 * h);
            worst = worst.max((fd - cs.a.row(r).transpose().dot(&u)).abs());
            checked += 1;
        }
    }
    Ok((worst, checked))
}

fn jacobian_checks() -> Result<Vec<Check>, CliError> {
    let model = builtin_model("g1_whole_body")?;
    let jac = jacobian_fd_error(&model, 100, 1)?;
    let (rows, n) = constraint_row_error(&model, 100, 2)?;
    Ok(vec![
        Check::new("sphere Jacobian vs finite differences, 100 configurations", jac, 1e-6),
        Check::new(format!("constraint rows vs finite differences, {n} active rows"), rows, 1e-5),
    ])
}

/// Random box-constrained QP with an interior point; `rank` is the rank of
/// the PSD cost (zero gives a linear program).
pub fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize, rank: usize) -> QpProblem {
    let g = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    let p = &g * g.transpose();
    let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let lower = DVector::from_fn(n, |_, _| rng.random_range(-2.0..-0.5));
    let upper = DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
    let x0 = DVector::from_fn(n, |i, _| rng.random_range(0.5 * lower[i]..0.5 * upper[i]));
    let b = &a * &x0 + DVector::from_fn(m, |_, _| rng.random_range(0.01..0.5));
    QpProblem { p, c, a, b, lower, upper }
}

/// Appends the negation of row 0 with an offset that contradicts it.
pub fn make_infeasible(rng: &mut ChaCha8Rng, prob: &mut QpProblem) {
    let m = prob.a.nrows();
    let row = prob.a.row(0).into_owned();
    let gap = rng.random_range(0.05..1.0);
    prob.a = prob.a.clone().insert_row(m, 0.0);
    prob.a.row_mut(m).copy_from(&(-row));
    prob.b = prob.b.clone().push(-prob.b[0] - gap);
}

fn clamp_box(x: &DVector<f64>, p: &QpProblem) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| x[i].clamp(p.lower[i], p.upper[i]))
}

/// Reference minimizer: proximal augmented Lagrangian outer loop with an
/// accelerated projected-gradient inner solve over the box.
pub fn reference_qp(prob: &QpProblem) -> DVector<f64> {
    let (p, c, a, b) = (&prob.p, &prob.c, &prob.a, &prob.b);
    let n = c.len();
    let rho = 10.0;
    let mu = 1.0;
    let p_norm = if n > 0 { p.clone().symmetric_eigenvalues().amax() } else { 0.0 };
    let a_norm2 = if !b.is_empty() { (a.transpose() * a).symmetric_eigenvalues().amax() } else { 0.0 };
    let lip = p_norm + mu + rho * a_norm2;
    let kappa = (lip / mu).sqrt();
    let momentum = (kappa - 1.0) / (kappa + 1.0);
    let mut lambda = DVector::zeros(b.len());
    let mut x = clamp_box(&DVector::zeros(n), prob);
    for _ in 0..5000 {
        let center = x.clone();
        let mut prev = x.clone();
        for _ in 0..5000 {
            let y = &x + (&x - &prev) * momentum;
            let viol = ((a * &y - b) * rho + &lambda).map(|v| v.max(0.0));
            let grad = p * &y + c + (&y - &center) * mu + a.transpose() * viol;
            let next = clamp_box(&(&y - grad / lip), prob);
            let moved = (&next - &x).amax();
            prev = std::mem::replace(&mut x, next);
            if moved < 1e-15 {
                break;
            }
        }
        let next_lambda = ((a * &x - b) * rho + &lambda).map(|v| v.max(0.0));
        let dual_change = (&next_lambda - &lambda).amax();
        lambda = next_lambda;
        if dual_change < 1e-12 && (&x - &center).amax() < 1e-12 {
            break;
        }
    }
    x
}

/// Solver against the reference on `feasible` random QPs, then status on
/// `infeasible` contradictory ones.
pub fn qp_checks(feasible: usize, infeasible: usize) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut solver = QpSolver::default();
    let (mut gap, mut kkt, mut missed) = (0.0f64, 0.0f64, 0usize);
    for trial in 0..feasible {
        let n = rng.random_range(1..=20);
        let m = rng.random_range(0..=50);
        let rank = match trial % 3 {
            0 => 0,
            1 => rng.random_range(1..=n),
            _ => n,
        };
        let prob = random_qp(&mut rng, n, m, rank);
        match solver.solve(&prob) {
            Ok(sol) if sol.status == QpStatus::Optimal => {
                let f_ref = prob.objective(&reference_qp(&prob));
                gap = gap.max((sol.objective - f_ref).abs() / f_ref.abs().max(1.0));
                kkt = kkt.max(sol.primal_residual.max(sol.dual_residual));
            }
            _ => missed += 1,
        }
    }
    let mut wrong = 0usize;
    for _ in 0..infeasible {
        let n = rng.random_range(1..=12);
        let m = rng.random_range(1..=20);
        let mut prob = random_qp(&mut rng, n, m, n / 2);
        make_infeasible(&mut rng, &mut prob);
        if !matches!(solver.solve(&prob), Ok(sol) if sol.status == QpStatus::PrimalInfeasible) {
            wrong += 1;
        }
    }
    vec![
        Check::new(format!("feasible QPs not solved to optimality (of {feasible})"), missed as f64, 0.0),
        Check::new("relative objective gap to the reference solver", gap, 1e-5),
        Check::new("largest KKT residual", kkt, 1e-6),
        Check::new(format!("infeasible QPs not flagged (of {infeasible})"), wrong as f64, 0.0),
    ]
}

/// Slack and control at the first step where both walls are active.
pub struct ConflictResult {
    /// `(pair weight, s)` for each wall.
    pub slacks: Vec<(f64, f64)>,
    pub normal_velocity: f64,
    pub tangential_error: f64,
}

/// Runs a two-wall scripted scenario under pssa with p = 2.
pub fn two_wall_conflict(name: &str) -> Result<ConflictResult, CliError> {
    let sc = scripted_scenario(name).ok_or_else(|| CliError::Config(format!("missing scripted scenario {name}")))?;
    let world = sc.build()?;
    let weights: Vec<f64> = world.pairs.iter().map(|p| p.weight).collect();
    let cfg = RelaxationConfig::pssa_default(world.model.dofs);
    let log = run_episode(&sc.config, Method::Pssa, &cfg).map_err(|e| CliError::Sim(e.source))?;
    let rec = log
        .records
        .iter()
        .find(|r| r.slacks.len() == 2)
        .ok_or_else(|| CliError::Config(format!("{name}: the walls never conflict")))?;
    Ok(ConflictResult {
        slacks: rec.slacks.iter().map(|&(i, s)| (weights[i], s)).collect(),
        normal_velocity: rec.u[1].abs(),
        tangential_error: [0, 2].iter().map(|&k| (rec.u[k] - rec.u_ref[k]).abs()).fold(0.0, f64::max),
    })
}

fn conflict_checks() -> Result<Vec<Check>, CliError> {
    let equal = two_wall_conflict("method_infeasibility")?;
    let weighted = two_wall_conflict("method_infeasibility_weighted")?;
    let s_err = equal.slacks.iter().map(|&(_, s)| (s - 0.5).abs()).fold(0.0, f64::max);
    let w_err = weighted
        .slacks
        .iter()
        .map(|&(w, s)| (s - if w > 1.0 { 0.2 } else { 0.8 }).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::new("s* vs (0.5, 0.5)", s_err, 1e-6),
        Check::new("filtered normal velocity", equal.normal_velocity, 1e-6),
        Check::new("tangential tracking error", equal.tangential_error, 1e-6),
        Check::new("weighted (4, 1) s* vs (0.2, 0.8)", w_err, 1e-6),
    ])
}

fn record(step: usize, goal_errors: Vec<f64>, feasible: bool, slacks: Vec<(usize, f64)>, distances: Vec<(usize, f64)>) -> StepRecord {
    StepRecord {
        step,
        t: 0.0,
        q: vec![],
        u_ref: vec![],
        u: vec![],
        feasible,
        slacks,
        distances,
        min_d_env: None,
        min_d_self: None,
        goal_errors,
        active: 0,
        qp_solves: 0,
        iterations: 0,
    }
}

/// Absolute errors of the metric formulas on hand-computed cases.
pub fn metric_checks() -> Vec<Check> {
    let pairs = [PairInfo {
        label: "env".into(),
        class: PairClass::Env,
        d_min: 0.05,
    }];
    let roles = [TrackedRole::Arm];
    let j_of = |d: f64| compute_j(&[record(0, vec![d], true, vec![], vec![])], &roles, TrackedRole::Arm).ok().flatten();
    let err = |got: Option<f64>, want: f64| got.map_or(f64::INFINITY, |g| (g - want).abs());
    let c = compute_c(&[record(0, vec![], false, vec![(0, 0.2)], vec![])], &pairs, PairClass::Env).ok().flatten();
    let s = compute_s(&[record(0, vec![], true, vec![], vec![(0, 0.04)])], &pairs, PairClass::Env).ok();
    let s0 = compute_s(&[record(0, vec![], true, vec![], vec![(0, 0.06)])], &pairs, PairClass::Env).ok();
    let steps: Vec<StepRecord> = (0..10).map(|i| record(i, vec![], i >= 2, vec![], vec![])).collect();
    vec![
        Check::new("J at perfect tracking vs 1", err(j_of(0.0), 1.0), 1e-12),
        Check::new("J at d = sqrt(0.002) vs exp(-1)", err(j_of(0.002f64.sqrt()), (-1.0f64).exp()), 1e-12),
        Check::new("C at s = 0.2 vs exp(-0.2)", err(c, (-0.2f64).exp()), 1e-12),
        Check::new("S at d = 0.04, d_min = 0.05 vs exp(-0.5)", err(s, (-0.5f64).exp()), 1e-12),
        Check::new("S without violations vs 0", err(s0, 0.0), 1e-12),
        Check::new("R_feas at 2 of 10 infeasible vs 0.8", err(compute_rfeas(&steps).ok(), 0.8), 1e-12),
    ]
}
