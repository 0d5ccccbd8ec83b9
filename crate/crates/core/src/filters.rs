//! Safety filters (naive SSA, relaxed SSA, projected SSA) and the nominal
//! goal-tracking controller.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::ConstraintSet;
use crate::kinematics::KinematicState;
use crate::qp::{min_slack_projection, QpError, QpProblem, QpSolver, QpStatus, SlackNorm};

/// A constraint set counts as infeasible when its minimal slack exceeds this.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Margin added to the phase-I slack in the phase-II problem.
pub const PHASE_TWO_MARGIN: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("solver did not converge ({stage}): {status:?} after {iterations} iterations")]
    SolverFailure {
        stage: &'static str,
        status: QpStatus,
        iterations: usize,
    },
    #[error("phase II reported {status:?} with phase-I slack |s*| = {slack_norm:e} on {rows} rows")]
    PhaseTwoInconsistent {
        status: QpStatus,
        slack_norm: f64,
        rows: usize,
        problem: Box<QpProblem>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ssa,
    Rssa,
    Pssa,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ssa, Method::Rssa, Method::Pssa];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ssa => "ssa",
            Method::Rssa => "rssa",
            Method::Pssa => "pssa",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ssa" => Ok(Method::Ssa),
            "rssa" => Ok(Method::Rssa),
            "pssa" => Ok(Method::Pssa),
            other => Err(format!("unknown method `{other}` (expected ssa, rssa or pssa)")),
        }
    }
}

/// Tracking and slack weights. The slack weight of row `i` is
/// `qs_scale * w_i`, where `w_i` is the relative weight of its pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    pub p: SlackNorm,
    /// Diagonal of the tracking weight Q.
    pub q: Vec<f64>,
    pub qs_scale: f64,
}

impl RelaxationConfig {
    /// Default Q = I, Qs = I, p = 2.
    pub fn pssa_default(nu: usize) -> Self {
        RelaxationConfig {
            p: SlackNorm::L2,
            q: vec![1.0; nu],
            qs_scale: 1.0,
        }
    }

    /// Default Q = I, Qs = 10 I, p = 2.
    pub fn rssa_default(nu: usize) -> Self {
        RelaxationConfig {
            qs_scale: 10.0,
            ..Self::pssa_default(nu)
        }
    }

    pub fn for_method(method: Method, nu: usize) -> Self {
        match method {
            Method::Rssa => Self::rssa_default(nu),
            Method::Ssa | Method::Pssa => Self::pssa_default(nu),
        }
    }

    pub fn validate(&self, nu: usize) -> Result<(), FilterError> {
        if self.q.len() != nu {
            return Err(FilterError::DimensionMismatch(format!(
                "Q has {} entries for {nu} controls",
                self.q.len()
            )));
        }
        if self.q.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(FilterError::InvalidConfig("Q entries must be positive".into()));
        }
        if !(self.qs_scale > 0.0 && self.qs_scale.is_finite()) {
            return Err(FilterError::InvalidConfig("Qs scale must be positive".into()));
        }
        Ok(())
    }

    pub fn slack_weights(&self, cs: &ConstraintSet) -> DVector<f64> {
        &cs.weights * self.qs_scale
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub qp_solves: usize,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl SolverStats {
    fn add(&mut self, iterations: usize) {
        self.qp_solves += 1;
        self.iterations += iterations;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub u: DVector<f64>,
    /// Slack per pair, zero for inactive pairs.
    pub s: DVector<f64>,
    /// Whether the naive QP of this step is feasible.
    pub feasible: bool,
    pub method: Method,
    pub stats: SolverStats,
}

/// Nominal controller gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub kp: f64,
    pub damping: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Gains { kp: 5.0, damping: 0.05 }
    }
}

/// Damped least-squares velocity toward the goals, clamped to the velocity
/// box. `goals[k]` is the target of `model.tracked_points[k]`.
pub fn nominal_control(state: &KinematicState<'_>, goals: &[Vector3<f64>], gains: &Gains) -> Result<DVector<f64>, FilterError> {
    let model = state.model();
    if goals.len() != model.tracked_points.len() {
        return Err(FilterError::DimensionMismatch(format!(
            "{} goals for {} tracked points",
            goals.len(),
            model.tracked_points.len()
        )));
    }
    let n = model.dofs;
    let k = goals.len();
    let mut jac = DMatrix::zeros(3 * k, n);
    let mut err = DVector::zeros(3 * k);
    for (t, (tp, goal)) in model.tracked_points.iter().zip(goals).enumerate() {
        let idx = model
            .sphere_index(&tp.sphere)
            .ok_or_else(|| FilterError::InvalidConfig(format!("tracked sphere `{}` missing", tp.sphere)))?;
        jac.view_mut((3 * t, 0), (3, n)).copy_from(&state.sphere_jacobian(idx));
        err.fixed_rows_mut::<3>(3 * t).copy_from(&(goal - state.center(idx)));
    }
    let u = damped_pseudo_inverse_apply(&jac, &(err * gains.kp), gains.damping);
    Ok(clamp_box(&u, &model.velocity_lower, &model.velocity_upper))
}

/// `(J'J + lambda^2 I)^-1 J' e`, evaluated through the SVD of `J`.
fn damped_pseudo_inverse_apply(jac: &DMatrix<f64>, e: &DVector<f64>, damping: f64) -> DVector<f64> {
    let n = jac.ncols();
    if jac.nrows() == 0 || n == 0 {
        return DVector::zeros(n);
    }
    let svd = jac.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let proj = u.tr_mul(e);
    let scale = svd.singular_values.map(|s| {
        let denom = s * s + damping * damping;
        if denom > 1e-300 && s > 1e-12 {
            s / denom
        } else {
            0.0
        }
    });
    vt.tr_mul(&proj.component_mul(&scale))
}

fn clamp_box(u: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(u.len(), (0..u.len()).map(|i| u[i].clamp(lo[i], hi[i])))
}

fn check_inputs(cs: &ConstraintSet, u_ref: &DVector<f64>) -> Result<(), FilterError> {
    let nu = cs.lower.len();
    if u_ref.len() != nu || cs.upper.len() != nu || cs.a.ncols() != nu {
        return Err(FilterError::DimensionMismatch(format!(
            "u_ref has {} entries, box {}/{}, constraint matrix {} columns",
            u_ref.len(),
            nu,
            cs.upper.len(),
            cs.a.ncols()
        )));
    }
    Ok(())
}

fn satisfies(cs: &ConstraintSet, u: &DVector<f64>, relax: Option<&DVector<f64>>) -> bool {
    let r = cs.residual(u);
    match relax {
        Some(s) => r.iter().zip(s.iter()).all(|(&v, &s)| v <= s),
        None => r.iter().all(|&v| v <= 0.0),
    }
}

fn pad_slack(cs: &ConstraintSet, rows: &DVector<f64>) -> DVector<f64> {
    let mut s = DVector::zeros(cs.pair_count());
    for (r, &id) in cs.pair_ids.iter().enumerate() {
        s[id] = rows[r].max(0.0);
    }
    s
}

/// `min (u - u_ref)' Q (u - u_ref)` subject to `A u <= b + relax` and the box.
fn tracking_problem(cs: &ConstraintSet, u_ref: &DVector<f64>, q: &[f64], relax: &DVector<f64>) -> QpProblem {
    let qd = DVector::from_row_slice(q);
    QpProblem {
        p: DMatrix::from_diagonal(&(&qd * 2.0)),
        c: -(qd * 2.0).component_mul(u_ref),
        a: cs.a.clone(),
        b: &cs.b + relax,
        lower: cs.lower.clone(),
        upper: cs.upper.clone(),
    }
}

/// Minimal slack of the rows with unit weights and `p = 2`, which is zero
/// exactly when the naive QP is feasible.
fn feasibility_slack(solver: &mut QpSolver, cs: &ConstraintSet, hint: &DVector<f64>, stats: &mut SolverStats) -> Result<DVector<f64>, FilterError> {
    let weights = DVector::from_element(cs.rows(), 1.0);
    let proj = min_slack_projection(solver, &cs.a, &cs.b, &cs.lower, &cs.upper, &weights, SlackNorm::L2, Some(hint))?;
    if proj.iterations > 0 {
        stats.add(proj.iterations);
    }
    Ok(proj.s)
}

fn trivial(cs: &ConstraintSet, u_ref: &DVector<f64>, method: Method) -> FilterResult {
    FilterResult {
        u: cs.clamp_to_box(u_ref),
        s: DVector::zeros(cs.pair_count()),
        feasible: true,
        method,
        stats: SolverStats::default(),
    }
}

fn solve_tracking(
    solver: &mut QpSolver,
    problem: &QpProblem,
    start: Option<&DVector<f64>>,
    stage: &'static str,
    stats: &mut SolverStats,
) -> Result<crate::qp::QpSolution, FilterError> {
    let sol = solver.solve_from(problem, start)?;
    stats.add(sol.iterations);
    stats.primal_residual = sol.primal_residual;
    stats.dual_residual = sol.dual_residual;
    match sol.status {
        QpStatus::Optimal => Ok(sol),
        status => Err(FilterError::SolverFailure {
            stage,
            status,
            iterations: sol.iterations,
        }),
    }
}

/// Naive SSA: minimally invasive correction of `u_ref`, or the clamped
/// reference when the constraints admit no solution.
pub fn ssa_filter(solver: &mut QpSolver, cs: &ConstraintSet, u_ref: &DVector<f64>, q: &[f64]) -> Result<FilterResult, FilterError> {
    check_inputs(cs, u_ref)?;
    if q.len() != u_ref.len() {
        return Err(FilterError::DimensionMismatch(format!("Q has {} entries", q.len())));
    }
    let clamped = cs.clamp_to_box(u_ref);
    if cs.is_empty() || satisfies(cs, &clamped, None) {
        return Ok(trivial(cs, u_ref, Method::Ssa));
    }
    let mut stats = SolverStats::default();
    let s_star = feasibility_slack(solver, cs, &clamped, &mut stats)?;
    if s_star.amax() > FEASIBILITY_TOL {
        let s = cs.residual(&clamped);
        return Ok(FilterResult {
            s: pad_slack(cs, &s),
            u: clamped,
            feasible: false,
            method: Method::Ssa,
            stats,
        });
    }
    let problem = tracking_problem(cs, u_ref, q, &s_star);
    let sol = solve_tracking(solver, &problem, None, "ssa", &mut stats)?;
    Ok(FilterResult {
        u: sol.z,
        s: DVector::zeros(cs.pair_count()),
        feasible: true,
        method: Method::Ssa,
        stats,
    })
}

/// Relaxed SSA: joint minimization of tracking error and weighted slack.
pub fn rssa_filter(
    solver: &mut QpSolver,
    cs: &ConstraintSet,
    u_ref: &DVector<f64>,
    cfg: &RelaxationConfig,
) -> Result<FilterResult, FilterError> {
    check_inputs(cs, u_ref)?;
    cfg.validate(u_ref.len())?;
    let clamped = cs.clamp_to_box(u_ref);
    if cs.is_empty() || satisfies(cs, &clamped, None) {
        return Ok(trivial(cs, u_ref, Method::Rssa));
    }
    let mut stats = SolverStats::default();
    let feasible = feasibility_slack(solver, cs, &clamped, &mut stats)?.amax() <= FEASIBILITY_TOL;

    let nu = u_ref.len();
    let m = cs.rows();
    let n = nu + m;
    let w = cfg.slack_weights(cs);
    let mut p = DMatrix::zeros(n, n);
    let mut c = DVector::zeros(n);
    for i in 0..nu {
        p[(i, i)] = 2.0 * cfg.q[i];
        c[i] = -2.0 * cfg.q[i] * u_ref[i];
    }
    for i in 0..m {
        match cfg.p {
            SlackNorm::L2 => p[(nu + i, nu + i)] = w[i],
            SlackNorm::L1 => c[nu + i] = w[i],
        }
    }
    let mut a = DMatrix::zeros(m, n);
    a.view_mut((0, 0), (m, nu)).copy_from(&cs.a);
    for i in 0..m {
        a[(i, nu + i)] = -1.0;
    }
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::from_element(n, f64::INFINITY);
    lower.rows_mut(0, nu).copy_from(&cs.lower);
    upper.rows_mut(0, nu).copy_from(&cs.upper);
    let problem = QpProblem {
        p,
        c,
        a,
        b: cs.b.clone(),
        lower,
        upper,
    };
    let mut start = DVector::zeros(n);
    start.rows_mut(0, nu).copy_from(&clamped);
    start.rows_mut(nu, m).copy_from(&cs.residual(&clamped).map(|v| v.max(0.0)));
    let sol = solve_tracking(solver, &problem, Some(&start), "rssa", &mut stats)?;
    let u = cs.clamp_to_box(&sol.z.rows(0, nu).into_owned());
    let excess = cs.residual(&u);
    let rows = DVector::from_iterator(m, (0..m).map(|i| sol.z[nu + i].max(excess[i]).max(0.0)));
    Ok(FilterResult {
        u,
        s: pad_slack(cs, &rows),
        feasible,
        method: Method::Rssa,
        stats,
    })
}

/// Projected SSA: phase I finds the minimal weighted slack that makes the
/// constraints feasible, phase II tracks `u_ref` under the relaxed rows.
pub fn pssa_filter(
    solver: &mut QpSolver,
    cs: &ConstraintSet,
    u_ref: &DVector<f64>,
    cfg: &RelaxationConfig,
) -> Result<FilterResult, FilterError> {
    check_inputs(cs, u_ref)?;
    cfg.validate(u_ref.len())?;
    let clamped = cs.clamp_to_box(u_ref);
    if cs.is_empty() || satisfies(cs, &clamped, None) {
        return Ok(trivial(cs, u_ref, Method::Pssa));
    }
    let mut stats = SolverStats::default();
    let weights = cfg.slack_weights(cs);
    let phase1 = min_slack_projection(solver, &cs.a, &cs.b, &cs.lower, &cs.upper, &weights, cfg.p, Some(&clamped))?;
    if phase1.iterations > 0 {
        stats.add(phase1.iterations);
    }
    if phase1.status != QpStatus::Optimal {
        return Err(FilterError::SolverFailure {
            stage: "pssa phase I",
            status: phase1.status,
            iterations: phase1.iterations,
        });
    }
    let s_star = phase1.s;
    let feasible = s_star.amax() <= FEASIBILITY_TOL;
    let relax = s_star.add_scalar(PHASE_TWO_MARGIN);
    let u = if satisfies(cs, &clamped, Some(&relax)) {
        clamped
    } else {
        let problem = tracking_problem(cs, u_ref, &cfg.q, &relax);
        let sol = solver.solve_from(&problem, Some(&phase1.u))?;
        stats.add(sol.iterations);
        stats.primal_residual = sol.primal_residual;
        stats.dual_residual = sol.dual_residual;
        if sol.status != QpStatus::Optimal {
            return Err(FilterError::PhaseTwoInconsistent {
                status: sol.status,
                slack_norm: s_star.amax(),
                rows: cs.rows(),
                problem: Box::new(problem),
            });
        }
        sol.z
    };
    let s = if feasible {
        DVector::zeros(cs.pair_count())
    } else {
        pad_slack(cs, &s_star)
    };
    Ok(FilterResult {
        u,
        s,
        feasible,
        method: Method::Pssa,
        stats,
    })
}

/// Dispatches to the filter named by `method`.
pub fn apply_filter(
    solver: &mut QpSolver,
    method: Method,
    cs: &ConstraintSet,
    u_ref: &DVector<f64>,
    cfg: &RelaxationConfig,
) -> Result<FilterResult, FilterError> {
    match method {
        Method::Ssa => ssa_filter(solver, cs, u_ref, &cfg.q),
        Method::Rssa => rssa_filter(solver, cs, u_ref, cfg),
        Method::Pssa => pssa_filter(solver, cs, u_ref, cfg),
    }
}

/// Weighted slack objective `(1/p) sum qs_i s_i^p` of a padded slack vector.
pub fn weighted_slack_norm(cs: &ConstraintSet, s: &DVector<f64>, cfg: &RelaxationConfig) -> f64 {
    let rows = DVector::from_iterator(cs.rows(), cs.pair_ids.iter().map(|&id| s[id]));
    cfg.p.weighted(&rows, &cfg.slack_weights(cs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::PairClass;
    use approx::assert_relative_eq;

    fn set(a: &[f64], rows: usize, b: &[f64], lo: f64, hi: f64) -> ConstraintSet {
        let nu = a.len() / rows.max(1);
        let nu = if rows == 0 { 1 } else { nu };
        ConstraintSet {
            a: DMatrix::from_row_slice(rows, nu, a),
            b: DVector::from_row_slice(b),
            pair_ids: (0..rows).collect(),
            classes: vec![PairClass::Env; rows],
            weights: DVector::from_element(rows, 1.0),
            phi: DVector::from_element(rows, 0.0),
            lower: DVector::from_element(nu, lo),
            upper: DVector::from_element(nu, hi),
        }
    }

    fn two_wall() -> ConstraintSet {
        set(&[-1.0, 1.0], 2, &[-0.5, -0.5], -1.0, 1.0)
    }

    #[test]
    fn empty_set_passes_reference() {
        let cs = set(&[], 0, &[], -1.0, 1.0);
        let u_ref = DVector::from_element(1, 0.3);
        let mut solver = QpSolver::default();
        for m in Method::ALL {
            let r = apply_filter(&mut solver, m, &cs, &u_ref, &RelaxationConfig::for_method(m, 1)).unwrap();
            assert_eq!(r.u, u_ref);
            assert!(r.feasible);
            assert_eq!(r.s.len(), 0);
        }
    }

    #[test]
    fn ssa_projects_onto_half_line() {
        let cs = set(&[1.0], 1, &[-0.5], -1.0, 1.0);
        let r = ssa_filter(&mut QpSolver::default(), &cs, &DVector::from_element(1, 0.3), &[1.0]).unwrap();
        assert!(r.feasible);
        assert_relative_eq!(r.u[0], -0.5, epsilon = 1e-9);
    }

    #[test]
    fn ssa_conflict_passes_clamped_reference() {
        let r = ssa_filter(&mut QpSolver::default(), &two_wall(), &DVector::zeros(1), &[1.0]).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.u[0], 0.0);
        assert_relative_eq!(r.s, DVector::from_vec(vec![0.5, 0.5]), epsilon = 1e-12);
        let r = ssa_filter(&mut QpSolver::default(), &two_wall(), &DVector::from_element(1, 3.0), &[1.0]).unwrap();
        assert_eq!(r.u[0], 1.0);
    }

    #[test]
    fn pssa_conflict_pins_normal_motion() {
        // u = (tangential, normal); walls act on the normal axis only.
        let cs = set(&[0.0, -1.0, 0.0, 1.0], 2, &[-0.5, -0.5], -1.0, 1.0);
        let u_ref = DVector::from_vec(vec![0.3, 0.4]);
        let r = pssa_filter(&mut QpSolver::default(), &cs, &u_ref, &RelaxationConfig::pssa_default(2)).unwrap();
        assert!(!r.feasible);
        assert_relative_eq!(r.s, DVector::from_vec(vec![0.5, 0.5]), epsilon = 1e-6);
        assert_relative_eq!(r.u[0], 0.3, epsilon = 1e-9);
        assert!(r.u[1].abs() <= 1e-6);
    }

    #[test]
    fn rssa_conflict_is_symmetric_and_approaches_projection() {
        let mut last = 0.0;
        for w in [1.0, 10.0, 1e3, 1e5] {
            let cfg = RelaxationConfig {
                qs_scale: w,
                ..RelaxationConfig::pssa_default(1)
            };
            let r = rssa_filter(&mut QpSolver::default(), &two_wall(), &DVector::zeros(1), &cfg).unwrap();
            assert!(!r.feasible);
            assert_relative_eq!(r.s[0], r.s[1], epsilon = 1e-9);
            assert!(r.u[0].abs() <= 1e-9);
            assert!(r.s[0] + 1e-12 >= last && r.s[0] <= 0.5 + 1e-9);
            last = r.s[0];
        }
        assert_relative_eq!(last, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn feasible_unbound_rows_agree_across_methods() {
        // The row is active but does not bind at clamp(u_ref).
        let cs = set(&[1.0, 1.0], 1, &[1.0], -1.0, 1.0);
        let u_ref = DVector::from_vec(vec![0.2, -0.1]);
        let mut solver = QpSolver::default();
        for m in Method::ALL {
            let r = apply_filter(&mut solver, m, &cs, &u_ref, &RelaxationConfig::for_method(m, 2)).unwrap();
            assert_eq!(r.u, u_ref);
            assert_eq!(r.s.amax(), 0.0);
        }
    }

    #[test]
    fn binding_row_rssa_trades_slack_for_tracking() {
        // With finite slack weight the joint optimum relaxes a binding row:
        // 2(u - 0.3) + w s = 0 at u = -0.5 + s gives s = 1.6 / (2 + w).
        let cs = set(&[1.0], 1, &[-0.5], -1.0, 1.0);
        let u_ref = DVector::from_element(1, 0.3);
        let cfg = RelaxationConfig::rssa_default(1);
        let r = rssa_filter(&mut QpSolver::default(), &cs, &u_ref, &cfg).unwrap();
        assert!(r.feasible);
        assert_relative_eq!(r.s[0], 1.6 / 12.0, epsilon = 1e-8);
        assert_relative_eq!(r.u[0], -0.5 + 1.6 / 12.0, epsilon = 1e-8);
        let p = pssa_filter(&mut QpSolver::default(), &cs, &u_ref, &RelaxationConfig::pssa_default(1)).unwrap();
        assert_eq!(p.s[0], 0.0);
        assert_relative_eq!(p.u[0], -0.5, epsilon = 1e-8);
    }

    #[test]
    fn weighted_projection_prefers_cheap_row() {
        let mut cs = two_wall();
        cs.weights = DVector::from_vec(vec![4.0, 1.0]);
        let r = pssa_filter(&mut QpSolver::default(), &cs, &DVector::zeros(1), &RelaxationConfig::pssa_default(1)).unwrap();
        assert_relative_eq!(r.s, DVector::from_vec(vec![0.2, 0.8]), epsilon = 1e-6);
    }

    #[test]
    fn slack_is_padded_to_pair_count() {
        let mut cs = two_wall();
        cs.pair_ids = vec![1, 3];
        cs.phi = DVector::from_element(5, -1.0);
        let r = pssa_filter(&mut QpSolver::default(), &cs, &DVector::zeros(1), &RelaxationConfig::pssa_default(1)).unwrap();
        assert_eq!(r.s.len(), 5);
        assert_eq!(r.s[0], 0.0);
        assert_relative_eq!(r.s[1], 0.5, epsilon = 1e-6);
        assert_relative_eq!(r.s[3], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cs = two_wall();
        let mut cfg = RelaxationConfig::pssa_default(1);
        cfg.qs_scale = 0.0;
        assert!(matches!(
            pssa_filter(&mut QpSolver::default(), &cs, &DVector::zeros(1), &cfg),
            Err(FilterError::InvalidConfig(_))
        ));
        let cfg = RelaxationConfig::pssa_default(3);
        assert!(matches!(
            rssa_filter(&mut QpSolver::default(), &cs, &DVector::zeros(1), &cfg),
            Err(FilterError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn damped_pseudo_inverse_of_scalar() {
        let j = DMatrix::from_element(1, 1, 1.0);
        let e = DVector::from_element(1, 0.5);
        assert_relative_eq!(damped_pseudo_inverse_apply(&j, &e, 0.0)[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(damped_pseudo_inverse_apply(&j, &e, 1.0)[0], 0.25, epsilon = 1e-12);
        let zero = DMatrix::zeros(1, 1);
        assert_eq!(damped_pseudo_inverse_apply(&zero, &e, 0.0)[0], 0.0);
    }
}
