//! Dense convex quadratic programs with box bounds and linear inequalities:
//!
//! ```text
//! minimize    1/2 z' P z + c' z
//! subject to  A z <= b,   lower <= z <= upper
//! ```
//!
//! The solver is an operator-splitting (ADMM) scheme on the stacked
//! constraint matrix `[A; I]` with Ruiz equilibration and adaptive penalty.
//! Once the iterates settle, an active set is guessed and the reduced KKT
//! system is solved directly; the polished point is accepted only if it
//! passes the full KKT check. Primal infeasibility is detected from the
//! limit of successive dual differences.

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cost matrix is not symmetric")]
    NotSymmetric,
    #[error("cost matrix is not positive semidefinite")]
    NotPsd,
    #[error("box bounds are inverted at index {0}")]
    InvertedBounds(usize),
    #[error("malformed problem dump: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    PrimalInfeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub z: DVector<f64>,
    pub objective: f64,
    /// Multipliers of `A z <= b` (nonnegative at optimality).
    pub y: DVector<f64>,
    /// Box multipliers: positive at an active upper bound, negative at lower.
    pub w: DVector<f64>,
    /// `max((A z - b)+) / (1 + |b|_inf)` together with box violation.
    pub primal_residual: f64,
    /// `|P z + c + A' y + w|_inf`.
    pub dual_residual: f64,
    pub iterations: usize,
    pub polished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub eps_infeasible: f64,
    pub max_iterations: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub scaling_iterations: usize,
    pub polish: bool,
    pub adaptive_rho: bool,
    pub check_interval: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            eps_infeasible: 1e-8,
            max_iterations: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            scaling_iterations: 10,
            polish: true,
            adaptive_rho: true,
            check_interval: 5,
        }
    }
}

impl QpProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.p * z)) + self.c.dot(z)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.c.len();
        let m = self.b.len();
        if self.p.shape() != (n, n) {
            return Err(QpError::DimensionMismatch(format!("P is {:?}, expected {n}x{n}", self.p.shape())));
        }
        if self.a.shape() != (m, n) {
            return Err(QpError::DimensionMismatch(format!("A is {:?}, expected {m}x{n}", self.a.shape())));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(QpError::DimensionMismatch(format!(
                "box has {}/{} entries for {n} variables",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for i in 0..n {
            if !(self.lower[i] <= self.upper[i]) {
                return Err(QpError::InvertedBounds(i));
            }
        }
        let mut diagonal = true;
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.p[(i, j)] - self.p[(j, i)]).abs() > 1e-9 {
                    return Err(QpError::NotSymmetric);
                }
                if self.p[(i, j)] != 0.0 || self.p[(j, i)] != 0.0 {
                    diagonal = false;
                }
            }
        }
        if diagonal {
            if (0..n).any(|i| self.p[(i, i)] < -1e-9) {
                return Err(QpError::NotPsd);
            }
        } else {
            let shifted = self.p.symmetric_part() + DMatrix::identity(n, n) * 1e-9;
            if Cholesky::new(shifted).is_none() {
                return Err(QpError::NotPsd);
            }
        }
        Ok(())
    }

    /// Plain-text dump: dimensions, then P, c, A, b, lower, upper, one
    /// matrix row per line in row-major order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let n = self.num_vars();
        let m = self.num_constraints();
        let _ = writeln!(out, "qp {n} {m}");
        let row = |out: &mut String, vals: &mut dyn Iterator<Item = f64>| {
            let line: Vec<String> = vals.map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        };
        let _ = writeln!(out, "P");
        for i in 0..n {
            row(&mut out, &mut self.p.row(i).iter().copied());
        }
        let _ = writeln!(out, "c");
        row(&mut out, &mut self.c.iter().copied());
        let _ = writeln!(out, "A");
        for i in 0..m {
            row(&mut out, &mut self.a.row(i).iter().copied());
        }
        let _ = writeln!(out, "b");
        row(&mut out, &mut self.b.iter().copied());
        let _ = writeln!(out, "lower");
        row(&mut out, &mut self.lower.iter().copied());
        let _ = writeln!(out, "upper");
        row(&mut out, &mut self.upper.iter().copied());
        out
    }

    pub fn from_text(text: &str) -> Result<QpProblem, QpError> {
        let bad = |msg: &str| QpError::Parse(msg.to_string());
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 3 || header[0] != "qp" {
            return Err(bad("expected `qp <n> <m>` header"));
        }
        let n: usize = header[1].parse().map_err(|_| bad("bad n"))?;
        let m: usize = header[2].parse().map_err(|_| bad("bad m"))?;
        let mut numbers = |expect_tag: &str, rows: usize, cols: usize| -> Result<Vec<f64>, QpError> {
            if lines.next().map(str::trim) != Some(expect_tag) {
                return Err(QpError::Parse(format!("expected section `{expect_tag}`")));
            }
            let mut vals = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let line = lines.next().ok_or_else(|| QpError::Parse(format!("truncated `{expect_tag}`")))?;
                let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
                let row = row.map_err(|e| QpError::Parse(e.to_string()))?;
                if row.len() != cols {
                    return Err(QpError::Parse(format!("row of `{expect_tag}` has {} entries", row.len())));
                }
                vals.extend(row);
            }
            Ok(vals)
        };
        let p = numbers("P", n, n)?;
        let c = numbers("c", 1, n)?;
        let a = numbers("A", m, n)?;
        let b = numbers("b", 1, m)?;
        let lower = numbers("lower", 1, n)?;
        let upper = numbers("upper", 1, n)?;
        Ok(QpProblem {
            p: DMatrix::from_row_slice(n, n, &p),
            c: DVector::from_vec(c),
            a: DMatrix::from_row_slice(m, n, &a),
            b: DVector::from_vec(b),
            lower: DVector::from_vec(lower),
            upper: DVector::from_vec(upper),
        })
    }

    /// Primal residual as reported in [`QpSolution`].
    pub fn primal_residual(&self, z: &DVector<f64>) -> f64 {
        let scale = 1.0 + self.b.amax();
        let ineq = (&self.a * z - &self.b).iter().fold(0.0f64, |acc, &v| acc.max(v)) / scale;
        let bx = (0..z.len()).fold(0.0f64, |acc, i| {
            acc.max(self.lower[i] - z[i]).max(z[i] - self.upper[i])
        });
        ineq.max(bx)
    }

    /// Stationarity residual `|P z + c + A' y + w|_inf`.
    pub fn dual_residual(&self, z: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64 {
        (&self.p * z + &self.c + self.a.tr_mul(y) + w).amax()
    }
}

/// Reusable solver workspace. Holds settings and an optional record of the
/// problems it solved, for debug dumps.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: QpSettings,
    recording: Option<Vec<QpProblem>>,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        QpSolver {
            settings,
            recording: None,
        }
    }

    /// Starts keeping copies of every solved problem.
    pub fn start_recording(&mut self) {
        self.recording = Some(Vec::new());
    }

    pub fn take_recorded(&mut self) -> Vec<QpProblem> {
        self.recording.take().unwrap_or_default()
    }

    pub fn solve(&mut self, problem: &QpProblem) -> Result<QpSolution, QpError> {
        self.solve_from(problem, None)
    }

    /// Solves starting the primal iterate at `start` (clamped to the box).
    pub fn solve_from(&mut self, problem: &QpProblem, start: Option<&DVector<f64>>) -> Result<QpSolution, QpError> {
        problem.validate()?;
        if let Some(s) = start {
            if s.len() != problem.num_vars() {
                return Err(QpError::DimensionMismatch(format!(
                    "start has {} entries for {} variables",
                    s.len(),
                    problem.num_vars()
                )));
            }
        }
        if let Some(rec) = &mut self.recording {
            rec.push(problem.clone());
        }
        if problem.num_vars() == 0 {
            return Ok(solve_empty(problem));
        }
        let sol = Admm::new(problem, &self.settings).run(start);
        if sol.status == QpStatus::Optimal {
            return Ok(sol);
        }
        if let Some(x0) = start {
            if let Some(exact) = primal_active_set(problem, x0, &self.settings, sol.iterations) {
                return Ok(exact);
            }
        }
        Ok(sol)
    }
}

const ACTIVE_SET_FEAS_TOL: f64 = 1e-12;

/// Solves the equality-constrained step of the active-set method. Working
/// bounds fix their coordinates; working rows are restricted to the free
/// coordinates and normalized there, which keeps the system well conditioned
/// when a row is nearly spanned by the bounds. Returns the step and one
/// multiplier per working constraint in the original scaling.
fn equality_step(problem: &QpProblem, working: &[usize], grad: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = problem.num_vars();
    let m = problem.num_constraints();
    let mut fixed = vec![false; n];
    let mut rows = Vec::new();
    for &k in working {
        if k < m {
            rows.push(k);
        } else {
            fixed[(k - m) % n] = true;
        }
    }
    let free: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
    let nf = free.len();
    let nr = rows.len();
    let norms: Vec<f64> = rows
        .iter()
        .map(|&k| free.iter().map(|&j| problem.a[(k, j)].powi(2)).sum::<f64>().sqrt())
        .collect();
    if norms.contains(&0.0) {
        return None;
    }
    let dim = nf + nr;
    let mut kkt = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[(a, b)] = problem.p[(i, j)];
        }
        rhs[a] = -grad[i];
    }
    for (r, &k) in rows.iter().enumerate() {
        for (a, &j) in free.iter().enumerate() {
            let v = problem.a[(k, j)] / norms[r];
            kkt[(nf + r, a)] = v;
            kkt[(a, nf + r)] = v;
        }
    }
    let lu = kkt.clone().lu();
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..3 {
        let res = &rhs - &kkt * &sol;
        sol += lu.solve(&res)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut step = DVector::zeros(n);
    for (a, &j) in free.iter().enumerate() {
        step[j] = sol[a];
    }
    let row_mult: Vec<f64> = (0..nr).map(|r| sol[nf + r] / norms[r]).collect();
    // Stationarity on the fixed coordinates gives the bound multipliers.
    let mut stat = grad + &problem.p * &step;
    for (r, &k) in rows.iter().enumerate() {
        stat += problem.a.row(k).transpose() * row_mult[r];
    }
    let mut lambda = DVector::zeros(working.len());
    let mut next_row = 0;
    for (w, &k) in working.iter().enumerate() {
        lambda[w] = if k < m {
            next_row += 1;
            row_mult[next_row - 1]
        } else if k < m + n {
            -stat[k - m]
        } else {
            stat[k - m - n]
        };
    }
    Some((step, lambda))
}

/// Primal active-set method for strictly convex problems, started from a
/// feasible point. Used when ADMM stalls on nearly degenerate feasible sets.
/// Returns `None` if `P` is not positive definite, the start is infeasible or
/// the result fails the KKT tolerances.
fn primal_active_set(problem: &QpProblem, x0: &DVector<f64>, settings: &QpSettings, admm_iterations: usize) -> Option<QpSolution> {
    let n = problem.num_vars();
    let m = problem.num_constraints();
    let mut z = DVector::from_iterator(n, (0..n).map(|i| x0[i].clamp(problem.lower[i], problem.upper[i])));
    let scale = 1.0 + problem.b.amax();
    if (&problem.a * &z - &problem.b).iter().any(|&v| v > ACTIVE_SET_FEAS_TOL * scale) {
        return None;
    }
    problem.p.clone().cholesky()?;

    // Constraint k reads g_k' z <= h_k: rows of A, then upper bounds, then lower bounds.
    let total = m + 2 * n;
    let g_dot = |k: usize, v: &DVector<f64>| -> f64 {
        if k < m {
            problem.a.row(k).transpose().dot(v)
        } else if k < m + n {
            v[k - m]
        } else {
            -v[k - m - n]
        }
    };
    let h = |k: usize| -> f64 {
        if k < m {
            problem.b[k]
        } else if k < m + n {
            problem.upper[k - m]
        } else {
            -problem.lower[k - m - n]
        }
    };
    let finite = |k: usize| h(k).is_finite();

    let mut working: Vec<usize> = Vec::new();
    let max_iter = 10 * (total + n) + 100;
    for it in 0..max_iter {
        let nw = working.len();
        let grad = &problem.p * &z + &problem.c;
        let (step, lambda) = equality_step(problem, &working, &grad)?;

        if step.amax() <= 1e-12 * (1.0 + z.amax()) {
            let lambda_scale = 1.0 + lambda.amax();
            let leaving = (0..nw)
                .filter(|&r| lambda[r] < -1e-12 * lambda_scale)
                .min_by_key(|&r| working[r]);
            match leaving {
                Some(r) => {
                    working.remove(r);
                }
                _ => {
                    let mut y = DVector::zeros(m);
                    let mut w = DVector::zeros(n);
                    for (&k, &v) in working.iter().zip(lambda.iter()) {
                        let v = v.max(0.0);
                        if k < m {
                            y[k] = v;
                        } else if k < m + n {
                            w[k - m] += v;
                        } else {
                            w[k - m - n] -= v;
                        }
                    }
                    let primal_residual = problem.primal_residual(&z);
                    let dual_residual = problem.dual_residual(&z, &y, &w);
                    if primal_residual > settings.eps_primal || dual_residual > settings.eps_dual {
                        return None;
                    }
                    return Some(QpSolution {
                        status: QpStatus::Optimal,
                        objective: problem.objective(&z),
                        z,
                        y,
                        w,
                        primal_residual,
                        dual_residual,
                        iterations: admm_iterations + it + 1,
                        polished: true,
                    });
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for k in 0..total {
            if working.contains(&k) || !finite(k) {
                continue;
            }
            let gp = g_dot(k, &step);
            if gp <= 1e-14 {
                continue;
            }
            let slack = (h(k) - g_dot(k, &z)).max(0.0);
            let ratio = slack / gp;
            if ratio < alpha || (ratio == alpha && blocking.is_some_and(|b| k < b)) {
                alpha = ratio;
                blocking = Some(k);
            }
        }
        z += alpha * &step;
        if let Some(k) = blocking {
            working.push(k);
        }
    }
    None
}

fn solve_empty(problem: &QpProblem) -> QpSolution {
    let feasible = problem.b.iter().all(|&v| v >= 0.0);
    QpSolution {
        status: if feasible {
            QpStatus::Optimal
        } else {
            QpStatus::PrimalInfeasible
        },
        z: DVector::zeros(0),
        objective: 0.0,
        y: DVector::zeros(problem.num_constraints()),
        w: DVector::zeros(0),
        primal_residual: problem.b.iter().fold(0.0f64, |acc, &v| acc.max(-v)),
        dual_residual: 0.0,
        iterations: 0,
        polished: false,
    }
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const ADAPT_INTERVAL: usize = 25;
const POLISH_DELTA: f64 = 1e-9;
const POLISH_REFINE: usize = 200;
const POLISH_ACTIVE_SET_ROUNDS: usize = 12;
const POLISH_PERIOD: usize = 50;

/// Scaled problem and ADMM state.
struct Admm<'a> {
    prob: &'a QpProblem,
    settings: &'a QpSettings,
    n: usize,
    /// Number of `A` rows; the stacked matrix has `m_a + n` rows.
    m_a: usize,
    p: DMatrix<f64>,
    q: DVector<f64>,
    at: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    cost_scale: f64,
    rho: f64,
    rho_vec: DVector<f64>,
    kkt: Cholesky<f64, Dyn>,
}

impl<'a> Admm<'a> {
    fn new(prob: &'a QpProblem, settings: &'a QpSettings) -> Self {
        let n = prob.num_vars();
        let m_a = prob.num_constraints();
        let m = m_a + n;
        let mut at = DMatrix::zeros(m, n);
        at.view_mut((0, 0), (m_a, n)).copy_from(&prob.a);
        at.view_mut((m_a, 0), (n, n)).fill_with_identity();
        let mut l = DVector::from_element(m, f64::NEG_INFINITY);
        let mut u = DVector::from_element(m, f64::INFINITY);
        u.rows_mut(0, m_a).copy_from(&prob.b);
        l.rows_mut(m_a, n).copy_from(&prob.lower);
        u.rows_mut(m_a, n).copy_from(&prob.upper);

        let mut p = prob.p.symmetric_part();
        let mut q = prob.c.clone();
        let mut d = DVector::from_element(n, 1.0);
        let mut e = DVector::from_element(m, 1.0);
        let mut cost_scale = 1.0;
        let clamp_norm = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
        for _ in 0..settings.scaling_iterations {
            let dt: DVector<f64> = DVector::from_iterator(
                n,
                (0..n).map(|j| {
                    let norm = p.column(j).amax().max(at.column(j).amax());
                    1.0 / clamp_norm(norm).sqrt()
                }),
            );
            let et: DVector<f64> =
                DVector::from_iterator(m, (0..m).map(|i| 1.0 / clamp_norm(at.row(i).amax()).sqrt()));
            for j in 0..n {
                for i in 0..n {
                    p[(i, j)] *= dt[i] * dt[j];
                }
                for i in 0..m {
                    at[(i, j)] *= et[i] * dt[j];
                }
            }
            q.component_mul_assign(&dt);
            d.component_mul_assign(&dt);
            e.component_mul_assign(&et);
        }
        if settings.scaling_iterations > 0 {
            let mean_col = (0..n).map(|j| p.column(j).amax()).sum::<f64>() / n as f64;
            let gamma = 1.0 / clamp_norm(mean_col.max(q.amax()));
            p *= gamma;
            q *= gamma;
            cost_scale *= gamma;
        }
        for i in 0..m {
            l[i] *= e[i];
            u[i] *= e[i];
        }

        let rho = settings.rho;
        let rho_vec = row_rho(&l, &u, rho);
        let kkt = factor(&p, &at, &rho_vec, settings.sigma);
        Admm {
            prob,
            settings,
            n,
            m_a,
            p,
            q,
            at,
            l,
            u,
            d,
            e,
            cost_scale,
            rho,
            rho_vec,
            kkt,
        }
    }

    fn run(mut self, start: Option<&DVector<f64>>) -> QpSolution {
        let n = self.n;
        let m = self.m_a + n;
        let s = self.settings;
        let mut x = match start {
            Some(z0) => {
                let clamped = DVector::from_iterator(
                    n,
                    (0..n).map(|i| z0[i].clamp(self.prob.lower[i], self.prob.upper[i])),
                );
                clamped.component_div(&self.d)
            }
            None => DVector::zeros(n),
        };
        let mut z = project(&(&self.at * &x), &self.l, &self.u);
        let mut y = DVector::zeros(m);
        let mut y_prev = y.clone();
        let mut next_polish = 1e-3;
        let mut best: Option<QpSolution> = None;

        for k in 1..=s.max_iterations {
            y_prev.copy_from(&y);
            let rhs = &x * s.sigma - &self.q + self.at.tr_mul(&(self.rho_vec.component_mul(&z) - &y));
            let x_tilde = self.kkt.solve(&rhs);
            let z_tilde = &self.at * &x_tilde;
            x = &x_tilde * s.alpha + &x * (1.0 - s.alpha);
            let z_relax = &z_tilde * s.alpha + &z * (1.0 - s.alpha);
            let z_new = project(&(&z_relax + y.component_div(&self.rho_vec)), &self.l, &self.u);
            y += self.rho_vec.component_mul(&(&z_relax - &z_new));
            z = z_new;

            if k % s.check_interval != 0 && k != s.max_iterations {
                continue;
            }

            if self.primal_infeasible(&(&y - &y_prev)) {
                let mut sol = self.unscaled(&x, &y, k, false);
                sol.status = QpStatus::PrimalInfeasible;
                return sol;
            }

            let (r_prim, r_dual, prim_norm, dual_norm) = self.scaled_residuals(&x, &z, &y);
            let rel_prim = r_prim / (prim_norm + 1e-30);
            let rel_dual = r_dual / (dual_norm + 1e-30);

            let candidate = self.unscaled(&x, &y, k, false);
            let converged = candidate.primal_residual <= s.eps_primal && candidate.dual_residual <= s.eps_dual;

            let worst = rel_prim.max(rel_dual);
            let periodic = k % POLISH_PERIOD == 0 && worst <= 1e-2;
            if s.polish && (converged || worst <= next_polish || periodic) {
                next_polish = next_polish.min(worst * 0.1);
                if let Some(p) = self.polish(&x, &z, &y, k, r_prim) {
                    return p;
                }
            }
            if converged {
                return candidate;
            }
            best = Some(candidate);

            if s.adaptive_rho && k % ADAPT_INTERVAL == 0 {
                let ratio = (rel_prim / (rel_dual + 1e-30)).sqrt();
                let new_rho = (self.rho * ratio).clamp(RHO_MIN, RHO_MAX);
                if new_rho > 5.0 * self.rho || new_rho < 0.2 * self.rho {
                    self.rho = new_rho;
                    self.rho_vec = row_rho(&self.l, &self.u, new_rho);
                    self.kkt = factor(&self.p, &self.at, &self.rho_vec, s.sigma);
                }
            }
        }
        let mut sol = best.unwrap_or_else(|| self.unscaled(&x, &y, s.max_iterations, false));
        sol.status = QpStatus::MaxIterations;
        sol
    }

    /// Residuals in scaled space plus their normalizers.
    fn scaled_residuals(&self, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> (f64, f64, f64, f64) {
        let ax = &self.at * x;
        let r_prim = (&ax - z).component_div(&self.e).amax();
        let prim_norm = ax.component_div(&self.e).amax().max(z.component_div(&self.e).amax());
        let px = &self.p * x;
        let aty = self.at.tr_mul(y);
        let inv = 1.0 / self.cost_scale;
        let r_dual = (&px + &self.q + &aty).component_div(&self.d).amax() * inv;
        let dual_norm = px
            .component_div(&self.d)
            .amax()
            .max(aty.component_div(&self.d).amax())
            .max(self.q.component_div(&self.d).amax())
            * inv;
        (r_prim, r_dual, prim_norm, dual_norm)
    }

    fn primal_infeasible(&self, dy_scaled: &DVector<f64>) -> bool {
        let dy = dy_scaled.component_mul(&self.e);
        let norm = dy.amax();
        if norm <= self.settings.eps_infeasible {
            return false;
        }
        let dy = dy / norm;
        let mut support = 0.0;
        for i in 0..dy.len() {
            let (lo, hi) = (self.l[i] / self.e[i], self.u[i] / self.e[i]);
            if dy[i] > 0.0 {
                if hi.is_infinite() {
                    return false;
                }
                support += hi * dy[i];
            } else if dy[i] < 0.0 {
                if lo.is_infinite() {
                    return false;
                }
                support += lo * dy[i];
            }
        }
        if support >= -self.settings.eps_infeasible {
            return false;
        }
        // A' dy in unscaled coordinates: D^-1 Abar' E^-1 dy_unscaled.
        let aty = self.at.tr_mul(&dy.component_div(&self.e)).component_div(&self.d);
        aty.amax() <= self.settings.eps_infeasible
    }

    /// Unscaled solution from scaled iterates, with the primal point clamped
    /// to the box.
    fn unscaled(&self, x: &DVector<f64>, y: &DVector<f64>, iterations: usize, polished: bool) -> QpSolution {
        let n = self.n;
        let prob = self.prob;
        let mut zu = x.component_mul(&self.d);
        for i in 0..n {
            zu[i] = zu[i].clamp(prob.lower[i], prob.upper[i]);
        }
        let yu = y.component_mul(&self.e) / self.cost_scale;
        let ya = yu.rows(0, self.m_a).into_owned();
        let w = yu.rows(self.m_a, n).into_owned();
        QpSolution {
            status: QpStatus::Optimal,
            objective: prob.objective(&zu),
            primal_residual: prob.primal_residual(&zu),
            dual_residual: prob.dual_residual(&zu, &ya, &w),
            z: zu,
            y: ya,
            w,
            iterations,
            polished,
        }
    }

    /// Guesses the active set from the iterates and refines it by a short
    /// primal-dual active-set loop on the reduced KKT system. Returns a
    /// solution only if it is a verified KKT point.
    fn polish(&self, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>, k: usize, r_prim: f64) -> Option<QpSolution> {
        let m = self.m_a + self.n;
        let side_of = |i: usize, near: bool| -> Option<Bound> {
            let (lo, hi) = (self.l[i], self.u[i]);
            if lo == hi {
                return Some(Bound::Equal);
            }
            let tau = (10.0 * r_prim).max(1e-7) * self.e[i].max(1.0);
            let at_lo = lo.is_finite() && (z[i] - lo < -y[i] || (near && z[i] - lo < tau));
            let at_hi = hi.is_finite() && (hi - z[i] < y[i] || (near && hi - z[i] < tau));
            match (at_lo, at_hi) {
                (true, true) => Some(if y[i] >= 0.0 { Bound::Upper } else { Bound::Lower }),
                (true, false) => Some(Bound::Lower),
                (false, true) => Some(Bound::Upper),
                (false, false) => None,
            }
        };
        let standard: Vec<(usize, Bound)> = (0..m).filter_map(|i| side_of(i, false).map(|b| (i, b))).collect();
        let wide: Vec<(usize, Bound)> = (0..m).filter_map(|i| side_of(i, true).map(|b| (i, b))).collect();
        if let Some(sol) = self.refine_active_set(standard.clone(), x, y, k) {
            return Some(sol);
        }
        if wide != standard {
            return self.refine_active_set(wide, x, y, k);
        }
        None
    }

    fn refine_active_set(
        &self,
        mut active: Vec<(usize, Bound)>,
        x: &DVector<f64>,
        y: &DVector<f64>,
        k: usize,
    ) -> Option<QpSolution> {
        let m = self.m_a + self.n;
        let mut seen: Vec<Vec<(usize, Bound)>> = Vec::new();
        let mut x_start = x.clone();
        for _ in 0..POLISH_ACTIVE_SET_ROUNDS {
            if seen.contains(&active) {
                return None;
            }
            seen.push(active.clone());
            let (xp, mult) = self.solve_reduced(&active, &x_start, y)?;
            let zp = &self.at * &xp;
            let sign_tol = 1e-12 * self.cost_scale;
            let mut next: Vec<(usize, Bound)> = Vec::with_capacity(active.len());
            let mut changed = false;
            for (&(i, side), &v) in active.iter().zip(mult.iter()) {
                let wrong = match side {
                    Bound::Upper => v < -sign_tol / self.e[i],
                    Bound::Lower => v > sign_tol / self.e[i],
                    Bound::Equal => false,
                };
                if wrong {
                    changed = true;
                } else {
                    next.push((i, side));
                }
            }
            for i in 0..m {
                if active.iter().any(|&(j, _)| j == i) {
                    continue;
                }
                let tol = 1e-12 * (1.0 + self.u[i].abs().min(self.l[i].abs()));
                if zp[i] > self.u[i] + tol {
                    next.push((i, Bound::Upper));
                    changed = true;
                } else if zp[i] < self.l[i] - tol {
                    next.push((i, Bound::Lower));
                    changed = true;
                }
            }
            if !changed {
                let mut yp = DVector::zeros(m);
                for (&(i, side), &v) in active.iter().zip(mult.iter()) {
                    yp[i] = match side {
                        Bound::Upper => v.max(0.0),
                        Bound::Lower => v.min(0.0),
                        Bound::Equal => v,
                    };
                }
                let sol = self.unscaled(&xp, &yp, k, true);
                let tight = self.settings.eps_primal * 1e-3;
                return (sol.primal_residual <= tight && sol.dual_residual <= self.settings.eps_dual).then_some(sol);
            }
            next.sort_by_key(|&(i, _)| i);
            active = next;
            x_start = xp;
        }
        None
    }

    /// Solves the regularized reduced KKT system for the given active rows,
    /// refining from the current iterate so singular directions keep their
    /// ADMM values. Returns the primal point and the active multipliers.
    fn solve_reduced(
        &self,
        active: &[(usize, Bound)],
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = self.n;
        let na = active.len();
        let dim = n + na;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.p);
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, n).copy_from(&(-&self.q));
        for (r, &(i, side)) in active.iter().enumerate() {
            for j in 0..n {
                let v = self.at[(i, j)];
                kkt[(n + r, j)] = v;
                kkt[(j, n + r)] = v;
            }
            rhs[n + r] = match side {
                Bound::Lower => self.l[i],
                Bound::Upper | Bound::Equal => self.u[i],
            };
        }
        let mut reg = kkt.clone();
        for i in 0..n {
            reg[(i, i)] += POLISH_DELTA;
        }
        for i in n..dim {
            reg[(i, i)] -= POLISH_DELTA;
        }
        let lu = reg.lu();
        let mut sol = DVector::zeros(dim);
        sol.rows_mut(0, n).copy_from(x);
        for (r, &(i, _)) in active.iter().enumerate() {
            sol[n + r] = y[i];
        }
        let mut prev = f64::INFINITY;
        for _ in 0..POLISH_REFINE {
            let res = &rhs - &kkt * &sol;
            let norm = res.amax();
            if norm < 1e-14 || norm > 0.9 * prev {
                break;
            }
            prev = norm;
            sol += lu.solve(&res)?;
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((sol.rows(0, n).into_owned(), sol.rows(n, na).into_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
    Equal,
}

fn row_rho(l: &DVector<f64>, u: &DVector<f64>, rho: f64) -> DVector<f64> {
    DVector::from_iterator(
        l.len(),
        l.iter().zip(u.iter()).map(|(&lo, &hi)| {
            if lo.is_infinite() && hi.is_infinite() {
                RHO_MIN
            } else if lo == hi {
                rho * RHO_EQ_FACTOR
            } else {
                rho
            }
        }),
    )
}

fn factor(p: &DMatrix<f64>, at: &DMatrix<f64>, rho: &DVector<f64>, sigma: f64) -> Cholesky<f64, Dyn> {
    let n = p.nrows();
    let mut weighted = at.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= rho[i].sqrt();
    }
    let k = p + DMatrix::identity(n, n) * sigma + weighted.tr_mul(&weighted);
    // P is PSD and sigma > 0, so K is positive definite.
    Cholesky::new(k).expect("ADMM system matrix must be positive definite")
}

fn project(v: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), (0..v.len()).map(|i| v[i].max(l[i]).min(u[i])))
}

/// Norm order of the slack penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SlackNorm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
}

impl SlackNorm {
    pub fn from_order(p: u32) -> Option<SlackNorm> {
        match p {
            1 => Some(SlackNorm::L1),
            2 => Some(SlackNorm::L2),
            _ => None,
        }
    }

    pub fn order(self) -> u32 {
        match self {
            SlackNorm::L1 => 1,
            SlackNorm::L2 => 2,
        }
    }

    /// `(1/p) * sum_i w_i * s_i^p`.
    pub fn weighted(self, s: &DVector<f64>, weights: &DVector<f64>) -> f64 {
        match self {
            SlackNorm::L1 => s.iter().zip(weights.iter()).map(|(s, w)| w * s.abs()).sum(),
            SlackNorm::L2 => 0.5 * s.iter().zip(weights.iter()).map(|(s, w)| w * s * s).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlackProjection {
    pub s: DVector<f64>,
    /// A box-feasible control with `A u <= b + s`.
    pub u: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
}

/// Smallest weighted slack `s >= 0` such that some `u` in the box satisfies
/// `A u <= b + s`. When `hint` (clamped to the box) already satisfies every
/// row, zero slack is returned without solving.
#[allow(clippy::too_many_arguments)]
pub fn min_slack_projection(
    solver: &mut QpSolver,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    weights: &DVector<f64>,
    norm: SlackNorm,
    hint: Option<&DVector<f64>>,
) -> Result<SlackProjection, QpError> {
    let nu = lower.len();
    let m = b.len();
    if a.shape() != (m, nu) || upper.len() != nu || weights.len() != m {
        return Err(QpError::DimensionMismatch(format!(
            "A is {:?}, b {m}, box {nu}/{}, weights {}",
            a.shape(),
            upper.len(),
            weights.len()
        )));
    }
    if let Some(i) = (0..nu).find(|&i| !(lower[i] <= upper[i])) {
        return Err(QpError::InvertedBounds(i));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(QpError::DimensionMismatch("slack weights must be positive".into()));
    }
    let clamp = |u: &DVector<f64>| DVector::from_iterator(nu, (0..nu).map(|i| u[i].clamp(lower[i], upper[i])));
    let excess = |u: &DVector<f64>| (a * u - b).map(|v| v.max(0.0));

    if let Some(h) = hint {
        if h.len() != nu {
            return Err(QpError::DimensionMismatch(format!("hint has {} entries for {nu} controls", h.len())));
        }
        let u = clamp(h);
        if m == 0 || (a * &u - b).iter().all(|&v| v <= 0.0) {
            return Ok(SlackProjection {
                s: DVector::zeros(m),
                u,
                status: QpStatus::Optimal,
                iterations: 0,
            });
        }
    }
    if m == 0 {
        return Ok(SlackProjection {
            s: DVector::zeros(0),
            u: clamp(&DVector::zeros(nu)),
            status: QpStatus::Optimal,
            iterations: 0,
        });
    }

    let n = nu + m;
    let mut p = DMatrix::zeros(n, n);
    let mut c = DVector::zeros(n);
    for i in 0..m {
        match norm {
            SlackNorm::L2 => p[(nu + i, nu + i)] = weights[i],
            SlackNorm::L1 => c[nu + i] = weights[i],
        }
    }
    let mut stacked = DMatrix::zeros(m, n);
    stacked.view_mut((0, 0), (m, nu)).copy_from(a);
    for i in 0..m {
        stacked[(i, nu + i)] = -1.0;
    }
    let mut lo = DVector::zeros(n);
    let mut hi = DVector::from_element(n, f64::INFINITY);
    lo.rows_mut(0, nu).copy_from(lower);
    hi.rows_mut(0, nu).copy_from(upper);
    let problem = QpProblem {
        p,
        c,
        a: stacked,
        b: b.clone(),
        lower: lo,
        upper: hi,
    };
    let start = hint.map(|h| {
        let u = clamp(h);
        let mut z = DVector::zeros(n);
        z.rows_mut(0, nu).copy_from(&u);
        z.rows_mut(nu, m).copy_from(&excess(&u));
        z
    });
    let sol = solver.solve_from(&problem, start.as_ref())?;
    let u = clamp(&sol.z.rows(0, nu).into_owned());
    let status = match sol.status {
        QpStatus::PrimalInfeasible => QpStatus::MaxIterations,
        other => other,
    };
    // Slack implied by the control is optimal given u and exactly feasible.
    Ok(SlackProjection {
        s: excess(&u),
        u,
        status,
        iterations: sol.iterations,
    })
}
