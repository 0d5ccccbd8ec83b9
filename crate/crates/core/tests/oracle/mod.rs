//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix4, Vector3, Vector4};
use rand::Rng;

/// Random box-constrained QP with a strictly feasible interior point.
pub struct RandomQp {
    pub p: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

/// `rank` sets the rank of the PSD cost; zero gives a linear program.
pub fn random_qp<R: Rng>(rng: &mut R, n: usize, m: usize, rank: usize) -> RandomQp {
    let g = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    let p = &g * g.transpose();
    let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let lower = DVector::from_fn(n, |_, _| rng.random_range(-2.0..-0.5));
    let upper = DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
    let x0 = DVector::from_fn(n, |i, _| rng.random_range(0.5 * lower[i]..0.5 * upper[i]));
    let margin = DVector::from_fn(m, |_, _| rng.random_range(0.01..0.5));
    let b = &a * &x0 + margin;
    RandomQp {
        p,
        c,
        a,
        b,
        lower,
        upper,
    }
}

fn project_box(x: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i]))
}

/// Proximal augmented Lagrangian outer loop with an accelerated
/// projected-gradient inner solve over the box. The proximal term keeps each
/// inner problem strongly convex, so linear programs are handled as well.
pub fn qp_oracle(
    p: &DMatrix<f64>,
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> DVector<f64> {
    let n = c.len();
    let m = b.len();
    let rho = 10.0;
    let mu = 1.0;
    let p_norm = if n > 0 { p.clone().symmetric_eigenvalues().amax() } else { 0.0 };
    let a_norm2 = if m > 0 { (a.transpose() * a).symmetric_eigenvalues().amax() } else { 0.0 };
    let lip = p_norm + mu + rho * a_norm2;
    let step = 1.0 / lip;
    let momentum = {
        let kappa = lip / mu;
        (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0)
    };
    let mut lambda = DVector::zeros(m);
    let mut x = project_box(&DVector::zeros(n), lo, hi);
    for _outer in 0..5000 {
        let center = x.clone();
        let grad = |x: &DVector<f64>| {
            let viol = ((a * x - b) * rho + &lambda).map(|v| v.max(0.0));
            p * x + c + (x - &center) * mu + a.transpose() * viol
        };
        let mut prev = x.clone();
        for _ in 0..5000 {
            let yk = &x + (&x - &prev) * momentum;
            let x_next = project_box(&(&yk - grad(&yk) * step), lo, hi);
            let moved = (&x_next - &x).amax();
            prev = x;
            x = x_next;
            if moved < 1e-15 {
                break;
            }
        }
        let new_lambda = ((a * &x - b) * rho + &lambda).map(|v| v.max(0.0));
        let dual_change = (&new_lambda - &lambda).amax();
        lambda = new_lambda;
        let primal_change = (&x - &center).amax();
        if dual_change < 1e-12 && primal_change < 1e-12 {
            break;
        }
    }
    x
}

pub fn qp_objective(p: &DMatrix<f64>, c: &DVector<f64>, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(p * x)) + c.dot(x)
}

/// Homogeneous transform from translation and roll-pitch-yaw, built from
/// elementary 4x4 rotations in the order Rz(yaw) * Ry(pitch) * Rx(roll).
pub fn homogeneous(t: [f64; 3], rpy: [f64; 3]) -> Matrix4<f64> {
    let (r, p, y) = (rpy[0], rpy[1], rpy[2]);
    let rx = Matrix4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, r.cos(), -r.sin(), 0.0, //
        0.0, r.sin(), r.cos(), 0.0, //
        0.0, 0.0, 0.0, 1.0,
    );
    let ry = Matrix4::new(
        p.cos(), 0.0, p.sin(), 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        -p.sin(), 0.0, p.cos(), 0.0, //
        0.0, 0.0, 0.0, 1.0,
    );
    let rz = Matrix4::new(
        y.cos(), -y.sin(), 0.0, 0.0, //
        y.sin(), y.cos(), 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    );
    let mut tr = Matrix4::identity();
    tr[(0, 3)] = t[0];
    tr[(1, 3)] = t[1];
    tr[(2, 3)] = t[2];
    tr * rz * ry * rx
}

/// Rotation about a unit axis by Rodrigues' formula, as a 4x4 transform.
pub fn axis_rotation(axis: [f64; 3], angle: f64) -> Matrix4<f64> {
    let k = Vector3::from(axis);
    let kx = nalgebra::Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    let r = nalgebra::Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos());
    let mut out = Matrix4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    out
}

pub fn translation(t: [f64; 3]) -> Matrix4<f64> {
    let mut out = Matrix4::identity();
    out[(0, 3)] = t[0];
    out[(1, 3)] = t[1];
    out[(2, 3)] = t[2];
    out
}

pub fn apply(t: &Matrix4<f64>, p: [f64; 3]) -> Vector3<f64> {
    let v = t * Vector4::new(p[0], p[1], p[2], 1.0);
    Vector3::new(v.x, v.y, v.z)
}

/// Sphere centers computed by chaining 4x4 transforms joint by joint,
/// independently of the crate's kinematics. Coordinates follow joint order.
pub fn oracle_centers(model: &pssa_core::kinematics::RobotModel, q: &[f64]) -> Vec<Vector3<f64>> {
    use pssa_core::kinematics::JointKind;
    use std::collections::HashMap;
    let mut offsets = Vec::with_capacity(model.joints.len());
    let mut k = 0;
    for j in &model.joints {
        offsets.push(k);
        k += j.kind.dofs();
    }
    let index: HashMap<&str, usize> = model.joints.iter().enumerate().map(|(i, j)| (j.name.as_str(), i)).collect();
    let mut frames: Vec<Option<Matrix4<f64>>> = vec![None; model.joints.len()];
    fn frame(
        i: usize,
        model: &pssa_core::kinematics::RobotModel,
        q: &[f64],
        offsets: &[usize],
        index: &HashMap<&str, usize>,
        frames: &mut Vec<Option<Matrix4<f64>>>,
    ) -> Matrix4<f64> {
        if let Some(t) = frames[i] {
            return t;
        }
        let j = &model.joints[i];
        let parent = match index.get(j.parent.as_str()) {
            Some(&p) => frame(p, model, q, offsets, index, frames),
            None => Matrix4::identity(),
        };
        let t0 = j.origin_translation;
        let origin = homogeneous([t0.x, t0.y, t0.z], j.origin_rotation);
        let axis = [j.axis.x, j.axis.y, j.axis.z];
        let k = offsets[i];
        let motion = match j.kind {
            JointKind::Fixed => Matrix4::identity(),
            JointKind::Revolute => axis_rotation(axis, q[k]),
            JointKind::Prismatic => translation([axis[0] * q[k], axis[1] * q[k], axis[2] * q[k]]),
            JointKind::FreeTranslation => translation([q[k], q[k + 1], q[k + 2]]),
        };
        let t = parent * origin * motion;
        frames[i] = Some(t);
        t
    }
    model
        .spheres
        .iter()
        .map(|s| {
            let t = match index.get(s.frame.as_str()) {
                Some(&i) => frame(i, model, q, &offsets, &index, &mut frames),
                None => Matrix4::identity(),
            };
            apply(&t, [s.local_offset.x, s.local_offset.y, s.local_offset.z])
        })
        .collect()
}

/// Uniform configuration within the model's position limits.
pub fn random_configuration<R: Rng>(rng: &mut R, model: &pssa_core::kinematics::RobotModel) -> DVector<f64> {
    let limits = model.position_limits();
    DVector::from_iterator(limits.len(), limits.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)))
}

/// Central-difference Jacobian of one oracle sphere center.
pub fn fd_jacobian(model: &pssa_core::kinematics::RobotModel, q: &DVector<f64>, sphere: usize, h: f64) -> DMatrix<f64> {
    let n = q.len();
    let mut jac = DMatrix::zeros(3, n);
    for k in 0..n {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[k] += h;
        qm[k] -= h;
        let d = (oracle_centers(model, qp.as_slice())[sphere] - oracle_centers(model, qm.as_slice())[sphere]) / (2.0 * h);
        jac.set_column(k, &d);
    }
    jac
}
