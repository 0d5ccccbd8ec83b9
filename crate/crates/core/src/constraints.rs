//! Energy functions `phi_i = d_min - d_i` and the linear safe-control
//! constraints they induce.
//!
//! A pair is active when `phi_i >= 0`. Every active pair contributes the row
//! `L_g phi_i * u <= -eta_i - L_f phi_i`, which is the requirement
//! `d/dt phi_i <= -eta_i` after substituting control-affine dynamics. There is
//! no hysteresis at the activation boundary.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3xX, RowDVector, Vector3};
use thiserror::Error;

use crate::collision::{pair_distance, CollisionError, CollisionPair, Obstacle, PairClass, PairDistance, PairKind};
use crate::kinematics::{JointState, KinematicState, KinematicsError, RobotModel};

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// `dx/dt = f(x) + g(x) u` with bounded `u`.
pub trait ControlAffine: Send + Sync {
    fn control_dim(&self) -> usize;
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    fn input_matrix(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn control_bounds(&self) -> (DVector<f64>, DVector<f64>);
}

#[derive(Clone, Default)]
pub enum Dynamics {
    /// `f = 0`, `g = I`; the control box is the model's velocity limits.
    #[default]
    FirstOrderIntegrator,
    ControlAffine(Arc<dyn ControlAffine>),
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dynamics::FirstOrderIntegrator => write!(f, "FirstOrderIntegrator"),
            Dynamics::ControlAffine(d) => write!(f, "ControlAffine(n_u = {})", d.control_dim()),
        }
    }
}

/// Active safe-control constraints `a * u <= b` plus the control box.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    /// Rows of `L_g phi` for the active pairs.
    pub a: DMatrix<f64>,
    /// `-eta_i - L_f phi_i` for the active pairs.
    pub b: DVector<f64>,
    /// Index into the full pair list for every row.
    pub pair_ids: Vec<usize>,
    /// Class of the pair behind every row.
    pub classes: Vec<PairClass>,
    /// Per-row relative slack weights (copied from the pairs).
    pub weights: DVector<f64>,
    /// `phi` for every pair, active or not.
    pub phi: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl ConstraintSet {
    /// A set with no active rows.
    pub fn unconstrained(lower: DVector<f64>, upper: DVector<f64>, pair_count: usize) -> Self {
        let n = lower.len();
        ConstraintSet {
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            pair_ids: Vec::new(),
            classes: Vec::new(),
            weights: DVector::zeros(0),
            phi: DVector::from_element(pair_count, f64::NEG_INFINITY),
            lower,
            upper,
        }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.a.nrows() == 0
    }

    pub fn pair_count(&self) -> usize {
        self.phi.len()
    }

    /// `a * u - b`, i.e. `d/dt phi + eta` per active row.
    pub fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.a * u - &self.b
    }

    pub fn clamp_to_box(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            u.len(),
            u.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(&v, (&lo, &hi))| v.clamp(lo, hi)),
        )
    }

    /// Keeps only the rows selected by `keep`.
    pub fn select_rows(&self, keep: &[usize]) -> ConstraintSet {
        let n = self.control_dim();
        let mut a = DMatrix::zeros(keep.len(), n);
        for (r, &k) in keep.iter().enumerate() {
            a.set_row(r, &self.a.row(k));
        }
        ConstraintSet {
            a,
            b: DVector::from_iterator(keep.len(), keep.iter().map(|&k| self.b[k])),
            pair_ids: keep.iter().map(|&k| self.pair_ids[k]).collect(),
            classes: keep.iter().map(|&k| self.classes[k]).collect(),
            weights: DVector::from_iterator(keep.len(), keep.iter().map(|&k| self.weights[k])),
            phi: self.phi.clone(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }
}

/// Distances of every pair at the given centers.
pub fn pair_distances(
    pairs: &[CollisionPair],
    centers: &[Vector3<f64>],
    model: &RobotModel,
    obstacles: &[Obstacle],
) -> Result<Vec<PairDistance>, CollisionError> {
    pairs
        .iter()
        .map(|p| pair_distance(p, centers, model, obstacles))
        .collect()
}

/// `phi_i = d_min_i - d_i` in pair order.
pub fn evaluate_phi(
    pairs: &[CollisionPair],
    centers: &[Vector3<f64>],
    model: &RobotModel,
    obstacles: &[Obstacle],
) -> Result<DVector<f64>, CollisionError> {
    let d = pair_distances(pairs, centers, model, obstacles)?;
    Ok(DVector::from_iterator(
        pairs.len(),
        pairs.iter().zip(&d).map(|(p, d)| p.d_min - d.d),
    ))
}

/// Builds the active constraint set at `q`.
pub fn assemble_constraints(
    model: &RobotModel,
    q: &JointState,
    pairs: &[CollisionPair],
    obstacles: &[Obstacle],
    dynamics: &Dynamics,
) -> Result<ConstraintSet, ConstraintError> {
    let state = model.evaluate(q)?;
    let distances = pair_distances(pairs, &state.centers, model, obstacles)?;
    assemble_from_state(&state, q, pairs, &distances, dynamics)
}

/// Same as [`assemble_constraints`] with kinematics and distances already
/// evaluated at `q`.
pub fn assemble_from_state(
    state: &KinematicState<'_>,
    q: &JointState,
    pairs: &[CollisionPair],
    distances: &[PairDistance],
    dynamics: &Dynamics,
) -> Result<ConstraintSet, ConstraintError> {
    let nx = q.len();
    if distances.len() != pairs.len() {
        return Err(ConstraintError::DimensionMismatch(format!(
            "{} distances for {} pairs",
            distances.len(),
            pairs.len()
        )));
    }
    if state.centers.is_empty() && !pairs.is_empty() {
        return Err(ConstraintError::DimensionMismatch("pairs given for a model without spheres".into()));
    }

    let (drift, input, lower, upper) = match dynamics {
        Dynamics::FirstOrderIntegrator => (None, None, None, None),
        Dynamics::ControlAffine(sys) => {
            let f = sys.drift(&q.0);
            let g = sys.input_matrix(&q.0);
            let (lo, hi) = sys.control_bounds();
            if f.len() != nx || g.nrows() != nx || g.ncols() != sys.control_dim() || lo.len() != g.ncols() || hi.len() != g.ncols() {
                return Err(ConstraintError::DimensionMismatch(format!(
                    "dynamics f: {}, g: {}x{}, bounds: {}/{} for state dimension {nx}",
                    f.len(),
                    g.nrows(),
                    g.ncols(),
                    lo.len(),
                    hi.len()
                )));
            }
            (Some(f), Some(g), Some(lo), Some(hi))
        }
    };
    let (lower, upper) = match (lower, upper) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => (state.model().velocity_lower.clone(), state.model().velocity_upper.clone()),
    };
    let nu = lower.len();

    let phi = DVector::from_iterator(pairs.len(), pairs.iter().zip(distances).map(|(p, d)| p.d_min - d.d));
    let active: Vec<usize> = (0..pairs.len()).filter(|&i| phi[i] >= 0.0).collect();

    let mut jacobians: Vec<Option<Matrix3xX<f64>>> = vec![None; state.centers.len()];
    let mut jac = |s: usize| -> Matrix3xX<f64> {
        jacobians[s].get_or_insert_with(|| state.sphere_jacobian(s)).clone()
    };

    let mut a = DMatrix::zeros(active.len(), nu);
    let mut b = DVector::zeros(active.len());
    for (r, &i) in active.iter().enumerate() {
        let pair = &pairs[i];
        let dir = distances[i].direction;
        // Gradient of d with respect to q.
        let grad: RowDVector<f64> = match pair.kind {
            PairKind::BodyObstacle { body, .. } => dir.transpose() * jac(body),
            PairKind::BodyBody { body, other } => dir.transpose() * (jac(body) - jac(other)),
        };
        let lf = drift.as_ref().map_or(0.0, |f| -(&grad * f)[0]);
        match &input {
            Some(g) => a.set_row(r, &(-(&grad * g))),
            None => a.set_row(r, &(-&grad)),
        }
        b[r] = -pair.eta - lf;
    }

    Ok(ConstraintSet {
        a,
        b,
        classes: active.iter().map(|&i| pairs[i].class()).collect(),
        weights: DVector::from_iterator(active.len(), active.iter().map(|&i| pairs[i].weight)),
        pair_ids: active,
        phi,
        lower,
        upper,
    })
}
