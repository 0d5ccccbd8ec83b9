//! Articulated robot models: a kinematic tree of joints carrying collision
//! spheres, with forward kinematics and sphere-center Jacobians.
//!
//! Frames are named after the joint that creates them. The tree is rooted at
//! a single base frame that appears only as a parent. Joint origin rotations
//! are roll-pitch-yaw, composed as `Rz(yaw) * Ry(pitch) * Rx(roll)` (Z-Y-X
//! intrinsic). A joint's axis is expressed in the frame obtained after the
//! origin transform, as in URDF.

use std::collections::HashMap;

use nalgebra::{DVector, Isometry3, Matrix3xX, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const AXIS_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("model validation error: {0}")]
    Validation(String),
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown sphere `{0}`")]
    UnknownSphere(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
    FreeTranslation,
}

impl JointKind {
    pub fn dofs(self) -> usize {
        match self {
            JointKind::Revolute | JointKind::Prismatic => 1,
            JointKind::Fixed => 0,
            JointKind::FreeTranslation => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub origin_translation: Vector3<f64>,
    /// Roll, pitch, yaw in radians.
    pub origin_rotation: [f64; 3],
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    /// One `(lo, hi)` per degree of freedom of this joint.
    pub position_limits: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereSpec {
    pub name: String,
    pub frame: String,
    pub local_offset: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackedRole {
    Arm,
    Base,
}

/// A sphere whose center is driven toward a goal by the nominal controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub name: String,
    pub sphere: String,
    pub role: TrackedRole,
}

/// Generalized coordinates of a robot.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState(pub DVector<f64>);

impl JointState {
    pub fn zeros(dofs: usize) -> Self {
        JointState(DVector::zeros(dofs))
    }

    pub fn from_slice(q: &[f64]) -> Self {
        JointState(DVector::from_column_slice(q))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub dofs: usize,
    pub joints: Vec<JointSpec>,
    pub spheres: Vec<SphereSpec>,
    pub self_pairs: Vec<(String, String)>,
    pub velocity_lower: DVector<f64>,
    pub velocity_upper: DVector<f64>,
    pub home: DVector<f64>,
    pub tracked_points: Vec<TrackedPoint>,
    base_frame: String,
    /// Parent joint index per joint, `None` for the base frame.
    parent_index: Vec<Option<usize>>,
    /// Offset of each joint's first coordinate in `q`.
    dof_offset: Vec<usize>,
    /// Joints sorted so that parents come before children.
    topo_order: Vec<usize>,
    /// Joint index of each sphere's frame, `None` for the base frame.
    sphere_frame: Vec<Option<usize>>,
    sphere_lookup: HashMap<String, usize>,
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum LimitsFile {
    Single([f64; 2]),
    Multi(Vec<[f64; 2]>),
}

#[derive(Debug, Deserialize, Serialize)]
struct JointFile {
    name: String,
    parent: String,
    #[serde(default)]
    origin_xyz: [f64; 3],
    #[serde(default)]
    origin_rpy: [f64; 3],
    #[serde(rename = "type")]
    kind: JointKind,
    #[serde(default)]
    axis: Option<[f64; 3]>,
    #[serde(default)]
    limits: Option<LimitsFile>,
}

#[derive(Debug, Deserialize, Serialize)]
struct SphereFile {
    name: String,
    frame: String,
    #[serde(default)]
    offset: [f64; 3],
    radius: f64,
}

#[derive(Debug, Deserialize, Serialize)]
struct VelocityLimitsFile {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    joints: Vec<JointFile>,
    spheres: Vec<SphereFile>,
    #[serde(default)]
    self_collision_pairs: Vec<[String; 2]>,
    velocity_limits: VelocityLimitsFile,
    #[serde(default)]
    home: Option<Vec<f64>>,
    #[serde(default)]
    tracked_points: Vec<TrackedPoint>,
    #[serde(default)]
    description: Option<String>,
}

/// Parses and validates a JSON robot model description.
pub fn load_robot_model(config_text: &str) -> Result<RobotModel, KinematicsError> {
    let file: ModelFile =
        serde_json::from_str(config_text).map_err(|e| KinematicsError::Parse(e.to_string()))?;
    let joints = file
        .joints
        .into_iter()
        .map(|j| {
            let limits = match (j.kind, j.limits) {
                (JointKind::Fixed, _) => Vec::new(),
                (_, None) => vec![(f64::NEG_INFINITY, f64::INFINITY); j.kind.dofs()],
                (_, Some(LimitsFile::Single([lo, hi]))) => vec![(lo, hi); j.kind.dofs()],
                (_, Some(LimitsFile::Multi(v))) => v.into_iter().map(|[lo, hi]| (lo, hi)).collect(),
            };
            JointSpec {
                name: j.name,
                parent: j.parent,
                origin_translation: Vector3::from(j.origin_xyz),
                origin_rotation: j.origin_rpy,
                kind: j.kind,
                axis: j.axis.map(Vector3::from).unwrap_or_else(Vector3::z),
                position_limits: limits,
            }
        })
        .collect();
    let spheres = file
        .spheres
        .into_iter()
        .map(|s| SphereSpec {
            name: s.name,
            frame: s.frame,
            local_offset: Vector3::from(s.offset),
            radius: s.radius,
        })
        .collect();
    let pairs = file
        .self_collision_pairs
        .into_iter()
        .map(|[a, b]| (a, b))
        .collect();
    RobotModel::new(
        file.name,
        joints,
        spheres,
        pairs,
        DVector::from_vec(file.velocity_limits.lower),
        DVector::from_vec(file.velocity_limits.upper),
        file.home.map(DVector::from_vec),
        file.tracked_points,
    )
}

/// SHA-256 of a model description, hex encoded. Used to tie logs to models.
pub fn model_hash(config_text: &str) -> String {
    let digest = Sha256::digest(config_text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RobotModel {
    /// Builds and validates a model. `home` defaults to zero clamped into
    /// the position limits.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        joints: Vec<JointSpec>,
        spheres: Vec<SphereSpec>,
        self_pairs: Vec<(String, String)>,
        velocity_lower: DVector<f64>,
        velocity_upper: DVector<f64>,
        home: Option<DVector<f64>>,
        tracked_points: Vec<TrackedPoint>,
    ) -> Result<RobotModel, KinematicsError> {
        let invalid = |msg: String| Err(KinematicsError::Validation(msg));

        let mut joint_lookup = HashMap::new();
        for (i, j) in joints.iter().enumerate() {
            if joint_lookup.insert(j.name.clone(), i).is_some() {
                return invalid(format!("duplicate joint `{}`", j.name));
            }
        }

        let mut base_frame: Option<String> = None;
        let mut parent_index = Vec::with_capacity(joints.len());
        for j in &joints {
            match joint_lookup.get(&j.parent) {
                Some(&p) => parent_index.push(Some(p)),
                None => {
                    match &base_frame {
                        Some(b) if *b != j.parent => {
                            return invalid(format!(
                                "unknown parent frame `{}` of joint `{}` (base frame is `{b}`)",
                                j.parent, j.name
                            ));
                        }
                        _ => base_frame = Some(j.parent.clone()),
                    }
                    parent_index.push(None);
                }
            }
        }
        // A model without joints still needs a base frame for its spheres.
        let base_frame = match base_frame {
            Some(b) => b,
            None if joints.is_empty() => spheres
                .first()
                .map(|s| s.frame.clone())
                .unwrap_or_else(|| "base".to_string()),
            None => return invalid("joint parents contain a cycle (no base frame)".into()),
        };

        // Topological order; also detects cycles.
        let mut depth = vec![usize::MAX; joints.len()];
        for start in 0..joints.len() {
            let mut chain = Vec::new();
            let mut cur = Some(start);
            while let Some(i) = cur {
                if depth[i] != usize::MAX {
                    break;
                }
                if chain.contains(&i) {
                    return invalid(format!("joint parents contain a cycle through `{}`", joints[i].name));
                }
                chain.push(i);
                cur = parent_index[i];
            }
            let mut d = match cur {
                Some(i) => depth[i],
                None => 0,
            };
            for &i in chain.iter().rev() {
                d = d.wrapping_add(1);
                depth[i] = d;
            }
        }
        let mut topo_order: Vec<usize> = (0..joints.len()).collect();
        topo_order.sort_by_key(|&i| (depth[i], i));

        let mut dof_offset = Vec::with_capacity(joints.len());
        let mut dofs = 0;
        for j in &joints {
            dof_offset.push(dofs);
            dofs += j.kind.dofs();
            if j.position_limits.len() != j.kind.dofs() {
                return invalid(format!(
                    "joint `{}` has {} limit pairs for {} degrees of freedom",
                    j.name,
                    j.position_limits.len(),
                    j.kind.dofs()
                ));
            }
            for &(lo, hi) in &j.position_limits {
                if !(lo <= hi) {
                    return invalid(format!("joint `{}` has position limits lo > hi", j.name));
                }
            }
            if matches!(j.kind, JointKind::Revolute | JointKind::Prismatic)
                && (j.axis.norm() - 1.0).abs() > AXIS_NORM_TOL
            {
                return invalid(format!("joint `{}` axis is not unit norm", j.name));
            }
        }

        let mut sphere_lookup = HashMap::new();
        let mut sphere_frame = Vec::with_capacity(spheres.len());
        for (i, s) in spheres.iter().enumerate() {
            if !(s.radius > 0.0) {
                return invalid(format!("sphere `{}` radius must be positive", s.name));
            }
            if sphere_lookup.insert(s.name.clone(), i).is_some() {
                return invalid(format!("duplicate sphere `{}`", s.name));
            }
            if s.frame == base_frame {
                sphere_frame.push(None);
            } else if let Some(&j) = joint_lookup.get(&s.frame) {
                sphere_frame.push(Some(j));
            } else {
                return invalid(format!("sphere `{}` references unknown frame `{}`", s.name, s.frame));
            }
        }

        for (a, b) in &self_pairs {
            if a == b {
                return invalid(format!("self-collision pair ({a}, {b}) references the same sphere"));
            }
            for n in [a, b] {
                if !sphere_lookup.contains_key(n) {
                    return invalid(format!("self-collision pair references unknown sphere `{n}`"));
                }
            }
        }

        if velocity_lower.len() != dofs || velocity_upper.len() != dofs {
            return invalid(format!(
                "velocity limits have {}/{} entries for {dofs} coordinates",
                velocity_lower.len(),
                velocity_upper.len()
            ));
        }
        for k in 0..dofs {
            if !(velocity_lower[k] < velocity_upper[k]) {
                return invalid(format!("velocity limits for coordinate {k} must satisfy lower < upper"));
            }
        }

        for t in &tracked_points {
            if !sphere_lookup.contains_key(&t.sphere) {
                return invalid(format!("tracked point `{}` references unknown sphere `{}`", t.name, t.sphere));
            }
        }

        let mut model = RobotModel {
            name,
            dofs,
            joints,
            spheres,
            self_pairs,
            velocity_lower,
            velocity_upper,
            home: DVector::zeros(dofs),
            tracked_points,
            base_frame,
            parent_index,
            dof_offset,
            topo_order,
            sphere_frame,
            sphere_lookup,
        };
        let home = match home {
            Some(h) if h.len() != dofs => {
                return invalid(format!("home pose has {} entries for {dofs} coordinates", h.len()))
            }
            Some(h) => h,
            None => model.clamp_position(&DVector::zeros(dofs)),
        };
        model.home = home;
        Ok(model)
    }

    pub fn base_frame(&self) -> &str {
        &self.base_frame
    }

    pub fn sphere_index(&self, name: &str) -> Option<usize> {
        self.sphere_lookup.get(name).copied()
    }

    /// Per-coordinate position limits, flattened in `q` order.
    pub fn position_limits(&self) -> Vec<(f64, f64)> {
        self.joints.iter().flat_map(|j| j.position_limits.iter().copied()).collect()
    }

    pub fn clamp_position(&self, q: &DVector<f64>) -> DVector<f64> {
        let limits = self.position_limits();
        DVector::from_iterator(q.len(), q.iter().zip(&limits).map(|(&v, &(lo, hi))| v.clamp(lo, hi)))
    }

    /// Joint indices from the base down to (and including) the frame's joint.
    fn chain_to(&self, frame: Option<usize>) -> Vec<usize> {
        let mut chain = Vec::new();
        let mut cur = frame;
        while let Some(j) = cur {
            chain.push(j);
            cur = self.parent_index[j];
        }
        chain.reverse();
        chain
    }

    /// Indices of the coordinates that move the given sphere.
    pub fn sphere_coordinates(&self, sphere: usize) -> Vec<usize> {
        self.chain_to(self.sphere_frame[sphere])
            .into_iter()
            .flat_map(|j| self.dof_offset[j]..self.dof_offset[j] + self.joints[j].kind.dofs())
            .collect()
    }

    fn check_dims(&self, q: &JointState) -> Result<(), KinematicsError> {
        if q.len() != self.dofs {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dofs,
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Evaluates every frame pose at `q`.
    pub fn evaluate(&self, q: &JointState) -> Result<KinematicState<'_>, KinematicsError> {
        self.check_dims(q)?;
        let n = self.joints.len();
        let mut pre = vec![Isometry3::identity(); n];
        let mut post = vec![Isometry3::identity(); n];
        for &j in &self.topo_order {
            let spec = &self.joints[j];
            let parent = match self.parent_index[j] {
                Some(p) => post[p],
                None => Isometry3::identity(),
            };
            let [roll, pitch, yaw] = spec.origin_rotation;
            let origin = Isometry3::from_parts(
                Translation3::from(spec.origin_translation),
                UnitQuaternion::from_rotation_matrix(&Rotation3::from_euler_angles(roll, pitch, yaw)),
            );
            let before = parent * origin;
            let k = self.dof_offset[j];
            let motion = match spec.kind {
                JointKind::Fixed => Isometry3::identity(),
                JointKind::Revolute => Isometry3::from_parts(
                    Translation3::identity(),
                    UnitQuaternion::from_scaled_axis(spec.axis * q.0[k]),
                ),
                JointKind::Prismatic => {
                    Isometry3::from_parts(Translation3::from(spec.axis * q.0[k]), UnitQuaternion::identity())
                }
                JointKind::FreeTranslation => Isometry3::from_parts(
                    Translation3::new(q.0[k], q.0[k + 1], q.0[k + 2]),
                    UnitQuaternion::identity(),
                ),
            };
            pre[j] = before;
            post[j] = before * motion;
        }
        let centers = self
            .spheres
            .iter()
            .zip(&self.sphere_frame)
            .map(|(s, f)| {
                let frame = match f {
                    Some(j) => post[*j],
                    None => Isometry3::identity(),
                };
                (frame * Point3::from(s.local_offset)).coords
            })
            .collect();
        Ok(KinematicState {
            model: self,
            pre,
            centers,
        })
    }

    /// World centers of all collision spheres, in model order.
    pub fn forward_kinematics(&self, q: &JointState) -> Result<Vec<Vector3<f64>>, KinematicsError> {
        Ok(self.evaluate(q)?.centers)
    }

    /// 3×N Jacobian of a sphere center with respect to `q`.
    pub fn point_jacobian(&self, q: &JointState, sphere: &str) -> Result<Matrix3xX<f64>, KinematicsError> {
        let idx = self
            .sphere_index(sphere)
            .ok_or_else(|| KinematicsError::UnknownSphere(sphere.to_string()))?;
        Ok(self.evaluate(q)?.sphere_jacobian(idx))
    }
}

/// Frame poses of a model at one configuration.
#[derive(Debug, Clone)]
pub struct KinematicState<'a> {
    model: &'a RobotModel,
    /// Pose of each joint frame before the joint's own motion.
    pre: Vec<Isometry3<f64>>,
    pub centers: Vec<Vector3<f64>>,
}

impl<'a> KinematicState<'a> {
    pub fn model(&self) -> &'a RobotModel {
        self.model
    }

    pub fn center(&self, sphere: usize) -> Vector3<f64> {
        self.centers[sphere]
    }

    pub fn sphere_jacobian(&self, sphere: usize) -> Matrix3xX<f64> {
        let model = self.model;
        let center = self.centers[sphere];
        let mut jac = Matrix3xX::zeros(model.dofs);
        for j in model.chain_to(model.sphere_frame[sphere]) {
            let spec = &model.joints[j];
            let pose = &self.pre[j];
            let k = model.dof_offset[j];
            match spec.kind {
                JointKind::Fixed => {}
                JointKind::Revolute => {
                    let axis = pose.rotation * spec.axis;
                    jac.set_column(k, &axis.cross(&(center - pose.translation.vector)));
                }
                JointKind::Prismatic => jac.set_column(k, &(pose.rotation * spec.axis)),
                JointKind::FreeTranslation => {
                    let rot = pose.rotation.to_rotation_matrix();
                    for c in 0..3 {
                        jac.set_column(k + c, &rot.matrix().column(c));
                    }
                }
            }
        }
        jac
    }
}
