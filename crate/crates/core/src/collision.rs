//! Obstacles, collision pairs, and signed surface distances.
//!
//! The gradient convention is fixed here: [`PairDistance::direction`] is the
//! gradient of `d` with respect to the first body's center. For sphere
//! partners it points from the partner toward the body, for planes it is the
//! plane normal. A body-body pair has gradient `-direction` with respect to
//! the second body's center.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::RobotModel;

/// Center separations below this are treated as coincident.
pub const COINCIDENT_TOL: f64 = 1e-9;
const NORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollisionError {
    #[error("degenerate geometry: coincident centers for pair {0}")]
    DegenerateGeometry(String),
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),
    #[error("pair references missing entity: {0}")]
    MissingEntity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ObstacleShape {
    Sphere { center: [f64; 3], radius: f64 },
    /// The free side is `normal · (x - point) >= 0`.
    HalfSpace { point: [f64; 3], normal: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: usize,
    pub shape: ObstacleShape,
}

impl Obstacle {
    pub fn sphere(id: usize, center: Vector3<f64>, radius: f64) -> Result<Self, CollisionError> {
        if !(radius > 0.0) {
            return Err(CollisionError::InvalidObstacle(format!("obstacle {id}: radius must be positive")));
        }
        Ok(Obstacle {
            id,
            shape: ObstacleShape::Sphere {
                center: center.into(),
                radius,
            },
        })
    }

    pub fn half_space(id: usize, point: Vector3<f64>, normal: Vector3<f64>) -> Result<Self, CollisionError> {
        if (normal.norm() - 1.0).abs() > NORMAL_TOL {
            return Err(CollisionError::InvalidObstacle(format!("obstacle {id}: plane normal must be unit")));
        }
        Ok(Obstacle {
            id,
            shape: ObstacleShape::HalfSpace {
                point: point.into(),
                normal: normal.into(),
            },
        })
    }

    /// Center of a sphere obstacle, the anchor point of a plane.
    pub fn position(&self) -> Vector3<f64> {
        match self.shape {
            ObstacleShape::Sphere { center, .. } => center.into(),
            ObstacleShape::HalfSpace { point, .. } => point.into(),
        }
    }

    pub fn set_position(&mut self, p: Vector3<f64>) {
        match &mut self.shape {
            ObstacleShape::Sphere { center, .. } => *center = p.into(),
            ObstacleShape::HalfSpace { point, .. } => *point = p.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairClass {
    Env,
    #[serde(rename = "self")]
    SelfCollision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Sphere index and index into the obstacle list.
    BodyObstacle { body: usize, obstacle: usize },
    /// Two distinct sphere indices.
    BodyBody { body: usize, other: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionPair {
    pub kind: PairKind,
    pub d_min: f64,
    /// Required rate of decrease of the energy function while active.
    pub eta: f64,
    /// Relative slack weight of this pair.
    pub weight: f64,
}

impl CollisionPair {
    pub fn class(&self) -> PairClass {
        match self.kind {
            PairKind::BodyObstacle { .. } => PairClass::Env,
            PairKind::BodyBody { .. } => PairClass::SelfCollision,
        }
    }

    pub fn body(&self) -> usize {
        match self.kind {
            PairKind::BodyObstacle { body, .. } | PairKind::BodyBody { body, .. } => body,
        }
    }

    pub fn describe(&self, model: &RobotModel) -> String {
        let name = |i: usize| model.spheres.get(i).map_or("?", |s| s.name.as_str()).to_string();
        match self.kind {
            PairKind::BodyObstacle { body, obstacle } => format!("{}/obstacle#{obstacle}", name(body)),
            PairKind::BodyBody { body, other } => format!("{}/{}", name(body), name(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMargins {
    pub d_min_env: f64,
    pub d_min_self: f64,
    pub eta: f64,
}

impl Default for PairMargins {
    fn default() -> Self {
        PairMargins {
            d_min_env: 0.05,
            d_min_self: 0.01,
            eta: 0.5,
        }
    }
}

/// Signed surface distance and the gradient direction of a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDistance {
    pub d: f64,
    pub direction: Vector3<f64>,
}

fn sphere_sphere(
    body: Vector3<f64>,
    body_radius: f64,
    partner: Vector3<f64>,
    partner_radius: f64,
    label: impl FnOnce() -> String,
) -> Result<PairDistance, CollisionError> {
    let diff = body - partner;
    let dist = diff.norm();
    if dist < COINCIDENT_TOL {
        return Err(CollisionError::DegenerateGeometry(label()));
    }
    Ok(PairDistance {
        d: dist - body_radius - partner_radius,
        direction: diff / dist,
    })
}

/// Distance of one pair given current sphere centers.
pub fn pair_distance(
    pair: &CollisionPair,
    centers: &[Vector3<f64>],
    model: &RobotModel,
    obstacles: &[Obstacle],
) -> Result<PairDistance, CollisionError> {
    let missing = || CollisionError::MissingEntity(pair.describe(model));
    match pair.kind {
        PairKind::BodyObstacle { body, obstacle } => {
            let c = *centers.get(body).ok_or_else(missing)?;
            let r = model.spheres.get(body).ok_or_else(missing)?.radius;
            match obstacles.get(obstacle).ok_or_else(missing)?.shape {
                ObstacleShape::Sphere { center, radius } => {
                    sphere_sphere(c, r, center.into(), radius, || pair.describe(model))
                }
                ObstacleShape::HalfSpace { point, normal } => {
                    let n = Vector3::from(normal);
                    Ok(PairDistance {
                        d: n.dot(&(c - Vector3::from(point))) - r,
                        direction: n,
                    })
                }
            }
        }
        PairKind::BodyBody { body, other } => {
            let a = *centers.get(body).ok_or_else(missing)?;
            let b = *centers.get(other).ok_or_else(missing)?;
            let ra = model.spheres.get(body).ok_or_else(missing)?.radius;
            let rb = model.spheres.get(other).ok_or_else(missing)?.radius;
            sphere_sphere(a, ra, b, rb, || pair.describe(model))
        }
    }
}

/// All body-obstacle pairs (sphere-major) followed by the model's self pairs.
pub fn enumerate_pairs(model: &RobotModel, obstacles: &[Obstacle], margins: &PairMargins) -> Vec<CollisionPair> {
    let mut pairs = Vec::with_capacity(model.spheres.len() * obstacles.len() + model.self_pairs.len());
    for body in 0..model.spheres.len() {
        for obstacle in 0..obstacles.len() {
            pairs.push(CollisionPair {
                kind: PairKind::BodyObstacle { body, obstacle },
                d_min: margins.d_min_env,
                eta: margins.eta,
                weight: 1.0,
            });
        }
    }
    for (a, b) in &model.self_pairs {
        // Names were checked when the model was built.
        let (Some(body), Some(other)) = (model.sphere_index(a), model.sphere_index(b)) else {
            continue;
        };
        pairs.push(CollisionPair {
            kind: PairKind::BodyBody { body, other },
            d_min: margins.d_min_self,
            eta: margins.eta,
            weight: 1.0,
        });
    }
    pairs
}
