//! Episode scores: goal tracking J, control constraint satisfaction C,
//! safety constraint satisfaction S, QP feasibility rate R_Feas, and Pareto
//! front extraction for the ablation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::PairClass;
use crate::kinematics::TrackedRole;
use crate::simulator::{fmt_float, fmt_opt, EpisodeLog, PairInfo, StepRecord};

/// Squared-distance scale of the tracking score.
pub const J_SCALE: f64 = 0.002;
/// Squared-slack scale of the control constraint score.
pub const C_SCALE: f64 = 0.2;
/// Squared-penetration scale of the safety score.
pub const S_SCALE: f64 = 0.0002;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("episode log has no steps")]
    EmptyLog,
    #[error("step {step} has {found} goal errors for {expected} tracked points")]
    GoalMismatch { step: usize, found: usize, expected: usize },
    #[error("step {step} references pair {pair} but the log has {count} pairs")]
    UnknownPair { step: usize, pair: usize, count: usize },
}

/// Tallies behind the scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub steps: usize,
    pub infeasible_steps: usize,
    pub env_slack_steps: usize,
    pub self_slack_steps: usize,
    pub env_violations: usize,
    pub self_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "J_arm")]
    pub j_arm: Option<f64>,
    #[serde(rename = "J_base")]
    pub j_base: Option<f64>,
    #[serde(rename = "C_env")]
    pub c_env: Option<f64>,
    #[serde(rename = "C_self")]
    pub c_self: Option<f64>,
    #[serde(rename = "S_env")]
    pub s_env: f64,
    #[serde(rename = "S_self")]
    pub s_self: f64,
    #[serde(rename = "R_feas")]
    pub r_feas: f64,
    pub counts: MetricCounts,
}

impl MetricsReport {
    pub fn from_log(log: &EpisodeLog) -> Result<Self, MetricsError> {
        compute_report(&log.records, &log.header.pairs, &log.header.tracked_roles)
    }
}

fn check_pairs(records: &[StepRecord], pairs: &[PairInfo]) -> Result<(), MetricsError> {
    for r in records {
        for &(pair, _) in r.slacks.iter().chain(r.distances.iter()) {
            if pair >= pairs.len() {
                return Err(MetricsError::UnknownPair {
                    step: r.step,
                    pair,
                    count: pairs.len(),
                });
            }
        }
    }
    Ok(())
}

/// Tracking score over the points with the given role, normalized by the
/// number of such points times T. `None` when no point has the role.
pub fn compute_j(records: &[StepRecord], roles: &[TrackedRole], role: TrackedRole) -> Result<Option<f64>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let idx: Vec<usize> = roles.iter().enumerate().filter(|(_, &r)| r == role).map(|(i, _)| i).collect();
    if idx.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for r in records {
        if r.goal_errors.len() != roles.len() {
            return Err(MetricsError::GoalMismatch {
                step: r.step,
                found: r.goal_errors.len(),
                expected: roles.len(),
            });
        }
        total += idx.iter().map(|&i| (-r.goal_errors[i].powi(2) / J_SCALE).exp()).sum::<f64>();
    }
    Ok(Some(total / (idx.len() * records.len()) as f64))
}

/// Per-step slack sum over pairs of one class.
pub fn class_slack(record: &StepRecord, pairs: &[PairInfo], class: PairClass) -> f64 {
    record
        .slacks
        .iter()
        .filter(|&&(p, _)| pairs[p].class == class)
        .map(|&(_, s)| s)
        .sum()
}

/// Control constraint score conditioned on steps with positive class slack.
/// `None` when no such step exists.
pub fn compute_c(records: &[StepRecord], pairs: &[PairInfo], class: PairClass) -> Result<Option<f64>, MetricsError> {
    check_pairs(records, pairs)?;
    Ok(c_and_count(records, pairs, class).0)
}

fn c_and_count(records: &[StepRecord], pairs: &[PairInfo], class: PairClass) -> (Option<f64>, usize) {
    let mut total = 0.0;
    let mut count = 0;
    for r in records {
        let s = class_slack(r, pairs, class);
        if s > 0.0 {
            total += (-s * s / C_SCALE).exp();
            count += 1;
        }
    }
    ((count > 0).then(|| total / count as f64), count)
}

/// Safety score over samples with `d < d_min`; 0 when there are none.
pub fn compute_s(records: &[StepRecord], pairs: &[PairInfo], class: PairClass) -> Result<f64, MetricsError> {
    check_pairs(records, pairs)?;
    Ok(s_and_count(records, pairs, class).0)
}

fn s_and_count(records: &[StepRecord], pairs: &[PairInfo], class: PairClass) -> (f64, usize) {
    let mut total = 0.0;
    let mut count = 0;
    for r in records {
        for &(p, d) in &r.distances {
            let info = &pairs[p];
            if info.class == class && d < info.d_min {
                total += (-(d - info.d_min).powi(2) / S_SCALE).exp();
                count += 1;
            }
        }
    }
    (if count > 0 { total / count as f64 } else { 0.0 }, count)
}

/// Fraction of steps whose naive QP was feasible.
pub fn compute_rfeas(records: &[StepRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let infeasible = records.iter().filter(|r| !r.feasible).count();
    Ok(1.0 - infeasible as f64 / records.len() as f64)
}

pub fn compute_report(records: &[StepRecord], pairs: &[PairInfo], roles: &[TrackedRole]) -> Result<MetricsReport, MetricsError> {
    check_pairs(records, pairs)?;
    let j_arm = compute_j(records, roles, TrackedRole::Arm)?;
    let j_base = compute_j(records, roles, TrackedRole::Base)?;
    let (c_env, env_slack_steps) = c_and_count(records, pairs, PairClass::Env);
    let (c_self, self_slack_steps) = c_and_count(records, pairs, PairClass::SelfCollision);
    let (s_env, env_violations) = s_and_count(records, pairs, PairClass::Env);
    let (s_self, self_violations) = s_and_count(records, pairs, PairClass::SelfCollision);
    let r_feas = compute_rfeas(records)?;
    Ok(MetricsReport {
        j_arm,
        j_base,
        c_env,
        c_self,
        s_env,
        s_self,
        r_feas,
        counts: MetricCounts {
            steps: records.len(),
            infeasible_steps: records.iter().filter(|r| !r.feasible).count(),
            env_slack_steps,
            self_slack_steps,
            env_violations,
            self_violations,
        },
    })
}

/// A labeled (J, C) point of the ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub label: String,
    pub j: f64,
    pub c: Option<f64>,
}

impl ParetoPoint {
    /// C with absent mapped to 1.
    pub fn c_or_one(&self) -> f64 {
        self.c.unwrap_or(1.0)
    }

    /// True if `self` is at least as good in both coordinates and strictly
    /// better in one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        let (j1, c1, j2, c2) = (self.j, self.c_or_one(), other.j, other.c_or_one());
        j1 >= j2 && c1 >= c2 && (j1 > j2 || c1 > c2)
    }
}

/// Indices of the points not dominated by any other point, in input order.
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| q.dominates(&points[i])))
        .collect()
}

pub const CSV_COLUMNS: [&str; 11] = [
    "task", "method", "qs_scale", "J_arm", "J_base", "C_env", "C_self", "S_env", "S_self", "R_feas", "seed",
];

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

/// One metrics CSV row. `qs_scale` is `None` for methods without a slack
/// weight.
pub fn csv_row(task: &str, method: &str, qs_scale: Option<f64>, seed: u64, report: &MetricsReport) -> String {
    [
        task.to_string(),
        method.to_string(),
        fmt_opt(qs_scale),
        fmt_opt(report.j_arm),
        fmt_opt(report.j_base),
        fmt_opt(report.c_env),
        fmt_opt(report.c_self),
        fmt_float(report.s_env),
        fmt_float(report.s_self),
        fmt_float(report.r_feas),
        seed.to_string(),
    ]
    .join(",")
}
