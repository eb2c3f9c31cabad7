//! Pointing ray, per-object cosine scores and target selection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::lift_detection;
use crate::scene::{JointName, Point, PoseSet, Scene, Side};

const DEGENERATE_EPS: f64 = 1e-9;

/// Whether geometry is taken from lifted 3D points or raw pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeometryMode {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl fmt::Display for GeometryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeometryMode::TwoD => "2d",
            GeometryMode::ThreeD => "3d",
        })
    }
}

impl FromStr for GeometryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2d" => Ok(GeometryMode::TwoD),
            "3d" => Ok(GeometryMode::ThreeD),
            other => Err(Error::validation(format!(
                "unknown geometry mode {other:?}"
            ))),
        }
    }
}

/// Shoulder, elbow and wrist of one arm. In 2D mode the points carry pixel
/// coordinates with `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmJoints {
    pub side: Side,
    pub shoulder: Point,
    pub elbow: Point,
    pub wrist: Point,
}

impl ArmJoints {
    pub fn from_pixels(pose: &PoseSet, side: Side) -> Option<Self> {
        let px = |name: JointName| pose.get(name).map(|lm| Point::new(lm.u, lm.v, 0.0));
        Some(Self {
            side,
            shoulder: px(side.shoulder())?,
            elbow: px(side.elbow())?,
            wrist: px(side.wrist())?,
        })
    }

    pub fn from_lifted(joints: &BTreeMap<JointName, Option<Point>>, side: Side) -> Option<Self> {
        let get = |name: JointName| joints.get(&name).copied().flatten();
        Some(Self {
            side,
            shoulder: get(side.shoulder())?,
            elbow: get(side.elbow())?,
            wrist: get(side.wrist())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredObject {
    pub detection_id: u32,
    pub score: Option<f64>,
}

/// The unnormalized pointing ray, wrist minus shoulder.
pub fn pointing_ray(arm: &ArmJoints) -> Result<Vector3<f64>> {
    let v = arm.wrist - arm.shoulder;
    if v.norm() < DEGENERATE_EPS {
        return Err(Error::Degenerate("wrist coincides with shoulder"));
    }
    Ok(v)
}

/// Cosine between the pointing ray and the shoulder-to-object vector.
pub fn pointing_score(arm: &ArmJoints, object_center: &Point) -> Result<f64> {
    let ray = pointing_ray(arm)?;
    cosine_to(&ray, &arm.shoulder, object_center)
}

fn cosine_to(ray: &Vector3<f64>, shoulder: &Point, object_center: &Point) -> Result<f64> {
    let to_object = object_center - shoulder;
    let norm = to_object.norm();
    if norm < DEGENERATE_EPS {
        return Err(Error::Degenerate("object coincides with shoulder"));
    }
    Ok((ray.dot(&to_object) / (ray.norm() * norm)).clamp(-1.0, 1.0))
}

/// Object centers used for scoring, ordered by detection id: lifted box
/// centroids in 3D mode (`None` when unliftable), pixel centroids in 2D mode.
pub fn object_centers(scene: &Scene, mode: GeometryMode) -> Vec<(u32, Option<Point>)> {
    let mut centers: Vec<_> = scene
        .detections
        .iter()
        .map(|det| {
            let center = match mode {
                GeometryMode::TwoD => {
                    let (u, v) = det.bbox.centroid();
                    Some(Point::new(u, v, 0.0))
                }
                GeometryMode::ThreeD => lift_detection(&scene.depth, det).ok().flatten(),
            };
            (det.id, center)
        })
        .collect();
    centers.sort_by_key(|(id, _)| *id);
    centers
}

/// Scores precomputed object centers against one arm. Objects that are
/// unliftable or coincide with the shoulder get `score: None`.
pub fn score_centers(
    arm: &ArmJoints,
    centers: &[(u32, Option<Point>)],
) -> Result<Vec<ScoredObject>> {
    let ray = pointing_ray(arm)?;
    Ok(centers
        .iter()
        .map(|(id, center)| ScoredObject {
            detection_id: *id,
            score: center.and_then(|c| cosine_to(&ray, &arm.shoulder, &c).ok()),
        })
        .collect())
}

/// One score per detection of `scene`, ordered by detection id.
pub fn score_objects(
    scene: &Scene,
    arm: &ArmJoints,
    mode: GeometryMode,
) -> Result<Vec<ScoredObject>> {
    score_centers(arm, &object_centers(scene, mode))
}

/// Highest present score wins, lowest id on ties. `None` when nothing is
/// scored or the best score is below `min_score`.
pub fn select_target(scored: &[ScoredObject], min_score: Option<f64>) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for obj in scored {
        let Some(score) = obj.score else { continue };
        best = match best {
            Some((id, s)) if s > score || (s == score && id < obj.detection_id) => Some((id, s)),
            _ => Some((obj.detection_id, score)),
        };
    }
    let (id, score) = best?;
    match min_score {
        Some(min) if score < min => None,
        _ => Some(id),
    }
}

/// Best present score, or 0 when nothing could be scored.
pub fn best_score(scored: &[ScoredObject]) -> f64 {
    scored
        .iter()
        .filter_map(|s| s.score)
        .max_by(f64::total_cmp)
        .unwrap_or(0.0)
}
