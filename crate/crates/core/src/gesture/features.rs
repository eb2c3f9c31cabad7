use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{JointName, Point, PoseSet, Side};

/// Joint positions keyed by name; `None` marks a joint that could not be lifted.
pub type JointPositions = BTreeMap<JointName, Option<Point>>;

const MIN_TORSO_SIZE: f64 = 1e-6;
const MIN_SEGMENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMode {
    #[serde(rename = "kponly")]
    KpOnly,
    #[serde(rename = "full")]
    Full,
}

impl FeatureMode {
    pub fn dims(self) -> usize {
        match self {
            FeatureMode::KpOnly => 10,
            FeatureMode::Full => 13,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::KpOnly => "kponly",
            FeatureMode::Full => "full",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kponly" => Ok(FeatureMode::KpOnly),
            "full" => Ok(FeatureMode::Full),
            other => Err(Error::validation(format!("unknown feature mode {other:?}"))),
        }
    }
}

/// Per-arm gesture features.
///
/// Layout: shoulder, elbow, wrist as torso-normalized `(x, y, z)` triples,
/// then the best object score. `Full` appends elbow angle (radians),
/// torso-normalized wrist-to-torso distance and the arm straightness cosine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    pub mode: FeatureMode,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub const BEST_SCORE: usize = 9;
    pub const ELBOW_ANGLE: usize = 10;
    pub const WRIST_TORSO_DISTANCE: usize = 11;
    pub const STRAIGHTNESS: usize = 12;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsoFrame {
    pub center: Point,
    pub size: f64,
}

fn joint(pose: &JointPositions, name: JointName) -> Result<Point> {
    pose.get(&name)
        .copied()
        .flatten()
        .ok_or(Error::Degenerate("required joint was not lifted"))
}

/// Torso center (mean of shoulders and hips) and size (mid-shoulder to mid-hip).
pub fn torso_frame(pose: &JointPositions) -> Result<TorsoFrame> {
    let ls = joint(pose, JointName::LeftShoulder)?;
    let rs = joint(pose, JointName::RightShoulder)?;
    let lh = joint(pose, JointName::LeftHip)?;
    let rh = joint(pose, JointName::RightHip)?;
    let center = Point::from((ls.coords + rs.coords + lh.coords + rh.coords) / 4.0);
    let size = (nalgebra::center(&ls, &rs) - nalgebra::center(&lh, &rh)).norm();
    if size < MIN_TORSO_SIZE {
        return Err(Error::Degenerate("torso size is zero"));
    }
    Ok(TorsoFrame { center, size })
}

/// Pixel landmarks as planar points (`z = 0`) for the no-depth variant.
pub fn pixel_joints(pose: &PoseSet) -> JointPositions {
    pose.iter()
        .map(|lm| (lm.name, Some(Point::new(lm.u, lm.v, 0.0))))
        .collect()
}

pub fn extract_features(
    pose: &JointPositions,
    side: Side,
    best_score: f64,
    mode: FeatureMode,
) -> Result<FeatureVector> {
    let torso = torso_frame(pose)?;
    let shoulder = joint(pose, side.shoulder())?;
    let elbow = joint(pose, side.elbow())?;
    let wrist = joint(pose, side.wrist())?;

    let upper = elbow - shoulder;
    let fore = wrist - elbow;
    if upper.norm() < MIN_SEGMENT || fore.norm() < MIN_SEGMENT {
        return Err(Error::Degenerate("zero-length arm segment"));
    }

    let mut values = Vec::with_capacity(mode.dims());
    for p in [shoulder, elbow, wrist] {
        values.extend(((p - torso.center) / torso.size).iter());
    }
    values.push(best_score.clamp(-1.0, 1.0));

    if mode == FeatureMode::Full {
        let straightness = (fore.dot(&upper) / (fore.norm() * upper.norm())).clamp(-1.0, 1.0);
        // angle between (shoulder - elbow) and (wrist - elbow)
        let elbow_angle = (-upper).angle(&fore);
        values.push(elbow_angle);
        values.push((wrist - torso.center).norm() / torso.size);
        values.push(straightness);
    }

    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite feature"));
    }
    Ok(FeatureVector { mode, values })
}
