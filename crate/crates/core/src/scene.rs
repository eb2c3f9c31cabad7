//! Domain types for one image's worth of upstream outputs.
//!
//! A [`Scene`] bundles detector boxes, 2D body landmarks and a dense depth
//! source, plus optional captions and ground truth. Everything is stored in
//! image pixels except the depth raster; 3D positions are always derived from
//! the [`DepthSource`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Camera-frame point in meters, z forward.
pub type Point = Point3<f64>;

/// Fraction of the image size a landmark may sit outside the frame.
pub const LANDMARK_MARGIN: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn centroid(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    fn validate(&self, width: u32, height: u32) -> Result<()> {
        let vals = [self.x_min, self.y_min, self.x_max, self.y_max];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation("box coordinates must be finite and >= 0"));
        }
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::validation("box has non-positive extent"));
        }
        if self.x_max > f64::from(width) || self.y_max > f64::from(height) {
            return Err(Error::validation("box outside image bounds"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: u32,
    pub label: String,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

/// The 33-joint body landmark vocabulary, in canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointName {
    Nose,
    LeftEyeInner,
    LeftEye,
    LeftEyeOuter,
    RightEyeInner,
    RightEye,
    RightEyeOuter,
    LeftEar,
    RightEar,
    MouthLeft,
    MouthRight,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftPinky,
    RightPinky,
    LeftIndex,
    RightIndex,
    LeftThumb,
    RightThumb,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
    LeftHeel,
    RightHeel,
    LeftFootIndex,
    RightFootIndex,
}

impl JointName {
    /// Joints every non-empty pose must carry.
    pub const REQUIRED: [JointName; 8] = [
        JointName::LeftShoulder,
        JointName::RightShoulder,
        JointName::LeftElbow,
        JointName::RightElbow,
        JointName::LeftWrist,
        JointName::RightWrist,
        JointName::LeftHip,
        JointName::RightHip,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn shoulder(self) -> JointName {
        match self {
            Side::Left => JointName::LeftShoulder,
            Side::Right => JointName::RightShoulder,
        }
    }

    pub fn elbow(self) -> JointName {
        match self {
            Side::Left => JointName::LeftElbow,
            Side::Right => JointName::RightElbow,
        }
    }

    pub fn wrist(self) -> JointName {
        match self {
            Side::Left => JointName::LeftWrist,
            Side::Right => JointName::RightWrist,
        }
    }

    pub fn hip(self) -> JointName {
        match self {
            Side::Left => JointName::LeftHip,
            Side::Right => JointName::RightHip,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub name: JointName,
    pub u: f64,
    pub v: f64,
    pub visibility: f64,
}

/// Body landmarks keyed by joint name.
///
/// An empty set means no person was found in the image; otherwise all of
/// [`JointName::REQUIRED`] must be present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseSet {
    landmarks: BTreeMap<JointName, Landmark>,
}

impl PoseSet {
    pub fn new(landmarks: impl IntoIterator<Item = Landmark>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for lm in landmarks {
            if map.insert(lm.name, lm).is_some() {
                return Err(Error::validation(format!(
                    "duplicate landmark {:?}",
                    lm.name
                )));
            }
        }
        Ok(Self { landmarks: map })
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn get(&self, name: JointName) -> Option<&Landmark> {
        self.landmarks.get(&name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Landmark> {
        self.landmarks.values()
    }

    fn validate(&self, width: u32, height: u32) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        for name in JointName::REQUIRED {
            if !self.landmarks.contains_key(&name) {
                return Err(Error::validation(format!(
                    "missing required landmark {name:?}"
                )));
            }
        }
        let (w, h) = (f64::from(width), f64::from(height));
        for lm in self.iter() {
            if !(0.0..=1.0).contains(&lm.visibility) {
                return Err(Error::validation(format!(
                    "landmark {:?} visibility outside [0,1]",
                    lm.name
                )));
            }
            let u_ok = lm.u >= -LANDMARK_MARGIN * w && lm.u <= (1.0 + LANDMARK_MARGIN) * w;
            let v_ok = lm.v >= -LANDMARK_MARGIN * h && lm.v <= (1.0 + LANDMARK_MARGIN) * h;
            if !(u_ok && v_ok) {
                return Err(Error::validation(format!(
                    "landmark {:?} outside image margin",
                    lm.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn project(&self, p: &Point) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    pub fn back_project(&self, u: f64, v: f64, z: f64) -> Point {
        Point::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }
}

/// Dense per-pixel depth, either as a depth raster plus intrinsics or as a
/// raster of camera-frame points. Invalid pixels are non-positive or
/// non-finite in-band.
#[derive(Debug, Clone)]
pub enum DepthSource {
    DepthMap {
        width: usize,
        height: usize,
        intrinsics: Intrinsics,
        data: Vec<f32>,
    },
    PointMap {
        width: usize,
        height: usize,
        data: Vec<[f32; 3]>,
    },
}

impl DepthSource {
    pub fn width(&self) -> usize {
        match self {
            DepthSource::DepthMap { width, .. } | DepthSource::PointMap { width, .. } => *width,
        }
    }

    pub fn height(&self) -> usize {
        match self {
            DepthSource::DepthMap { height, .. } | DepthSource::PointMap { height, .. } => *height,
        }
    }

    /// Converts a depth map to the equivalent point map, sampling each pixel
    /// at its center.
    pub fn to_point_map(&self) -> DepthSource {
        match self {
            DepthSource::PointMap { .. } => self.clone(),
            DepthSource::DepthMap {
                width,
                height,
                intrinsics,
                data,
            } => {
                let points = data
                    .iter()
                    .enumerate()
                    .map(|(idx, &z)| {
                        if !is_valid_depth(z) {
                            return [f32::NAN; 3];
                        }
                        let u = (idx % width) as f64 + 0.5;
                        let v = (idx / width) as f64 + 0.5;
                        let p = intrinsics.back_project(u, v, f64::from(z));
                        [p.x as f32, p.y as f32, p.z as f32]
                    })
                    .collect();
                DepthSource::PointMap {
                    width: *width,
                    height: *height,
                    data: points,
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let (w, h) = (self.width(), self.height());
        let len = match self {
            DepthSource::DepthMap {
                intrinsics, data, ..
            } => {
                let k = intrinsics;
                if ![k.fx, k.fy, k.cx, k.cy].iter().all(|v| v.is_finite())
                    || k.fx <= 0.0
                    || k.fy <= 0.0
                {
                    return Err(Error::validation(
                        "intrinsics must be finite with fx, fy > 0",
                    ));
                }
                data.len()
            }
            DepthSource::PointMap { data, .. } => data.len(),
        };
        if len != w * h {
            return Err(Error::validation(
                "depth raster length does not match its dims",
            ));
        }
        Ok(())
    }
}

pub(crate) fn is_valid_depth(z: f32) -> bool {
    z.is_finite() && z > 0.0
}

// Bitwise comparison so NaN holes compare equal after a round trip.
impl PartialEq for DepthSource {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                DepthSource::DepthMap {
                    width: w1,
                    height: h1,
                    intrinsics: k1,
                    data: d1,
                },
                DepthSource::DepthMap {
                    width: w2,
                    height: h2,
                    intrinsics: k2,
                    data: d2,
                },
            ) => {
                w1 == w2
                    && h1 == h2
                    && k1 == k2
                    && d1.len() == d2.len()
                    && d1.iter().zip(d2).all(|(a, b)| a.to_bits() == b.to_bits())
            }
            (
                DepthSource::PointMap {
                    width: w1,
                    height: h1,
                    data: d1,
                },
                DepthSource::PointMap {
                    width: w2,
                    height: h2,
                    data: d2,
                },
            ) => {
                w1 == w2
                    && h1 == h2
                    && d1.len() == d2.len()
                    && d1
                        .iter()
                        .zip(d2)
                        .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub is_pointing: bool,
    pub arms: Vec<Side>,
    pub target_id: Option<u32>,
    pub difficulty: Difficulty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image_width: u32,
    pub image_height: u32,
    pub detections: Vec<Detection>,
    pub pose: PoseSet,
    pub depth: DepthSource,
    pub captions: Option<BTreeMap<u32, String>>,
    pub truth: Option<GroundTruth>,
    /// Free-form producer annotations (e.g. exporter thresholds, `no_pose`).
    pub metadata: Option<serde_json::Map<String, serde_json::Value>>,
}

impl Scene {
    pub fn detection(&self, id: u32) -> Option<&Detection> {
        self.detections.iter().find(|d| d.id == id)
    }

    pub fn caption(&self, id: u32) -> Option<&str> {
        self.captions.as_ref()?.get(&id).map(String::as_str)
    }

    /// Checks every type invariant; the error names the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::validation("image dims must be positive"));
        }
        self.depth.validate()?;
        if self.depth.width() != self.image_width as usize
            || self.depth.height() != self.image_height as usize
        {
            return Err(Error::validation("depth dims mismatch"));
        }

        let mut ids = BTreeSet::new();
        for det in &self.detections {
            if !ids.insert(det.id) {
                return Err(Error::validation(format!(
                    "duplicate detection id {}",
                    det.id
                )));
            }
            if !(0.0..=1.0).contains(&det.confidence) {
                return Err(Error::validation(format!(
                    "detection {} confidence outside [0,1]",
                    det.id
                )));
            }
            det.bbox
                .validate(self.image_width, self.image_height)
                .map_err(|e| e.context(format!("detection {}", det.id)))?;
        }

        self.pose.validate(self.image_width, self.image_height)?;

        if let Some(captions) = &self.captions {
            if let Some(id) = captions.keys().find(|id| !ids.contains(id)) {
                return Err(Error::validation(format!(
                    "caption for unknown detection {id}"
                )));
            }
        }

        if let Some(truth) = &self.truth {
            match (truth.is_pointing, truth.target_id) {
                (true, None) => return Err(Error::validation("pointing truth without target_id")),
                (false, Some(_)) => {
                    return Err(Error::validation("target_id on a non-pointing truth"))
                }
                (true, Some(id)) if !ids.contains(&id) => {
                    return Err(Error::validation("dangling target_id"))
                }
                _ => {}
            }
            let arms: BTreeSet<_> = truth.arms.iter().collect();
            if arms.len() != truth.arms.len() {
                return Err(Error::validation("duplicate arm in truth"));
            }
        }
        Ok(())
    }
}
