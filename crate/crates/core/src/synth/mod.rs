//! Synthetic annotated scenes with exact geometry.
//!
//! A person stands behind a table with objects on it, facing a pinhole
//! camera at the origin (x right, y down, z forward). Layouts are sampled
//! per preset, rendered to a depth raster, projected to landmarks and boxes,
//! perturbed by the configured noise and annotated from the exact geometry
//! via [`oracle_target`].

mod layout;
mod render;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{save_manifest, save_scene, Manifest, ManifestEntry};
use crate::scene::{
    DepthSource, Detection, Difficulty, GroundTruth, Intrinsics, JointName, Landmark, Point,
    PoseSet, Scene, Side, Split, LANDMARK_MARGIN,
};

pub use layout::MAX_ATTEMPTS;

/// Labels drawn for synthetic objects.
pub const OBJECT_LABELS: [&str; 12] = [
    "bottle",
    "cup",
    "book",
    "cell phone",
    "remote",
    "sports ball",
    "socks",
    "toilet paper",
    "vase",
    "bowl",
    "scissors",
    "teddy bear",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// One arm points; objects spread laterally at least 100 px apart.
    Easy,
    /// One arm points; two objects stacked in depth with overlapping boxes.
    Hard,
    /// Both arms rest; easy object layout.
    Neutral,
    /// Both arms point at the same object; easy object layout.
    BothArms,
    /// Cycles easy, hard, neutral, both-arms by scene index.
    Mixed,
}

impl Preset {
    pub fn for_index(self, index: usize) -> Preset {
        match self {
            Preset::Mixed => [
                Preset::Easy,
                Preset::Hard,
                Preset::Neutral,
                Preset::BothArms,
            ][index % 4],
            p => p,
        }
    }

    pub fn difficulty(self) -> Difficulty {
        match self {
            Preset::Hard => Difficulty::Hard,
            _ => Difficulty::Easy,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Easy => "easy",
            Preset::Hard => "hard",
            Preset::Neutral => "neutral",
            Preset::BothArms => "both-arms",
            Preset::Mixed => "mixed",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Preset::Easy),
            "hard" => Ok(Preset::Hard),
            "neutral" => Ok(Preset::Neutral),
            "both-arms" | "both_arms" => Ok(Preset::BothArms),
            "mixed" => Ok(Preset::Mixed),
            other => Err(Error::validation(format!("unknown preset {other:?}"))),
        }
    }
}

/// Generator settings. Distances are meters; the defaults describe a
/// desk-scale setup and are not measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub count: usize,
    pub preset: Preset,
    /// Inclusive range of objects per scene.
    pub objects_per_scene: (usize, usize),
    pub keypoint_noise_px: f64,
    pub depth_noise_rel: f64,
    pub intrinsics: Intrinsics,
    pub image_width: u32,
    pub image_height: u32,
    /// Camera to person distance.
    pub person_distance: f64,
    pub camera_height: f64,
    pub table_height: f64,
    /// Inclusive range of object width and height.
    pub object_size: (f64, f64),
    /// Probability that a detection carries a wrong label (captions stay truthful).
    pub mislabel_rate: f64,
    /// Leading fraction of scenes assigned to the train split.
    pub train_fraction: f64,
}

impl SynthConfig {
    pub fn new(preset: Preset, count: usize, seed: u64) -> Self {
        Self {
            seed,
            count,
            preset,
            objects_per_scene: (2, 4),
            keypoint_noise_px: 0.0,
            depth_noise_rel: 0.0,
            intrinsics: Intrinsics {
                fx: 500.0,
                fy: 500.0,
                cx: 320.0,
                cy: 240.0,
            },
            image_width: 640,
            image_height: 480,
            person_distance: 2.5,
            camera_height: 0.75,
            table_height: 0.7,
            object_size: (0.1, 0.3),
            mislabel_rate: 0.0,
            train_fraction: 0.0,
        }
    }

    pub fn with_noise(mut self, keypoint_px: f64, depth_rel: f64) -> Self {
        self.keypoint_noise_px = keypoint_px;
        self.depth_noise_rel = depth_rel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::validation("count must be positive"));
        }
        let noise_ok = |v: f64| v.is_finite() && v >= 0.0;
        if !noise_ok(self.keypoint_noise_px) || !noise_ok(self.depth_noise_rel) {
            return Err(Error::validation(
                "noise parameters must be finite and >= 0",
            ));
        }
        let (lo, hi) = self.objects_per_scene;
        if lo == 0 || lo > hi {
            return Err(Error::validation(
                "objects_per_scene must be a non-empty range starting at 1 or more",
            ));
        }
        if matches!(self.preset, Preset::Hard | Preset::Mixed) && hi < 2 {
            return Err(Error::validation("hard scenes need at least 2 objects"));
        }
        let (smin, smax) = self.object_size;
        if !(smin > 0.0 && smin <= smax) {
            return Err(Error::validation("object_size must be a positive range"));
        }
        if !(0.0..=1.0).contains(&self.mislabel_rate) || !(0.0..=1.0).contains(&self.train_fraction)
        {
            return Err(Error::validation("rates must lie in [0,1]"));
        }
        if self.image_width < 64 || self.image_height < 64 {
            return Err(Error::validation("image must be at least 64x64"));
        }
        if self.camera_height <= self.table_height {
            return Err(Error::validation("camera must sit above the table surface"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneObject {
    pub id: u32,
    /// True category; the detection label may differ when mislabeled.
    pub label: String,
    pub center: Point,
    pub width: f64,
    pub height: f64,
}

/// Person and table placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Placement {
    /// Torso center.
    pub center: Point,
    /// Depth range covered by the table top.
    pub table_near: f64,
    pub table_far: f64,
}

/// Exact (pre-noise) 3D layout of one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layout {
    pub person: Placement,
    pub body: BTreeMap<JointName, Point>,
    pub objects: Vec<SceneObject>,
    pub pointing: Vec<Side>,
    /// Object the pointing arms were aimed at.
    pub intended: Option<u32>,
    pub difficulty: Difficulty,
}

fn cosine(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

/// Brute-force target for `side` on exact geometry: the object whose
/// center makes the smallest angle with the shoulder-to-wrist ray, lowest
/// id on ties. `None` without objects.
pub fn oracle_target(layout: &Layout, side: Side) -> Option<u32> {
    let shoulder = layout.body[&side.shoulder()];
    let ray = layout.body[&side.wrist()] - shoulder;
    let mut best: Option<(u32, f64)> = None;
    for obj in &layout.objects {
        let score = cosine(&ray, &(obj.center - shoulder));
        best = match best {
            Some((id, s)) if s > score || (s == score && id < obj.id) => Some((id, s)),
            _ => Some((obj.id, score)),
        };
    }
    best.map(|(id, _)| id)
}

#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub name: String,
    pub preset: Preset,
    pub scene: Scene,
    pub layout: Layout,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub scenes: Vec<GeneratedScene>,
    /// Entries reference `<name>.json`, relative to the output directory.
    pub manifest: Manifest,
}

/// Generates `config.count` scenes. Scene `i` draws from its own RNG seeded
/// with `seed + i`, so output does not depend on thread count.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let scenes = (0..config.count)
        .into_par_iter()
        .map(|i| generate_one(config, i))
        .collect::<Result<Vec<_>>>()?;

    let train = (config.count as f64 * config.train_fraction).round() as usize;
    let entries = scenes
        .iter()
        .enumerate()
        .map(|(i, g)| ManifestEntry {
            path: PathBuf::from(format!("{}.json", g.name)),
            split: if i < train { Split::Train } else { Split::Test },
            difficulty: g.layout.difficulty,
        })
        .collect();
    Ok(SynthOutput {
        scenes,
        manifest: Manifest {
            base_dir: PathBuf::new(),
            entries,
        },
    })
}

fn generate_one(config: &SynthConfig, index: usize) -> Result<GeneratedScene> {
    let preset = config.preset.for_index(index);
    let seed = config.seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = layout::sample_layout(config, preset, &mut rng)
        .map_err(|e| e.context(format!("scene {index} (seed {seed})")))?;
    let scene = render_scene(config, &layout, &mut rng, seed, preset);
    Ok(GeneratedScene {
        name: format!("scene_{index:05}"),
        preset,
        scene,
        layout,
    })
}

/// Noise-free scene for an explicit layout, annotated by the oracle.
pub fn render_layout(config: &SynthConfig, layout: &Layout) -> Scene {
    let quiet = SynthConfig {
        keypoint_noise_px: 0.0,
        depth_noise_rel: 0.0,
        mislabel_rate: 0.0,
        ..config.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    render_scene(&quiet, layout, &mut rng, config.seed, Preset::Easy)
}

fn render_scene(
    config: &SynthConfig,
    layout: &Layout,
    rng: &mut ChaCha8Rng,
    seed: u64,
    preset: Preset,
) -> Scene {
    let k = config.intrinsics;
    let (w, h) = (
        f64::from(config.image_width),
        f64::from(config.image_height),
    );

    let mut depth = render::render_depth(config, layout);
    if config.depth_noise_rel > 0.0 {
        let noise = Normal::new(0.0, config.depth_noise_rel).expect("finite std");
        for z in &mut depth {
            *z = (f64::from(*z) * (1.0 + noise.sample(rng))).max(1e-3) as f32;
        }
    }

    let kp_noise = (config.keypoint_noise_px > 0.0)
        .then(|| Normal::new(0.0, config.keypoint_noise_px).expect("finite std"));
    let landmarks: Vec<Landmark> = layout
        .body
        .iter()
        .map(|(&name, p)| {
            let (mut u, mut v) = k.project(p);
            if let Some(n) = &kp_noise {
                u += n.sample(rng);
                v += n.sample(rng);
            }
            Landmark {
                name,
                u: u.clamp(-LANDMARK_MARGIN * w, (1.0 + LANDMARK_MARGIN) * w),
                v: v.clamp(-LANDMARK_MARGIN * h, (1.0 + LANDMARK_MARGIN) * h),
                visibility: 1.0,
            }
        })
        .collect();

    let mut detections = Vec::with_capacity(layout.objects.len());
    let mut captions = BTreeMap::new();
    for obj in &layout.objects {
        let mut label = obj.label.clone();
        if config.mislabel_rate > 0.0 && rng.gen_bool(config.mislabel_rate) {
            let others: Vec<_> = OBJECT_LABELS.iter().filter(|l| **l != obj.label).collect();
            label = (*others.choose(rng).expect("several labels")).to_string();
        }
        detections.push(Detection {
            id: obj.id,
            label,
            confidence: rng.gen_range(0.5..0.99),
            bbox: render::object_box(&k, &obj.center, obj.width, obj.height),
        });
        captions.insert(obj.id, format!("a {} on a table", obj.label));
    }
    detections.sort_by_key(|d| d.id);

    let target_id = layout
        .pointing
        .first()
        .and_then(|&side| oracle_target(layout, side));
    let truth = GroundTruth {
        is_pointing: !layout.pointing.is_empty(),
        arms: layout.pointing.clone(),
        target_id,
        difficulty: layout.difficulty,
    };

    let mut metadata = serde_json::Map::new();
    metadata.insert("generator".into(), "synth".into());
    metadata.insert("preset".into(), preset.to_string().into());
    metadata.insert("seed".into(), seed.into());

    Scene {
        image_width: config.image_width,
        image_height: config.image_height,
        detections,
        pose: PoseSet::new(landmarks).expect("body joints are unique"),
        depth: DepthSource::DepthMap {
            width: config.image_width as usize,
            height: config.image_height as usize,
            intrinsics: k,
            data: depth,
        },
        captions: Some(captions),
        truth: Some(truth),
        metadata: Some(metadata),
    }
}

/// Writes every scene plus `manifest.json` into `dir`; returns the manifest path.
pub fn write_dataset(output: &SynthOutput, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for g in &output.scenes {
        save_scene(&g.scene, dir.join(format!("{}.json", g.name)))?;
    }
    let path = dir.join("manifest.json");
    save_manifest(&output.manifest, &path)?;
    Ok(path)
}
