//! Rejection sampling of synthetic layouts.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::render::{object_box, render_depth};
use super::{
    cosine, oracle_target, Layout, Placement, Preset, SceneObject, SynthConfig, OBJECT_LABELS,
};
use crate::error::{Error, Result};
use crate::lifting::{lift_detection, lift_pixel};
use crate::scene::{DepthSource, Detection, Difficulty, JointName, Point, Side};

/// Layout attempts per scene before giving up.
pub const MAX_ATTEMPTS: usize = 1000;

const MIN_SPACING_PX: f64 = 100.0;
const AIM_JITTER_DEG: f64 = 3.0;
const ORACLE_MARGIN_DEG: f64 = 4.0;
const CENTER_TOLERANCE: f64 = 1e-3;
const JOINT_TOLERANCE: f64 = 0.03;
const HARD_MIN_IOU: f64 = 0.3;
const IMAGE_MARGIN_PX: f64 = 4.0;

pub(super) fn sample_layout(
    config: &SynthConfig,
    preset: Preset,
    rng: &mut ChaCha8Rng,
) -> Result<Layout> {
    for _ in 0..MAX_ATTEMPTS {
        if let Some(layout) = try_layout(config, preset, rng) {
            if accept(config, &layout) {
                return Ok(layout);
            }
        }
    }
    Err(Error::validation(format!(
        "{preset} layout infeasible after {MAX_ATTEMPTS} attempts"
    )))
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn table_y(config: &SynthConfig) -> f64 {
    config.camera_height - config.table_height
}

fn try_layout(config: &SynthConfig, preset: Preset, rng: &mut ChaCha8Rng) -> Option<Layout> {
    let (person, mut body) = sample_body(config, rng);
    let (lo, hi) = config.objects_per_scene;

    let pointing: Vec<Side> = match preset {
        Preset::Neutral => vec![],
        Preset::BothArms => Side::BOTH.to_vec(),
        _ => vec![*Side::BOTH.choose(rng)?],
    };

    let (mut objects, intended_idx) = if preset == Preset::Hard {
        let n = rng.gen_range(lo.max(2)..=hi);
        let (pair, target) = hard_pair(config, &person, body[&pointing[0].shoulder()], rng)?;
        let mut objects = pair.to_vec();
        if !spread_objects(config, &person, n - 2, &mut objects, rng) {
            return None;
        }
        (objects, Some(target))
    } else {
        let n = rng.gen_range(lo..=hi);
        let mut objects = Vec::with_capacity(n);
        if !spread_objects(config, &person, n, &mut objects, rng) {
            return None;
        }
        let target = (!pointing.is_empty()).then(|| rng.gen_range(0..objects.len()));
        (objects, target)
    };

    let mut ids: Vec<u32> = (1..=objects.len() as u32).collect();
    ids.shuffle(rng);
    let mut labels = OBJECT_LABELS.to_vec();
    labels.shuffle(rng);
    for (k, obj) in objects.iter_mut().enumerate() {
        obj.id = ids[k];
        obj.label = labels[k % labels.len()].to_string();
    }

    let intended = intended_idx.map(|i| objects[i].id);
    for side in Side::BOTH {
        let shoulder = body[&side.shoulder()];
        let (elbow, wrist) = match intended_idx {
            Some(i) if pointing.contains(&side) => pointing_arm(shoulder, objects[i].center, rng)?,
            _ => rest_arm(shoulder, side, rng),
        };
        body.insert(side.elbow(), elbow);
        body.insert(side.wrist(), wrist);
    }

    Some(Layout {
        person,
        body,
        objects,
        pointing,
        intended,
        difficulty: preset.difficulty(),
    })
}

fn sample_body(
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> (Placement, BTreeMap<JointName, Point>) {
    let z = config.person_distance + uniform(rng, -0.15, 0.15);
    let x = uniform(rng, -0.25, 0.25);
    // y grows downward from the camera; the floor sits at +camera_height
    let shoulder_y = config.camera_height - uniform(rng, 1.35, 1.45);
    let hip_y = shoulder_y + uniform(rng, 0.42, 0.5);
    let shoulder_half = uniform(rng, 0.16, 0.2);
    let hip_half = uniform(rng, 0.12, 0.15);

    let mut body = BTreeMap::new();
    // the person faces the camera, so their left is the camera's right (+x)
    body.insert(
        JointName::LeftShoulder,
        Point::new(x + shoulder_half, shoulder_y, z),
    );
    body.insert(
        JointName::RightShoulder,
        Point::new(x - shoulder_half, shoulder_y, z),
    );
    body.insert(JointName::LeftHip, Point::new(x + hip_half, hip_y, z));
    body.insert(JointName::RightHip, Point::new(x - hip_half, hip_y, z));
    body.insert(
        JointName::Nose,
        Point::new(x, shoulder_y - uniform(rng, 0.22, 0.27), z - 0.08),
    );

    let placement = Placement {
        center: Point::new(x, 0.5 * (shoulder_y + hip_y), z),
        table_near: z - 1.45,
        table_far: z - 0.2,
    };
    (placement, body)
}

fn object_on_table(config: &SynthConfig, u: f64, z: f64, width: f64, height: f64) -> SceneObject {
    let k = &config.intrinsics;
    SceneObject {
        id: 0,
        label: String::new(),
        center: Point::new((u - k.cx) * z / k.fx, table_y(config) - 0.5 * height, z),
        width,
        height,
    }
}

/// Appends `n` objects whose projected centroids sit at least 100 px apart
/// horizontally from each other and from those already present.
fn spread_objects(
    config: &SynthConfig,
    person: &Placement,
    n: usize,
    objects: &mut Vec<SceneObject>,
    rng: &mut ChaCha8Rng,
) -> bool {
    let k = config.intrinsics;
    let w = f64::from(config.image_width);
    let (smin, smax) = config.object_size;
    for _ in 0..n {
        let placed = (0..50).find_map(|_| {
            let z = uniform(rng, person.center.z - 1.3, person.center.z - 0.35);
            let u = uniform(rng, 0.1 * w, 0.9 * w);
            let obj = object_on_table(
                config,
                u,
                z,
                uniform(rng, smin, smax),
                uniform(rng, smin, smax),
            );
            let clear = objects
                .iter()
                .all(|o| (k.project(&o.center).0 - u).abs() >= MIN_SPACING_PX);
            (clear && (obj.center.x - person.center.x).abs() <= 0.95).then_some(obj)
        });
        match placed {
            Some(obj) => objects.push(obj),
            None => return false,
        }
    }
    true
}

/// A short near object in front of a tall far object, both on the 2D line
/// from the pointing shoulder, with the far box's central band left visible
/// above the near box. Returns the pair and the index of the target.
fn hard_pair(
    config: &SynthConfig,
    person: &Placement,
    shoulder: Point,
    rng: &mut ChaCha8Rng,
) -> Option<([SceneObject; 2], usize)> {
    let k = config.intrinsics;
    let ty = table_y(config);
    let (smin, smax) = config.object_size;
    let zp = person.center.z;

    let z1 = uniform(rng, zp - 1.3, zp - 1.0);
    let z2 = uniform(rng, (z1 + 0.5).max(zp - 0.6), zp - 0.35);
    if z2 - z1 < 0.5 {
        return None;
    }
    let h2 = uniform(rng, (0.75 * smax).max(smin), smax);
    let w2 = uniform(rng, smin, (0.66 * smax).max(smin));

    // pixel budget for the near box height
    let b = 0.5 * k.fy * h2 / z2;
    let d = k.fy * ty * (1.0 / z1 - 1.0 / z2);
    let near_px = d + 0.8 * b - 2.5 - uniform(rng, 0.0, 2.0);
    let h1 = near_px * z1 / k.fy;
    if h1 < 0.03 {
        return None;
    }
    let w1 = w2 * z1 / z2 * uniform(rng, 0.95, 1.1);

    let (us, vs) = k.project(&shoulder);
    let u1 = us + uniform(rng, -25.0, 25.0);
    let near = object_on_table(config, u1, z1, w1, h1);
    let v1 = k.project(&near.center).1;
    let v2 = k.fy * (ty - 0.5 * h2) / z2 + k.cy;
    if (v1 - vs).abs() < 1.0 {
        return None;
    }
    let u2 = us + (v2 - vs) / (v1 - vs) * (u1 - us) + uniform(rng, -2.0, 2.0);
    let far = object_on_table(config, u2, z2, w2, h2);
    Some(([near, far], rng.gen_range(0..2)))
}

/// Aims the arm at `target` within a few degrees; the elbow bends down.
fn pointing_arm(shoulder: Point, target: Point, rng: &mut ChaCha8Rng) -> Option<(Point, Point)> {
    let d0 = (target - shoulder).normalize();
    let gravity = Vector3::y();
    let e1 = gravity - d0 * gravity.dot(&d0);
    if e1.norm() < 1e-3 {
        return None;
    }
    let e1 = e1.normalize();
    let e2 = d0.cross(&e1);
    let phi = uniform(rng, 0.0, std::f64::consts::TAU);
    let theta = uniform(rng, 0.0, AIM_JITTER_DEG).to_radians();
    let d = (d0 * theta.cos() + (e1 * phi.cos() + e2 * phi.sin()) * theta.sin()).normalize();

    let upper = uniform(rng, 0.28, 0.32);
    let fore = uniform(rng, 0.25, 0.29);
    let bend = uniform(rng, 0.0, 20.0).to_radians();
    let reach = (upper * upper + fore * fore + 2.0 * upper * fore * bend.cos()).sqrt();
    let along = (upper * upper - fore * fore + reach * reach) / (2.0 * reach);
    let off = (upper * upper - along * along).max(0.0).sqrt();

    let perp = gravity - d * gravity.dot(&d);
    if perp.norm() < 1e-3 {
        return None;
    }
    let elbow = shoulder + d * along + perp.normalize() * off;
    Some((elbow, shoulder + d * reach))
}

/// Arm hanging at the side, slightly abducted with the forearm flexed forward.
fn rest_arm(shoulder: Point, side: Side, rng: &mut ChaCha8Rng) -> (Point, Point) {
    let out = match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    };
    let abduct = uniform(rng, 5.0, 20.0).to_radians();
    let forward = uniform(rng, 0.0, 15.0).to_radians();
    let flex = uniform(rng, 0.0, 35.0).to_radians();
    let upper_dir = Vector3::new(
        out * abduct.sin(),
        abduct.cos() * forward.cos(),
        -abduct.cos() * forward.sin(),
    );
    let fore_dir = (upper_dir * flex.cos() - Vector3::z() * flex.sin()).normalize();
    let elbow = shoulder + upper_dir * uniform(rng, 0.28, 0.32);
    (elbow, elbow + fore_dir * uniform(rng, 0.25, 0.29))
}

fn accept(config: &SynthConfig, layout: &Layout) -> bool {
    let k = config.intrinsics;
    let (w, h) = (
        f64::from(config.image_width),
        f64::from(config.image_height),
    );
    let inside = |u: f64, v: f64| {
        u >= IMAGE_MARGIN_PX
            && u <= w - IMAGE_MARGIN_PX
            && v >= IMAGE_MARGIN_PX
            && v <= h - IMAGE_MARGIN_PX
    };

    if !layout.body.values().all(|p| {
        let (u, v) = k.project(p);
        p.z > 0.0 && inside(u, v)
    }) {
        return false;
    }
    let boxes: Vec<_> = layout
        .objects
        .iter()
        .map(|o| object_box(&k, &o.center, o.width, o.height))
        .collect();
    if !boxes
        .iter()
        .all(|b| inside(b.x_min, b.y_min) && inside(b.x_max, b.y_max))
    {
        return false;
    }

    for &side in &layout.pointing {
        if oracle_target(layout, side) != layout.intended
            || angular_margin(layout, side) < ORACLE_MARGIN_DEG
        {
            return false;
        }
    }

    if layout.difficulty == Difficulty::Hard && boxes[0].iou(&boxes[1]) <= HARD_MIN_IOU {
        return false;
    }

    let depth = DepthSource::DepthMap {
        width: config.image_width as usize,
        height: config.image_height as usize,
        intrinsics: k,
        data: render_depth(config, layout),
    };
    let centers_ok = layout.objects.iter().zip(&boxes).all(|(o, b)| {
        let det = Detection {
            id: o.id,
            label: o.label.clone(),
            confidence: 1.0,
            bbox: *b,
        };
        matches!(lift_detection(&depth, &det), Ok(Some(p)) if (p - o.center).norm() < CENTER_TOLERANCE)
    });
    centers_ok
        && JointName::REQUIRED.iter().all(|name| {
            let joint = layout.body[name];
            let (u, v) = k.project(&joint);
            matches!(lift_pixel(&depth, u, v), Ok(Some(p)) if (p - joint).norm() < JOINT_TOLERANCE)
        })
}

/// Degrees between the best and second-best object for `side`.
fn angular_margin(layout: &Layout, side: Side) -> f64 {
    let shoulder = layout.body[&side.shoulder()];
    let ray = layout.body[&side.wrist()] - shoulder;
    let mut angles: Vec<f64> = layout
        .objects
        .iter()
        .map(|o| {
            cosine(&ray, &(o.center - shoulder))
                .clamp(-1.0, 1.0)
                .acos()
                .to_degrees()
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    match angles.as_slice() {
        [best, second, ..] => second - best,
        _ => f64::INFINITY,
    }
}
