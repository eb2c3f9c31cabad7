use std::collections::BTreeMap;

use pointresolve::gesture::{
    fit, predict_pointing, resolve_scene, training_examples, FeatureMode, TrainConfig,
};
use pointresolve::lifting::lift_pose;
use pointresolve::pointing::{score_objects, select_target, ArmJoints};
use pointresolve::synth::{
    generate, oracle_target, render_layout, Layout, Placement, Preset, SceneObject, SynthConfig,
};
use pointresolve::{
    load_scene, save_scene, Difficulty, GeometryMode, JointName, Point, ResolveOptions, Side,
};

#[test]
fn save_load_round_trip_200_scenes() {
    // seed 2024; noisy so depth values are arbitrary floats
    let cfg = SynthConfig::new(Preset::Mixed, 200, 2024).with_noise(2.0, 0.05);
    let out = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.json");
    for g in &out.scenes {
        save_scene(&g.scene, &path).unwrap();
        assert_eq!(load_scene(&path).unwrap(), g.scene, "{}", g.name);
    }
}

/// Argmin of the angle via atan2(|a x b|, a . b), written independently of
/// the cosine oracle.
fn angle_oracle(layout: &Layout, side: Side) -> Option<u32> {
    let s = layout.body[&side.shoulder()];
    let ray = layout.body[&side.wrist()] - s;
    let mut best: Option<(f64, u32)> = None;
    for o in &layout.objects {
        let v = o.center - s;
        let angle = ray.cross(&v).norm().atan2(ray.dot(&v));
        if best.is_none_or(|(a, id)| angle < a || (angle == a && o.id < id)) {
            best = Some((angle, o.id));
        }
    }
    best.map(|(_, id)| id)
}

#[test]
fn oracle_matches_independent_angle_search() {
    let out = generate(&SynthConfig::new(Preset::Mixed, 120, 77)).unwrap();
    for g in &out.scenes {
        for &side in &g.layout.pointing {
            assert_eq!(
                oracle_target(&g.layout, side),
                angle_oracle(&g.layout, side),
                "{}",
                g.name
            );
        }
    }
}

#[test]
fn noise_free_resolution_matches_oracle() {
    let scenes = generate(&SynthConfig::new(Preset::Mixed, 80, 5))
        .unwrap()
        .scenes;
    let (train, test) = scenes.split_at(40);
    let examples: Vec<_> = train
        .iter()
        .flat_map(|g| training_examples(&g.scene, GeometryMode::ThreeD, FeatureMode::Full).unwrap())
        .collect();
    let model = fit(&examples, FeatureMode::Full, &TrainConfig::default()).unwrap();
    for g in test {
        let r =
            resolve_scene(&g.scene, &model, &ResolveOptions::new(GeometryMode::ThreeD)).unwrap();
        let truth = g.scene.truth.as_ref().unwrap();
        assert_eq!(r.is_pointing, truth.is_pointing, "{}", g.name);
        assert_eq!(r.target_id, truth.target_id, "{}", g.name);
    }
}

#[test]
fn separable_arms_train_to_high_accuracy() {
    // 100 scenes, two arms each
    let scenes = generate(&SynthConfig::new(Preset::Mixed, 100, 31))
        .unwrap()
        .scenes;
    let examples: Vec<_> = scenes
        .iter()
        .flat_map(|g| training_examples(&g.scene, GeometryMode::ThreeD, FeatureMode::Full).unwrap())
        .collect();
    assert_eq!(examples.len(), 200);
    let model = fit(&examples, FeatureMode::Full, &TrainConfig::default()).unwrap();
    let correct = examples
        .iter()
        .filter(|e| predict_pointing(&model, &e.features).unwrap().1 == e.is_pointing)
        .count();
    assert!(correct as f64 / 200.0 >= 0.95, "{correct}/200");
}

fn stacked_layout() -> Layout {
    let zp = 2.8;
    let mut body = BTreeMap::new();
    let rs = Point::new(-0.18, -0.65, zp);
    let ls = Point::new(0.18, -0.65, zp);
    body.insert(JointName::RightShoulder, rs);
    body.insert(JointName::LeftShoulder, ls);
    body.insert(JointName::RightHip, Point::new(-0.13, -0.2, zp));
    body.insert(JointName::LeftHip, Point::new(0.13, -0.2, zp));
    body.insert(
        JointName::LeftElbow,
        ls + nalgebra::Vector3::new(0.05, 0.3, 0.0),
    );
    body.insert(
        JointName::LeftWrist,
        ls + nalgebra::Vector3::new(0.08, 0.56, -0.05),
    );

    // centroids (320.5, 258.5) at 2 m and (320.5, 260.5) at 1 m; the near
    // box is 3 px tall so the far box's central band stays mostly visible
    let far = Point::new(0.5 * 2.0 / 500.0, 18.5 * 2.0 / 500.0, 2.0);
    let near = Point::new(0.5 / 500.0, 20.5 / 500.0, 1.0);
    let dir = (far - rs).normalize();
    body.insert(
        JointName::RightElbow,
        rs + dir * 0.29 + nalgebra::Vector3::new(0.0, 0.02, 0.0),
    );
    body.insert(JointName::RightWrist, rs + dir * 0.56);

    Layout {
        person: Placement {
            center: Point::new(0.0, -0.425, zp),
            table_near: zp - 1.45,
            table_far: zp - 0.2,
        },
        body,
        objects: vec![
            SceneObject {
                id: 1,
                label: "cup".into(),
                center: near,
                width: 0.04,
                height: 3.0 / 500.0,
            },
            SceneObject {
                id: 2,
                label: "bottle".into(),
                center: far,
                width: 0.2,
                height: 0.2,
            },
        ],
        pointing: vec![Side::Right],
        intended: Some(2),
        difficulty: Difficulty::Hard,
    }
}

#[test]
fn depth_separates_stacked_objects_that_pixels_cannot() {
    let layout = stacked_layout();
    let scene = render_layout(&SynthConfig::new(Preset::Hard, 1, 0), &layout);
    let (c1, c2) = (
        scene.detections[0].bbox.centroid(),
        scene.detections[1].bbox.centroid(),
    );
    assert!(((c1.0 - c2.0).powi(2) + (c1.1 - c2.1).powi(2)).sqrt() <= 2.0 + 1e-9);
    assert_eq!(oracle_target(&layout, Side::Right), Some(2));

    let joints = lift_pose(&scene.depth, &scene.pose);
    let arm3 = ArmJoints::from_lifted(&joints, Side::Right).unwrap();
    let s3 = score_objects(&scene, &arm3, GeometryMode::ThreeD).unwrap();
    assert_eq!(select_target(&s3, None), Some(2));

    let arm2 = ArmJoints::from_pixels(&scene.pose, Side::Right).unwrap();
    let s2 = score_objects(&scene, &arm2, GeometryMode::TwoD).unwrap();
    assert!((s2[0].score.unwrap() - s2[1].score.unwrap()).abs() < 0.01);
}
