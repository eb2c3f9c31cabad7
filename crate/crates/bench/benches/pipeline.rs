use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use pointresolve::lifting::{lift_detection, lift_pose};
use pointresolve::pointing::{pointing_score, score_objects, ArmJoints};
use pointresolve::synth::{generate, Preset, SynthConfig};
use pointresolve::{resolve_scene, GeometryMode, Point, ResolveOptions, Side};
use pointresolve_bench::{model, scenes};

fn scoring(c: &mut Criterion) {
    let arm = ArmJoints {
        side: Side::Right,
        shoulder: Point::new(-0.2, -0.6, 2.5),
        elbow: Point::new(-0.15, -0.4, 2.3),
        wrist: Point::new(-0.1, -0.3, 2.0),
    };
    let objects: Vec<Point> = (0..64)
        .map(|i| Point::new(i as f64 * 0.01, 0.05, 1.5))
        .collect();
    c.bench_function("pointing_score x64", |b| {
        b.iter(|| {
            objects
                .iter()
                .map(|o| pointing_score(black_box(&arm), o).unwrap())
                .sum::<f64>()
        })
    });

    let scene = &scenes(Preset::Hard, 1, 1)[0];
    let joints = lift_pose(&scene.depth, &scene.pose);
    let arm = ArmJoints::from_lifted(&joints, Side::Right).unwrap();
    c.bench_function("score_objects 3d", |b| {
        b.iter(|| score_objects(black_box(scene), &arm, GeometryMode::ThreeD).unwrap())
    });
}

fn lifting(c: &mut Criterion) {
    let scene = &scenes(Preset::Easy, 1, 2)[0];
    c.bench_function("lift_pose", |b| {
        b.iter(|| lift_pose(black_box(&scene.depth), &scene.pose))
    });
    let det = &scene.detections[0];
    c.bench_function("lift_detection", |b| {
        b.iter(|| lift_detection(black_box(&scene.depth), det).unwrap())
    });
}

fn resolve(c: &mut Criterion) {
    let scenes = scenes(Preset::Mixed, 8, 3);
    for geometry in [GeometryMode::TwoD, GeometryMode::ThreeD] {
        let model = model(geometry);
        let options = ResolveOptions::new(geometry);
        c.bench_function(&format!("resolve_scene {geometry} x8"), |b| {
            b.iter(|| {
                for s in &scenes {
                    black_box(resolve_scene(s, &model, &options).unwrap());
                }
            })
        });
    }
}

fn synth(c: &mut Criterion) {
    let mut group = c.benchmark_group("generate");
    group.sample_size(10);
    for preset in [Preset::Easy, Preset::Hard] {
        group.bench_function(preset.to_string(), |b| {
            b.iter_batched(
                || SynthConfig::new(preset, 4, 11),
                |cfg| generate(&cfg).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, scoring, lifting, resolve, synth);
criterion_main!(benches);
