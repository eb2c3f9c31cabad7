//! Shared fixtures for the pipeline benchmarks.

use pointresolve::gesture::{fit, training_examples, TrainConfig};
use pointresolve::synth::{generate, Preset, SynthConfig};
use pointresolve::{ClassifierModel, FeatureMode, GeometryMode, Scene};

/// Noisy synthetic scenes of one preset.
pub fn scenes(preset: Preset, count: usize, seed: u64) -> Vec<Scene> {
    let cfg = SynthConfig::new(preset, count, seed).with_noise(3.0, 0.02);
    generate(&cfg)
        .expect("synthetic layout")
        .scenes
        .into_iter()
        .map(|g| g.scene)
        .collect()
}

/// Full-feature classifier trained on a small mixed set.
pub fn model(geometry: GeometryMode) -> ClassifierModel {
    let examples: Vec<_> = scenes(Preset::Mixed, 40, 900)
        .iter()
        .flat_map(|s| training_examples(s, geometry, FeatureMode::Full).expect("annotated scene"))
        .collect();
    let mut model =
        fit(&examples, FeatureMode::Full, &TrainConfig::default()).expect("two classes");
    model.geometry = Some(geometry);
    model
}
