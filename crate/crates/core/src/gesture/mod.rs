//! Gesture features, the is-pointing classifier and whole-scene resolution.

mod classifier;
mod features;
mod resolve;

pub use classifier::{fit, fit_traced, predict_pointing, ClassifierModel, Example, TrainConfig};
pub use features::{
    extract_features, pixel_joints, torso_frame, FeatureMode, FeatureVector, JointPositions,
    TorsoFrame,
};
pub use resolve::{
    analyze_arms, resolve_scene, train_classifier, training_examples, ArmAnalysis, ArmOutcome,
    CaptionCheck, PointingResult, ResolveOptions, SkippedArm,
};
