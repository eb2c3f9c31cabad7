//! Pointing-target resolution from per-image detections, 2D body landmarks
//! and a dense depth source.
//!
//! The pipeline lifts box centroids and arm joints into camera space
//! ([`lifting`]), scores every detection by the cosine between the
//! shoulder-to-wrist ray and the shoulder-to-object vector ([`pointing`]),
//! classifies each arm as pointing or resting ([`gesture`]) and optionally
//! checks the chosen label against a caption ([`caption`]). [`eval`] scores
//! predictions against ground truth, and [`synth`] generates annotated
//! scenes with exact geometry for testing.

pub mod caption;
pub mod error;
pub mod eval;
pub mod format;
pub mod gesture;
pub mod lifting;
pub mod pointing;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
pub use format::{load_manifest, load_scene, save_manifest, save_scene, Manifest, ManifestEntry};
pub use gesture::{resolve_scene, ClassifierModel, FeatureMode, PointingResult, ResolveOptions};
pub use pointing::GeometryMode;
pub use scene::{
    BoundingBox, DepthSource, Detection, Difficulty, GroundTruth, Intrinsics, JointName, Landmark,
    Point, PoseSet, Scene, Side, Split,
};
