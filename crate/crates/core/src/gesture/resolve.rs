use serde::Serialize;

use super::classifier::{fit, predict_pointing, ClassifierModel, Example, TrainConfig};
use super::features::{extract_features, pixel_joints, FeatureMode, FeatureVector, JointPositions};
use crate::caption::{reconcile, Lexicon, Policy, Reconciliation};
use crate::error::{Error, Result};
use crate::format::{load_scene, Manifest};
use crate::lifting::lift_pose;
use crate::pointing::{
    best_score, object_centers, score_centers, select_target, ArmJoints, GeometryMode, ScoredObject,
};
use crate::scene::{Scene, Side, Split};

/// Scores and features of one arm before classification.
#[derive(Debug, Clone)]
pub struct ArmAnalysis {
    pub side: Side,
    pub scores: Vec<ScoredObject>,
    pub best_score: f64,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedArm {
    pub side: Side,
    pub reason: String,
}

/// Per-arm analysis of a scene. Arms whose joints cannot be lifted or whose
/// geometry is degenerate are reported as skipped.
pub fn analyze_arms(
    scene: &Scene,
    geometry: GeometryMode,
    features: FeatureMode,
) -> (Vec<ArmAnalysis>, Vec<SkippedArm>) {
    if scene.pose.is_empty() {
        let skipped = Side::BOTH
            .iter()
            .map(|&side| SkippedArm {
                side,
                reason: "no_pose".into(),
            })
            .collect();
        return (Vec::new(), skipped);
    }

    let joints: JointPositions = match geometry {
        GeometryMode::ThreeD => lift_pose(&scene.depth, &scene.pose),
        GeometryMode::TwoD => pixel_joints(&scene.pose),
    };
    let centers = object_centers(scene, geometry);

    let mut analyzed = Vec::new();
    let mut skipped = Vec::new();
    for side in Side::BOTH {
        let outcome = (|| {
            let arm = ArmJoints::from_lifted(&joints, side)
                .ok_or(Error::Degenerate("arm joints could not be lifted"))?;
            let scores = score_centers(&arm, &centers)?;
            let best = best_score(&scores);
            let features = extract_features(&joints, side, best, features)?;
            Ok::<_, Error>(ArmAnalysis {
                side,
                scores,
                best_score: best,
                features,
            })
        })();
        match outcome {
            Ok(a) => analyzed.push(a),
            Err(e) => skipped.push(SkippedArm {
                side,
                reason: e.to_string(),
            }),
        }
    }
    (analyzed, skipped)
}

/// Training rows for one annotated scene: one per analyzable arm, positive
/// iff the scene is a pointing scene and that arm is listed in the truth.
pub fn training_examples(
    scene: &Scene,
    geometry: GeometryMode,
    features: FeatureMode,
) -> Result<Vec<Example>> {
    let truth = scene
        .truth
        .as_ref()
        .ok_or_else(|| Error::validation("training scene lacks ground truth"))?;
    let (arms, _) = analyze_arms(scene, geometry, features);
    Ok(arms
        .into_iter()
        .map(|a| Example {
            is_pointing: truth.is_pointing && truth.arms.contains(&a.side),
            features: a.features,
        })
        .collect())
}

/// Fits the pointing classifier on the train split of `manifest`.
pub fn train_classifier(
    manifest: &Manifest,
    features: FeatureMode,
    geometry: GeometryMode,
    config: &TrainConfig,
) -> Result<ClassifierModel> {
    let mut examples = Vec::new();
    let mut any = false;
    for entry in manifest.split(Split::Train) {
        any = true;
        let path = manifest.resolve(entry);
        let scene = load_scene(&path).map_err(|e| e.context(path.display().to_string()))?;
        examples.extend(
            training_examples(&scene, geometry, features)
                .map_err(|e| e.context(path.display().to_string()))?,
        );
    }
    if !any {
        return Err(Error::Training("manifest has no train entries".into()));
    }
    let mut model = fit(&examples, features, config)?;
    model.geometry = Some(geometry);
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmOutcome {
    pub side: Side,
    pub probability: f64,
    pub is_pointing: bool,
    pub best_score: f64,
    pub scores: Vec<ScoredObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointingResult {
    pub is_pointing: bool,
    pub arm: Option<Side>,
    pub target_id: Option<u32>,
    /// Label of the selected detection after caption reconciliation.
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconciliation: Option<Reconciliation>,
    pub arms: Vec<ArmOutcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedArm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct CaptionCheck<'a> {
    pub lexicon: &'a Lexicon,
    pub policy: Policy,
}

#[derive(Debug, Clone, Copy)]
pub struct ResolveOptions<'a> {
    pub geometry: GeometryMode,
    pub min_score: Option<f64>,
    pub captions: Option<CaptionCheck<'a>>,
}

impl ResolveOptions<'_> {
    pub fn new(geometry: GeometryMode) -> Self {
        Self {
            geometry,
            min_score: None,
            captions: None,
        }
    }
}

/// Decides whether the person in `scene` is pointing and at which detection.
///
/// Each arm is classified independently; the scene is pointing if any arm
/// is, and the most confident pointing arm (left on ties) picks the target.
pub fn resolve_scene(
    scene: &Scene,
    model: &ClassifierModel,
    options: &ResolveOptions<'_>,
) -> Result<PointingResult> {
    let (analyzed, skipped) = analyze_arms(scene, options.geometry, model.mode);

    let mut arms = Vec::with_capacity(analyzed.len());
    for a in analyzed {
        let (probability, is_pointing) = predict_pointing(model, &a.features)?;
        arms.push(ArmOutcome {
            side: a.side,
            probability,
            is_pointing,
            best_score: a.best_score,
            scores: a.scores,
        });
    }

    let chosen = arms
        .iter()
        .filter(|a| a.is_pointing)
        .fold(None::<&ArmOutcome>, |best, a| match best {
            Some(b) if b.probability >= a.probability => Some(b),
            _ => Some(a),
        });

    let reason = if arms.is_empty() {
        Some(if scene.pose.is_empty() {
            "no_pose".to_owned()
        } else {
            "no arm could be analyzed".to_owned()
        })
    } else {
        None
    };

    let target_id = chosen.and_then(|a| select_target(&a.scores, options.min_score));
    let mut label = target_id
        .and_then(|id| scene.detection(id))
        .map(|d| d.label.clone());
    let mut reconciliation = None;
    if let (Some(check), Some(id), Some(original)) = (options.captions, target_id, label.as_deref())
    {
        if let Some(caption) = scene.caption(id).filter(|c| !c.trim().is_empty()) {
            let r = reconcile(original, caption, check.lexicon, check.policy)?;
            label = Some(r.final_label.clone());
            reconciliation = Some(r);
        }
    }

    Ok(PointingResult {
        is_pointing: chosen.is_some(),
        arm: chosen.map(|a| a.side),
        target_id,
        label,
        reconciliation,
        arms,
        skipped,
        reason,
    })
}
