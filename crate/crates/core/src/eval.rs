//! Scoring predictions against ground truth.
//!
//! Two per-image binary tasks are evaluated. *Gesture*: is the person
//! pointing. *Recognition*: is the person pointing and was the right object
//! found; a wrong target on a pointing image counts as a miss (fn).

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caption::{Lexicon, Policy};
use crate::error::{Error, Result};
use crate::format::{load_scene, Manifest};
use crate::gesture::{
    resolve_scene, CaptionCheck, ClassifierModel, PointingResult, ResolveOptions,
};
use crate::pointing::GeometryMode;
use crate::scene::{Difficulty, GroundTruth, Split};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 from precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn metrics(c: &Confusion) -> Result<Metrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::validation("empty confusion matrix"));
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    Ok(Metrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        accuracy: ratio(c.tp + c.tn, total),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Gesture,
    Recognition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Easy,
    Hard,
    All,
}

impl EvalSplit {
    fn admits(self, difficulty: Difficulty) -> bool {
        match self {
            EvalSplit::All => true,
            EvalSplit::Easy => difficulty == Difficulty::Easy,
            EvalSplit::Hard => difficulty == Difficulty::Hard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub split: EvalSplit,
    pub mode: GeometryMode,
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// The two fields of a result that evaluation looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub is_pointing: bool,
    pub target_id: Option<u32>,
}

impl From<&PointingResult> for Prediction {
    fn from(r: &PointingResult) -> Self {
        Self {
            is_pointing: r.is_pointing,
            target_id: r.target_id,
        }
    }
}

fn evaluate(
    task: Task,
    predictions: &[Prediction],
    truths: &[GroundTruth],
    split: EvalSplit,
    mode: GeometryMode,
) -> Result<EvalReport> {
    if predictions.len() != truths.len() {
        return Err(Error::validation(format!(
            "{} predictions for {} ground truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut c = Confusion::default();
    for (p, t) in predictions.iter().zip(truths) {
        if !split.admits(t.difficulty) {
            continue;
        }
        let hit = match task {
            Task::Gesture => p.is_pointing,
            Task::Recognition => {
                p.is_pointing && p.target_id.is_some() && p.target_id == t.target_id
            }
        };
        match (t.is_pointing, p.is_pointing) {
            (true, _) if hit => c.tp += 1,
            (true, _) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    let m = metrics(&c)?;
    Ok(EvalReport {
        task,
        split,
        mode,
        confusion: c,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        accuracy: m.accuracy,
    })
}

pub fn evaluate_gesture(
    predictions: &[Prediction],
    truths: &[GroundTruth],
    split: EvalSplit,
    mode: GeometryMode,
) -> Result<EvalReport> {
    evaluate(Task::Gesture, predictions, truths, split, mode)
}

pub fn evaluate_recognition(
    predictions: &[Prediction],
    truths: &[GroundTruth],
    split: EvalSplit,
    mode: GeometryMode,
) -> Result<EvalReport> {
    evaluate(Task::Recognition, predictions, truths, split, mode)
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub geometry: GeometryMode,
    pub min_score: Option<f64>,
    /// Caption reconciliation; `None` leaves detector labels untouched.
    pub captions: Option<(Lexicon, Policy)>,
    /// Worker threads for scene resolution.
    pub jobs: usize,
}

impl ExperimentOptions {
    pub fn new(geometry: GeometryMode) -> Self {
        Self {
            geometry,
            min_score: None,
            captions: None,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedScene {
    pub path: PathBuf,
    pub truth: GroundTruth,
    pub result: PointingResult,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub reports: Vec<EvalReport>,
    pub scenes: Vec<ResolvedScene>,
}

/// Resolves every test scene of `manifest` and reports both tasks on the
/// easy, hard and combined splits (splits with no scenes are omitted).
pub fn run_experiment(
    manifest: &Manifest,
    model: &ClassifierModel,
    options: &ExperimentOptions,
) -> Result<ExperimentOutcome> {
    let entries: Vec<_> = manifest.split(Split::Test).collect();
    if entries.is_empty() {
        return Err(Error::validation("manifest has no test entries"));
    }

    let resolve_one = |path: PathBuf| -> Result<ResolvedScene> {
        let ctx = |e: Error| e.context(path.display().to_string());
        let scene = load_scene(&path).map_err(ctx)?;
        let truth = scene
            .truth
            .clone()
            .ok_or_else(|| ctx(Error::validation("test scene lacks ground truth")))?;
        let resolve = ResolveOptions {
            geometry: options.geometry,
            min_score: options.min_score,
            captions: options
                .captions
                .as_ref()
                .map(|(lexicon, policy)| CaptionCheck {
                    lexicon,
                    policy: *policy,
                }),
        };
        let result = resolve_scene(&scene, model, &resolve).map_err(ctx)?;
        Ok(ResolvedScene {
            path,
            truth,
            result,
        })
    };

    let paths: Vec<PathBuf> = entries.iter().map(|e| manifest.resolve(e)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    let scenes: Vec<ResolvedScene> = pool.install(|| {
        paths
            .into_par_iter()
            .map(resolve_one)
            .collect::<Result<Vec<_>>>()
    })?;

    // Manifest difficulty tags decide the split, matching how the data was curated.
    let truths: Vec<GroundTruth> = scenes
        .iter()
        .zip(&entries)
        .map(|(s, e)| GroundTruth {
            difficulty: e.difficulty,
            ..s.truth.clone()
        })
        .collect();
    let predictions: Vec<Prediction> = scenes.iter().map(|s| Prediction::from(&s.result)).collect();

    let mut reports = Vec::new();
    for task in [Task::Gesture, Task::Recognition] {
        for split in [EvalSplit::Easy, EvalSplit::Hard, EvalSplit::All] {
            if !truths.iter().any(|t| split.admits(t.difficulty)) {
                continue;
            }
            reports.push(evaluate(
                task,
                &predictions,
                &truths,
                split,
                options.geometry,
            )?);
        }
    }
    Ok(ExperimentOutcome { reports, scenes })
}

/// Plain-text table of reports, metrics rounded to two decimals.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<5} {:<4} {:>9} {:>6} {:>6} {:>8}  {:>5} {:>5} {:>5} {:>5}",
        "Task", "Case", "Mode", "Precision", "Recall", "F1", "Accuracy", "TP", "FP", "FN", "TN"
    );
    for r in reports {
        let task = match r.task {
            Task::Gesture => "gesture",
            Task::Recognition => "recognition",
        };
        let split = match r.split {
            EvalSplit::Easy => "easy",
            EvalSplit::Hard => "hard",
            EvalSplit::All => "all",
        };
        let _ = writeln!(
            out,
            "{:<12} {:<5} {:<4} {:>9.2} {:>6.2} {:>6.2} {:>8.2}  {:>5} {:>5} {:>5} {:>5}",
            task,
            split,
            r.mode.to_string(),
            r.precision,
            r.recall,
            r.f1,
            r.accuracy,
            r.confusion.tp,
            r.confusion.fp,
            r.confusion.fn_,
            r.confusion.tn
        );
    }
    out
}
