//! On-disk scene and manifest formats.
//!
//! A scene is a UTF-8 JSON document plus a sidecar raster of little-endian
//! `f32` values (one per pixel for depth maps, three per pixel for point
//! maps). The document refers to the sidecar by a path relative to itself.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{
    DepthSource, Detection, Difficulty, GroundTruth, Intrinsics, Landmark, PoseSet, Scene, Split,
};

#[derive(Serialize, Deserialize)]
struct SceneDoc {
    image_width: u32,
    image_height: u32,
    detections: Vec<Detection>,
    pose: Vec<Landmark>,
    depth: DepthDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    captions: Option<BTreeMap<u32, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<GroundTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<serde_json::Map<String, serde_json::Value>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DepthDoc {
    DepthMap {
        width: usize,
        height: usize,
        intrinsics: Intrinsics,
        data: String,
    },
    PointMap {
        width: usize,
        height: usize,
        data: String,
    },
}

fn parse_err(path: &Path, message: impl ToString) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new(""))
}

fn read_f32s(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(Error::validation(format!(
            "depth sidecar {} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected * 4
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_f32s(path: &Path, values: impl Iterator<Item = f32>) -> Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads and validates a scene document together with its depth sidecar.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: SceneDoc = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    let dir = base_dir(path);

    let depth = match doc.depth {
        DepthDoc::DepthMap {
            width,
            height,
            intrinsics,
            data,
        } => {
            check_dims(width, height, doc.image_width, doc.image_height)?;
            DepthSource::DepthMap {
                width,
                height,
                intrinsics,
                data: read_f32s(&dir.join(data), width * height)?,
            }
        }
        DepthDoc::PointMap {
            width,
            height,
            data,
        } => {
            check_dims(width, height, doc.image_width, doc.image_height)?;
            let flat = read_f32s(&dir.join(data), width * height * 3)?;
            DepthSource::PointMap {
                width,
                height,
                data: flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            }
        }
    };

    let scene = Scene {
        image_width: doc.image_width,
        image_height: doc.image_height,
        detections: doc.detections,
        pose: PoseSet::new(doc.pose)?,
        depth,
        captions: doc.captions,
        truth: doc.truth,
        metadata: doc.metadata,
    };
    scene.validate()?;
    Ok(scene)
}

// Checked before touching the sidecar so a mismatch reports as such rather
// than as a sidecar length error.
fn check_dims(width: usize, height: usize, image_width: u32, image_height: u32) -> Result<()> {
    if width != image_width as usize || height != image_height as usize {
        return Err(Error::validation("depth dims mismatch"));
    }
    Ok(())
}

/// File name of the depth sidecar written next to `scene_path`.
pub fn sidecar_name(scene_path: &Path, depth: &DepthSource) -> String {
    let stem = scene_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_owned());
    match depth {
        DepthSource::DepthMap { .. } => format!("{stem}.depth.bin"),
        DepthSource::PointMap { .. } => format!("{stem}.points.bin"),
    }
}

/// Writes `scene` as a JSON document at `path` plus its sidecar raster.
pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let sidecar = sidecar_name(path, &scene.depth);
    let sidecar_path = base_dir(path).join(&sidecar);

    let depth = match &scene.depth {
        DepthSource::DepthMap {
            width,
            height,
            intrinsics,
            data,
        } => {
            write_f32s(&sidecar_path, data.iter().copied())?;
            DepthDoc::DepthMap {
                width: *width,
                height: *height,
                intrinsics: *intrinsics,
                data: sidecar,
            }
        }
        DepthSource::PointMap {
            width,
            height,
            data,
        } => {
            write_f32s(&sidecar_path, data.iter().flatten().copied())?;
            DepthDoc::PointMap {
                width: *width,
                height: *height,
                data: sidecar,
            }
        }
    };

    let doc = SceneDoc {
        image_width: scene.image_width,
        image_height: scene.image_height,
        detections: scene.detections.clone(),
        pose: scene.pose.iter().copied().collect(),
        depth,
        captions: scene.captions.clone(),
        truth: scene.truth.clone(),
        metadata: scene.metadata.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| parse_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub split: Split,
    pub difficulty: Difficulty,
}

/// A list of scene files with their split and difficulty tags. Entry paths
/// are relative to `base_dir` unless absolute.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    fn validate_entries(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert(&entry.path) {
                return Err(Error::validation(format!(
                    "duplicate manifest path {}",
                    entry.path.display()
                )));
            }
        }
        Ok(())
    }
}

/// Reads a manifest and checks that every listed scene file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    // Token errors (e.g. an unknown split) are schema violations, not syntax errors.
    let entries: Vec<ManifestEntry> =
        serde_json::from_value(value).map_err(|e| Error::validation(e.to_string()))?;
    let manifest = Manifest {
        base_dir: base_dir(path).to_path_buf(),
        entries,
    };
    manifest.validate_entries()?;
    for entry in &manifest.entries {
        let scene_path = manifest.resolve(entry);
        if !scene_path.is_file() {
            return Err(Error::validation(format!(
                "manifest entry {} is not a readable file",
                scene_path.display()
            )));
        }
    }
    Ok(manifest)
}

pub fn save_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    manifest.validate_entries()?;
    let mut text =
        serde_json::to_string_pretty(&manifest.entries).map_err(|e| parse_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{BoundingBox, JointName, Side};
    use tempfile::tempdir;

    fn minimal_scene() -> Scene {
        let landmarks = JointName::REQUIRED
            .iter()
            .enumerate()
            .map(|(i, &name)| Landmark {
                name,
                u: i as f64 * 0.4,
                v: 1.0,
                visibility: 0.9,
            });
        Scene {
            image_width: 4,
            image_height: 4,
            detections: vec![Detection {
                id: 3,
                label: "cup".into(),
                confidence: 0.8,
                bbox: BoundingBox::new(1.0, 1.0, 3.0, 3.0),
            }],
            pose: PoseSet::new(landmarks).unwrap(),
            depth: DepthSource::DepthMap {
                width: 4,
                height: 4,
                intrinsics: Intrinsics {
                    fx: 2.0,
                    fy: 2.0,
                    cx: 2.0,
                    cy: 2.0,
                },
                data: (0..16).map(|i| 1.0 + i as f32 * 0.1).collect(),
            },
            captions: None,
            truth: Some(GroundTruth {
                is_pointing: true,
                arms: vec![Side::Right],
                target_id: Some(3),
                difficulty: Difficulty::Easy,
            }),
            metadata: None,
        }
    }

    fn write_doc(dir: &Path, doc: serde_json::Value, floats: usize) -> PathBuf {
        let path = dir.join("s.json");
        fs::write(dir.join("d.bin"), vec![0u8; floats * 4]).unwrap();
        fs::write(&path, doc.to_string()).unwrap();
        path
    }

    fn doc_json(depth_w: usize, depth_h: usize, target: u32) -> serde_json::Value {
        let pose: Vec<_> = JointName::REQUIRED
            .iter()
            .map(|n| serde_json::json!({"name": n, "u": 1.0, "v": 1.0, "visibility": 1.0}))
            .collect();
        serde_json::json!({
            "image_width": 4,
            "image_height": 4,
            "detections": [{"id": 1, "label": "bottle", "confidence": 0.5, "box": [0, 0, 2, 2]}],
            "pose": pose,
            "depth": {"kind": "depth_map", "width": depth_w, "height": depth_h,
                      "intrinsics": {"fx": 1.0, "fy": 1.0, "cx": 2.0, "cy": 2.0}, "data": "d.bin"},
            "truth": {"is_pointing": true, "arms": ["left"], "target_id": target, "difficulty": "easy"}
        })
    }

    #[test]
    fn loads_minimal_document() {
        let dir = tempdir().unwrap();
        let path = write_doc(dir.path(), doc_json(4, 4, 1), 16);
        let scene = load_scene(&path).unwrap();
        assert_eq!(scene.detections.len(), 1);
        assert_eq!(scene.pose.len(), 8);
    }

    #[test]
    fn rejects_depth_dims_mismatch() {
        let dir = tempdir().unwrap();
        let path = write_doc(dir.path(), doc_json(3, 4, 1), 12);
        let err = load_scene(&path).unwrap_err();
        assert!(err.to_string().contains("depth dims mismatch"), "{err}");
    }

    #[test]
    fn rejects_dangling_target() {
        let dir = tempdir().unwrap();
        let path = write_doc(dir.path(), doc_json(4, 4, 7), 16);
        let err = load_scene(&path).unwrap_err();
        assert!(err.to_string().contains("dangling target_id"), "{err}");
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(load_scene(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn short_sidecar_is_rejected() {
        let dir = tempdir().unwrap();
        let path = write_doc(dir.path(), doc_json(4, 4, 1), 15);
        assert!(matches!(load_scene(&path), Err(Error::Validation(_))));
    }

    #[test]
    fn round_trips_including_nan_holes() {
        let dir = tempdir().unwrap();
        let mut scene = minimal_scene();
        if let DepthSource::DepthMap { data, .. } = &mut scene.depth {
            data[5] = f32::NAN;
            data[6] = -0.0;
        }
        scene.captions = Some(BTreeMap::from([(3, "a white mug".to_owned())]));
        let path = dir.path().join("scene.json");
        save_scene(&scene, &path).unwrap();
        assert_eq!(load_scene(&path).unwrap(), scene);

        let pm = Scene {
            depth: scene.depth.to_point_map(),
            ..scene
        };
        let path = dir.path().join("pm.json");
        save_scene(&pm, &path).unwrap();
        assert_eq!(load_scene(&path).unwrap(), pm);
    }

    #[test]
    fn save_to_unwritable_path_is_io_error() {
        let err = save_scene(&minimal_scene(), "/nonexistent-dir/x/scene.json").unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn manifest_tokens_and_duplicates() {
        let dir = tempdir().unwrap();
        for name in ["a.json", "b.json"] {
            fs::write(dir.path().join(name), "{}").unwrap();
        }
        let mpath = dir.path().join("m.json");

        fs::write(
            &mpath,
            r#"[{"path":"a.json","split":"train","difficulty":"easy"},
                {"path":"b.json","split":"test","difficulty":"hard"}]"#,
        )
        .unwrap();
        let m = load_manifest(&mpath).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[1].split, Split::Test);
        assert_eq!(m.entries[1].difficulty, Difficulty::Hard);

        fs::write(
            &mpath,
            r#"[{"path":"a.json","split":"val","difficulty":"easy"}]"#,
        )
        .unwrap();
        assert!(matches!(load_manifest(&mpath), Err(Error::Validation(_))));

        fs::write(
            &mpath,
            r#"[{"path":"a.json","split":"train","difficulty":"easy"},
                {"path":"a.json","split":"test","difficulty":"easy"}]"#,
        )
        .unwrap();
        let err = load_manifest(&mpath).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        fs::write(
            &mpath,
            r#"[{"path":"zzz.json","split":"train","difficulty":"easy"}]"#,
        )
        .unwrap();
        assert!(matches!(load_manifest(&mpath), Err(Error::Validation(_))));
    }
}
