//! On-disk formats: labeled scenes (PLY or JSON), motion clips (JSON header
//! plus little-endian f32 frame blob). Loading never recenters or rescales.

mod motion_format;
pub mod ply;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::cloud::{ScenePoint, ScenePointCloud};
use crate::error::{Error, Result};

pub use motion_format::{load_motion, save_motion, MotionHeader};
pub use ply::PlyEncoding;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneFormat {
    /// PLY with per-vertex `semantic_label` / `instance_label`.
    PlyWithLabels,
    /// JSON scene document, convenient for hand-built scenes.
    JsonManifest,
}

impl SceneFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ply" => Some(SceneFormat::PlyWithLabels),
            "json" => Some(SceneFormat::JsonManifest),
            _ => None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneDocument {
    scene_id: String,
    class_names: BTreeMap<u32, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    orientations: BTreeMap<u32, [f64; 2]>,
    points: Vec<ScenePoint>,
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scene")
        .to_string()
}

pub fn load_scene(path: &Path, format: SceneFormat) -> Result<ScenePointCloud> {
    let bytes = read_bytes(path)?;
    match format {
        SceneFormat::PlyWithLabels => ply::parse_scene(&bytes, &file_stem(path)),
        SceneFormat::JsonManifest => {
            let doc: SceneDocument =
                serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let cloud = ScenePointCloud {
                scene_id: doc.scene_id,
                points: doc.points,
                class_names: doc.class_names,
                orientations: doc
                    .orientations
                    .into_iter()
                    .map(|(id, [x, y])| (id, Vector2::new(x, y)))
                    .collect(),
            };
            cloud.validate()?;
            Ok(cloud)
        }
    }
}

/// Loads a scene, picking the format from the file extension.
pub fn load_scene_auto(path: &Path) -> Result<ScenePointCloud> {
    let format = SceneFormat::from_path(path)
        .ok_or_else(|| Error::InvalidInput(format!("{}: unknown scene file extension", path.display())))?;
    load_scene(path, format)
}

pub fn scene_to_json(scene: &ScenePointCloud) -> Result<Vec<u8>> {
    let doc = SceneDocument {
        scene_id: scene.scene_id.clone(),
        class_names: scene.class_names.clone(),
        orientations: scene.orientations.iter().map(|(&id, d)| (id, [d.x, d.y])).collect(),
        points: scene.points.clone(),
    };
    Ok(serde_json::to_vec(&doc)?)
}

pub fn save_scene_ply(scene: &ScenePointCloud, path: &Path, encoding: PlyEncoding) -> Result<()> {
    write_bytes(path, &ply::write_scene(scene, encoding))
}

pub fn save_scene_json(scene: &ScenePointCloud, path: &Path) -> Result<()> {
    write_bytes(path, &scene_to_json(scene)?)
}

/// Sorted list of files in `dir` whose extension is one of `extensions`.
pub fn list_files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if matches && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
