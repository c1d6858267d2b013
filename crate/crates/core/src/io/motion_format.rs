use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::motion::{Action, MotionClip};

pub const FRAME_DTYPE: &str = "f32le";

/// JSON header of a motion clip. Frames live in the sibling blob named by
/// `data`: little-endian f32, row-major `num_frames × num_vertices × 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionHeader {
    pub clip_id: String,
    pub action: Action,
    pub fps: f64,
    pub num_frames: usize,
    pub num_vertices: usize,
    pub regions: BTreeMap<String, Vec<u32>>,
    pub canonical: bool,
    pub data: String,
    #[serde(default = "default_dtype")]
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<Vec<[u32; 3]>>,
}

fn default_dtype() -> String {
    FRAME_DTYPE.to_string()
}

pub fn load_motion(path: &Path) -> Result<MotionClip> {
    let header: MotionHeader = serde_json::from_slice(&read_bytes(path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if header.dtype != FRAME_DTYPE {
        return Err(Error::Parse(format!("unsupported frame dtype `{}`", header.dtype)));
    }
    let blob_path = path.parent().unwrap_or(Path::new(".")).join(&header.data);
    let blob = read_bytes(&blob_path)?;
    let (f, v) = (header.num_frames, header.num_vertices);
    let expected = f
        .checked_mul(v)
        .and_then(|n| n.checked_mul(12))
        .ok_or_else(|| Error::Parse("frame blob size overflows".into()))?;
    if blob.len() != expected {
        return Err(Error::Parse(format!(
            "{}: {} bytes, header declares {f} frames x {v} vertices ({expected} bytes)",
            blob_path.display(),
            blob.len()
        )));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")));
    let frames = (0..f)
        .map(|_| {
            (0..v)
                .map(|_| {
                    let mut p = [0f32; 3];
                    for c in &mut p {
                        *c = values.next().expect("length checked");
                    }
                    p
                })
                .collect()
        })
        .collect();
    let clip = MotionClip {
        clip_id: header.clip_id,
        action: header.action,
        fps: header.fps,
        frames,
        regions: header.regions,
        canonical: header.canonical,
        faces: header.faces,
    };
    clip.validate()?;
    Ok(clip)
}

/// Writes `<clip_id>.json` and `<clip_id>.bin` into `dir`; returns the header path.
pub fn save_motion(clip: &MotionClip, dir: &Path) -> Result<PathBuf> {
    if clip.clip_id.is_empty() || clip.clip_id.contains(['/', '\\']) {
        return Err(Error::InvalidInput(format!("clip id `{}` is not a file name", clip.clip_id)));
    }
    let data = format!("{}.bin", clip.clip_id);
    let header = MotionHeader {
        clip_id: clip.clip_id.clone(),
        action: clip.action.clone(),
        fps: clip.fps,
        num_frames: clip.frame_count(),
        num_vertices: clip.vertex_count(),
        regions: clip.regions.clone(),
        canonical: clip.canonical,
        data: data.clone(),
        dtype: FRAME_DTYPE.to_string(),
        faces: clip.faces.clone(),
    };
    let mut blob = Vec::with_capacity(clip.frame_count() * clip.vertex_count() * 12);
    for c in clip.frames.iter().flatten().flatten() {
        blob.extend_from_slice(&c.to_le_bytes());
    }
    write_bytes(&dir.join(&data), &blob)?;
    let header_path = dir.join(format!("{}.json", clip.clip_id));
    write_bytes(&header_path, &serde_json::to_vec_pretty(&header)?)?;
    Ok(header_path)
}
