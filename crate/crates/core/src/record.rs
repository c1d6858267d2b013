//! Emitted samples: one JSON sidecar plus one binary blob of placed frames
//! (little-endian f64, row-major F×V×3) per record.

use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::alignment::ConstraintReport;
use crate::body::{Frame, RigidPlacement};
use crate::error::{Error, Result};
use crate::io::{read_bytes, write_bytes};
use crate::language::Description;
use crate::motion::Action;
use crate::seed::sha256_hex;

pub const BLOB_DTYPE: &str = "f64le";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub record_id: String,
    pub scene_id: String,
    pub clip_id: String,
    pub action: Action,
    pub placement: RigidPlacement,
    pub target_instance: u32,
    pub target_class: String,
    pub contact_point: Option<Point3<f64>>,
    pub description: Description,
    pub seed: u64,
    pub verification: ConstraintReport,
    /// Placed frames.
    pub frames: Vec<Frame>,
}

impl DatasetRecord {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSidecar {
    pub record_id: String,
    pub scene_id: String,
    pub clip_id: String,
    pub action: Action,
    pub placement: RigidPlacement,
    pub target_instance: u32,
    pub target_class: String,
    pub contact_point: Option<Point3<f64>>,
    pub description: Description,
    pub seed: u64,
    pub verification: ConstraintReport,
    pub frame_count: usize,
    pub vertex_count: usize,
    pub blob: String,
    pub blob_sha256: String,
    pub dtype: String,
}

pub fn encode_frames(frames: &[Frame]) -> Vec<u8> {
    let mut out = Vec::with_capacity(frames.len() * frames.first().map_or(0, Vec::len) * 24);
    for p in frames.iter().flatten() {
        for c in p.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub fn decode_frames(bytes: &[u8], frame_count: usize, vertex_count: usize) -> Result<Vec<Frame>> {
    let expected = frame_count * vertex_count * 24;
    if bytes.len() != expected {
        return Err(Error::Parse(format!("record blob has {} bytes, expected {expected}", bytes.len())));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(values
        .chunks_exact(vertex_count * 3)
        .map(|f| f.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect())
        .collect())
}

pub fn sidecar_path(dir: &Path, record_id: &str) -> PathBuf {
    dir.join(format!("{record_id}.json"))
}

/// Writes `<record_id>.json` and `<record_id>.bin` into `dir`; returns the
/// sidecar path. Output bytes depend only on the record.
pub fn save_record(record: &DatasetRecord, dir: &Path) -> Result<PathBuf> {
    if record.record_id.is_empty() || record.record_id.contains(['/', '\\']) {
        return Err(Error::InvalidInput(format!("unusable record id {:?}", record.record_id)));
    }
    if !record.verification.passed() {
        return Err(Error::InvalidInput(format!("record {} failed verification", record.record_id)));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let blob = encode_frames(&record.frames);
    let blob_name = format!("{}.bin", record.record_id);
    let sidecar = RecordSidecar {
        record_id: record.record_id.clone(),
        scene_id: record.scene_id.clone(),
        clip_id: record.clip_id.clone(),
        action: record.action.clone(),
        placement: record.placement,
        target_instance: record.target_instance,
        target_class: record.target_class.clone(),
        contact_point: record.contact_point,
        description: record.description.clone(),
        seed: record.seed,
        verification: record.verification.clone(),
        frame_count: record.frame_count(),
        vertex_count: record.vertex_count(),
        blob: blob_name.clone(),
        blob_sha256: sha256_hex(&blob),
        dtype: BLOB_DTYPE.into(),
    };
    write_bytes(&dir.join(&blob_name), &blob)?;
    let path = sidecar_path(dir, &record.record_id);
    let mut json = serde_json::to_vec_pretty(&sidecar)?;
    json.push(b'\n');
    write_bytes(&path, &json)?;
    Ok(path)
}

pub fn load_sidecar(path: &Path) -> Result<RecordSidecar> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}

pub fn load_record(path: &Path) -> Result<DatasetRecord> {
    let s = load_sidecar(path)?;
    if s.dtype != BLOB_DTYPE {
        return Err(Error::Schema(format!("unsupported record dtype {}", s.dtype)));
    }
    let blob_path = path.parent().unwrap_or(Path::new(".")).join(&s.blob);
    let bytes = read_bytes(&blob_path)?;
    if sha256_hex(&bytes) != s.blob_sha256 {
        return Err(Error::Parse(format!("checksum mismatch for {}", blob_path.display())));
    }
    let frames = decode_frames(&bytes, s.frame_count, s.vertex_count)?;
    Ok(DatasetRecord {
        record_id: s.record_id,
        scene_id: s.scene_id,
        clip_id: s.clip_id,
        action: s.action,
        placement: s.placement,
        target_instance: s.target_instance,
        target_class: s.target_class,
        contact_point: s.contact_point,
        description: s.description,
        seed: s.seed,
        verification: s.verification,
        frames,
    })
}
