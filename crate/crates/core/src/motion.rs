use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::centroid;

pub const REGION_FEET: &str = "feet";
pub const REGION_HIPS: &str = "hips";
pub const REGION_PELVIS: &str = "pelvis";
pub const REQUIRED_REGIONS: [&str; 3] = [REGION_FEET, REGION_HIPS, REGION_PELVIS];

/// Action label of a motion clip. Unknown labels become extensions and
/// need a policy entry before they can be aligned or described.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Action {
    Sit,
    StandUp,
    Walk,
    LieDown,
    Extension(String),
}

impl Action {
    pub const BUILTIN: [Action; 4] = [Action::Sit, Action::StandUp, Action::Walk, Action::LieDown];

    pub fn as_str(&self) -> &str {
        match self {
            Action::Sit => "sit",
            Action::StandUp => "stand_up",
            Action::Walk => "walk",
            Action::LieDown => "lie_down",
            Action::Extension(name) => name,
        }
    }

    pub fn parse(s: &str) -> Action {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "sit" => Action::Sit,
            "stand_up" | "standup" => Action::StandUp,
            "walk" => Action::Walk,
            "lie_down" | "liedown" => Action::LieDown,
            _ => Action::Extension(s.trim().to_string()),
        }
    }
}

impl From<String> for Action {
    fn from(s: String) -> Self {
        Action::parse(&s)
    }
}

impl From<Action> for String {
    fn from(a: Action) -> Self {
        a.as_str().to_string()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Admissible clip lengths for corpus synthesis (30–120 frames by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameLengthPolicy {
    pub min_frames: usize,
    pub max_frames: usize,
}

impl Default for FrameLengthPolicy {
    fn default() -> Self {
        FrameLengthPolicy {
            min_frames: 30,
            max_frames: 120,
        }
    }
}

impl FrameLengthPolicy {
    pub fn admits(&self, frames: usize) -> bool {
        (self.min_frames..=self.max_frames).contains(&frames)
    }
}

/// A captured motion as per-frame body vertex clouds. Local poses are
/// opaque; only rigid placement is ever applied to them.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub clip_id: String,
    pub action: Action,
    pub fps: f64,
    pub frames: Vec<Vec<[f32; 3]>>,
    pub regions: BTreeMap<String, Vec<u32>>,
    pub canonical: bool,
    /// Optional closed triangle mesh over the vertices, used as the body
    /// surface by the metrics.
    pub faces: Option<Vec<[u32; 3]>>,
}

impl MotionClip {
    pub fn new(
        clip_id: impl Into<String>,
        action: Action,
        fps: f64,
        frames: Vec<Vec<[f32; 3]>>,
        regions: BTreeMap<String, Vec<u32>>,
        canonical: bool,
    ) -> Result<Self> {
        let clip = MotionClip {
            clip_id: clip_id.into(),
            action,
            fps,
            frames,
            regions,
            canonical,
            faces: None,
        };
        clip.validate()?;
        Ok(clip)
    }

    pub fn with_faces(mut self, faces: Vec<[u32; 3]>) -> Result<Self> {
        self.faces = Some(faces);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Schema(format!("clip {} has no frames", self.clip_id)));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Schema(format!("clip {} has invalid fps {}", self.clip_id, self.fps)));
        }
        let v = self.frames[0].len();
        if v == 0 {
            return Err(Error::Schema(format!("clip {} has no vertices", self.clip_id)));
        }
        for (f, frame) in self.frames.iter().enumerate() {
            if frame.len() != v {
                return Err(Error::InconsistentVertexCount {
                    frame: f,
                    expected: v,
                    found: frame.len(),
                });
            }
            if !frame.iter().flatten().all(|c| c.is_finite()) {
                return Err(Error::Schema(format!("frame {f} has a non-finite vertex")));
            }
        }
        for name in REQUIRED_REGIONS {
            match self.regions.get(name) {
                Some(indices) if !indices.is_empty() => {}
                _ => return Err(Error::MissingRegion(name.to_string())),
            }
        }
        for indices in self.regions.values() {
            if let Some(&bad) = indices.iter().find(|&&i| i as usize >= v) {
                return Err(Error::IndexOutOfRange {
                    index: bad as usize,
                    len: v,
                });
            }
        }
        if let Some(faces) = &self.faces {
            if let Some(&bad) = faces.iter().flatten().find(|&&i| i as usize >= v) {
                return Err(Error::IndexOutOfRange {
                    index: bad as usize,
                    len: v,
                });
            }
        }
        if self.canonical {
            let frame0 = self.frame(0);
            let pelvis = &self.regions[REGION_PELVIS];
            let c = centroid(pelvis.iter().map(|&i| &frame0[i as usize])).expect("nonempty region");
            if c.x.hypot(c.y) >= 1e-6 {
                return Err(Error::Schema(format!(
                    "clip {} is flagged canonical but its frame-0 pelvis sits at ({}, {})",
                    self.clip_id, c.x, c.y
                )));
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    pub fn region(&self, name: &str) -> Result<&[u32]> {
        self.regions
            .get(name)
            .filter(|r| !r.is_empty())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingRegion(name.to_string()))
    }

    pub fn frame(&self, index: usize) -> Vec<Point3<f64>> {
        self.frames[index]
            .iter()
            .map(|v| Point3::new(v[0] as f64, v[1] as f64, v[2] as f64))
            .collect()
    }

    pub fn frames_f64(&self) -> Vec<Vec<Point3<f64>>> {
        (0..self.frames.len()).map(|i| self.frame(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regions() -> BTreeMap<String, Vec<u32>> {
        BTreeMap::from([
            ("feet".to_string(), vec![0]),
            ("hips".to_string(), vec![1]),
            ("pelvis".to_string(), vec![2]),
        ])
    }

    #[test]
    fn two_frame_clip_loads() {
        let frame = vec![[0.0f32; 3]; 4];
        let clip = MotionClip::new("c", Action::Sit, 30.0, vec![frame.clone(), frame], regions(), true).unwrap();
        assert_eq!(clip.frame_count(), 2);
        assert_eq!(clip.vertex_count(), 4);
    }

    #[test]
    fn inconsistent_vertex_count() {
        let err = MotionClip::new(
            "c",
            Action::Walk,
            30.0,
            vec![vec![[0.0; 3]; 4], vec![[0.0; 3]; 5]],
            regions(),
            false,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InconsistentVertexCount {
                frame: 1,
                expected: 4,
                found: 5
            }
        ));
    }

    #[test]
    fn missing_and_out_of_range_regions() {
        let mut r = regions();
        r.remove("hips");
        let err = MotionClip::new("c", Action::Walk, 30.0, vec![vec![[0.0; 3]; 4]], r, false).unwrap_err();
        assert!(matches!(err, Error::MissingRegion(ref n) if n == "hips"));

        let mut r = regions();
        r.insert("feet".into(), vec![9]);
        let err = MotionClip::new("c", Action::Walk, 30.0, vec![vec![[0.0; 3]; 4]], r, false).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 9, len: 4 }));
    }

    #[test]
    fn canonical_flag_is_checked() {
        let mut frame = vec![[0.0f32; 3]; 4];
        frame[2] = [0.5, 0.0, 1.0];
        assert!(MotionClip::new("c", Action::Walk, 30.0, vec![frame.clone()], regions(), true).is_err());
        assert!(MotionClip::new("c", Action::Walk, 30.0, vec![frame], regions(), false).is_ok());
    }

    #[test]
    fn action_labels_round_trip() {
        for a in Action::BUILTIN {
            assert_eq!(Action::parse(a.as_str()), a);
        }
        assert_eq!(Action::parse("Stand-Up"), Action::StandUp);
        assert_eq!(Action::parse("jump up"), Action::Extension("jump up".into()));
        let json = serde_json::to_string(&Action::LieDown).unwrap();
        assert_eq!(json, "\"lie_down\"");
    }
}
