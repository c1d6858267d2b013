//! Rigid placement of motion clips and body-frame helpers.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid, yaw_rotation};
use crate::motion::MotionClip;

pub type Frame = Vec<Point3<f64>>;

/// Translation plus rotation about the gravity axis: `v ↦ R_yaw·v + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPlacement {
    pub translation: Vector3<f64>,
    /// Radians in `[0, 2π)`.
    pub yaw: f64,
}

pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = yaw.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

impl RigidPlacement {
    pub fn new(translation: Vector3<f64>, yaw: f64) -> Self {
        RigidPlacement {
            translation,
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn identity() -> Self {
        RigidPlacement::new(Vector3::zeros(), 0.0)
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        yaw_rotation(self.yaw)
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation() * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation().inverse();
        RigidPlacement::new(-(inv * self.translation), -self.yaw)
    }

    pub fn is_valid(&self) -> bool {
        self.translation.iter().all(|c| c.is_finite()) && (0.0..TAU).contains(&self.yaw)
    }
}

pub fn transform_frames(frames: &[Frame], placement: &RigidPlacement) -> Vec<Frame> {
    let r = placement.rotation();
    frames
        .iter()
        .map(|f| f.iter().map(|p| r * p + placement.translation).collect())
        .collect()
}

/// Every frame of `clip` moved by `placement`; local poses are untouched.
pub fn apply_placement(clip: &MotionClip, placement: &RigidPlacement) -> Vec<Frame> {
    transform_frames(&clip.frames_f64(), placement)
}

/// One frame's vertices together with the clip's named regions.
#[derive(Debug, Clone, Copy)]
pub struct BodyFrame<'a> {
    pub vertices: &'a [Point3<f64>],
    pub regions: &'a BTreeMap<String, Vec<u32>>,
}

impl<'a> BodyFrame<'a> {
    pub fn new(vertices: &'a [Point3<f64>], regions: &'a BTreeMap<String, Vec<u32>>) -> Self {
        BodyFrame { vertices, regions }
    }

    pub fn region(&self, name: &str) -> Result<Vec<Point3<f64>>> {
        let indices = self
            .regions
            .get(name)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| Error::MissingRegion(name.to_string()))?;
        indices
            .iter()
            .map(|&i| {
                self.vertices.get(i as usize).copied().ok_or(Error::IndexOutOfRange {
                    index: i as usize,
                    len: self.vertices.len(),
                })
            })
            .collect()
    }
}

pub fn region_centroid(frame: &BodyFrame<'_>, region: &str) -> Result<Point3<f64>> {
    let pts = frame.region(region)?;
    Ok(centroid(&pts).expect("region is nonempty"))
}

/// Fixed marker subset per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSequence {
    pub frames: Vec<Vec<Point3<f64>>>,
}

impl MarkerSequence {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn marker_count(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

pub fn extract_markers(frames: &[Frame], marker_indices: &[u32]) -> Result<MarkerSequence> {
    if marker_indices.is_empty() {
        return Err(Error::InvalidInput("marker index set is empty".into()));
    }
    let frames = frames
        .iter()
        .map(|f| {
            marker_indices
                .iter()
                .map(|&i| {
                    f.get(i as usize).copied().ok_or(Error::IndexOutOfRange {
                        index: i as usize,
                        len: f.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarkerSequence { frames })
}

/// Default marker set: at most `max_markers` vertices, evenly strided by index.
pub fn default_marker_indices(vertex_count: usize, max_markers: usize) -> Vec<u32> {
    if vertex_count == 0 || max_markers == 0 {
        return Vec::new();
    }
    let k = vertex_count.min(max_markers);
    (0..k).map(|j| (j * vertex_count / k) as u32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    #[test]
    fn identity_and_half_turn() {
        let frames = vec![vec![Point3::new(1.0, 0.0, 0.0), Point3::new(0.3, -0.2, 1.7)]];
        let same = transform_frames(&frames, &RigidPlacement::identity());
        for (a, b) in same[0].iter().zip(&frames[0]) {
            assert!((a - b).norm() <= 1e-9);
        }
        let turned = transform_frames(&frames, &RigidPlacement::new(Vector3::zeros(), PI));
        assert!((turned[0][0] - Point3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn yaw_is_normalized() {
        assert!((RigidPlacement::new(Vector3::zeros(), -PI / 2.0).yaw - 1.5 * PI).abs() < 1e-12);
        assert_eq!(RigidPlacement::new(Vector3::zeros(), -1e-300).yaw, 0.0);
        assert!((RigidPlacement::new(Vector3::zeros(), 5.0 * PI).yaw - PI).abs() < 1e-12);
    }

    #[test]
    fn region_centroids() {
        let regions = BTreeMap::from([("a".to_string(), vec![0]), ("b".to_string(), vec![0, 1])]);
        let verts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)];
        let frame = BodyFrame::new(&verts, &regions);
        assert_eq!(region_centroid(&frame, "a").unwrap(), Point3::origin());
        assert_eq!(region_centroid(&frame, "b").unwrap(), Point3::new(1.0, 0.0, 0.0));
        assert!(matches!(region_centroid(&frame, "feet"), Err(Error::MissingRegion(_))));
    }

    #[test]
    fn random_region_centroid_matches_mean() {
        let mut rng = rng_from_seed(4);
        let verts: Vec<Point3<f64>> = (0..50).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
        let idx: Vec<u32> = (0..50).filter(|i| i % 3 == 0).collect();
        let regions = BTreeMap::from([("r".to_string(), idx.clone())]);
        let got = region_centroid(&BodyFrame::new(&verts, &regions), "r").unwrap();
        let mut sum = [0.0; 3];
        for &i in &idx {
            for (s, c) in sum.iter_mut().zip(verts[i as usize].iter()) {
                *s += c;
            }
        }
        for (axis, s) in sum.iter().enumerate() {
            assert!((got[axis] - s / idx.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn marker_gather() {
        let frames = vec![vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 3.0)]; 3];
        let all = extract_markers(&frames, &[0, 1]).unwrap();
        assert_eq!(all.frames, frames);
        assert!(extract_markers(&frames, &[]).is_err());
        assert!(matches!(extract_markers(&frames, &[2]), Err(Error::IndexOutOfRange { index: 2, len: 2 })));
        let one = extract_markers(&frames, &[1]).unwrap();
        assert_eq!(one.frames[2], vec![frames[2][1]]);
        assert_eq!(default_marker_indices(10, 4), vec![0, 2, 5, 7]);
        assert_eq!(default_marker_indices(3, 64), vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn placement_is_an_isometry_and_inverts(
            seed in any::<u64>(),
            tx in -10.0f64..10.0, ty in -10.0f64..10.0, tz in -2.0f64..2.0,
            yaw in -10.0f64..10.0,
        ) {
            let mut rng = rng_from_seed(seed);
            let frame: Frame = (0..12).map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0))).collect();
            let p = RigidPlacement::new(Vector3::new(tx, ty, tz), yaw);
            let moved = transform_frames(std::slice::from_ref(&frame), &p);
            for i in 0..frame.len() {
                for j in 0..frame.len() {
                    let before = (frame[i] - frame[j]).norm();
                    let after = (moved[0][i] - moved[0][j]).norm();
                    prop_assert!((before - after).abs() <= 1e-6);
                }
            }
            let back = transform_frames(&moved, &p.inverse());
            for (a, b) in back[0].iter().zip(&frame) {
                prop_assert!((a - b).norm() <= 1e-6);
            }
        }
    }
}
