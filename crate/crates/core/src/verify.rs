//! Independent re-verification of emitted records. Nothing here uses the
//! k-d tree or early exits: every distance is an all-pairs minimum, and the
//! placed motion is recomputed from the source clip with its own rotation
//! code.

use nalgebra::Point3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::Frame;
use crate::cloud::ScenePointCloud;
use crate::config::ForgeConfig;
use crate::error::{Error, Result};
use crate::language::resolve_description;
use crate::motion::{MotionClip, REGION_FEET, REGION_HIPS, REGION_PELVIS};
use crate::policy::ContactKind;
use crate::record::DatasetRecord;
use crate::scene::{detect_floor, extract_objects};
use crate::seed::{derive_stream, rng_from_seed};

/// Pairs sampled per frame for the isometry check.
pub const ISOMETRY_PAIRS_PER_FRAME: usize = 10;
pub const ISOMETRY_TOLERANCE: f64 = 1e-6;
const FRAME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub record_id: String,
    pub passed: bool,
    /// Largest deviation between stored frames and the recomputed placement.
    pub frame_error: f64,
    pub min_clearance: Option<f64>,
    pub support_offset: f64,
    pub contact_distance: f64,
    pub containment_fraction: Option<f64>,
    pub resolved_instance: Option<u32>,
    pub isometry_drift: f64,
    pub issues: Vec<String>,
}

fn min_dist2(p: &Point3<f64>, others: &[Point3<f64>]) -> f64 {
    others.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min)
}

fn place(frame: &[[f32; 3]], yaw: f64, t: &nalgebra::Vector3<f64>) -> Frame {
    let (s, c) = yaw.sin_cos();
    frame
        .iter()
        .map(|v| {
            let (x, y, z) = (v[0] as f64, v[1] as f64, v[2] as f64);
            Point3::new(c * x - s * y + t.x, s * x + c * y + t.y, z + t.z)
        })
        .collect()
}

fn region_of<'a>(frame: &'a [Point3<f64>], clip: &MotionClip, name: &str) -> Result<Vec<&'a Point3<f64>>> {
    Ok(clip.region(name)?.iter().map(|&i| &frame[i as usize]).collect())
}

/// Worst pairwise-distance drift between `placed` and the clip's own frames
/// on a seeded sample of vertex pairs.
pub fn isometry_drift(placed: &[Frame], clip: &MotionClip, seed: u64) -> f64 {
    let mut rng = rng_from_seed(derive_stream(seed, "isometry"));
    let v = clip.vertex_count();
    let mut worst: f64 = 0.0;
    for (f, frame) in placed.iter().enumerate() {
        for _ in 0..ISOMETRY_PAIRS_PER_FRAME {
            let (i, j) = (rng.random_range(0..v), rng.random_range(0..v));
            let src = |k: usize| {
                let p = clip.frames[f][k];
                Point3::new(p[0] as f64, p[1] as f64, p[2] as f64)
            };
            let before = (src(i) - src(j)).norm();
            let after = (frame[i] - frame[j]).norm();
            worst = worst.max((before - after).abs());
        }
    }
    worst
}

/// Re-checks one record against its scene and source clip.
pub fn verify_record(
    record: &DatasetRecord,
    clip: &MotionClip,
    scene: &ScenePointCloud,
    cfg: &ForgeConfig,
) -> Result<VerificationOutcome> {
    let acfg = &cfg.alignment;
    let mut issues = Vec::new();
    if record.scene_id != scene.scene_id || record.clip_id != clip.clip_id {
        return Err(Error::InvalidInput(format!("record {} does not belong to this scene / clip", record.record_id)));
    }
    let policy = cfg.policy.policy(&record.action)?;
    let objects = extract_objects(scene, &cfg.scene)?.objects;
    let target = objects
        .iter()
        .find(|o| o.instance_id == record.target_instance)
        .ok_or_else(|| Error::InvalidInput(format!("target {} not in scene", record.target_instance)))?;
    if !policy.admits_class(&target.class_name, &cfg.scene.structural_classes) {
        issues.push(format!("target class {} is not interactable", target.class_name));
    }

    let frames: Vec<Frame> = clip
        .frames
        .iter()
        .map(|f| place(f, record.placement.yaw, &record.placement.translation))
        .collect();
    let mut frame_error: f64 = 0.0;
    if record.frames.len() != frames.len() || record.vertex_count() != clip.vertex_count() {
        issues.push("stored frames have the wrong shape".into());
        frame_error = f64::INFINITY;
    } else {
        for (a, b) in frames.iter().flatten().zip(record.frames.iter().flatten()) {
            frame_error = frame_error.max((a - b).norm());
        }
    }
    if frame_error > FRAME_TOLERANCE {
        issues.push(format!("stored frames deviate from the placement by {frame_error:e} m"));
    }

    let n = frames.len();
    let anchor = policy.anchor.index(n);
    let floor = detect_floor(scene, &cfg.scene);

    // support
    let feet_low = |f: usize| -> Result<f64> {
        Ok(region_of(&frames[f], clip, REGION_FEET)?.iter().map(|p| p.z).fold(f64::INFINITY, f64::min))
    };
    let mut support_offset: f64 = 0.0;
    for f in policy.support_frames.indices(n) {
        support_offset = support_offset.max((feet_low(f)? - floor.z0).abs());
    }
    if support_offset > acfg.d_support {
        issues.push(format!("feet {support_offset:.4} m off the floor"));
    }

    // action contact
    let anchor_frame = &frames[anchor];
    let mut containment_fraction = None;
    let contact_distance = match policy.contact {
        ContactKind::HipContact => match &record.contact_point {
            Some(c) => region_of(anchor_frame, clip, REGION_HIPS)?
                .iter()
                .map(|h| (*h - c).norm())
                .fold(f64::INFINITY, f64::min),
            None => {
                issues.push("hip contact without a contact point".into());
                f64::INFINITY
            }
        },
        ContactKind::Reach => {
            let pelvis = region_of(anchor_frame, clip, REGION_PELVIS)?;
            let k = pelvis.len() as f64;
            let (sx, sy) = pelvis.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
            target.footprint.distance(&nalgebra::Point2::new(sx / k, sy / k))
        }
        ContactKind::LieOnSurface => {
            let top: Vec<Point3<f64>> = target.top_points().copied().collect();
            let inside = anchor_frame
                .iter()
                .filter(|v| target.footprint.contains(&nalgebra::Point2::new(v.x, v.y), 0.0))
                .count();
            let fraction = inside as f64 / anchor_frame.len() as f64;
            if fraction < acfg.lie_containment_min {
                issues.push(format!("only {:.1}% of the body over the surface", 100.0 * fraction));
            }
            containment_fraction = Some(fraction);
            anchor_frame.iter().map(|v| min_dist2(v, &top)).fold(f64::INFINITY, f64::min).sqrt()
        }
    };
    let contact_limit = if policy.contact == ContactKind::Reach {
        acfg.walk_radius
    } else {
        acfg.d_contact
    };
    if contact_distance > contact_limit {
        issues.push(format!("contact distance {contact_distance:.4} m exceeds {contact_limit} m"));
    }

    // collision, all pairs
    let floor_ids = scene.class_ids_named(&cfg.scene.floor_classes);
    let offenders: Vec<(usize, Point3<f64>)> = scene
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| !floor_ids.contains(&p.semantic_class))
        .map(|(i, p)| (i, p.position))
        .collect();
    let hips: Vec<Point3<f64>> = if policy.contact == ContactKind::HipContact {
        region_of(anchor_frame, clip, REGION_HIPS)?.into_iter().copied().collect()
    } else {
        Vec::new()
    };
    let band2 = (2.0 * acfg.d_contact).powi(2);
    let exempt_at_anchor = |i: usize, p: &Point3<f64>| {
        scene.points[i].instance_id == record.target_instance && hips.iter().any(|h| (p - h).norm_squared() <= band2)
    };
    let anchor_offenders: Vec<Point3<f64>> = offenders
        .iter()
        .filter(|(i, p)| !exempt_at_anchor(*i, p))
        .map(|(_, p)| *p)
        .collect();
    let all_offenders: Vec<Point3<f64>> = offenders.iter().map(|(_, p)| *p).collect();
    let per_frame: Vec<f64> = frames
        .par_iter()
        .enumerate()
        .map(|(f, frame)| {
            let pool = if f == anchor { &anchor_offenders } else { &all_offenders };
            frame.iter().map(|v| min_dist2(v, pool)).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let min_clearance = per_frame
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    let min_clearance = min_clearance.is_finite().then_some(min_clearance);
    if let Some(d) = min_clearance.filter(|&d| d < acfg.d_collide) {
        issues.push(format!("body within {d:.4} m of the scene"));
    }

    // description
    let resolved = resolve_description(&record.description, &objects, &cfg.language);
    let resolved_instance = resolved.as_ref().ok().copied();
    match resolved {
        Ok(id) if id == record.target_instance => {}
        Ok(id) => issues.push(format!("description resolves to instance {id}")),
        Err(e) => issues.push(format!("description does not resolve: {e}")),
    }

    let drift = if frame_error.is_finite() {
        isometry_drift(&record.frames, clip, record.seed)
    } else {
        f64::INFINITY
    };
    if drift.is_nan() || drift > ISOMETRY_TOLERANCE {
        issues.push(format!("isometry drift {drift:e} m"));
    }

    Ok(VerificationOutcome {
        record_id: record.record_id.clone(),
        passed: issues.is_empty(),
        frame_error,
        min_clearance,
        support_offset,
        contact_distance,
        containment_fraction,
        resolved_instance,
        isometry_drift: drift,
        issues,
    })
}
