//! Constraint checks and the rejection sampler that places a canonical
//! motion clip into a scene.
//!
//! A placement is accepted only when, on the transformed motion,
//!
//! - no body vertex in any frame comes within `d_collide` of a non-exempt
//!   scene point,
//! - the feet meet the floor on the frames the action's policy designates,
//! - the action's contact requirement holds at its anchor frame.
//!
//! Floor-labeled points never count as collisions. At the anchor frame only,
//! target points within `2·d_contact` of the contact region are exempt too.

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::TAU;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::body::{transform_frames, Frame, RigidPlacement};
use crate::cloud::ScenePointCloud;
use crate::config::ForgeConfig;
use crate::error::{Error, Result};
use crate::geometry::{centroid, xy};
use crate::index::SceneIndex;
use crate::language::{generate_description, is_describable};
use crate::motion::{Action, MotionClip, REGION_FEET, REGION_HIPS, REGION_PELVIS};
use crate::policy::{ActionPolicy, ContactKind};
use crate::record::DatasetRecord;
use crate::scene::{
    detect_floor, extract_objects, sample_floor_targets, sample_surface_points, ClearanceMap, FloorModel,
    ObjectInstance, SurfaceKind,
};
use crate::seed::{derive_stream, rng_from_seed, ForgeRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    /// Minimum allowed body-to-scene distance, meters.
    pub d_collide: f64,
    /// Foot-to-floor tolerance, meters.
    pub d_support: f64,
    /// Contact distance for hips and lying bodies, meters.
    pub d_contact: f64,
    /// Maximum pelvis distance from the target footprint at the end of a walk.
    pub walk_radius: f64,
    /// Horizontal clearance required around a walk's end position.
    pub walk_clearance: f64,
    /// Fraction of body vertices that must project inside the footprint when lying.
    pub lie_containment_min: f64,
    pub max_tries: usize,
    pub seed: u64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            d_collide: 0.02,
            d_support: 0.05,
            d_contact: 0.05,
            walk_radius: 0.5,
            walk_clearance: 0.35,
            lie_containment_min: 0.8,
            max_tries: 200,
            seed: 0,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_collide", self.d_collide),
            ("d_support", self.d_support),
            ("d_contact", self.d_contact),
            ("walk_radius", self.walk_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.walk_clearance.is_finite() && self.walk_clearance >= 0.0) {
            return Err(Error::InvalidInput("walk_clearance must be non-negative".into()));
        }
        if !(self.lie_containment_min > 0.0 && self.lie_containment_min <= 1.0) {
            return Err(Error::InvalidInput("lie_containment_min must lie in (0, 1]".into()));
        }
        if self.max_tries == 0 {
            return Err(Error::InvalidInput("max_tries must be at least 1".into()));
        }
        Ok(())
    }

    /// Height above the top surface at which a lying body is placed.
    pub fn lie_hover(&self) -> f64 {
        0.5 * (self.d_collide + self.d_contact)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub passed: bool,
    /// Smallest body-to-offender distance found; `None` when nothing can collide.
    /// On failure the scan stops at the first violation.
    pub min_clearance: Option<f64>,
    pub worst_penetration: f64,
    pub offending_frame: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub passed: bool,
    /// Largest `|min foot z − z0|` over the checked frames.
    pub max_abs_offset: f64,
    pub frames_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub passed: bool,
    pub kind: ContactKind,
    pub anchor_frame: usize,
    pub measured_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub passed: bool,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// `None` when cheaper checks already failed and collision was skipped.
    pub collision: Option<CollisionReport>,
    pub support: SupportReport,
    pub action_contact: ContactReport,
    pub containment: Option<ContainmentReport>,
}

impl ConstraintReport {
    pub fn passed(&self) -> bool {
        self.cheap_passed() && self.collision.as_ref().is_some_and(|c| c.passed)
    }

    fn cheap_passed(&self) -> bool {
        self.support.passed && self.action_contact.passed && self.containment.as_ref().is_none_or(|c| c.passed)
    }

    fn score(&self) -> usize {
        [
            self.support.passed,
            self.action_contact.passed,
            self.containment.as_ref().is_none_or(|c| c.passed),
            self.collision.as_ref().is_some_and(|c| c.passed),
        ]
        .iter()
        .filter(|&&p| p)
        .count()
    }
}

/// Everything derived once per scene and shared read-only by every
/// alignment in it.
#[derive(Debug)]
pub struct SceneContext {
    pub scene: ScenePointCloud,
    pub objects: Vec<ObjectInstance>,
    pub floor: FloorModel,
    pub floor_class_ids: BTreeSet<u32>,
    /// Index over every non-floor point; `None` when the scene is all floor.
    offenders: Option<SceneIndex>,
    clearance: ClearanceMap,
}

impl SceneContext {
    pub fn build(scene: ScenePointCloud, cfg: &ForgeConfig) -> Result<Self> {
        scene.validate()?;
        let objects = match extract_objects(&scene, &cfg.scene) {
            Ok(set) => set.objects,
            Err(Error::NoObjects { .. }) => Vec::new(),
            Err(e) => return Err(e),
        };
        let floor = detect_floor(&scene, &cfg.scene);
        let floor_class_ids = scene.class_ids_named(&cfg.scene.floor_classes);
        let positions = scene.positions();
        let non_floor: Vec<usize> = (0..scene.len())
            .filter(|&i| !floor_class_ids.contains(&scene.points[i].semantic_class))
            .collect();
        let offenders = if non_floor.is_empty() {
            None
        } else {
            Some(SceneIndex::from_subset(&positions, non_floor)?)
        };
        let clearance = ClearanceMap::new(&scene, &floor, &cfg.scene);
        Ok(SceneContext {
            scene,
            objects,
            floor,
            floor_class_ids,
            offenders,
            clearance,
        })
    }

    pub fn object(&self, instance_id: u32) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.instance_id == instance_id)
    }

    pub fn offenders(&self) -> Option<&SceneIndex> {
        self.offenders.as_ref()
    }

    pub fn clearance(&self) -> &ClearanceMap {
        &self.clearance
    }
}

fn region_points(frame: &[Point3<f64>], indices: &[u32]) -> Vec<Point3<f64>> {
    indices.iter().map(|&i| frame[i as usize]).collect()
}

fn region<'a>(clip: &'a MotionClip, name: &str) -> Result<&'a [u32]> {
    clip.region(name)
}

/// Scene indices of target points within `2·d_contact` of the contact
/// region at the anchor frame. Empty for actions without a contact region.
pub fn contact_exemptions(
    anchor_frame: &[Point3<f64>],
    clip: &MotionClip,
    policy: &ActionPolicy,
    target: &ObjectInstance,
    cfg: &AlignmentConfig,
) -> Result<HashSet<usize>> {
    if policy.contact != ContactKind::HipContact {
        return Ok(HashSet::new());
    }
    let hips = region_points(anchor_frame, region(clip, REGION_HIPS)?);
    let r2 = (2.0 * cfg.d_contact).powi(2);
    Ok(target
        .points
        .iter()
        .zip(&target.point_indices)
        .filter(|(p, _)| hips.iter().any(|h| (*p - h).norm_squared() <= r2))
        .map(|(_, &i)| i)
        .collect())
}

/// Collision check over every frame, anchor frame first. Stops at the first
/// vertex closer than `d_collide` to a non-exempt offender.
pub fn check_collision(
    frames: &[Frame],
    offenders: Option<&SceneIndex>,
    anchor: usize,
    exempt: &HashSet<usize>,
    cfg: &AlignmentConfig,
) -> CollisionReport {
    let Some(index) = offenders else {
        return CollisionReport {
            passed: true,
            min_clearance: None,
            worst_penetration: 0.0,
            offending_frame: None,
        };
    };
    let order = std::iter::once(anchor).chain((0..frames.len()).filter(|&f| f != anchor));
    let mut min = f64::INFINITY;
    for f in order {
        for v in &frames[f] {
            let d = if f == anchor && !exempt.is_empty() {
                index
                    .nearest_filtered(v, |i| !exempt.contains(&i))
                    .map_or(f64::INFINITY, |n| n.distance)
            } else {
                index.nearest(v).distance
            };
            min = min.min(d);
            if d < cfg.d_collide {
                return CollisionReport {
                    passed: false,
                    min_clearance: Some(d),
                    worst_penetration: cfg.d_collide - d,
                    offending_frame: Some(f),
                };
            }
        }
    }
    CollisionReport {
        passed: true,
        min_clearance: min.is_finite().then_some(min),
        worst_penetration: 0.0,
        offending_frame: None,
    }
}

/// Lowest foot vertex against the floor on each of `frame_indices`.
pub fn check_support(
    frames: &[Frame],
    feet: &[u32],
    floor: &FloorModel,
    frame_indices: &[usize],
    cfg: &AlignmentConfig,
) -> Result<SupportReport> {
    if feet.is_empty() {
        return Err(Error::MissingRegion(REGION_FEET.into()));
    }
    let mut worst: f64 = 0.0;
    for &f in frame_indices {
        let low = feet
            .iter()
            .map(|&i| frames[f][i as usize].z)
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((low - floor.z0).abs());
    }
    Ok(SupportReport {
        passed: worst <= cfg.d_support,
        max_abs_offset: worst,
        frames_checked: frame_indices.len(),
    })
}

/// The action-specific contact requirement at the anchor frame, plus the
/// containment requirement for lying.
pub fn check_action_contact(
    frames: &[Frame],
    clip: &MotionClip,
    policy: &ActionPolicy,
    target: &ObjectInstance,
    contact_point: Option<&Point3<f64>>,
    cfg: &AlignmentConfig,
) -> Result<(ContactReport, Option<ContainmentReport>)> {
    let anchor = policy.anchor.index(frames.len());
    let frame = &frames[anchor];
    let report = |measured: f64, limit: f64| ContactReport {
        passed: measured <= limit,
        kind: policy.contact,
        anchor_frame: anchor,
        measured_distance: measured,
    };
    Ok(match policy.contact {
        ContactKind::HipContact => {
            let c = contact_point.ok_or_else(|| Error::InvalidInput("hip contact needs a contact point".into()))?;
            let d = region_points(frame, region(clip, REGION_HIPS)?)
                .iter()
                .map(|h| (h - c).norm())
                .fold(f64::INFINITY, f64::min);
            (report(d, cfg.d_contact), None)
        }
        ContactKind::Reach => {
            let pelvis = centroid(&region_points(frame, region(clip, REGION_PELVIS)?)).expect("nonempty region");
            (report(target.footprint.distance(&xy(&pelvis)), cfg.walk_radius), None)
        }
        ContactKind::LieOnSurface => {
            let inside = frame.iter().filter(|v| target.footprint.contains(&xy(v), 0.0)).count();
            let fraction = inside as f64 / frame.len() as f64;
            let containment = ContainmentReport {
                passed: fraction >= cfg.lie_containment_min,
                fraction,
            };
            let top: Vec<&Point3<f64>> = target.top_points().collect();
            if top.is_empty() {
                return Err(Error::EmptySurface);
            }
            let d = frame
                .iter()
                .flat_map(|v| top.iter().map(move |t| (v - *t).norm_squared()))
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            (report(d, cfg.d_contact), Some(containment))
        }
    })
}

fn min_z(points: &[Point3<f64>]) -> f64 {
    points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min)
}

/// Samples one candidate placement for `target`; returns it with the
/// sampled contact point, if the action has one.
pub fn propose_placement(
    canonical: &[Frame],
    clip: &MotionClip,
    policy: &ActionPolicy,
    target: &ObjectInstance,
    ctx: &SceneContext,
    cfg: &AlignmentConfig,
    rng: &mut ForgeRng,
) -> Result<(RigidPlacement, Option<Point3<f64>>)> {
    let anchor = &canonical[policy.anchor.index(canonical.len())];
    let z0 = ctx.floor.z0;
    match policy.contact {
        ContactKind::HipContact => {
            let s = sample_surface_points(target, 1, SurfaceKind::Top, rng)?[0];
            let yaw = rng.random_range(0.0..TAU);
            let rot = crate::geometry::yaw_rotation(yaw);
            let hips = centroid(&region_points(anchor, region(clip, REGION_HIPS)?)).expect("nonempty region");
            let mut t = s - rot * hips;
            let gap = min_z(&region_points(anchor, region(clip, REGION_FEET)?)) + t.z - z0;
            if gap.abs() > cfg.d_support {
                t.z -= gap;
            }
            Ok((RigidPlacement::new(t, yaw), Some(s)))
        }
        ContactKind::Reach => {
            let p = sample_floor_targets(&ctx.clearance, target, cfg.walk_radius, cfg.walk_clearance, 1, rng)?[0];
            let yaw = rng.random_range(0.0..TAU);
            let rot = crate::geometry::yaw_rotation(yaw);
            let pelvis = rot * centroid(&region_points(anchor, region(clip, REGION_PELVIS)?)).expect("nonempty region");
            let feet = min_z(&region_points(anchor, region(clip, REGION_FEET)?));
            let t = Vector3::new(p.x - pelvis.x, p.y - pelvis.y, z0 - feet);
            Ok((RigidPlacement::new(t, yaw), None))
        }
        ContactKind::LieOnSurface => {
            let s = sample_surface_points(target, 1, SurfaceKind::Top, rng)?[0];
            let yaw = rng.random_range(0.0..TAU);
            let rot = crate::geometry::yaw_rotation(yaw);
            let c = rot * centroid(anchor).expect("nonempty frame");
            let t = Vector3::new(s.x - c.x, s.y - c.y, s.z + cfg.lie_hover() - min_z(anchor));
            Ok((RigidPlacement::new(t, yaw), None))
        }
    }
}

/// Runs every applicable check on placed frames; collision is skipped when
/// a cheaper check already failed.
pub fn evaluate_placement(
    frames: &[Frame],
    clip: &MotionClip,
    policy: &ActionPolicy,
    target: &ObjectInstance,
    contact_point: Option<&Point3<f64>>,
    ctx: &SceneContext,
    cfg: &AlignmentConfig,
) -> Result<ConstraintReport> {
    let (action_contact, containment) = check_action_contact(frames, clip, policy, target, contact_point, cfg)?;
    let support = check_support(
        frames,
        region(clip, REGION_FEET)?,
        &ctx.floor,
        &policy.support_frames.indices(frames.len()),
        cfg,
    )?;
    let mut report = ConstraintReport {
        collision: None,
        support,
        action_contact,
        containment,
    };
    if report.cheap_passed() {
        let anchor = policy.anchor.index(frames.len());
        let exempt = contact_exemptions(&frames[anchor], clip, policy, target, cfg)?;
        report.collision = Some(check_collision(frames, ctx.offenders(), anchor, &exempt, cfg));
    }
    Ok(report)
}

/// Targets the action may interact with and that can be described uniquely.
pub fn eligible_targets<'a>(
    ctx: &'a SceneContext,
    policy: &ActionPolicy,
    cfg: &ForgeConfig,
) -> Vec<&'a ObjectInstance> {
    ctx.objects
        .iter()
        .filter(|o| policy.admits_class(&o.class_name, &cfg.scene.structural_classes))
        .filter(|o| is_describable(o, &ctx.objects, &cfg.language))
        .collect()
}

/// Aligns `clip` into the scene with the seed from `cfg.alignment`.
pub fn align(
    clip: &MotionClip,
    ctx: &SceneContext,
    action: &Action,
    target: Option<u32>,
    cfg: &ForgeConfig,
) -> Result<DatasetRecord> {
    align_with_seed(clip, ctx, action, target, cfg, cfg.alignment.seed)
}

pub fn align_with_seed(
    clip: &MotionClip,
    ctx: &SceneContext,
    action: &Action,
    target: Option<u32>,
    cfg: &ForgeConfig,
    seed: u64,
) -> Result<DatasetRecord> {
    let acfg = &cfg.alignment;
    acfg.validate()?;
    let policy = cfg.policy.policy(action)?;
    let eligible: Vec<&ObjectInstance> = match target {
        Some(id) => {
            let obj = ctx
                .object(id)
                .filter(|o| policy.admits_class(&o.class_name, &cfg.scene.structural_classes))
                .ok_or_else(|| Error::NoInteractableObject(format!("{action}: instance {id} is not interactable")))?;
            if !is_describable(obj, &ctx.objects, &cfg.language) {
                return Err(Error::NoUniqueReference(id));
            }
            vec![obj]
        }
        None => eligible_targets(ctx, &policy, cfg),
    };
    if eligible.is_empty() {
        return Err(Error::NoInteractableObject(format!("{action} in scene {}", ctx.scene.scene_id)));
    }

    let canonical = clip.frames_f64();
    let mut rng = rng_from_seed(derive_stream(seed, "align"));
    let mut best: Option<ConstraintReport> = None;
    for attempt in 0..acfg.max_tries {
        let obj = eligible[rng.random_range(0..eligible.len())];
        let (placement, contact_point) = match propose_placement(&canonical, clip, &policy, obj, ctx, acfg, &mut rng) {
            Ok(p) => p,
            Err(Error::EmptySurface | Error::NoValidTarget { .. }) => continue,
            Err(e) => return Err(e),
        };
        let frames = transform_frames(&canonical, &placement);
        let report = evaluate_placement(&frames, clip, &policy, obj, contact_point.as_ref(), ctx, acfg)?;
        if report.passed() {
            log::debug!("{} / {}: accepted after {} tries", ctx.scene.scene_id, clip.clip_id, attempt + 1);
            let description = generate_description(
                action,
                &policy.verb_phrase,
                obj,
                &ctx.objects,
                &cfg.language,
                &mut rng_from_seed(derive_stream(seed, "describe")),
            )?;
            return Ok(DatasetRecord {
                record_id: format!("{}-{}-{seed:016x}", ctx.scene.scene_id, clip.clip_id),
                scene_id: ctx.scene.scene_id.clone(),
                clip_id: clip.clip_id.clone(),
                action: action.clone(),
                placement,
                target_instance: obj.instance_id,
                target_class: obj.class_name.clone(),
                contact_point,
                description,
                seed,
                verification: report,
                frames,
            });
        }
        if best.as_ref().is_none_or(|b| report.score() > b.score()) {
            best = Some(report);
        }
    }
    Err(Error::ExhaustedTries {
        tries: acfg.max_tries,
        best: best.map(Box::new),
    })
}
