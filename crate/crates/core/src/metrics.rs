//! Evaluation measures: goal distance, average pairwise distance (APD),
//! collision depth, and MPJPE / MPVPE.
//!
//! Signed distances to a body are negative inside. With a closed triangle
//! mesh the sign comes from the generalized winding number; a bare vertex
//! cloud falls back to PCA normals oriented away from the body centroid.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::SceneContext;
use crate::body::{default_marker_indices, extract_markers, Frame, MarkerSequence};
use crate::config::{ForgeConfig, MetricsConfig};
use crate::error::{Error, Result};
use crate::geometry::{centroid, Aabb};
use crate::index::SceneIndex;
use crate::motion::MotionClip;
use crate::record::DatasetRecord;

/// Minimum vertex count for normal estimation.
pub const MIN_BODY_POINTS: usize = 4;

#[derive(Debug, Clone)]
enum SurfaceModel {
    Mesh(Vec<[u32; 3]>),
    Normals(Vec<Vector3<f64>>),
}

/// One body pose as a surface that can answer signed-distance queries.
#[derive(Debug, Clone)]
pub struct BodySurface {
    points: Vec<Point3<f64>>,
    model: SurfaceModel,
    aabb: Aabb,
}

fn closest_on_triangle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Signed solid angle of triangle `abc` seen from `p`.
fn solid_angle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    let (a, b, c) = (a - p, b - p, c - p);
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let det = a.dot(&b.cross(&c));
    let denom = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
    2.0 * det.atan2(denom)
}

impl BodySurface {
    pub fn from_mesh(points: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if points.len() < MIN_BODY_POINTS || faces.is_empty() {
            return Err(Error::DegenerateBody {
                needed: MIN_BODY_POINTS,
                got: points.len(),
            });
        }
        if let Some(&bad) = faces.iter().flatten().find(|&&i| i as usize >= points.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad as usize,
                len: points.len(),
            });
        }
        let aabb = Aabb::from_points(&points).expect("nonempty");
        Ok(BodySurface {
            points,
            model: SurfaceModel::Mesh(faces),
            aabb,
        })
    }

    /// Point-cloud body; each normal is the least-variance axis of the
    /// `neighbors` nearest vertices, flipped to point away from the centroid.
    pub fn from_points(points: Vec<Point3<f64>>, neighbors: usize) -> Result<Self> {
        if points.len() < MIN_BODY_POINTS {
            return Err(Error::DegenerateBody {
                needed: MIN_BODY_POINTS,
                got: points.len(),
            });
        }
        let k = neighbors.clamp(MIN_BODY_POINTS - 1, points.len() - 1);
        let center = centroid(&points).expect("nonempty");
        let normals = points
            .iter()
            .map(|p| {
                let mut near: Vec<(f64, usize)> =
                    points.iter().enumerate().map(|(j, q)| ((q - p).norm_squared(), j)).collect();
                near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let hood: Vec<Point3<f64>> = near[..=k].iter().map(|&(_, j)| points[j]).collect();
                let mean = centroid(&hood).expect("nonempty");
                let cov = hood.iter().fold(Matrix3::zeros(), |acc, q| {
                    let d = q - mean;
                    acc + d * d.transpose()
                });
                let eig = SymmetricEigen::new(cov);
                let (min_axis, _) = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .expect("3 eigenvalues");
                let n: Vector3<f64> = eig.eigenvectors.column(min_axis).into_owned().normalize();
                if n.dot(&(p - center)) < 0.0 {
                    -n
                } else {
                    n
                }
            })
            .collect();
        let aabb = Aabb::from_points(&points).expect("nonempty");
        Ok(BodySurface {
            points,
            model: SurfaceModel::Normals(normals),
            aabb,
        })
    }

    /// Mesh body when the clip carries faces, otherwise PCA normals.
    pub fn for_frame(frame: &[Point3<f64>], clip: &MotionClip, cfg: &MetricsConfig) -> Result<Self> {
        match &clip.faces {
            Some(faces) => BodySurface::from_mesh(frame.to_vec(), faces.clone()),
            None => BodySurface::from_points(frame.to_vec(), cfg.normal_neighbors),
        }
    }

    pub fn aabb(&self) -> &Aabb {
        &self.aabb
    }

    /// Unsigned distance to the surface.
    pub fn surface_distance(&self, q: &Point3<f64>) -> f64 {
        match &self.model {
            SurfaceModel::Mesh(faces) => faces
                .iter()
                .map(|f| {
                    let [a, b, c] = f.map(|i| &self.points[i as usize]);
                    (closest_on_triangle(q, a, b, c) - q).norm_squared()
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt(),
            SurfaceModel::Normals(_) => self.nearest_point(q).1.sqrt(),
        }
    }

    fn nearest_point(&self, q: &Point3<f64>) -> (usize, f64) {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - q).norm_squared()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    pub fn winding_number(&self, q: &Point3<f64>) -> Option<f64> {
        match &self.model {
            SurfaceModel::Mesh(faces) => Some(
                faces
                    .iter()
                    .map(|f| {
                        let [a, b, c] = f.map(|i| &self.points[i as usize]);
                        solid_angle(q, a, b, c)
                    })
                    .sum::<f64>()
                    / (4.0 * PI),
            ),
            SurfaceModel::Normals(_) => None,
        }
    }

    pub fn contains(&self, q: &Point3<f64>) -> bool {
        if !self.aabb.contains(q) {
            return false;
        }
        match &self.model {
            SurfaceModel::Mesh(_) => self.winding_number(q).expect("mesh") > 0.5,
            SurfaceModel::Normals(normals) => {
                let (i, _) = self.nearest_point(q);
                normals[i].dot(&(q - self.points[i])) < 0.0
            }
        }
    }

    /// Distance to the surface, negative inside.
    pub fn signed_distance(&self, q: &Point3<f64>) -> f64 {
        let d = self.surface_distance(q);
        if self.contains(q) {
            -d
        } else {
            d
        }
    }
}

/// `max(min over object points of the signed distance to the body, 0)`.
pub fn goal_distance(body: &BodySurface, object_points: &[Point3<f64>]) -> Result<f64> {
    if object_points.is_empty() {
        return Err(Error::InvalidInput("object has no points".into()));
    }
    let min = object_points
        .iter()
        .map(|p| body.signed_distance(p))
        .fold(f64::INFINITY, f64::min);
    Ok(min.max(0.0))
}

/// Average pairwise distance between `K ≥ 2` marker sequences of equal shape:
/// `1/(K(K−1)T) · Σ_i Σ_{j≠i} Σ_t ‖x_{i,t} − x_{j,t}‖`.
pub fn apd(samples: &[MarkerSequence]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::ShapeMismatch(format!("APD needs at least 2 samples, got {}", samples.len())));
    }
    let t = samples[0].frame_count();
    let m = samples[0].marker_count();
    if t == 0 {
        return Err(Error::ShapeMismatch("samples have no frames".into()));
    }
    for s in samples {
        if s.frame_count() != t || s.frames.iter().any(|f| f.len() != m) {
            return Err(Error::ShapeMismatch("samples differ in frame or marker count".into()));
        }
    }
    let k = samples.len();
    let mut total = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            for (fi, fj) in samples[i].frames.iter().zip(&samples[j].frames) {
                let d2: f64 = fi.iter().zip(fj).map(|(a, b)| (a - b).norm_squared()).sum();
                total += d2.sqrt();
            }
        }
    }
    // each unordered pair stands for both (i, j) and (j, i)
    Ok(2.0 * total / (k * (k - 1) * t) as f64)
}

/// Mean over frames of the mean per-point distance, in millimeters.
pub fn mean_position_error_mm(pred: &[Frame], gt: &[Frame]) -> Result<f64> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} frames", pred.len(), gt.len())));
    }
    let mut sum = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        if p.is_empty() || p.len() != g.len() {
            return Err(Error::ShapeMismatch(format!("{} vs {} points in a frame", p.len(), g.len())));
        }
        sum += p.iter().zip(g).map(|(a, b)| (a - b).norm()).sum::<f64>() / p.len() as f64;
    }
    Ok(1000.0 * sum / pred.len() as f64)
}

pub fn mpjpe(pred_joints: &[Frame], gt_joints: &[Frame]) -> Result<f64> {
    mean_position_error_mm(pred_joints, gt_joints)
}

pub fn mpvpe(pred_vertices: &[Frame], gt_vertices: &[Frame]) -> Result<f64> {
    mean_position_error_mm(pred_vertices, gt_vertices)
}

/// Points closer than this to the body surface touch it rather than penetrate.
const ON_SURFACE: f64 = 1e-9;

/// Mean depth of scene points that lie inside the body, pooled over all
/// frames; 0 when nothing penetrates. `index` covers the candidate scene
/// points and reports indices into `scene_points`.
pub fn collision_distance(
    frames: &[Frame],
    clip: &MotionClip,
    scene_points: &[Point3<f64>],
    index: Option<&SceneIndex>,
    cfg: &MetricsConfig,
) -> Result<f64> {
    let Some(index) = index else {
        return Ok(0.0);
    };
    let per_frame = frames
        .par_iter()
        .map(|frame| {
            let body = BodySurface::for_frame(frame, clip, cfg)?;
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in index.within_aabb(body.aabb()) {
                let p = &scene_points[i];
                if body.contains(p) {
                    let depth = body.surface_distance(p);
                    if depth > ON_SURFACE {
                        sum += depth;
                        count += 1;
                    }
                }
            }
            Ok((sum, count))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sum, count) = per_frame.iter().fold((0.0, 0), |(s, c), &(fs, fc)| (s + fs, c + fc));
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Goal distance of a placed motion at the action's anchor frame.
pub fn record_goal_distance(
    frames: &[Frame],
    clip: &MotionClip,
    anchor: usize,
    object_points: &[Point3<f64>],
    cfg: &MetricsConfig,
) -> Result<f64> {
    let frame = frames.get(anchor).ok_or(Error::IndexOutOfRange {
        index: anchor,
        len: frames.len(),
    })?;
    goal_distance(&BodySurface::for_frame(frame, clip, cfg)?, object_points)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Aggregate::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Aggregate {
            count: values.len(),
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetrics {
    pub record_id: String,
    pub action: String,
    pub anchor_frame: usize,
    pub goal_distance: f64,
    pub collision_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApdGroup {
    pub clip_id: String,
    pub samples: usize,
    pub apd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<RecordMetrics>,
    pub goal_distance: Aggregate,
    pub collision_distance: Aggregate,
    /// APD over records sharing a source clip, for clips used at least twice.
    pub apd: Vec<ApdGroup>,
    pub apd_mean: Option<f64>,
}

/// Per-record metrics plus corpus aggregates, ordered by record id.
pub fn evaluate_corpus(
    records: &[DatasetRecord],
    scenes: &BTreeMap<String, SceneContext>,
    clips: &BTreeMap<String, MotionClip>,
    cfg: &ForgeConfig,
) -> Result<MetricsReport> {
    let lookup = |r: &DatasetRecord| -> Result<(&SceneContext, &MotionClip)> {
        let ctx = scenes
            .get(&r.scene_id)
            .ok_or_else(|| Error::InvalidInput(format!("scene {} not loaded", r.scene_id)))?;
        let clip = clips
            .get(&r.clip_id)
            .ok_or_else(|| Error::InvalidInput(format!("clip {} not loaded", r.clip_id)))?;
        Ok((ctx, clip))
    };
    let mut per_record = records
        .par_iter()
        .map(|r| {
            let (ctx, clip) = lookup(r)?;
            let policy = cfg.policy.policy(&r.action)?;
            let anchor = policy.anchor.index(r.frames.len());
            let object = ctx
                .object(r.target_instance)
                .ok_or_else(|| Error::InvalidInput(format!("target {} missing from scene {}", r.target_instance, r.scene_id)))?;
            let positions = ctx.scene.positions();
            Ok(RecordMetrics {
                record_id: r.record_id.clone(),
                action: r.action.to_string(),
                anchor_frame: anchor,
                goal_distance: record_goal_distance(&r.frames, clip, anchor, &object.points, &cfg.metrics)?,
                collision_distance: collision_distance(&r.frames, clip, &positions, ctx.offenders(), &cfg.metrics)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    per_record.sort_by(|a, b| a.record_id.cmp(&b.record_id));

    let mut groups: BTreeMap<&str, Vec<&DatasetRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.clip_id).or_default().push(r);
    }
    let mut apd_groups = Vec::new();
    for (clip_id, mut members) in groups {
        if members.len() < 2 {
            continue;
        }
        members.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        let markers = default_marker_indices(members[0].vertex_count(), cfg.metrics.max_markers);
        let samples = members
            .iter()
            .map(|r| extract_markers(&r.frames, &markers))
            .collect::<Result<Vec<_>>>()?;
        apd_groups.push(ApdGroup {
            clip_id: clip_id.to_string(),
            samples: samples.len(),
            apd: apd(&samples)?,
        });
    }
    let goal: Vec<f64> = per_record.iter().map(|m| m.goal_distance).collect();
    let coll: Vec<f64> = per_record.iter().map(|m| m.collision_distance).collect();
    let apd_values: Vec<f64> = apd_groups.iter().map(|g| g.apd).collect();
    Ok(MetricsReport {
        goal_distance: Aggregate::of(&goal),
        collision_distance: Aggregate::of(&coll),
        apd_mean: (!apd_values.is_empty()).then(|| Aggregate::of(&apd_values).mean),
        apd: apd_groups,
        records: per_record,
    })
}
