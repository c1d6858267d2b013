//! Synthetic inputs: labeled rooms built from boxes, and a capsule humanoid
//! with canned sit, stand-up, walk and lie-down clips. Used by the tests, the
//! `fixtures` CLI subcommand and the demo corpus.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{Point3, Rotation3, Vector3};
use rand::Rng;

use crate::cloud::{ScenePoint, ScenePointCloud, UNASSIGNED_INSTANCE};
use crate::motion::{Action, MotionClip, REGION_FEET, REGION_HIPS, REGION_PELVIS};
use crate::scene::{extract_objects, ObjectInstance, SceneConfig};
use crate::seed::rng_from_seed;

pub const FLOOR_CLASS: u32 = 1;
pub const WALL_CLASS: u32 = 2;
pub const OBJECT_SPACING: f64 = 0.05;
pub const STRUCTURE_SPACING: f64 = 0.10;
pub const WALL_HEIGHT: f64 = 2.0;

/// Hip height above the floor at the end of the canned sit clip.
pub const SIT_HEIGHT: f64 = 0.45;
/// Bed height the canned lie-down clip is built for.
pub const LIE_SURFACE_HEIGHT: f64 = 0.48;

fn grid(len: f64, spacing: f64) -> Vec<f64> {
    let n = (len / spacing).ceil().max(1.0) as usize;
    (0..=n).map(|i| len * i as f64 / n as f64).collect()
}

/// Points on the faces of an axis-aligned box, bottom face excluded.
pub fn box_surface(min: Point3<f64>, max: Point3<f64>, spacing: f64) -> Vec<Point3<f64>> {
    let e = max - min;
    let (gx, gy, gz) = (grid(e.x, spacing), grid(e.y, spacing), grid(e.z, spacing));
    let mut out = Vec::new();
    for &x in &gx {
        for &y in &gy {
            out.push(Point3::new(min.x + x, min.y + y, max.z));
        }
    }
    for &z in &gz[..gz.len() - 1] {
        for &x in &gx {
            out.push(Point3::new(min.x + x, min.y, min.z + z));
            out.push(Point3::new(min.x + x, max.y, min.z + z));
        }
        for &y in &gy[1..gy.len() - 1] {
            out.push(Point3::new(min.x, min.y + y, min.z + z));
            out.push(Point3::new(max.x, min.y + y, min.z + z));
        }
    }
    out
}

/// A single box-shaped object instance, derived the same way scene objects are.
pub fn box_object(instance_id: u32, class: &str, min: Point3<f64>, max: Point3<f64>) -> ObjectInstance {
    let mut b = RoomBuilder::bare("box");
    b.add_object(class, &[(min, max)]);
    let scene = b.build();
    let mut obj = extract_objects(&scene, &SceneConfig::default())
        .expect("box has enough points")
        .objects
        .remove(0);
    obj.instance_id = instance_id;
    obj
}

/// Incrementally assembled labeled scene.
#[derive(Debug, Clone)]
pub struct RoomBuilder {
    scene_id: String,
    points: Vec<ScenePoint>,
    class_names: BTreeMap<u32, String>,
    next_instance: u32,
}

fn color_of(class: u32) -> [u8; 3] {
    let h = class.wrapping_mul(2654435761);
    [(h >> 24) as u8, (h >> 16) as u8, (h >> 8) as u8]
}

impl RoomBuilder {
    /// Empty scene without floor or walls.
    pub fn bare(scene_id: &str) -> Self {
        RoomBuilder {
            scene_id: scene_id.into(),
            points: Vec::new(),
            class_names: BTreeMap::new(),
            next_instance: 1,
        }
    }

    /// Floor grid over `[0, width] × [0, depth]` at z = 0 and, optionally,
    /// walls along the boundary.
    pub fn new(scene_id: &str, width: f64, depth: f64, walls: bool) -> Self {
        let mut b = RoomBuilder::bare(scene_id);
        b.class_names.insert(FLOOR_CLASS, "floor".into());
        for &x in &grid(width, STRUCTURE_SPACING) {
            for &y in &grid(depth, STRUCTURE_SPACING) {
                b.push(Point3::new(x, y, 0.0), FLOOR_CLASS, UNASSIGNED_INSTANCE);
            }
        }
        if walls {
            b.class_names.insert(WALL_CLASS, "wall".into());
            let zs = grid(WALL_HEIGHT, STRUCTURE_SPACING);
            for &z in &zs[1..] {
                for &x in &grid(width, STRUCTURE_SPACING) {
                    b.push(Point3::new(x, 0.0, z), WALL_CLASS, UNASSIGNED_INSTANCE);
                    b.push(Point3::new(x, depth, z), WALL_CLASS, UNASSIGNED_INSTANCE);
                }
                let ys = grid(depth, STRUCTURE_SPACING);
                for &y in &ys[1..ys.len() - 1] {
                    b.push(Point3::new(0.0, y, z), WALL_CLASS, UNASSIGNED_INSTANCE);
                    b.push(Point3::new(width, y, z), WALL_CLASS, UNASSIGNED_INSTANCE);
                }
            }
        }
        b
    }

    fn push(&mut self, position: Point3<f64>, semantic_class: u32, instance_id: u32) {
        self.points.push(ScenePoint {
            position,
            color: color_of(semantic_class),
            semantic_class,
            instance_id,
        });
    }

    fn class_id(&mut self, class: &str) -> u32 {
        if let Some((&id, _)) = self.class_names.iter().find(|(_, n)| n.as_str() == class) {
            return id;
        }
        let id = self.class_names.keys().next_back().map_or(10, |&k| k.max(9) + 1);
        self.class_names.insert(id, class.into());
        id
    }

    /// Adds one instance made of the union of the given boxes; returns its id.
    pub fn add_object(&mut self, class: &str, boxes: &[(Point3<f64>, Point3<f64>)]) -> u32 {
        let class_id = self.class_id(class);
        let instance = self.next_instance;
        self.next_instance += 1;
        for (min, max) in boxes {
            for p in box_surface(*min, *max, OBJECT_SPACING) {
                self.push(p, class_id, instance);
            }
        }
        instance
    }

    /// Adds a box standing on the floor.
    pub fn add_box(&mut self, class: &str, x: (f64, f64), y: (f64, f64), height: f64) -> u32 {
        self.add_object(class, &[(Point3::new(x.0, y.0, 0.0), Point3::new(x.1, y.1, height))])
    }

    pub fn build(self) -> ScenePointCloud {
        ScenePointCloud::new(self.scene_id, self.points, self.class_names)
            .expect("builder produces valid scenes")
    }
}

/// Furnished room number `index`: a bed, a desk with two chairs, a sofa, a
/// coffee table and an armchair, jittered and mirrored per index.
pub fn synthetic_room(index: usize) -> ScenePointCloud {
    let mut rng = rng_from_seed(0x5eed_0000 + index as u64);
    let (w, d) = (6.0 + rng.random_range(0.0..0.4), 5.0 + rng.random_range(0.0..0.4));
    let mirror = index % 2 == 1;
    let mut j = || rng.random_range(-0.12..0.12);
    let mut b = RoomBuilder::new(&format!("room{index:03}"), w, d, true);
    let mx = |x0: f64, x1: f64| if mirror { (w - x1, w - x0) } else { (x0, x1) };
    let (bx, by) = (j(), j());
    b.add_box("bed", mx(0.6 + bx, 2.7 + bx), (1.2 + by, 2.9 + by), LIE_SURFACE_HEIGHT);
    let dx = j();
    b.add_box("desk", mx(4.2 + dx, 5.4 + dx), (0.3, 0.9), 0.75);
    let (cx, cy) = (j(), j());
    b.add_box("chair", mx(4.5 + cx, 4.95 + cx), (1.25 + cy, 1.7 + cy), 0.44);
    let (cx, cy) = (j(), j());
    b.add_box("chair", mx(2.9 + cx, 3.35 + cx), (3.0 + cy, 3.45 + cy), 0.44);
    let sx = j();
    let (sx0, sx1) = mx(3.6 + sx, 5.6 + sx);
    b.add_object(
        "sofa",
        &[
            (Point3::new(sx0, 3.9, 0.0), Point3::new(sx1, 4.6, 0.42)),
            (Point3::new(sx0, 4.6, 0.0), Point3::new(sx1, 4.8, 0.8)),
        ],
    );
    let tx = j();
    b.add_box("table", mx(4.1 + tx, 5.0 + tx), (2.6, 3.2), 0.41);
    let ax = j();
    b.add_box("armchair", mx(0.7 + ax, 1.4 + ax), (3.7, 4.4), 0.43);
    b.build()
}

pub fn synthetic_rooms(n: usize) -> Vec<ScenePointCloud> {
    (0..n).map(synthetic_room).collect()
}

// ---------------------------------------------------------------------------
// capsule humanoid

const AROUND: usize = 8;
const PELVIS_HEIGHT_STANDING: f64 = 0.95;
const PELVIS_HEIGHT_WALKING: f64 = 0.90;
const HIP_DROP: f64 = 0.12;
const HIP_HALF_WIDTH: f64 = 0.09;
const THIGH: f64 = 0.44;
const SHIN: f64 = 0.44;
const ANKLE_HEIGHT: f64 = 0.08;

/// A body of revolution: profile entries are (offset along axis, radius);
/// the first and last entries are poles (radius 0).
#[derive(Debug, Clone)]
struct Lathe {
    profile: Vec<(f64, f64)>,
}

impl Lathe {
    fn capsule(length: f64, r: f64) -> Lathe {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        Lathe {
            profile: vec![
                (-r, 0.0),
                (-c * r, c * r),
                (0.0, r),
                (0.5 * length, r),
                (length, r),
                (length + c * r, c * r),
                (length + r, 0.0),
            ],
        }
    }

    fn vertex_count(&self) -> usize {
        2 + (self.profile.len() - 2) * AROUND
    }

    fn emit(&self, origin: &Point3<f64>, axis: &Vector3<f64>, out: &mut Vec<Point3<f64>>) {
        let u = axis.normalize();
        let reference = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = u.cross(&reference).normalize();
        let e2 = u.cross(&e1);
        let last = self.profile.len() - 1;
        for (k, &(offset, radius)) in self.profile.iter().enumerate() {
            let center = origin + u * offset;
            if k == 0 || k == last {
                out.push(center);
                continue;
            }
            for j in 0..AROUND {
                let t = TAU * j as f64 / AROUND as f64;
                out.push(center + (e1 * t.cos() + e2 * t.sin()) * radius);
            }
        }
    }

    fn faces(&self, base: u32, out: &mut Vec<[u32; 3]>) {
        let rings = self.profile.len() - 2;
        let n = AROUND as u32;
        let ring = |r: usize, j: u32| base + 1 + r as u32 * n + (j % n);
        let top = base + 1 + rings as u32 * n;
        for j in 0..n {
            out.push([base, ring(0, j + 1), ring(0, j)]);
            for r in 0..rings - 1 {
                out.push([ring(r, j), ring(r, j + 1), ring(r + 1, j + 1)]);
                out.push([ring(r, j), ring(r + 1, j + 1), ring(r + 1, j)]);
            }
            out.push([top, ring(rings - 1, j), ring(rings - 1, j + 1)]);
        }
    }
}

fn torso() -> Lathe {
    Lathe {
        profile: vec![
            (-HIP_DROP, 0.0),
            (-HIP_DROP, 0.085),
            (-0.07, 0.12),
            (0.0, 0.12),
            (0.2, 0.13),
            (0.4, 0.14),
            (0.5, 0.08),
            (0.53, 0.0),
        ],
    }
}

fn head() -> Lathe {
    Lathe {
        profile: vec![(-0.1, 0.0), (-0.07, 0.07), (0.0, 0.1), (0.07, 0.07), (0.1, 0.0)],
    }
}

/// Joint configuration of one pose in the body's own frame.
#[derive(Debug, Clone, Copy)]
struct Pose {
    pelvis: Point3<f64>,
    up: Vector3<f64>,
    forward: Vector3<f64>,
    ankles: [Point3<f64>; 2],
}

fn knee(hip: &Point3<f64>, ankle: &Point3<f64>, forward: &Vector3<f64>) -> Point3<f64> {
    let v = ankle - hip;
    let d = v.norm().min(THIGH + SHIN - 1e-6);
    let w = v.normalize();
    let bend = (forward - w * forward.dot(&w)).normalize();
    let a = 0.5 * d;
    hip + w * a + bend * (THIGH * THIGH - a * a).sqrt()
}

struct Segment {
    lathe: Lathe,
    origin: Point3<f64>,
    axis: Vector3<f64>,
}

fn segments(p: &Pose) -> Vec<Segment> {
    let side = p.up.cross(&p.forward).normalize();
    let neck = p.pelvis + p.up * 0.5;
    let mut segs = vec![
        Segment {
            lathe: torso(),
            origin: p.pelvis,
            axis: p.up,
        },
        Segment {
            lathe: head(),
            origin: neck + p.up * 0.12,
            axis: p.up,
        },
    ];
    let limb = |a: Point3<f64>, b: Point3<f64>, r: f64| Segment {
        lathe: Lathe::capsule((b - a).norm(), r),
        origin: a,
        axis: b - a,
    };
    for (k, s) in [1.0, -1.0].into_iter().enumerate() {
        let hip = p.pelvis + side * (s * HIP_HALF_WIDTH);
        let ankle = p.ankles[k];
        let kn = knee(&hip, &ankle, &p.forward);
        let shoulder = p.pelvis + p.up * 0.42 + side * (s * 0.2);
        let heel = ankle - p.forward * 0.03 - p.up * 0.04;
        segs.push(limb(hip, kn, 0.065));
        segs.push(limb(kn, ankle, 0.05));
        segs.push(limb(heel, heel + p.forward * 0.18, 0.04));
        segs.push(limb(shoulder, shoulder - p.up * 0.45, 0.04));
    }
    segs
}

fn pose_vertices(p: &Pose) -> Vec<Point3<f64>> {
    let mut out = Vec::new();
    for s in segments(p) {
        s.lathe.emit(&s.origin, &s.axis, &mut out);
    }
    out
}

/// Mesh faces and named regions; identical for every pose.
fn topology() -> (Vec<[u32; 3]>, BTreeMap<String, Vec<u32>>) {
    let probe = standing_pose(PELVIS_HEIGHT_STANDING);
    let mut faces = Vec::new();
    let mut base = 0u32;
    let mut ranges = Vec::new();
    for s in segments(&probe) {
        s.lathe.faces(base, &mut faces);
        let n = s.lathe.vertex_count() as u32;
        ranges.push(base..base + n);
        base += n;
    }
    let torso = ranges[0].start;
    let hips: Vec<u32> = (torso..torso + 1 + AROUND as u32).collect();
    let pelvis_ring = torso + 1 + 2 * AROUND as u32;
    let pelvis: Vec<u32> = (pelvis_ring..pelvis_ring + AROUND as u32).collect();
    // per leg: thigh, shin, foot, arm
    let feet: Vec<u32> = [ranges[4].clone(), ranges[8].clone()].into_iter().flatten().collect();
    let regions = BTreeMap::from([
        (REGION_FEET.to_string(), feet),
        (REGION_HIPS.to_string(), hips),
        (REGION_PELVIS.to_string(), pelvis),
    ]);
    (faces, regions)
}

fn standing_pose(pelvis_z: f64) -> Pose {
    Pose {
        pelvis: Point3::new(0.0, 0.0, pelvis_z),
        up: Vector3::z(),
        forward: Vector3::x(),
        ankles: [
            Point3::new(0.0, HIP_HALF_WIDTH, ANKLE_HEIGHT),
            Point3::new(0.0, -HIP_HALF_WIDTH, ANKLE_HEIGHT),
        ],
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

fn make_clip(id: &str, action: Action, frames: Vec<Vec<Point3<f64>>>) -> MotionClip {
    let (faces, regions) = topology();
    let pelvis = &regions[REGION_PELVIS];
    let mut cx = 0.0;
    let mut cy = 0.0;
    for &i in pelvis {
        cx += frames[0][i as usize].x;
        cy += frames[0][i as usize].y;
    }
    let shift = Vector3::new(cx / pelvis.len() as f64, cy / pelvis.len() as f64, 0.0);
    let frames32: Vec<Vec<[f32; 3]>> = frames
        .iter()
        .map(|f| f.iter().map(|p| { let q = p - shift; [q.x as f32, q.y as f32, q.z as f32] }).collect())
        .collect();
    MotionClip::new(id, action, 30.0, frames32, regions, true)
        .and_then(|c| c.with_faces(faces))
        .expect("fixture clips are valid")
}

fn sit_poses(frames: usize, foot_ahead: f64) -> Vec<Pose> {
    let seated = SIT_HEIGHT + HIP_DROP;
    let drop = 0.03;
    (0..frames)
        .map(|f| {
            let (x, z) = if f + 1 == frames {
                (-foot_ahead, seated)
            } else {
                let s = smoothstep(f as f64 / (frames - 2) as f64);
                (-foot_ahead * s, PELVIS_HEIGHT_STANDING - (PELVIS_HEIGHT_STANDING - seated - drop) * s)
            };
            Pose {
                pelvis: Point3::new(x, 0.0, z),
                ..standing_pose(PELVIS_HEIGHT_STANDING)
            }
        })
        .collect()
}

/// Stand in place, then lower onto a seat behind; hips end at [`SIT_HEIGHT`].
pub fn sit_clip(id: &str, frames: usize, foot_ahead: f64) -> MotionClip {
    make_clip(id, Action::Sit, sit_poses(frames, foot_ahead).iter().map(pose_vertices).collect())
}

/// The sit motion reversed: starts seated with the hips at [`SIT_HEIGHT`].
pub fn stand_up_clip(id: &str, frames: usize, foot_ahead: f64) -> MotionClip {
    let mut poses = sit_poses(frames, foot_ahead);
    poses.reverse();
    make_clip(id, Action::StandUp, poses.iter().map(pose_vertices).collect())
}

/// Straight walk along +x over `distance` meters; one foot always planted.
pub fn walk_clip(id: &str, frames: usize, distance: f64) -> MotionClip {
    const CYCLE: f64 = 0.67;
    const STANCE: f64 = 0.4 / CYCLE;
    let poses: Vec<Pose> = (0..frames)
        .map(|f| {
            let px = distance * f as f64 / (frames - 1) as f64;
            let mut pose = standing_pose(PELVIS_HEIGHT_WALKING);
            pose.pelvis.x = px;
            for (k, ankle) in pose.ankles.iter_mut().enumerate() {
                let phase = (px / CYCLE + 0.5 * k as f64).rem_euclid(1.0);
                let (offset, lift) = if phase < STANCE {
                    (0.2 - 0.4 * phase / STANCE, 0.0)
                } else {
                    let q = (phase - STANCE) / (1.0 - STANCE);
                    (-0.2 + 0.4 * q, 0.08 * (PI * q).sin())
                };
                ankle.x = px + offset;
                ankle.z = ANKLE_HEIGHT + lift;
            }
            pose
        })
        .collect();
    make_clip(id, Action::Walk, poses.iter().map(pose_vertices).collect())
}

/// Rise from the floor, move `side` meters sideways, tip onto the back and
/// settle so the lowest vertex is `hover` above a [`LIE_SURFACE_HEIGHT`] surface.
pub fn lie_down_clip(id: &str, frames: usize, side: f64, hover: f64) -> MotionClip {
    let body = pose_vertices(&standing_pose(PELVIS_HEIGHT_STANDING));
    let quarter = frames / 4;
    let rise = 0.65;
    let pivot = crate::geometry::centroid(&body).expect("nonempty") + Vector3::new(0.0, side, rise);
    let lying = |angle: f64| -> Vec<Point3<f64>> {
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
        body.iter()
            .map(|p| pivot + r * (p + Vector3::new(0.0, side, rise) - pivot))
            .collect()
    };
    let flat = lying(-0.5 * PI);
    let flat_low = flat.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let descent = flat_low - (LIE_SURFACE_HEIGHT + hover);
    let frames: Vec<Vec<Point3<f64>>> = (0..frames)
        .map(|f| {
            let phase = f / quarter;
            let u = (f % quarter) as f64 / (quarter - 1).max(1) as f64;
            match phase {
                0 => body.iter().map(|p| p + Vector3::new(0.0, 0.0, rise * smoothstep(u))).collect(),
                1 => body.iter().map(|p| p + Vector3::new(0.0, side * smoothstep(u), rise)).collect(),
                2 => lying(-0.5 * PI * smoothstep(u)),
                _ => {
                    let u = ((f - 3 * quarter) as f64 / (frames - 1 - 3 * quarter).max(1) as f64).min(1.0);
                    flat.iter().map(|p| p - Vector3::new(0.0, 0.0, descent * u)).collect()
                }
            }
        })
        .collect();
    make_clip(id, Action::LieDown, frames)
}

/// Default clip library: two sit, one stand-up, two walk and one lie-down clip.
pub fn standard_clips() -> Vec<MotionClip> {
    let hover = crate::alignment::AlignmentConfig::default().lie_hover();
    vec![
        sit_clip("sit_a", 40, 0.30),
        sit_clip("sit_b", 50, 0.28),
        stand_up_clip("stand_up_a", 40, 0.30),
        walk_clip("walk_a", 45, 1.2),
        walk_clip("walk_b", 36, 0.9),
        lie_down_clip("lie_down_a", 60, 1.25, hover),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::BodySurface;

    #[test]
    fn humanoid_mesh_is_closed_and_regions_sit_right() {
        let clip = sit_clip("s", 40, 0.3);
        let frame = clip.frame(0);
        let faces = clip.faces.clone().unwrap();
        let mut edges: BTreeMap<(u32, u32), i32> = BTreeMap::new();
        for f in &faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += if a < b { 1 } else { -1 };
            }
        }
        assert!(edges.values().all(|&v| v == 0), "every edge used once in each direction");
        let body = BodySurface::from_mesh(frame.clone(), faces).unwrap();
        let chest = Point3::new(0.0, 0.0, PELVIS_HEIGHT_STANDING + 0.3);
        assert!((body.winding_number(&chest).unwrap() - 1.0).abs() < 1e-6);
        let feet_low = clip.region(REGION_FEET).unwrap().iter().map(|&i| frame[i as usize].z).fold(f64::INFINITY, f64::min);
        assert!(feet_low.abs() < 1e-6);
        let last = clip.frame(clip.frame_count() - 1);
        let hips_low = clip.region(REGION_HIPS).unwrap().iter().map(|&i| last[i as usize].z).fold(f64::INFINITY, f64::min);
        assert!((hips_low - SIT_HEIGHT).abs() < 1e-6);
    }

    #[test]
    fn clips_are_canonical_and_in_policy() {
        for clip in standard_clips() {
            assert!(clip.canonical);
            assert!((30..=120).contains(&clip.frame_count()), "{}", clip.clip_id);
        }
    }

    #[test]
    fn room_objects() {
        let room = synthetic_room(0);
        let objects = extract_objects(&room, &SceneConfig::default()).unwrap().objects;
        let classes: Vec<&str> = objects.iter().map(|o| o.class_name.as_str()).collect();
        assert_eq!(classes, ["bed", "desk", "chair", "chair", "sofa", "table", "armchair"]);
        let bed = &objects[0];
        assert!((bed.aabb.max.z - LIE_SURFACE_HEIGHT).abs() < 1e-12);
    }
}
