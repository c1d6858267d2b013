//! Semantic structure derived from a labeled scene: object instances with
//! top surfaces and footprints, the floor height, and the samplers used to
//! propose contact points and walk targets.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{Point2, Point3, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{ScenePointCloud, UNASSIGNED_INSTANCE};
use crate::error::{Error, Result};
use crate::geometry::{centroid, xy, Aabb, ConvexPolygon};
use crate::index::SceneIndex;
use crate::seed::ForgeRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Instances with fewer points are dropped as scan debris.
    pub min_instance_points: usize,
    /// Depth of the band below each cell's local maximum that counts as top surface.
    pub top_band: f64,
    /// xy cell size of the top-surface grid.
    pub top_cell: f64,
    pub floor_classes: Vec<String>,
    /// Classes that are never interaction targets (walls and the like).
    pub structural_classes: Vec<String>,
    /// xy cell size of the fallback floor heightmap.
    pub heightmap_cell: f64,
    /// Points up to this height above the floor obstruct a standing person.
    pub standing_height: f64,
    /// Points within this height above the floor do not obstruct.
    pub floor_band: f64,
    /// A floor target needs a floor-labeled point within this xy distance.
    pub floor_support_radius: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            min_instance_points: 20,
            top_band: 0.05,
            top_cell: 0.10,
            floor_classes: vec!["floor".into()],
            structural_classes: vec!["floor".into(), "wall".into(), "ceiling".into()],
            heightmap_cell: 0.20,
            standing_height: 1.8,
            floor_band: 0.05,
            floor_support_radius: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub instance_id: u32,
    pub semantic_class: u32,
    pub class_name: String,
    /// Indices into the source scene.
    pub point_indices: Vec<usize>,
    pub points: Vec<Point3<f64>>,
    pub centroid: Point3<f64>,
    pub aabb: Aabb,
    /// Indices into `points`.
    pub top_surface: Vec<usize>,
    pub footprint: ConvexPolygon,
    pub orientation: Option<Vector2<f64>>,
}

impl ObjectInstance {
    pub fn top_points(&self) -> impl Iterator<Item = &Point3<f64>> {
        self.top_surface.iter().map(|&i| &self.points[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSet {
    pub objects: Vec<ObjectInstance>,
    /// Instances dropped for having fewer than the minimum point count.
    pub dropped: usize,
}

fn cell_of(p: &Point3<f64>, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}

fn top_surface(points: &[Point3<f64>], cell: f64, band: f64) -> Vec<usize> {
    let mut cell_max: HashMap<(i64, i64), f64> = HashMap::new();
    for p in points {
        let m = cell_max.entry(cell_of(p, cell)).or_insert(f64::NEG_INFINITY);
        *m = m.max(p.z);
    }
    (0..points.len())
        .filter(|&i| points[i].z >= cell_max[&cell_of(&points[i], cell)] - band)
        .collect()
}

/// One instance per nonzero instance id with at least `min_instance_points`
/// points, ordered by instance id.
pub fn extract_objects(scene: &ScenePointCloud, cfg: &SceneConfig) -> Result<ObjectSet> {
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, p) in scene.points.iter().enumerate() {
        if p.instance_id != UNASSIGNED_INSTANCE {
            groups.entry(p.instance_id).or_default().push(i);
        }
    }
    let mut objects = Vec::new();
    let mut dropped = 0;
    for (instance_id, point_indices) in groups {
        if point_indices.len() < cfg.min_instance_points {
            dropped += 1;
            continue;
        }
        let semantic_class = scene.points[point_indices[0]].semantic_class;
        let points: Vec<Point3<f64>> = point_indices.iter().map(|&i| scene.points[i].position).collect();
        objects.push(ObjectInstance {
            instance_id,
            semantic_class,
            class_name: scene.class_name(semantic_class).unwrap_or("unknown").to_string(),
            centroid: centroid(&points).expect("nonempty"),
            aabb: Aabb::from_points(&points).expect("nonempty"),
            top_surface: top_surface(&points, cfg.top_cell, cfg.top_band),
            footprint: ConvexPolygon::hull(points.iter().map(xy)),
            orientation: scene.orientations.get(&instance_id).map(|d| d.normalize()),
            point_indices,
            points,
        });
    }
    if dropped > 0 {
        log::warn!("scene {}: dropped {dropped} instance(s) below {} points", scene.scene_id, cfg.min_instance_points);
    }
    if objects.is_empty() {
        return Err(Error::NoObjects {
            min_points: cfg.min_instance_points,
        });
    }
    Ok(ObjectSet { objects, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorSource {
    SemanticLabel,
    HeightHistogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorModel {
    pub z0: f64,
    pub source: FloorSource,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median z of floor-labeled points; without floor labels, the modal 1 cm
/// bin of per-cell 1st-percentile heights.
pub fn detect_floor(scene: &ScenePointCloud, cfg: &SceneConfig) -> FloorModel {
    let floor_ids = scene.class_ids_named(&cfg.floor_classes);
    let mut zs: Vec<f64> = scene
        .points
        .iter()
        .filter(|p| floor_ids.contains(&p.semantic_class))
        .map(|p| p.position.z)
        .collect();
    if !zs.is_empty() {
        return FloorModel {
            z0: median(&mut zs),
            source: FloorSource::SemanticLabel,
        };
    }

    let mut cells: BTreeMap<(i64, i64), Vec<f64>> = BTreeMap::new();
    for p in &scene.points {
        cells.entry(cell_of(&p.position, cfg.heightmap_cell)).or_default().push(p.position.z);
    }
    let lows: Vec<f64> = cells
        .into_values()
        .map(|mut z| {
            z.sort_by(f64::total_cmp);
            // nearest-rank 1st percentile
            let rank = ((0.01 * z.len() as f64).ceil() as usize).max(1);
            z[rank - 1]
        })
        .collect();
    const BIN: f64 = 0.01;
    let mut bins: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for &z in &lows {
        bins.entry((z / BIN).floor() as i64).or_default().push(z);
    }
    let mode = bins
        .values_mut()
        .reduce(|best, b| if b.len() > best.len() { b } else { best })
        .expect("scene is nonempty");
    FloorModel {
        z0: median(mode),
        source: FloorSource::HeightHistogram,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Top,
    All,
}

/// `n` points drawn uniformly with replacement from the object's top surface
/// (or all of its points).
pub fn sample_surface_points(
    object: &ObjectInstance,
    n: usize,
    kind: SurfaceKind,
    rng: &mut ForgeRng,
) -> Result<Vec<Point3<f64>>> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let pool: Vec<&Point3<f64>> = match kind {
        SurfaceKind::Top => object.top_points().collect(),
        SurfaceKind::All => object.points.iter().collect(),
    };
    if pool.is_empty() {
        return Err(Error::EmptySurface);
    }
    Ok((0..n).map(|_| *pool[rng.random_range(0..pool.len())]).collect())
}

/// Free-space lookup for standing positions: obstacle points (non-floor,
/// between `floor_band` and `standing_height` above the floor) and floor
/// points, both flattened to the floor plane.
#[derive(Debug, Clone)]
pub struct ClearanceMap {
    obstacles: Option<SceneIndex>,
    floor: Option<SceneIndex>,
    floor_support_radius: f64,
}

fn flattened(scene: &ScenePointCloud, keep: impl Fn(usize) -> bool) -> Option<SceneIndex> {
    let flat: Vec<Point3<f64>> = scene
        .points
        .iter()
        .map(|p| Point3::new(p.position.x, p.position.y, 0.0))
        .collect();
    let subset: Vec<usize> = (0..flat.len()).filter(|&i| keep(i)).collect();
    if subset.is_empty() {
        return None;
    }
    Some(SceneIndex::from_subset(&flat, subset).expect("finite points"))
}

impl ClearanceMap {
    pub fn new(scene: &ScenePointCloud, floor: &FloorModel, cfg: &SceneConfig) -> Self {
        let floor_ids: BTreeSet<u32> = scene.class_ids_named(&cfg.floor_classes);
        let lo = floor.z0 + cfg.floor_band;
        let hi = floor.z0 + cfg.standing_height;
        let obstacles = flattened(scene, |i| {
            let p = &scene.points[i];
            !floor_ids.contains(&p.semantic_class) && p.position.z > lo && p.position.z <= hi
        });
        let floor_index = flattened(scene, |i| floor_ids.contains(&scene.points[i].semantic_class));
        ClearanceMap {
            obstacles,
            floor: floor_index,
            floor_support_radius: cfg.floor_support_radius,
        }
    }

    /// Horizontal distance to the nearest obstacle (infinite when there are none).
    pub fn clearance(&self, p: &Point2<f64>) -> f64 {
        self.obstacles
            .as_ref()
            .map_or(f64::INFINITY, |idx| idx.nearest(&Point3::new(p.x, p.y, 0.0)).distance)
    }

    /// Whether `p` lies over labeled floor. Scenes without floor labels accept everything.
    pub fn on_floor(&self, p: &Point2<f64>) -> bool {
        self.floor.as_ref().is_none_or(|idx| {
            idx.nearest(&Point3::new(p.x, p.y, 0.0)).distance <= self.floor_support_radius
        })
    }
}

const FLOOR_TARGET_TRIES_PER_SAMPLE: usize = 2000;

/// `n` floor positions within `radius` of the object's footprint with at
/// least `clearance_min` horizontal clearance from every obstacle.
pub fn sample_floor_targets(
    clearance: &ClearanceMap,
    object: &ObjectInstance,
    radius: f64,
    clearance_min: f64,
    n: usize,
    rng: &mut ForgeRng,
) -> Result<Vec<Point2<f64>>> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidInput(format!("walk radius must be positive, got {radius}")));
    }
    let (lo, hi) = (object.aabb.min, object.aabb.max);
    let (x0, x1) = (lo.x - radius, hi.x + radius);
    let (y0, y1) = (lo.y - radius, hi.y + radius);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n.max(1) * FLOOR_TARGET_TRIES_PER_SAMPLE {
        if out.len() == n {
            break;
        }
        let p = Point2::new(rng.random_range(x0..=x1), rng.random_range(y0..=y1));
        if object.footprint.distance(&p) <= radius
            && clearance.clearance(&p) >= clearance_min
            && clearance.on_floor(&p)
        {
            out.push(p);
        }
    }
    if out.len() < n {
        return Err(Error::NoValidTarget {
            instance_id: object.instance_id,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::ScenePoint;
    use crate::seed::rng_from_seed;

    fn pt(x: f64, y: f64, z: f64, class: u32, instance: u32) -> ScenePoint {
        ScenePoint {
            position: Point3::new(x, y, z),
            color: [128, 128, 128],
            semantic_class: class,
            instance_id: instance,
        }
    }

    fn names() -> BTreeMap<u32, String> {
        BTreeMap::from([(1, "floor".into()), (2, "chair".into()), (3, "wall".into()), (4, "box".into())])
    }

    #[test]
    fn floor_median_of_labeled_points() {
        let scene = ScenePointCloud::new(
            "s",
            vec![pt(0.0, 0.0, 0.0, 1, 0), pt(1.0, 0.0, 0.0, 1, 0), pt(2.0, 0.0, 0.04, 1, 0), pt(0.0, 0.0, 1.0, 2, 5)],
            names(),
        )
        .unwrap();
        let floor = detect_floor(&scene, &SceneConfig::default());
        assert_eq!(floor.z0, 0.0);
        assert_eq!(floor.source, FloorSource::SemanticLabel);
    }

    #[test]
    fn labeled_plane_height() {
        let pts = (0..50).map(|i| pt(i as f64 * 0.1, 0.0, 0.02, 1, 0)).collect();
        let floor = detect_floor(&ScenePointCloud::new("s", pts, names()).unwrap(), &SceneConfig::default());
        assert_eq!(floor.z0, 0.02);
    }

    #[test]
    fn small_instances_are_dropped() {
        let mut pts: Vec<ScenePoint> = (0..500).map(|i| pt((i % 20) as f64 * 0.02, (i / 20) as f64 * 0.02, 0.45, 2, 7)).collect();
        pts.extend((0..3).map(|i| pt(3.0 + i as f64, 0.0, 0.0, 4, 8)));
        let scene = ScenePointCloud::new("s", pts, names()).unwrap();
        let set = extract_objects(&scene, &SceneConfig::default()).unwrap();
        assert_eq!(set.objects.len(), 1);
        assert_eq!(set.dropped, 1);
        assert_eq!(set.objects[0].class_name, "chair");
        assert_eq!(set.objects[0].instance_id, 7);
    }

    #[test]
    fn no_objects_error() {
        let scene = ScenePointCloud::new("s", vec![pt(0.0, 0.0, 0.0, 1, 0)], names()).unwrap();
        assert!(matches!(extract_objects(&scene, &SceneConfig::default()), Err(Error::NoObjects { .. })));
    }

    #[test]
    fn top_surface_keeps_upper_band() {
        // a 30x30 cm column of points at heights 0, 0.1, ..., 0.5
        let mut pts = Vec::new();
        for ix in 0..4 {
            for iy in 0..4 {
                for iz in 0..6 {
                    pts.push(pt(ix as f64 * 0.1 + 0.05, iy as f64 * 0.1 + 0.05, iz as f64 * 0.1, 4, 1));
                }
            }
        }
        let scene = ScenePointCloud::new("s", pts, names()).unwrap();
        let obj = &extract_objects(&scene, &SceneConfig::default()).unwrap().objects[0];
        assert_eq!(obj.top_surface.len(), 16);
        assert!(obj.top_points().all(|p| (p.z - 0.5).abs() < 1e-12));
        for p in &obj.points {
            assert!(obj.footprint.contains(&xy(p), 1e-9));
            assert!(obj.aabb.contains(p));
        }
        assert!(obj.aabb.contains(&obj.centroid));
    }

    #[test]
    fn surface_sampling_single_point_and_determinism() {
        let pts: Vec<ScenePoint> = (0..25).map(|i| pt(i as f64 * 0.01, 0.0, if i == 0 { 1.0 } else { 0.0 }, 4, 1)).collect();
        let scene = ScenePointCloud::new("s", pts, names()).unwrap();
        let cfg = SceneConfig {
            top_cell: 10.0,
            ..SceneConfig::default()
        };
        let obj = &extract_objects(&scene, &cfg).unwrap().objects[0];
        assert_eq!(obj.top_surface.len(), 1);
        let got = sample_surface_points(obj, 1, SurfaceKind::Top, &mut rng_from_seed(1)).unwrap();
        assert_eq!(got, vec![Point3::new(0.0, 0.0, 1.0)]);
        let a = sample_surface_points(obj, 20, SurfaceKind::All, &mut rng_from_seed(9)).unwrap();
        let b = sample_surface_points(obj, 20, SurfaceKind::All, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
        assert!(sample_surface_points(obj, 0, SurfaceKind::All, &mut rng_from_seed(9)).is_err());
    }
}
