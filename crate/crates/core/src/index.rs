//! Static 3-d tree with exact nearest-neighbor, radius and box queries.
//!
//! Construction splits at the median of the widest bounding-box axis down to
//! leaves of at most [`LEAF_SIZE`] points. Points are stored in tree order
//! together with their source index; nearest-neighbor ties resolve to the
//! lowest source index so results match a brute-force scan bit for bit.

use nalgebra::Point3;

use crate::cloud::ScenePointCloud;
use crate::error::{Error, Result};
use crate::geometry::Aabb;

pub const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub distance: f64,
    /// Index into the point list the index was built from.
    pub point_index: usize,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SceneIndex {
    points: Vec<Point3<f64>>,
    source: Vec<usize>,
    nodes: Vec<Node>,
    bbox: Aabb,
}

#[derive(Clone, Copy)]
struct Best {
    d2: f64,
    index: usize,
}

impl Best {
    fn improves(&self, d2: f64, index: usize) -> bool {
        d2 < self.d2 || (d2 == self.d2 && index < self.index)
    }
}

/// Index over every point of `scene`.
pub fn build_index(scene: &ScenePointCloud) -> Result<SceneIndex> {
    SceneIndex::from_points(&scene.positions())
}

impl SceneIndex {
    pub fn from_points(points: &[Point3<f64>]) -> Result<Self> {
        Self::from_subset(points, 0..points.len())
    }

    /// Index over `points[i]` for each `i` in `subset`; results report `i`.
    pub fn from_subset(points: &[Point3<f64>], subset: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut entries: Vec<(Point3<f64>, usize)> = Vec::new();
        for i in subset {
            let p = *points.get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                len: points.len(),
            })?;
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidInput(format!("point {i} is not finite")));
            }
            entries.push((p, i));
        }
        let bbox = Aabb::from_points(entries.iter().map(|(p, _)| p)).ok_or(Error::EmptyScene)?;
        let mut nodes = Vec::new();
        build_node(&mut entries, 0, &mut nodes);
        let (points, source) = entries.into_iter().unzip();
        Ok(SceneIndex {
            points,
            source,
            nodes,
            bbox,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    /// Source indices of every indexed point, in ascending order.
    pub fn source_indices(&self) -> Vec<usize> {
        let mut s = self.source.clone();
        s.sort_unstable();
        s
    }

    pub fn nearest(&self, query: &Point3<f64>) -> Neighbor {
        self.nearest_filtered(query, |_| true)
            .expect("index is nonempty by construction")
    }

    /// Nearest point among those whose source index passes `keep`.
    pub fn nearest_filtered(&self, query: &Point3<f64>, keep: impl Fn(usize) -> bool) -> Option<Neighbor> {
        let mut best = Best {
            d2: f64::INFINITY,
            index: usize::MAX,
        };
        self.search(0, query, &keep, &mut best);
        (best.index != usize::MAX).then(|| Neighbor {
            distance: best.d2.sqrt(),
            point_index: best.index,
        })
    }

    fn search(&self, node: usize, q: &Point3<f64>, keep: &dyn Fn(usize) -> bool, best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let src = self.source[i];
                    let d2 = (self.points[i] - q).norm_squared();
                    if best.improves(d2, src) && keep(src) {
                        *best = Best { d2, index: src };
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, keep, best);
                // equal plane distance can still hide a lower-index tie
                if diff * diff <= best.d2 {
                    self.search(far, q, keep, best);
                }
            }
        }
    }

    /// Minimum nearest-neighbor distance over `queries`. When `floor` is
    /// given the scan stops at the first distance below it, so the result is
    /// then only guaranteed to be `< floor`.
    pub fn min_distance_batch(&self, queries: &[Point3<f64>], floor: Option<f64>) -> f64 {
        let mut min = f64::INFINITY;
        for q in queries {
            let d = self.nearest(q).distance;
            if d < min {
                min = d;
                if floor.is_some_and(|f| min < f) {
                    break;
                }
            }
        }
        min
    }

    /// Source indices within `radius` (inclusive) of `query`, ascending.
    pub fn within_radius(&self, query: &Point3<f64>, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.collect(0, &mut out, &|node_value: f64, axis: usize| {
            let d = query[axis] - node_value;
            (d <= radius, d >= -radius)
        }, &|p: &Point3<f64>| (p - query).norm_squared() <= r2);
        out.sort_unstable();
        out
    }

    /// Source indices of points inside `aabb` (inclusive), ascending.
    pub fn within_aabb(&self, aabb: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect(0, &mut out, &|value: f64, axis: usize| {
            (aabb.min[axis] <= value, aabb.max[axis] >= value)
        }, &|p: &Point3<f64>| aabb.contains(p));
        out.sort_unstable();
        out
    }

    /// `visit(split_value, axis)` says whether the left / right side may hold matches.
    fn collect(
        &self,
        node: usize,
        out: &mut Vec<usize>,
        visit: &dyn Fn(f64, usize) -> (bool, bool),
        accept: &dyn Fn(&Point3<f64>) -> bool,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend((start..end).filter(|&i| accept(&self.points[i])).map(|i| self.source[i]));
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let (go_left, go_right) = visit(value, axis);
                if go_left {
                    self.collect(left, out, visit, accept);
                }
                if go_right {
                    self.collect(right, out, visit, accept);
                }
            }
        }
    }
}

fn build_node(entries: &mut [(Point3<f64>, usize)], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if entries.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + entries.len(),
        });
        return id;
    }
    let bbox = Aabb::from_points(entries.iter().map(|(p, _)| p)).expect("nonempty");
    let extent = bbox.extent();
    let axis = (0..3)
        .reduce(|a, b| if extent[b] > extent[a] { b } else { a })
        .expect("three axes");
    let mid = entries.len() / 2;
    entries.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1)));
    let value = entries[mid].0[axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = entries.split_at_mut(mid);
    let left = build_node(lo, offset, nodes);
    let right = build_node(hi, offset + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_nearest(points: &[Point3<f64>], q: &Point3<f64>) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, p) in points.iter().enumerate() {
            let d2 = (p - q).norm_squared();
            if d2 < best.0 {
                best = (d2, i);
            }
        }
        (best.0.sqrt(), best.1)
    }

    fn random_cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| Point3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..3.0)))
            .collect()
    }

    #[test]
    fn single_point_three_four_five() {
        let idx = SceneIndex::from_points(&[Point3::origin()]).unwrap();
        assert_eq!(idx.len(), 1);
        let n = idx.nearest(&Point3::new(3.0, 4.0, 0.0));
        assert_eq!(n.distance, 5.0);
        assert_eq!(n.point_index, 0);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(SceneIndex::from_points(&[]), Err(Error::EmptyScene)));
    }

    #[test]
    fn large_cloud_bbox_matches_input() {
        let pts = random_cloud(32768, 3);
        let idx = SceneIndex::from_points(&pts).unwrap();
        assert_eq!(idx.len(), 32768);
        let expected = Aabb::from_points(&pts).unwrap();
        assert_eq!(*idx.bbox(), expected);
        assert_eq!(idx.source_indices(), (0..32768).collect::<Vec<_>>());
    }

    #[test]
    fn nearest_matches_brute_force() {
        let pts = random_cloud(1000, 11);
        let idx = SceneIndex::from_points(&pts).unwrap();
        let queries = random_cloud(100, 12);
        for q in &queries {
            let n = idx.nearest(q);
            assert_eq!((n.distance, n.point_index), brute_nearest(&pts, q));
        }
        for (i, p) in pts.iter().enumerate().step_by(97) {
            let n = idx.nearest(p);
            assert_eq!(n.distance, 0.0);
            assert_eq!(n.point_index, i);
        }
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        // duplicated points spread over many leaves
        let mut pts = Vec::new();
        for i in 0..200 {
            pts.push(Point3::new((i % 7) as f64, 0.0, 0.0));
        }
        let idx = SceneIndex::from_points(&pts).unwrap();
        for x in 0..7 {
            let n = idx.nearest(&Point3::new(x as f64, 1.0, 0.0));
            assert_eq!(n.point_index, x);
        }
        // equidistant from points 0 (x=0) and 1 (x=1)
        assert_eq!(idx.nearest(&Point3::new(0.5, 0.0, 0.0)).point_index, 0);
    }

    #[test]
    fn batch_on_sphere_and_early_exit() {
        let idx = SceneIndex::from_points(&[Point3::new(1.0, 1.0, 1.0)]).unwrap();
        let r = 0.25;
        let queries: Vec<Point3<f64>> = (0..24)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 24.0;
                Point3::new(1.0 + r * t.cos(), 1.0 + r * t.sin(), 1.0)
            })
            .collect();
        assert!((idx.min_distance_batch(&queries, None) - r).abs() < 1e-12);
        let pts = random_cloud(500, 5);
        let idx = SceneIndex::from_points(&pts).unwrap();
        assert_eq!(idx.min_distance_batch(&pts[10..20], None), 0.0);
        assert!(idx.min_distance_batch(&random_cloud(50, 6), Some(10.0)) < 10.0);
    }

    #[test]
    fn filtered_and_subset_queries() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(5.0, 0.0, 0.0)];
        let idx = SceneIndex::from_subset(&pts, [1, 2]).unwrap();
        assert_eq!(idx.nearest(&Point3::origin()).point_index, 1);
        let n = idx.nearest_filtered(&Point3::origin(), |i| i != 1).unwrap();
        assert_eq!(n.point_index, 2);
        assert!(idx.nearest_filtered(&Point3::origin(), |_| false).is_none());
    }

    #[test]
    fn radius_and_box_queries_match_scan() {
        let pts = random_cloud(2000, 21);
        let idx = SceneIndex::from_points(&pts).unwrap();
        let q = Point3::new(0.3, -0.2, 1.1);
        let expected: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm() <= 0.6).collect();
        assert_eq!(idx.within_radius(&q, 0.6), expected);
        let aabb = Aabb {
            min: Point3::new(-0.5, -0.5, 0.5),
            max: Point3::new(0.7, 0.2, 2.0),
        };
        let expected: Vec<usize> = (0..pts.len()).filter(|&i| aabb.contains(&pts[i])).collect();
        assert_eq!(idx.within_aabb(&aabb), expected);
    }

    proptest! {
        #[test]
        fn nearest_is_exact(seed in any::<u64>(), n in 1usize..300) {
            let pts = random_cloud(n, seed);
            let idx = SceneIndex::from_points(&pts).unwrap();
            for q in random_cloud(10, seed ^ 0xabcdef) {
                let got = idx.nearest(&q);
                prop_assert_eq!((got.distance, got.point_index), brute_nearest(&pts, &q));
            }
        }
    }
}
