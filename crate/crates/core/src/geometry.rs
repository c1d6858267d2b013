//! Small geometric primitives: axis-aligned boxes, 2D convex polygons
//! (object footprints) and yaw rotations.

use nalgebra::{Point2, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut aabb = Aabb {
            min: first,
            max: first,
        };
        for p in iter {
            aabb.grow(p);
        }
        Some(aabb)
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        for axis in 0..3 {
            self.min[axis] = self.min[axis].min(p[axis]);
            self.max[axis] = self.max[axis].max(p[axis]);
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|axis| p[axis] >= self.min[axis] && p[axis] <= self.max[axis])
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn expanded(&self, margin: f64) -> Self {
        let m = Vector3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Point3<f64>) -> f64 {
        (0..3)
            .map(|axis| {
                let d = (self.min[axis] - p[axis]).max(p[axis] - self.max[axis]).max(0.0);
                d * d
            })
            .sum()
    }
}

fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segment_distance(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Counter-clockwise convex polygon without repeated or collinear vertices.
/// Hulls of degenerate input collapse to a single point or a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<Point2<f64>>,
}

impl ConvexPolygon {
    /// Convex hull by Andrew's monotone chain.
    pub fn hull(points: impl IntoIterator<Item = Point2<f64>>) -> Self {
        let mut pts: Vec<Point2<f64>> = points.into_iter().collect();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return ConvexPolygon { vertices: pts };
        }
        let mut lower: Vec<Point2<f64>> = Vec::new();
        for p in &pts {
            while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<Point2<f64>> = Vec::new();
        for p in pts.iter().rev() {
            while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        ConvexPolygon { vertices: lower }
    }

    pub fn rectangle(min: Point2<f64>, max: Point2<f64>) -> Self {
        ConvexPolygon {
            vertices: vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let twice: f64 = (0..n)
            .map(|i| {
                let a = &self.vertices[i];
                let b = &self.vertices[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum();
        0.5 * twice.abs()
    }

    fn strictly_inside_or_on(&self, p: &Point2<f64>) -> bool {
        let n = self.vertices.len();
        n >= 3 && (0..n).all(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n], p) >= 0.0)
    }

    /// Distance from `p` to the polygon region; 0 inside or on the boundary.
    pub fn distance(&self, p: &Point2<f64>) -> f64 {
        match self.vertices.len() {
            0 => f64::INFINITY,
            1 => (p - self.vertices[0]).norm(),
            2 => segment_distance(p, &self.vertices[0], &self.vertices[1]),
            n => {
                if self.strictly_inside_or_on(p) {
                    return 0.0;
                }
                (0..n)
                    .map(|i| segment_distance(p, &self.vertices[i], &self.vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Inclusive containment with an absolute tolerance in meters.
    pub fn contains(&self, p: &Point2<f64>, tolerance: f64) -> bool {
        self.distance(p) <= tolerance
    }

    /// Intersection of two convex polygons (Sutherland–Hodgman).
    pub fn intersection(&self, other: &ConvexPolygon) -> ConvexPolygon {
        if self.vertices.len() < 3 || other.vertices.len() < 3 {
            return ConvexPolygon { vertices: Vec::new() };
        }
        let mut output = self.vertices.clone();
        let m = other.vertices.len();
        for i in 0..m {
            if output.is_empty() {
                break;
            }
            let a = other.vertices[i];
            let b = other.vertices[(i + 1) % m];
            let input = std::mem::take(&mut output);
            for j in 0..input.len() {
                let cur = input[j];
                let prev = input[(j + input.len() - 1) % input.len()];
                let cur_in = cross(&a, &b, &cur) >= 0.0;
                let prev_in = cross(&a, &b, &prev) >= 0.0;
                if cur_in {
                    if !prev_in {
                        output.push(line_intersection(&prev, &cur, &a, &b));
                    }
                    output.push(cur);
                } else if prev_in {
                    output.push(line_intersection(&prev, &cur, &a, &b));
                }
            }
        }
        ConvexPolygon::hull(output)
    }
}

fn line_intersection(p: &Point2<f64>, q: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> Point2<f64> {
    let cp = cross(a, b, p);
    let cq = cross(a, b, q);
    let denom = cp - cq;
    if denom == 0.0 {
        return *q;
    }
    let t = cp / denom;
    p + (q - p) * t
}

/// Rotation about the gravity (z) axis.
pub fn yaw_rotation(yaw: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
}

pub fn xy(p: &Point3<f64>) -> Point2<f64> {
    Point2::new(p.x, p.y)
}

pub fn centroid<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Option<Point3<f64>> {
    let mut sum = Vector3::zeros();
    let mut n = 0usize;
    for p in points {
        sum += p.coords;
        n += 1;
    }
    (n > 0).then(|| Point3::from(sum / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.5, 0.0),
        ];
        let hull = ConvexPolygon::hull(pts);
        assert_eq!(hull.vertices.len(), 4);
        assert!((hull.area() - 1.0).abs() < 1e-12);
        assert_eq!(hull.distance(&Point2::new(0.5, 0.5)), 0.0);
        assert!((hull.distance(&Point2::new(2.0, 0.5)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_hulls() {
        let one = ConvexPolygon::hull(vec![Point2::new(1.0, 2.0); 3]);
        assert_eq!(one.vertices.len(), 1);
        assert!((one.distance(&Point2::new(4.0, 6.0)) - 5.0).abs() < 1e-12);
        let seg = ConvexPolygon::hull(vec![Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(1.0, 0.0)]);
        assert_eq!(seg.vertices.len(), 2);
        assert!((seg.distance(&Point2::new(1.0, 1.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_squares_intersection_area() {
        let a = ConvexPolygon::rectangle(Point2::new(0.0, 0.0), Point2::new(2.0, 2.0));
        let b = ConvexPolygon::rectangle(Point2::new(1.0, 1.0), Point2::new(3.0, 3.0));
        assert!((a.intersection(&b).area() - 1.0).abs() < 1e-12);
        let c = ConvexPolygon::rectangle(Point2::new(5.0, 5.0), Point2::new(6.0, 6.0));
        assert_eq!(a.intersection(&c).area(), 0.0);
    }

    #[test]
    fn yaw_half_turn() {
        let p = yaw_rotation(std::f64::consts::PI) * Point3::new(1.0, 0.0, 0.0);
        assert!((p - Point3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn hull_contains_its_inputs(raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..60)) {
            let pts: Vec<Point2<f64>> = raw.iter().map(|&(x, y)| Point2::new(x, y)).collect();
            let hull = ConvexPolygon::hull(pts.clone());
            for p in &pts {
                prop_assert!(hull.contains(p, 1e-9));
            }
        }
    }
}
