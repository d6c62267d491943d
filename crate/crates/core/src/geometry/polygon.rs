use super::interval::Box2;
use super::GeometryError;
use crate::scalar::Scalar;

pub type Point2<T> = [T; 2];

/// A strictly convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon<T> {
    vertices: Vec<Point2<T>>,
}

#[inline]
fn cross<T: Scalar>(o: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn signed_area<T: Scalar>(v: &[Point2<T>]) -> T {
    let n = v.len();
    let mut s = T::zero();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        s = s + a[0] * b[1] - b[0] * a[1];
    }
    s * T::half()
}

fn point_segment_distance<T: Scalar>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > T::zero() {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp_to(T::zero(), T::one())
    } else {
        T::zero()
    };
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    (p[0] - qx).hypot(p[1] - qy)
}

impl<T: Scalar> ConvexPolygon<T> {
    /// Accepts either orientation; clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point2<T>>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if signed_area(&vertices) < T::zero() {
            vertices.reverse();
        }
        let n = vertices.len();
        let mut turning = T::zero();
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if cross(a, b, c) <= T::zero() {
                return Err(GeometryError::NotConvex);
            }
            let e1 = (b[1] - a[1]).atan2(b[0] - a[0]);
            let e2 = (c[1] - b[1]).atan2(c[0] - b[0]);
            let mut d = e2 - e1;
            if d < T::zero() {
                d = d + T::TAU();
            }
            turning = turning + d;
        }
        // A self-intersecting star also turns left everywhere but winds more than once.
        if (turning - T::TAU()).abs() > T::lit(1e-6) {
            return Err(GeometryError::NotConvex);
        }
        Ok(Self { vertices })
    }

    /// Rectangle with the given center, half extents and rotation (radians).
    pub fn rectangle(center: Point2<T>, half: [T; 2], angle: T) -> Result<Self, GeometryError> {
        let (s, c) = angle.sin_cos();
        let local = [
            [-half[0], -half[1]],
            [half[0], -half[1]],
            [half[0], half[1]],
            [-half[0], half[1]],
        ];
        Self::new(
            local
                .iter()
                .map(|p| {
                    [
                        center[0] + c * p[0] - s * p[1],
                        center[1] + s * p[0] + c * p[1],
                    ]
                })
                .collect(),
        )
    }

    pub fn from_box(b: &Box2<T>) -> Result<Self, GeometryError> {
        Self::new(b.corners().to_vec())
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    pub fn aabb(&self) -> Box2<T> {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = [lo[0].min(v[0]), lo[1].min(v[1])];
            hi = [hi[0].max(v[0]), hi[1].max(v[1])];
        }
        Box2::new(lo, hi)
    }

    /// Expresses the polygon in the frame of a pose `(x, y, h)`:
    /// `p' = R(-h) (p - (x, y))`. Rigid motions preserve convexity and orientation.
    pub fn to_frame(&self, origin: Point2<T>, heading: T) -> Self {
        let (s, c) = heading.sin_cos();
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|p| {
                    let (dx, dy) = (p[0] - origin[0], p[1] - origin[1]);
                    [c * dx + s * dy, -s * dx + c * dy]
                })
                .collect(),
        }
    }

    /// Inverse of [`ConvexPolygon::to_frame`].
    pub fn from_frame(&self, origin: Point2<T>, heading: T) -> Self {
        let (s, c) = heading.sin_cos();
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|p| {
                    [
                        origin[0] + c * p[0] - s * p[1],
                        origin[1] + s * p[0] + c * p[1],
                    ]
                })
                .collect(),
        }
    }

    /// Closed containment.
    pub fn contains_point(&self, p: Point2<T>) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], p) >= T::zero())
    }

    /// Euclidean distance from `p` to the closed polygon (zero inside).
    pub fn distance_to_point(&self, p: Point2<T>) -> T {
        if self.contains_point(p) {
            return T::zero();
        }
        self.boundary_distance(p)
    }

    fn boundary_distance(&self, p: Point2<T>) -> T {
        let n = self.vertices.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(T::infinity(), T::min)
    }

    /// Separating-axis test between the closed polygon and a closed box.
    /// Touching counts as intersecting.
    pub fn intersects_box(&self, b: &Box2<T>) -> bool {
        // Box axes: compare against the polygon's bounding box.
        if !self.aabb().overlaps(b) {
            return false;
        }
        let corners = b.corners();
        let n = self.vertices.len();
        for i in 0..n {
            let (a, c) = (self.vertices[i], self.vertices[(i + 1) % n]);
            // Outward normal of a counterclockwise edge.
            let axis = [c[1] - a[1], a[0] - c[0]];
            let edge = a[0] * axis[0] + a[1] * axis[1];
            let box_min = corners
                .iter()
                .map(|p| p[0] * axis[0] + p[1] * axis[1])
                .fold(T::infinity(), T::min);
            if box_min > edge {
                return false;
            }
        }
        true
    }

    /// `b ⊆ self`.
    pub fn contains_box(&self, b: &Box2<T>) -> bool {
        b.corners().iter().all(|&c| self.contains_point(c))
    }

    /// Euclidean distance between the closed polygon and a closed box (zero when
    /// they intersect). For disjoint convex sets the minimum is attained between
    /// a vertex of one and the boundary of the other.
    pub fn distance_to_box(&self, b: &Box2<T>) -> T {
        if self.intersects_box(b) {
            return T::zero();
        }
        let from_poly = self
            .vertices
            .iter()
            .map(|&v| Box2::point(v).distance(b))
            .fold(T::infinity(), T::min);
        let from_box = b
            .corners()
            .iter()
            .map(|&c| self.boundary_distance(c))
            .fold(T::infinity(), T::min);
        from_poly.min(from_box)
    }
}

/// Separating-axis intersection test between a closed 2-D box and a convex polygon.
pub fn box_polygon_intersect<T: Scalar>(b: &Box2<T>, poly: &ConvexPolygon<T>) -> bool {
    poly.intersects_box(b)
}

/// Splits a simple polygon (either orientation, possibly concave) into convex
/// pieces. Convex input is returned unchanged; otherwise ear clipping yields
/// triangles.
pub fn decompose_simple_polygon<T: Scalar>(
    vertices: &[Point2<T>],
) -> Result<Vec<ConvexPolygon<T>>, GeometryError> {
    match ConvexPolygon::new(vertices.to_vec()) {
        Ok(p) => return Ok(vec![p]),
        Err(GeometryError::NotConvex) => {}
        Err(e) => return Err(e),
    }
    let mut ring: Vec<Point2<T>> = vertices.to_vec();
    if signed_area(&ring) < T::zero() {
        ring.reverse();
    }
    // Drop collinear vertices; they produce degenerate ears.
    ring = {
        let n = ring.len();
        (0..n)
            .filter(|&i| cross(ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]) != T::zero())
            .map(|i| ring[i])
            .collect()
    };
    let mut pieces = Vec::new();
    while ring.len() > 3 {
        let n = ring.len();
        let ear = (0..n).find(|&i| {
            let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            if cross(a, b, c) <= T::zero() {
                return false;
            }
            ring.iter().enumerate().all(|(j, &p)| {
                j == i
                    || j == (i + n - 1) % n
                    || j == (i + 1) % n
                    || !(cross(a, b, p) >= T::zero()
                        && cross(b, c, p) >= T::zero()
                        && cross(c, a, p) >= T::zero())
            })
        });
        let Some(i) = ear else {
            return Err(GeometryError::NotSimple);
        };
        let n = ring.len();
        pieces.push(ConvexPolygon::new(vec![
            ring[(i + n - 1) % n],
            ring[i],
            ring[(i + 1) % n],
        ])?);
        ring.remove(i);
    }
    pieces.push(ConvexPolygon::new(ring)?);
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_at(cx: f64, cy: f64) -> ConvexPolygon<f64> {
        ConvexPolygon::rectangle([cx, cy], [0.5, 0.5], 0.0).unwrap()
    }

    #[test]
    fn sat_examples() {
        let unit = Box2::new([-0.5, -0.5], [0.5, 0.5]);
        assert!(!box_polygon_intersect(&unit, &unit_square_at(5.0, 5.0)));
        assert!(box_polygon_intersect(&unit, &unit_square_at(0.5, 0.0)));
    }

    #[test]
    fn touching_counts_as_intersection() {
        let b = Box2::new([0.0, 0.0], [1.0, 1.0]);
        let p = ConvexPolygon::new(vec![[1.0, 0.0], [2.0, 0.0], [2.0, 1.0]]).unwrap();
        assert!(p.intersects_box(&b));
        assert_eq!(p.distance_to_box(&b), 0.0);
    }

    #[test]
    fn diagonal_separation_needs_edge_axis() {
        // AABBs overlap but the hypotenuse separates them.
        let tri = ConvexPolygon::new(vec![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let b = Box2::new([0.0, 0.0], [0.4, 0.4]);
        assert!(!tri.intersects_box(&b));
        let d = tri.distance_to_box(&b);
        assert!((d - (1.0 - 0.8) / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_polygons() {
        assert!(matches!(
            ConvexPolygon::<f64>::new(vec![[0.0, 0.0], [1.0, 0.0]]),
            Err(GeometryError::TooFewVertices(2))
        ));
        assert!(ConvexPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        let concave = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [2.0, 2.0], [0.0, 2.0]];
        assert!(matches!(
            ConvexPolygon::new(concave),
            Err(GeometryError::NotConvex)
        ));
        let star: Vec<[f64; 2]> = (0..5)
            .map(|i| {
                let a = std::f64::consts::TAU * (2 * i) as f64 / 5.0;
                [a.cos(), a.sin()]
            })
            .collect();
        assert!(ConvexPolygon::new(star).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let p = ConvexPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(p.contains_point([0.5, 0.5]));
        assert!(!p.contains_point([1.5, 0.5]));
    }

    #[test]
    fn frame_round_trip() {
        let p = ConvexPolygon::<f64>::rectangle([2.0, 1.0], [0.5, 0.2], 0.3).unwrap();
        let q = p.to_frame([1.0, -1.0], 0.7).from_frame([1.0, -1.0], 0.7);
        for (a, b) in p.vertices().iter().zip(q.vertices()) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
        // A point straight ahead of a pose lands on the body x axis.
        let r = ConvexPolygon::rectangle([0.0, 3.0], [0.1, 0.1], 0.0).unwrap();
        let body = r.to_frame([0.0, 0.0], std::f64::consts::FRAC_PI_2);
        assert!(body.contains_point([3.0, 0.0]));
    }

    #[test]
    fn point_distance() {
        let p = unit_square_at(0.0, 0.0);
        assert_eq!(p.distance_to_point([0.1, 0.1]), 0.0);
        assert!((p.distance_to_point([1.5, 0.0]) - 1.0).abs() < 1e-15);
        assert!((p.distance_to_point([1.5, 1.5]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn decomposes_concave_l_shape() {
        let l = [
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [0.0, 2.0],
        ];
        let parts = decompose_simple_polygon(&l).unwrap();
        assert!(parts.len() >= 2);
        let area: f64 = parts.iter().map(|p| signed_area(p.vertices())).sum();
        assert!((area - 3.0).abs() < 1e-12);
        assert!(parts.iter().any(|p| p.contains_point([1.5, 0.5])));
        assert!(parts.iter().all(|p| !p.contains_point([1.5, 1.5])));
    }
}
