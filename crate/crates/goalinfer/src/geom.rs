//! 2D geometry kernel over the unit square: point validity, line of sight,
//! nearest-vertex queries, and path lengths.
//!
//! Collision checking is conservative: points on an obstacle boundary count
//! as inside, and segments touching an obstacle vertex count as blocked.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for boundary and collinearity tests.
pub const GEOM_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has a degenerate (zero-length) edge at vertex {0}")]
    DegenerateEdge(usize),
    #[error("polygon is self-intersecting")]
    SelfIntersecting,
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("path needs at least 2 points, got {0}")]
    TooFewPathPoints(usize),
    #[error("nearest_vertex requires a non-empty vertex set")]
    EmptyVertexSet,
}

/// A location in the unit-square world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(&self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }
}

/// A simple (non-self-intersecting) polygon with at least 3 vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeomError> {
        if vertices.len() < 3 {
            return Err(GeomError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        let n = vertices.len();
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i].dist(vertices[j]) <= GEOM_EPS {
                return Err(GeomError::DegenerateEdge(i));
            }
        }
        // Non-adjacent edge pairs must not intersect. O(n^2) is fine at the
        // map sizes this kernel is built for.
        for i in 0..n {
            let (a1, a2) = (vertices[i], vertices[(i + 1) % n]);
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (b1, b2) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return Err(GeomError::SelfIntersecting);
                }
            }
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// True if `p` is inside the polygon or on its boundary.
    pub fn contains(&self, p: Point) -> bool {
        for (a, b) in self.edges() {
            if point_segment_dist(p, a, b) <= GEOM_EPS {
                return true;
            }
        }
        // Even-odd ray casting; boundary cases are already handled above.
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = GeomError;
    fn try_from(v: Vec<Point>) -> Result<Self, Self::Error> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

/// Set of polygonal obstacles over the unit square. Obstacles may overlap.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldMap {
    obstacles: Vec<Polygon>,
}

impl WorldMap {
    pub fn new(obstacles: Vec<Polygon>) -> Self {
        WorldMap { obstacles }
    }

    pub fn empty() -> Self {
        WorldMap { obstacles: Vec::new() }
    }

    pub fn obstacles(&self) -> &[Polygon] {
        &self.obstacles
    }

    pub fn push(&mut self, obstacle: Polygon) {
        self.obstacles.push(obstacle);
    }
}

/// An ordered point sequence from start to goal (at least 2 points).
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    points: Vec<Point>,
}

impl Path {
    pub fn new(points: Vec<Point>) -> Result<Self, GeomError> {
        if points.len() < 2 {
            return Err(GeomError::TooFewPathPoints(points.len()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        Ok(Path { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn start(&self) -> Point {
        self.points[0]
    }

    pub fn goal(&self) -> Point {
        *self.points.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// True iff `a` lies in the world and strictly outside every obstacle.
/// Obstacle boundaries count as inside.
pub fn valid_state(m: &WorldMap, a: Point) -> bool {
    a.in_unit_square() && !m.obstacles.iter().any(|o| o.contains(a))
}

/// True iff the segment b-c crosses no obstacle edge and neither endpoint is
/// inside an obstacle. Touching an obstacle vertex counts as blocked.
pub fn clear_line(m: &WorldMap, b: Point, c: Point) -> bool {
    if !valid_state(m, b) || !valid_state(m, c) {
        return false;
    }
    for obstacle in &m.obstacles {
        for (e1, e2) in obstacle.edges() {
            if segments_intersect(b, c, e1, e2) {
                return false;
            }
        }
    }
    true
}

/// Conjunction of `clear_line` over adjacent point pairs and `valid_state`
/// over all points of the path.
pub fn clear_path(m: &WorldMap, p: &Path) -> bool {
    p.points().iter().all(|&q| valid_state(m, q))
        && p.points().windows(2).all(|w| clear_line(m, w[0], w[1]))
}

/// Member of `vertices` nearest to `a`; ties break to the lowest index.
pub fn nearest_vertex(vertices: &[Point], a: Point) -> Result<Point, GeomError> {
    nearest_vertex_index(vertices, a).map(|i| vertices[i])
}

pub fn nearest_vertex_index(vertices: &[Point], a: Point) -> Result<usize, GeomError> {
    if vertices.is_empty() {
        return Err(GeomError::EmptyVertexSet);
    }
    let mut best = 0;
    let mut best_d = vertices[0].dist_sq(a);
    for (i, v) in vertices.iter().enumerate().skip(1) {
        let d = v.dist_sq(a);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

/// Sum of Euclidean segment lengths.
pub fn path_length(p: &Path) -> f64 {
    p.points().windows(2).map(|w| w[0].dist(w[1])).sum()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment_collinear(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) - GEOM_EPS
        && p.x <= a.x.max(b.x) + GEOM_EPS
        && p.y >= a.y.min(b.y) - GEOM_EPS
        && p.y <= a.y.max(b.y) + GEOM_EPS
}

/// Segment intersection including endpoint touching and collinear overlap.
pub fn segments_intersect(p1: Point, q1: Point, p2: Point, q2: Point) -> bool {
    let d1 = orient(p2, q2, p1);
    let d2 = orient(p2, q2, q1);
    let d3 = orient(p1, q1, p2);
    let d4 = orient(p1, q1, q2);

    if ((d1 > GEOM_EPS && d2 < -GEOM_EPS) || (d1 < -GEOM_EPS && d2 > GEOM_EPS))
        && ((d3 > GEOM_EPS && d4 < -GEOM_EPS) || (d3 < -GEOM_EPS && d4 > GEOM_EPS))
    {
        return true;
    }
    (d1.abs() <= GEOM_EPS && on_segment_collinear(p2, q2, p1))
        || (d2.abs() <= GEOM_EPS && on_segment_collinear(p2, q2, q1))
        || (d3.abs() <= GEOM_EPS && on_segment_collinear(p1, q1, p2))
        || (d4.abs() <= GEOM_EPS && on_segment_collinear(p1, q1, q2))
}

fn point_segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let len_sq = a.dist_sq(b);
    if len_sq <= GEOM_EPS * GEOM_EPS {
        return p.dist(a);
    }
    let t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / len_sq;
    let t = t.clamp(0.0, 1.0);
    let proj = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
    p.dist(proj)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn unit_centered_square() -> Polygon {
        Polygon::new(vec![
            Point::new(0.4, 0.4),
            Point::new(0.6, 0.4),
            Point::new(0.6, 0.6),
            Point::new(0.4, 0.6),
        ])
        .unwrap()
    }

    fn square_map() -> WorldMap {
        WorldMap::new(vec![unit_centered_square()])
    }

    #[test]
    fn valid_state_empty_map() {
        assert!(valid_state(&WorldMap::empty(), Point::new(0.5, 0.5)));
    }

    #[test]
    fn valid_state_interior_point_is_invalid() {
        assert!(!valid_state(&square_map(), Point::new(0.5, 0.5)));
    }

    #[test]
    fn valid_state_just_outside_obstacle() {
        assert!(valid_state(&square_map(), Point::new(0.39, 0.5)));
    }

    #[test]
    fn valid_state_boundary_counts_as_inside() {
        assert!(!valid_state(&square_map(), Point::new(0.4, 0.5)));
        assert!(!valid_state(&square_map(), Point::new(0.4, 0.4)));
    }

    #[test]
    fn valid_state_outside_world() {
        assert!(!valid_state(&WorldMap::empty(), Point::new(1.2, 0.5)));
        assert!(!valid_state(&WorldMap::empty(), Point::new(0.5, -0.01)));
    }

    #[test]
    fn clear_line_empty_map() {
        assert!(clear_line(
            &WorldMap::empty(),
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0)
        ));
    }

    #[test]
    fn clear_line_crossing_obstacle() {
        assert!(!clear_line(
            &square_map(),
            Point::new(0.3, 0.5),
            Point::new(0.7, 0.5)
        ));
    }

    #[test]
    fn clear_line_passing_below_obstacle() {
        assert!(clear_line(
            &square_map(),
            Point::new(0.3, 0.3),
            Point::new(0.7, 0.3)
        ));
    }

    #[test]
    fn clear_line_tangent_to_vertex_is_blocked() {
        // Segment passes exactly through the corner (0.4, 0.4).
        assert!(!clear_line(
            &square_map(),
            Point::new(0.3, 0.4),
            Point::new(0.5, 0.4)
        ));
    }

    #[test]
    fn clear_path_examples() {
        let m = square_map();
        let through = Path::new(vec![Point::new(0.3, 0.5), Point::new(0.7, 0.5)]).unwrap();
        assert!(!clear_path(&m, &through));

        let detour = Path::new(vec![
            Point::new(0.3, 0.5),
            Point::new(0.3, 0.3),
            Point::new(0.7, 0.3),
            Point::new(0.7, 0.5),
        ])
        .unwrap();
        assert!(clear_path(&m, &detour));

        let any = Path::new(vec![Point::new(0.1, 0.9), Point::new(0.9, 0.1)]).unwrap();
        assert!(clear_path(&WorldMap::empty(), &any));
    }

    #[test]
    fn nearest_vertex_examples() {
        let single = vec![Point::new(0.0, 0.0)];
        assert_eq!(
            nearest_vertex(&single, Point::new(1.0, 1.0)).unwrap(),
            Point::new(0.0, 0.0)
        );

        let two = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        assert_eq!(
            nearest_vertex(&two, Point::new(0.1, 0.1)).unwrap(),
            Point::new(0.0, 0.0)
        );

        // Tie-break goes to the lowest insertion index.
        let dup = vec![Point::new(0.0, 0.0), Point::new(0.0, 0.0)];
        assert_eq!(nearest_vertex_index(&dup, Point::new(1.0, 0.0)).unwrap(), 0);

        assert_eq!(
            nearest_vertex(&[], Point::new(0.0, 0.0)),
            Err(GeomError::EmptyVertexSet)
        );
    }

    #[test]
    fn path_length_examples() {
        let p = Path::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).unwrap();
        assert_eq!(path_length(&p), 1.0);

        let degenerate = Path::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 0.0)]).unwrap();
        assert_eq!(path_length(&degenerate), 0.0);

        let bent = Path::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(path_length(&bent), 2.0);
    }

    #[test]
    fn polygon_validation() {
        assert_eq!(
            Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]),
            Err(GeomError::TooFewVertices(2))
        );
        // Bow-tie self-intersection.
        assert_eq!(
            Polygon::new(vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ]),
            Err(GeomError::SelfIntersecting)
        );
        assert!(Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, 1.0),
        ])
        .is_ok());
    }

    #[test]
    fn path_validation() {
        assert_eq!(
            Path::new(vec![Point::new(0.0, 0.0)]),
            Err(GeomError::TooFewPathPoints(1))
        );
    }
}
