//! Rotated-rectangle geometry: vertex generation, convex polygon clipping,
//! Jaccard index, and angle arithmetic under 180-degree symmetry.
//!
//! Coordinate convention: y-down image coordinates. Angles are measured in
//! degrees from the +x axis, positive sweeping toward +y, and are canonical
//! in `[-90, 90)`. A grasp rectangle and its 180-degree rotation denote the
//! same physical grasp, so all angle comparisons go through [`angle_diff`].
//!
//! `w` runs along the gripper-plate moving direction (the edge from vertex 0
//! to vertex 1); `h` is the perpendicular extent. Swapping the convention
//! would only relabel w/h and rotate theta by 90 degrees.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static INTERSECTION_EVALS: Cell<u64> = const { Cell::new(0) };
}

/// Number of polygon-intersection evaluations performed by the current
/// thread since it started. Every [`convex_intersection_area`] call (and
/// therefore every [`jaccard`] call) bumps it. Exists so callers can prove
/// that a code path never touches the expensive overlap routine.
pub fn intersection_eval_count() -> u64 {
    INTERSECTION_EVALS.with(|c| c.get())
}

/// A point in pixel coordinates (y-down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// A convex polygon. Vertices are stored so that the shoelace sum is
/// non-negative (counterclockwise in y-down coordinates); constructors
/// reverse the input if needed. Convexity itself is the caller's contract.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon, normalizing the winding so the signed area is >= 0.
    pub fn new(mut vertices: Vec<Point>) -> Self {
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Polygon { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Shoelace area. Non-negative under the stored winding.
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).max(0.0)
    }
}

fn signed_area(pts: &[Point]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        sum += a.x * b.y - b.x * a.y;
    }
    sum / 2.0
}

/// Five-dimensional grasp rectangle: center `(x, y)`, extents `(w, h)` and
/// rotation `theta` in degrees. Construction enforces `w > 0`, `h > 0` and
/// normalizes `theta` into `[-90, 90)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    theta: f64,
}

impl OrientedRect {
    pub fn new(x: f64, y: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        for (name, v) in [("x", x), ("y", y), ("w", w), ("h", h), ("theta", theta)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "rectangle {name} must be finite, got {v}"
                )));
            }
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rectangle extents must be positive, got w={w}, h={h}"
            )));
        }
        Ok(OrientedRect {
            x,
            y,
            w,
            h,
            theta: wrap_angle(theta),
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Rotation in degrees, always in `[-90, 90)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// The four corners, counterclockwise, starting so that the edge from
    /// vertex 0 to vertex 1 has direction `theta` and length `w`.
    pub fn vertices(&self) -> Polygon {
        let (sin, cos) = self.theta.to_radians().sin_cos();
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        let corner = |lx: f64, ly: f64| Point {
            x: self.x + cos * lx - sin * ly,
            y: self.y + sin * lx + cos * ly,
        };
        Polygon {
            vertices: vec![
                corner(-hw, -hh),
                corner(hw, -hh),
                corner(hw, hh),
                corner(-hw, hh),
            ],
        }
    }
}

/// Wire form of [`OrientedRect`]. Serialization rounds `theta` to six
/// decimal places (degrees); deserialization re-validates the invariants.
#[derive(Serialize, Deserialize)]
#[serde(rename = "OrientedRect")]
struct RectWire {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    theta: f64,
}

impl Serialize for OrientedRect {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RectWire {
            x: self.x,
            y: self.y,
            w: self.w,
            h: self.h,
            theta: (self.theta * 1e6).round() / 1e6,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OrientedRect {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RectWire::deserialize(deserializer)?;
        OrientedRect::new(raw.x, raw.y, raw.w, raw.h, raw.theta).map_err(serde::de::Error::custom)
    }
}

/// Canonicalizes an angle in degrees into `[-90, 90)`, preserving it mod 180.
pub fn normalize_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "angle must be finite, got {theta}"
        )));
    }
    Ok(wrap_angle(theta))
}

pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + 90.0).rem_euclid(180.0) - 90.0;
    // rem_euclid may round up to exactly 180.0 for tiny negative inputs.
    if t >= 90.0 {
        t - 180.0
    } else {
        t
    }
}

/// Unsigned angle difference in `[0, 90]` degrees under the 180-degree
/// symmetry of grasp rectangles: `min_k |a - b + 180k|`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Fits an oriented rectangle to four vertices listed in order around the
/// quad. The edge from vertex 0 to vertex 1 defines `w` and `theta`;
/// opposite edges must be parallel within 1 degree (annotations are
/// hand-drawn, so an exact-rectangle requirement would reject real data).
pub fn rect_from_vertices(pts: &[Point]) -> Result<OrientedRect> {
    if pts.len() != 4 {
        return Err(Error::Geometry(format!(
            "rectangle fit needs exactly 4 vertices, got {}",
            pts.len()
        )));
    }
    for p in pts {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::Geometry(format!(
                "non-finite vertex ({}, {})",
                p.x, p.y
            )));
        }
    }
    let edge = |i: usize, j: usize| (pts[j].x - pts[i].x, pts[j].y - pts[i].y);
    let edges = [edge(0, 1), edge(1, 2), edge(2, 3), edge(3, 0)];
    let norms: Vec<f64> = edges.iter().map(|e| e.0.hypot(e.1)).collect();
    if norms.iter().any(|&n| n < 1e-9) {
        return Err(Error::Geometry("zero-length edge".into()));
    }
    // Opposite edges of a rectangle traversed in order are anti-parallel.
    const PARALLEL_TOL_DEG: f64 = 1.0;
    for (i, j) in [(0usize, 2usize), (1, 3)] {
        let (a, b) = (edges[i], (-edges[j].0, -edges[j].1));
        let dot = a.0 * b.0 + a.1 * b.1;
        let crs = a.0 * b.1 - a.1 * b.0;
        let ang = crs.abs().atan2(dot).to_degrees();
        if ang > PARALLEL_TOL_DEG {
            return Err(Error::Geometry(format!(
                "opposite edges deviate from parallel by {ang:.3} degrees"
            )));
        }
    }
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
    // Average each pair of opposite edges so hand-drawn quads fit cleanly;
    // for an exact rectangle this reduces to the 0->1 and 1->2 edges.
    let dir = (
        (edges[0].0 - edges[2].0) / 2.0,
        (edges[0].1 - edges[2].1) / 2.0,
    );
    let w = (norms[0] + norms[2]) / 2.0;
    let h = (norms[1] + norms[3]) / 2.0;
    let theta = dir.1.atan2(dir.0).to_degrees();
    OrientedRect::new(cx, cy, w, h, theta)
}

/// Area of the intersection of two convex polygons via Sutherland-Hodgman
/// clipping followed by the shoelace formula. Returns 0 for disjoint or
/// degenerate (shared edge, single point) overlaps.
pub fn convex_intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    INTERSECTION_EVALS.with(|c| c.set(c.get() + 1));
    let mut clipped = a.vertices.clone();
    let n = b.vertices.len();
    if n < 3 {
        return 0.0;
    }
    for i in 0..n {
        let (ca, cb) = (b.vertices[i], b.vertices[(i + 1) % n]);
        clipped = clip_halfplane(&clipped, ca, cb);
        if clipped.len() < 3 {
            return 0.0;
        }
    }
    signed_area(&clipped).max(0.0)
}

/// Clips `poly` to the left half-plane of the directed edge `a -> b`
/// (the interior side under the positive-shoelace winding).
fn clip_halfplane(poly: &[Point], a: Point, b: Point) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let s = poly[i];
        let e = poly[(i + 1) % n];
        let sc = cross(a, b, s);
        let ec = cross(a, b, e);
        let lerp = |sc: f64, ec: f64, s: Point, e: Point| -> Option<Point> {
            let denom = sc - ec;
            if denom.abs() < 1e-30 {
                return None;
            }
            let t = sc / denom;
            Some(Point::new(s.x + (e.x - s.x) * t, s.y + (e.y - s.y) * t))
        };
        match (sc >= 0.0, ec >= 0.0) {
            (true, true) => out.push(e),
            (true, false) => {
                if let Some(p) = lerp(sc, ec, s, e) {
                    out.push(p);
                }
            }
            (false, true) => {
                if let Some(p) = lerp(sc, ec, s, e) {
                    out.push(p);
                }
                out.push(e);
            }
            (false, false) => {}
        }
    }
    out
}

/// Jaccard index (intersection over union) of two oriented rectangles.
pub fn jaccard(g: &OrientedRect, ghat: &OrientedRect) -> f64 {
    let inter = convex_intersection_area(&g.vertices(), &ghat.vertices());
    let union = g.area() + ghat.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(x: f64, y: f64, w: f64, h: f64, t: f64) -> OrientedRect {
        OrientedRect::new(x, y, w, h, t).unwrap()
    }

    #[test]
    fn normalize_angle_fixtures() {
        assert_eq!(normalize_angle(0.0).unwrap(), 0.0);
        assert_eq!(normalize_angle(90.0).unwrap(), -90.0);
        assert_eq!(normalize_angle(200.0).unwrap(), 20.0);
        assert_eq!(normalize_angle(-90.0).unwrap(), -90.0);
        assert!(normalize_angle(f64::NAN).is_err());
        assert!(normalize_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn vertices_axis_aligned() {
        let poly = rect(0.0, 0.0, 4.0, 2.0, 0.0).vertices();
        let expect = [(-2.0, -1.0), (2.0, -1.0), (2.0, 1.0), (-2.0, 1.0)];
        for (v, (ex, ey)) in poly.vertices().iter().zip(expect) {
            assert!((v.x - ex).abs() < 1e-12 && (v.y - ey).abs() < 1e-12);
        }
        assert!((poly.area() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn vertices_rotated_square_lands_on_axes() {
        let poly = rect(0.0, 0.0, 2.0, 2.0, 45.0).vertices();
        let r = 2f64.sqrt();
        for v in poly.vertices() {
            let dist = v.x.hypot(v.y);
            assert!((dist - r).abs() < 1e-12);
            // Each corner sits on a coordinate axis.
            assert!(v.x.abs() < 1e-12 || v.y.abs() < 1e-12);
        }
    }

    #[test]
    fn rect_fit_axis_aligned() {
        let pts = [
            Point::new(-2.0, -1.0),
            Point::new(2.0, -1.0),
            Point::new(2.0, 1.0),
            Point::new(-2.0, 1.0),
        ];
        let r = rect_from_vertices(&pts).unwrap();
        assert_eq!((r.x(), r.y(), r.w(), r.h(), r.theta()), (0.0, 0.0, 4.0, 2.0, 0.0));
    }

    #[test]
    fn rect_fit_rejects_degenerate() {
        let collinear = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(3.0, 0.0),
        ];
        assert!(matches!(
            rect_from_vertices(&collinear),
            Err(Error::Geometry(_))
        ));
        let repeated = [
            Point::new(0.0, 0.0),
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        assert!(rect_from_vertices(&repeated).is_err());
        assert!(rect_from_vertices(&[Point::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn rect_fit_rejects_sheared_quad() {
        // Opposite edges 5 degrees off parallel.
        let base = rect(10.0, 10.0, 6.0, 3.0, 20.0);
        let mut pts: Vec<Point> = base.vertices().vertices().to_vec();
        let rot = 5f64.to_radians();
        let (s, c) = rot.sin_cos();
        let pivot = pts[2];
        let moved = pts[3];
        pts[3] = Point::new(
            pivot.x + c * (moved.x - pivot.x) - s * (moved.y - pivot.y),
            pivot.y + s * (moved.x - pivot.x) + c * (moved.y - pivot.y),
        );
        assert!(rect_from_vertices(&pts).is_err());
    }

    #[test]
    fn intersection_fixtures() {
        let unit = rect(0.5, 0.5, 1.0, 1.0, 0.0).vertices();
        assert!((convex_intersection_area(&unit, &unit) - 1.0).abs() < 1e-12);

        let far = rect(10.0, 10.0, 1.0, 1.0, 0.0).vertices();
        assert_eq!(convex_intersection_area(&unit, &far), 0.0);

        // Square of side 2 against its own 45-degree rotation: regular
        // octagon of area 8(sqrt(2) - 1).
        let a = rect(0.0, 0.0, 2.0, 2.0, 0.0).vertices();
        let b = rect(0.0, 0.0, 2.0, 2.0, 45.0).vertices();
        let expect = 8.0 * (2f64.sqrt() - 1.0);
        assert!((convex_intersection_area(&a, &b) - expect).abs() < 1e-9);
        assert!((convex_intersection_area(&b, &a) - expect).abs() < 1e-9);
    }

    #[test]
    fn shared_edge_has_zero_area() {
        let a = rect(0.0, 0.0, 2.0, 2.0, 0.0).vertices();
        let b = rect(2.0, 0.0, 2.0, 2.0, 0.0).vertices();
        assert!(convex_intersection_area(&a, &b).abs() < 1e-9);
    }

    #[test]
    fn jaccard_fixtures() {
        let g = rect(0.0, 0.0, 4.0, 2.0, 0.0);
        assert!((jaccard(&g, &g) - 1.0).abs() < 1e-12);

        let shifted = rect(1.0, 0.0, 4.0, 2.0, 0.0);
        assert!((jaccard(&g, &shifted) - 0.6).abs() < 1e-12);

        let sq = rect(0.0, 0.0, 2.0, 2.0, 0.0);
        let sq45 = rect(0.0, 0.0, 2.0, 2.0, 45.0);
        assert!((jaccard(&sq, &sq45) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn angle_diff_fixtures() {
        assert_eq!(angle_diff(30.0, 30.0), 0.0);
        assert!((angle_diff(85.0, -85.0) - 10.0).abs() < 1e-12);
        assert!((angle_diff(75.0, -75.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn eval_counter_tracks_calls() {
        let before = intersection_eval_count();
        let g = rect(0.0, 0.0, 4.0, 2.0, 10.0);
        let _ = jaccard(&g, &g);
        assert_eq!(intersection_eval_count(), before + 1);
    }

    #[test]
    fn rect_rejects_bad_inputs() {
        assert!(OrientedRect::new(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(OrientedRect::new(0.0, 0.0, 1.0, -2.0, 0.0).is_err());
        assert!(OrientedRect::new(f64::NAN, 0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn serde_rounds_theta_to_six_decimals() {
        let r = rect(1.0, 2.0, 3.0, 4.0, 10.123456789);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("10.123457"));
        let back: OrientedRect = serde_json::from_str(&json).unwrap();
        assert!((back.theta() - 10.123457).abs() < 1e-9);
        assert!(serde_json::from_str::<OrientedRect>(r#"{"x":0,"y":0,"w":-1,"h":1,"theta":0}"#).is_err());
    }

    fn arb_rect() -> impl Strategy<Value = OrientedRect> {
        (
            -100.0..400.0f64,
            -100.0..400.0f64,
            0.5..120.0f64,
            0.5..120.0f64,
            -90.0..90.0f64,
        )
            .prop_map(|(x, y, w, h, t)| rect(x, y, w, h, t))
    }

    proptest! {
        #[test]
        fn normalize_angle_in_range(theta in -1e4..1e4f64) {
            let n = normalize_angle(theta).unwrap();
            prop_assert!((-90.0..90.0).contains(&n));
            let k = ((theta - n) / 180.0).round();
            prop_assert!((theta - n - 180.0 * k).abs() < 1e-7);
        }

        #[test]
        fn angle_diff_symmetry(a in -360.0..360.0f64, b in -360.0..360.0f64) {
            prop_assert!((angle_diff(a, b) - angle_diff(b, a)).abs() < 1e-9);
            prop_assert!(angle_diff(a, a + 180.0) < 1e-9);
            let d = angle_diff(a, b);
            prop_assert!((0.0..=90.0).contains(&d));
        }

        #[test]
        fn vertex_round_trip(r in arb_rect()) {
            let fitted = rect_from_vertices(r.vertices().vertices()).unwrap();
            prop_assert!((fitted.x() - r.x()).abs() < 1e-6);
            prop_assert!((fitted.y() - r.y()).abs() < 1e-6);
            prop_assert!((fitted.w() - r.w()).abs() < 1e-6);
            prop_assert!((fitted.h() - r.h()).abs() < 1e-6);
            prop_assert!(angle_diff(fitted.theta(), r.theta()) < 1e-6);
        }

        #[test]
        fn jaccard_self_is_one(r in arb_rect()) {
            prop_assert!((jaccard(&r, &r) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn jaccard_symmetric_and_bounded(a in arb_rect(), b in arb_rect()) {
            let j1 = jaccard(&a, &b);
            let j2 = jaccard(&b, &a);
            prop_assert!((j1 - j2).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&j1));
        }

        #[test]
        fn intersection_bounded_by_min_area(a in arb_rect(), b in arb_rect()) {
            let inter = convex_intersection_area(&a.vertices(), &b.vertices());
            prop_assert!(inter <= a.area().min(b.area()) + 1e-7);
        }

        #[test]
        fn jaccard_rigid_invariance(
            a in arb_rect(),
            b in arb_rect(),
            phi in -180.0..180.0f64,
            tx in -50.0..50.0f64,
            ty in -50.0..50.0f64,
        ) {
            let (s, c) = phi.to_radians().sin_cos();
            let motion = |r: &OrientedRect| {
                rect(
                    c * r.x() - s * r.y() + tx,
                    s * r.x() + c * r.y() + ty,
                    r.w(),
                    r.h(),
                    r.theta() + phi,
                )
            };
            let j0 = jaccard(&a, &b);
            let j1 = jaccard(&motion(&a), &motion(&b));
            prop_assert!((j0 - j1).abs() < 1e-9, "j0 = {}, j1 = {}", j0, j1);
        }
    }
}
