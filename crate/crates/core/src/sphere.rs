//! Primitives on the unit sphere: vectors, oriented minor great-circle arcs,
//! arc intersection, side predicates, geodesic polygon areas, and uniform
//! direction sampling.
//!
//! Every predicate in this module shares one tolerance regime: `EPS_GEO` for
//! geometric coincidence tests, `EPS_UNIT` for the unit-norm invariant, and
//! `EPS_LEN` for vector-length degeneracy.

use rand::Rng;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Coincidence tolerance for dot/cross based predicates.
pub const EPS_GEO: f64 = 1e-9;
/// Tolerance on the squared-norm defect of a unit vector.
pub const EPS_UNIT: f64 = 1e-12;
/// Minimum representable vector length.
pub const EPS_LEN: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SphereError {
    #[error("cannot normalize a vector of length <= {EPS_LEN:e}")]
    ZeroVector,
    #[error("great circle is degenerate: defining points are equal or antipodal")]
    DegenerateCircle,
    #[error("arc endpoints are equal or antipodal, minor geodesic undefined")]
    DegenerateArc,
    #[error("boundary cycle does not close: gap {gap:.3e} before arc {arc}")]
    OpenCycle { arc: usize, gap: f64 },
}

/// A point or direction in R^3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Euclidean distance to another point.
    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> [f64; 3] {
        [v.x, v.y, v.z]
    }
}

/// A point of the unit sphere. Squared norm stays within `EPS_UNIT` of 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVec(Vec3);

impl UnitVec {
    pub const PLUS_X: UnitVec = UnitVec(Vec3::new(1.0, 0.0, 0.0));
    pub const PLUS_Y: UnitVec = UnitVec(Vec3::new(0.0, 1.0, 0.0));
    pub const PLUS_Z: UnitVec = UnitVec(Vec3::new(0.0, 0.0, 1.0));

    /// Wraps a vector already known to be unit length.
    /// Debug builds verify the invariant.
    pub(crate) fn new_unchecked(v: Vec3) -> UnitVec {
        debug_assert!((v.norm2() - 1.0).abs() <= 16.0 * EPS_UNIT, "not unit: {v:?}");
        UnitVec(v)
    }

    pub fn as_vec(self) -> Vec3 {
        self.0
    }

    pub fn x(self) -> f64 {
        self.0.x
    }

    pub fn y(self) -> f64 {
        self.0.y
    }

    pub fn z(self) -> f64 {
        self.0.z
    }

    pub fn dot(self, o: UnitVec) -> f64 {
        self.0.dot(o.0)
    }

    pub fn cross(self, o: UnitVec) -> Vec3 {
        self.0.cross(o.0)
    }

    pub fn antipode(self) -> UnitVec {
        UnitVec(-self.0)
    }

    /// Chord-distance coincidence test.
    pub fn approx_eq(self, o: UnitVec, eps: f64) -> bool {
        self.0.dist(o.0) <= eps
    }

    /// Angle to another unit vector, in [0, pi].
    pub fn angle_to(self, o: UnitVec) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }
}

impl Neg for UnitVec {
    type Output = UnitVec;
    fn neg(self) -> UnitVec {
        self.antipode()
    }
}

/// Normalizes `v` to unit length.
pub fn normalize(v: Vec3) -> Result<UnitVec, SphereError> {
    let n = v.norm();
    if !(n > EPS_LEN) || !v.is_finite() {
        return Err(SphereError::ZeroVector);
    }
    Ok(UnitVec(Vec3::new(v.x / n, v.y / n, v.z / n)))
}

/// Which side of the oriented great circle through `p1`, `p2` the point `xi`
/// lies on. North is the side the circle's pole `p1 x p2` points into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    North,
    South,
    On,
}

pub fn side_of_great_circle(
    p1: UnitVec,
    p2: UnitVec,
    xi: UnitVec,
) -> Result<Side, SphereError> {
    let c = p1.cross(p2);
    if c.norm() <= EPS_GEO {
        return Err(SphereError::DegenerateCircle);
    }
    let s = c.dot(xi.as_vec());
    // The predicate is scale-free in c, so compare against eps times |c| to
    // keep the answer independent of how far apart p1 and p2 sit.
    let tol = EPS_GEO * c.norm();
    Ok(if s > tol {
        Side::North
    } else if s < -tol {
        Side::South
    } else {
        Side::On
    })
}

/// Deterministic right-handed orthonormal frame (u, v) of the plane normal to
/// `xi`, with u x v = xi. Used to assign 2D coordinates to projections.
pub fn orthonormal_frame(xi: UnitVec) -> (UnitVec, UnitVec) {
    let v = xi.as_vec();
    let u = if v.x.abs() <= EPS_LEN && v.y.abs() <= EPS_LEN {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(v.y, -v.x, 0.0)
    };
    let u = normalize(u).expect("frame seed is nonzero");
    let w = normalize(v.cross(u.as_vec())).expect("xi and u are orthogonal");
    debug_assert!(u.cross(w).dot(v) > 0.0);
    (u, w)
}

/// Rotation of `v` by `angle` about `axis` (Rodrigues formula).
pub fn rotate_about(axis: UnitVec, angle: f64, v: Vec3) -> Vec3 {
    let k = axis.as_vec();
    let (s, c) = angle.sin_cos();
    v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c))
}

/// An oriented minor great-circle arc from `start` to `end`.
/// Length is strictly inside (0, pi).
#[derive(Clone, Copy, Debug)]
pub struct GreatArc {
    start: UnitVec,
    end: UnitVec,
    /// Unit normal of the carrying circle; travel from start to end is
    /// counterclockwise around it.
    pole: UnitVec,
    /// Arc length in radians, in (0, pi).
    length: f64,
}

impl GreatArc {
    pub fn new(start: UnitVec, end: UnitVec) -> Result<GreatArc, SphereError> {
        let c = start.cross(end);
        let n = c.norm();
        // sin(length) <= eps catches both equal and antipodal endpoints.
        if n <= EPS_GEO {
            return Err(SphereError::DegenerateArc);
        }
        let length = n.atan2(start.dot(end));
        Ok(GreatArc {
            start,
            end,
            pole: UnitVec(c * (1.0 / n)),
            length,
        })
    }

    pub fn start(&self) -> UnitVec {
        self.start
    }

    pub fn end(&self) -> UnitVec {
        self.end
    }

    pub fn pole(&self) -> UnitVec {
        self.pole
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn reversed(&self) -> GreatArc {
        GreatArc {
            start: self.end,
            end: self.start,
            pole: self.pole.antipode(),
            length: self.length,
        }
    }

    /// Unit tangent at the start, pointing along the arc.
    pub fn tangent_at_start(&self) -> Vec3 {
        self.pole.cross(self.start)
    }

    /// Unit tangent at the end, pointing along the arc.
    pub fn tangent_at_end(&self) -> Vec3 {
        self.pole.cross(self.end)
    }

    /// Point at angle `theta` from the start along the carrying circle.
    pub fn point_at_angle(&self, theta: f64) -> UnitVec {
        let (s, c) = theta.sin_cos();
        let p = self.start.as_vec() * c + self.pole.cross(self.start) * s;
        normalize(p).expect("rotation of a unit vector")
    }

    /// Point at fraction `t` in [0, 1] along the arc.
    pub fn interpolate(&self, t: f64) -> UnitVec {
        self.point_at_angle(t * self.length)
    }

    /// Midpoint of the arc.
    pub fn midpoint(&self) -> UnitVec {
        self.interpolate(0.5)
    }

    /// Signed angle of `p` around the carrying circle, measured from `start`,
    /// in (-pi, pi]. Meaningful when `p` is on or near the circle.
    pub fn angle_of(&self, p: UnitVec) -> f64 {
        let u = self.start.as_vec();
        let w = self.pole.cross(self.start);
        p.as_vec().dot(w).atan2(p.as_vec().dot(u))
    }

    /// Whether `p` lies on the carrying great circle within `eps`.
    pub fn on_circle(&self, p: UnitVec, eps: f64) -> bool {
        self.pole.dot(p).abs() <= eps
    }

    /// Whether `p` lies on the arc within `eps` (endpoints included).
    pub fn contains_point(&self, p: UnitVec, eps: f64) -> bool {
        if !self.on_circle(p, eps) {
            return false;
        }
        let a = self.angle_of(p);
        a >= -eps && a <= self.length + eps
    }
}

/// Result of intersecting two arcs.
#[derive(Clone, Debug)]
pub enum ArcIntersection {
    Empty,
    /// One or two transversal or touching points.
    Points(Vec<UnitVec>),
    /// The arcs share a sub-arc of the common great circle, returned in the
    /// orientation of the first argument.
    Overlap(GreatArc),
}

/// Intersects two minor arcs, boundary-inclusively, with tolerance `eps`.
pub fn arc_pair_intersections(a: &GreatArc, b: &GreatArc, eps: f64) -> ArcIntersection {
    let pa = a.pole().as_vec();
    let pb = b.pole().as_vec();
    let axis = pa.cross(pb);
    if axis.norm() <= eps {
        return same_circle_intersection(a, b, eps);
    }
    // Transversal circles meet at the two antipodal points +-q.
    let q = normalize(axis).expect("transversal poles");
    let mut pts: Vec<UnitVec> = Vec::new();
    for cand in [q, q.antipode()] {
        if a.contains_point(cand, eps) && b.contains_point(cand, eps) {
            pts.push(cand);
        }
    }
    if pts.is_empty() {
        ArcIntersection::Empty
    } else {
        ArcIntersection::Points(pts)
    }
}

/// Overlap computation for arcs on one common great circle.
fn same_circle_intersection(a: &GreatArc, b: &GreatArc, eps: f64) -> ArcIntersection {
    let same_orientation = a.pole().dot(b.pole()) > 0.0;
    // Angular interval of b in a's frame, as [lo, hi] on the real line.
    let beta = a.angle_of(b.start());
    let (mut lo, mut hi) = if same_orientation {
        (beta, beta + b.length())
    } else {
        (beta - b.length(), beta)
    };
    // a covers [0, a.length]; slide b's interval by whole turns to meet it.
    let (mut best_lo, mut best_hi) = (0.0f64, -1.0f64);
    for _ in 0..3 {
        let olo = lo.max(0.0);
        let ohi = hi.min(a.length());
        if ohi - olo > best_hi - best_lo {
            best_lo = olo;
            best_hi = ohi;
        }
        lo += 2.0 * std::f64::consts::PI;
        hi += 2.0 * std::f64::consts::PI;
    }
    // Start two turns down so the loop scans shifts -2pi, 0, +2pi.
    lo -= 6.0 * std::f64::consts::PI;
    hi -= 6.0 * std::f64::consts::PI;
    for _ in 0..3 {
        let olo = lo.max(0.0);
        let ohi = hi.min(a.length());
        if ohi - olo > best_hi - best_lo {
            best_lo = olo;
            best_hi = ohi;
        }
        lo += 2.0 * std::f64::consts::PI;
        hi += 2.0 * std::f64::consts::PI;
    }
    let span = best_hi - best_lo;
    if span < -eps {
        ArcIntersection::Empty
    } else if span <= eps {
        let mid = 0.5 * (best_lo + best_hi);
        ArcIntersection::Points(vec![a.point_at_angle(mid)])
    } else {
        let s = a.point_at_angle(best_lo);
        let e = a.point_at_angle(best_hi);
        match GreatArc::new(s, e) {
            Ok(arc) => ArcIntersection::Overlap(arc),
            // Span just above eps but below arc-constructor resolution.
            Err(_) => ArcIntersection::Points(vec![a.point_at_angle(0.5 * (best_lo + best_hi))]),
        }
    }
}

/// Signed turning angle from the end tangent of `incoming` to the start
/// tangent of `outgoing`, in [-pi, pi). An exact reversal counts as -pi:
/// a walk that doubles back around the tip of a slit turns through the full
/// interior angle 2*pi of the surrounding face.
pub fn turning_angle(incoming: &GreatArc, outgoing: &GreatArc) -> f64 {
    let p = incoming.end().as_vec();
    let t_in = incoming.tangent_at_end();
    let t_out = outgoing.tangent_at_start();
    let cosphi = t_in.dot(t_out);
    let sinphi = p.dot(t_in.cross(t_out));
    let ang = sinphi.atan2(cosphi);
    // Reversal: outgoing retraces incoming. Antiparallel tangents on the
    // sphere force the two arcs onto one circle, so checking the poles
    // disambiguates the atan2 branch at +-pi.
    if cosphi < 0.0 && incoming.pole().dot(outgoing.pole()) < -(1.0 - 1e-9) && ang > 0.0 {
        return -std::f64::consts::PI;
    }
    ang
}

/// Area in steradians of a face bounded by the given directed cycles, each a
/// closed chain of arcs traversed with the face on its left.
///
/// The area is 2*pi*chi minus the total boundary turning; `euler_char` is the
/// face's Euler characteristic, 1 for a disk, 0 for an annulus, 2 for the
/// whole sphere (empty boundary).
pub fn spherical_face_area(
    boundary_cycles: &[Vec<GreatArc>],
    euler_char: i32,
) -> Result<f64, SphereError> {
    let mut turning = 0.0;
    for cycle in boundary_cycles {
        for (i, arc) in cycle.iter().enumerate() {
            let next = &cycle[(i + 1) % cycle.len()];
            let gap = arc.end().as_vec().dist(next.start().as_vec());
            if gap > 1e-7 {
                return Err(SphereError::OpenCycle { arc: i, gap });
            }
            turning += turning_angle(arc, next);
        }
    }
    Ok(2.0 * std::f64::consts::PI * f64::from(euler_char) - turning)
}

/// Draws a direction uniformly distributed on the sphere.
pub fn sample_uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> UnitVec {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    UnitVec::new_unchecked(Vec3::new(r * phi.cos(), r * phi.sin(), z))
}
