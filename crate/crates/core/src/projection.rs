//! Orthogonal projection of a knot along a direction: genericity
//! classification, crossing extraction with signs, the Tait number (sum of
//! crossing signs), and its evaluation over whole sphere grids.
//!
//! A direction is generic when every fiber of the projection meets the knot
//! in at most two points, both interior to edges. Off the indicatrix the
//! Tait number is constant on each connected component of the complement, so
//! a non-generic direction off the indicatrix is evaluated by perturbing to
//! a generic direction in the same component.

use crate::indicatrix::{build_indicatrix, Indicatrix};
use crate::knot::PLKnot;
use crate::sphere::{
    arc_pair_intersections, normalize, orthonormal_frame, ArcIntersection, GreatArc, UnitVec,
    Vec3, EPS_GEO,
};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NonGenericReason {
    /// An edge is parallel to the direction and projects to a point.
    EdgeParallel,
    /// Some fiber contains a vertex together with another point.
    VertexHit,
    /// Some fiber contains three or more points.
    TriplePoint,
    /// Two edges project onto one line with overlapping images.
    CollinearOverlap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Generic,
    NonGeneric(NonGenericReason),
}

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("NotGeneric: {0:?}")]
    NotGeneric(NonGenericReason),
    #[error("ParallelStrands: projected directions are parallel within tolerance")]
    ParallelStrands,
    #[error("OnIndicatrix: direction lies on the indicatrix within tolerance")]
    OnIndicatrix,
    #[error("NoGenericDirection: perturbation search failed near the requested direction")]
    NoGenericDirection,
}

/// A transversal double point of the projected diagram.
#[derive(Clone, Copy, Debug)]
pub struct Crossing {
    /// Coordinates of the double point in the diagram's frame.
    pub plane_point: [f64; 2],
    pub over_edge: usize,
    pub under_edge: usize,
    /// +1 when the upper strand turns counterclockwise onto the lower one
    /// through the angle in (0, pi), else -1.
    pub sign: i32,
}

/// The projected diagram along one generic direction.
#[derive(Clone, Debug)]
pub struct Diagram {
    pub direction: UnitVec,
    /// Right-handed orthonormal frame of the projection plane.
    pub frame: (UnitVec, UnitVec),
    pub crossings: Vec<Crossing>,
    /// Sum of crossing signs.
    pub tait: i64,
}

/// Sign of the crossing with upper-strand direction `d_over` and lower-strand
/// direction `d_under`, viewed along `xi`: positive when the projected upper
/// direction rotates counterclockwise onto the lower one through an angle in
/// (0, pi). Equals the sign of the triple product xi . (d_over x d_under).
pub fn crossing_sign(
    d_over: UnitVec,
    d_under: UnitVec,
    xi: UnitVec,
    eps: f64,
) -> Result<i32, ProjectionError> {
    let triple = xi.as_vec().dot(d_over.cross(d_under));
    // The triple product equals the 2D cross product of the projections, so
    // it vanishes exactly when they are parallel.
    if triple.abs() <= eps {
        return Err(ProjectionError::ParallelStrands);
    }
    Ok(if triple > 0.0 { 1 } else { -1 })
}

/// Reusable projection engine for one knot. Holds per-call scratch buffers so
/// Monte Carlo loops avoid reallocating.
pub struct Projector {
    verts: Vec<Vec3>,
    /// Unit edge directions.
    dirs: Vec<UnitVec>,
    /// Edge lengths.
    lens: Vec<f64>,
    // Scratch: projected vertex coordinates and heights along xi.
    px: Vec<f64>,
    py: Vec<f64>,
    h: Vec<f64>,
}

impl Projector {
    pub fn new(knot: &PLKnot) -> Projector {
        let verts = knot.vertices().to_vec();
        let dirs = crate::knot::edge_directions(knot);
        let lens = (0..knot.num_edges())
            .map(|i| knot.edge_vector(i).norm())
            .collect();
        let n = verts.len();
        Projector {
            verts,
            dirs,
            lens,
            px: vec![0.0; n],
            py: vec![0.0; n],
            h: vec![0.0; n],
        }
    }

    fn num_edges(&self) -> usize {
        self.verts.len()
    }

    /// Projects all vertices into the frame of `xi`.
    fn load(&mut self, xi: UnitVec) -> (UnitVec, UnitVec) {
        let (u, w) = orthonormal_frame(xi);
        let (uv, wv, xv) = (u.as_vec(), w.as_vec(), xi.as_vec());
        for (i, &v) in self.verts.iter().enumerate() {
            self.px[i] = v.dot(uv);
            self.py[i] = v.dot(wv);
            self.h[i] = v.dot(xv);
        }
        (u, w)
    }

    /// Classifies and, when generic, accumulates the Tait number; fills
    /// `out` with crossings when provided.
    fn analyze(
        &mut self,
        xi: UnitVec,
        eps: f64,
        mut out: Option<&mut Vec<Crossing>>,
    ) -> Result<i64, NonGenericReason> {
        self.load(xi);
        let n = self.num_edges();
        let xv = xi.as_vec();

        // Edge parallel to the direction: unit direction loses its whole
        // projected length.
        for d in &self.dirs {
            let proj2 = 1.0 - d.as_vec().dot(xv).powi(2);
            if proj2 <= eps * eps {
                return Err(NonGenericReason::EdgeParallel);
            }
        }

        // Fold at a shared vertex: adjacent edges project anti-parallel.
        for i in 0..n {
            let j = (i + 1) % n;
            let (a, b) = (self.dirs[i].as_vec(), self.dirs[j].as_vec());
            let cross2 = xv.dot(a.cross(b));
            let dot2 = a.dot(b) - a.dot(xv) * b.dot(xv);
            if cross2.abs() <= eps && dot2 < 0.0 {
                return Err(NonGenericReason::VertexHit);
            }
        }

        // Vertex images must be distinct.
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (self.px[i] - self.px[j], self.py[i] - self.py[j]);
                if dx * dx + dy * dy <= eps * eps {
                    return Err(NonGenericReason::VertexHit);
                }
            }
        }

        // No vertex image may sit on another edge's image.
        for k in 0..n {
            for j in 0..n {
                if j == k || (j + 1) % n == k {
                    continue;
                }
                if self.point_segment_dist2(k, j) <= eps * eps {
                    return Err(NonGenericReason::VertexHit);
                }
            }
        }

        // Transversal crossings of non-adjacent edge pairs.
        let mut tait = 0i64;
        let mut seen: Vec<(f64, f64)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                match self.cross_pair(i, j, eps) {
                    PairOutcome::None => {}
                    PairOutcome::Degenerate(r) => return Err(r),
                    PairOutcome::Crossing {
                        x,
                        y,
                        over_is_first,
                        positive,
                    } => {
                        for &(sx, sy) in &seen {
                            let (dx, dy) = (x - sx, y - sy);
                            if dx * dx + dy * dy <= eps * eps {
                                return Err(NonGenericReason::TriplePoint);
                            }
                        }
                        seen.push((x, y));
                        let s = if positive { 1 } else { -1 };
                        tait += s as i64;
                        if let Some(list) = out.as_deref_mut() {
                            let (over, under) = if over_is_first { (i, j) } else { (j, i) };
                            list.push(Crossing {
                                plane_point: [x, y],
                                over_edge: over,
                                under_edge: under,
                                sign: s,
                            });
                        }
                    }
                }
            }
        }
        Ok(tait)
    }

    /// Squared distance from vertex image k to edge image j.
    fn point_segment_dist2(&self, k: usize, j: usize) -> f64 {
        let n = self.num_edges();
        let j1 = (j + 1) % n;
        let (ax, ay) = (self.px[j], self.py[j]);
        let (bx, by) = (self.px[j1], self.py[j1]);
        let (qx, qy) = (self.px[k], self.py[k]);
        let (ex, ey) = (bx - ax, by - ay);
        let len2 = ex * ex + ey * ey;
        let t = if len2 > 0.0 {
            (((qx - ax) * ex + (qy - ay) * ey) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (dx, dy) = (qx - (ax + t * ex), qy - (ay + t * ey));
        dx * dx + dy * dy
    }

    fn cross_pair(&self, i: usize, j: usize, eps: f64) -> PairOutcome {
        let n = self.num_edges();
        let (i1, j1) = ((i + 1) % n, (j + 1) % n);
        let (ax, ay) = (self.px[i], self.py[i]);
        let (bx, by) = (self.px[i1], self.py[i1]);
        let (cx, cy) = (self.px[j], self.py[j]);
        let (dx, dy) = (self.px[j1], self.py[j1]);
        // Bounding-box reject with tolerance margin.
        if ax.min(bx) > cx.max(dx) + eps
            || cx.min(dx) > ax.max(bx) + eps
            || ay.min(by) > cy.max(dy) + eps
            || cy.min(dy) > ay.max(by) + eps
        {
            return PairOutcome::None;
        }
        let (e1x, e1y) = (bx - ax, by - ay);
        let (e2x, e2y) = (dx - cx, dy - cy);
        let den = e1x * e2y - e1y * e2x;
        let l1 = (e1x * e1x + e1y * e1y).sqrt();
        let l2 = (e2x * e2x + e2y * e2y).sqrt();
        if den.abs() <= eps * l1 * l2 {
            // Parallel images: degenerate only when they share a line and
            // overlap along it for more than a point.
            let off = ((cx - ax) * e1y - (cy - ay) * e1x).abs() / l1.max(1e-300);
            if off > eps {
                return PairOutcome::None;
            }
            let t0 = ((cx - ax) * e1x + (cy - ay) * e1y) / (l1 * l1);
            let t1 = ((dx - ax) * e1x + (dy - ay) * e1y) / (l1 * l1);
            let lo = t0.min(t1).max(0.0);
            let hi = t0.max(t1).min(1.0);
            if (hi - lo) * l1 > eps {
                return PairOutcome::Degenerate(NonGenericReason::CollinearOverlap);
            }
            return PairOutcome::None;
        }
        let s = ((cx - ax) * e2y - (cy - ay) * e2x) / den;
        let t = ((cx - ax) * e1y - (cy - ay) * e1x) / den;
        if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
            return PairOutcome::None;
        }
        // Endpoint grazes were already reported as vertex hits, so s and t
        // are interior here.
        let x = ax + s * e1x;
        let y = ay + s * e1y;
        let hi_i = self.h[i] + s * (self.h[i1] - self.h[i]);
        let hi_j = self.h[j] + t * (self.h[j1] - self.h[j]);
        let over_is_first = hi_i > hi_j;
        // Triple product of (xi, d_over, d_under); den is the same product
        // for (xi, d_i, d_j) scaled by positive edge lengths.
        let positive = if over_is_first { den > 0.0 } else { den < 0.0 };
        PairOutcome::Crossing {
            x,
            y,
            over_is_first,
            positive,
        }
    }
}

enum PairOutcome {
    None,
    Degenerate(NonGenericReason),
    Crossing {
        x: f64,
        y: f64,
        over_is_first: bool,
        positive: bool,
    },
}

/// Classifies `xi` for the knot under tolerance `eps`.
pub fn classify_direction(knot: &PLKnot, xi: UnitVec, eps: f64) -> Classification {
    let mut proj = Projector::new(knot);
    match proj.analyze(xi, eps, None) {
        Ok(_) => Classification::Generic,
        Err(r) => Classification::NonGeneric(r),
    }
}

/// Builds the diagram along a generic direction.
pub fn project_diagram(
    knot: &PLKnot,
    xi: UnitVec,
    eps: f64,
) -> Result<Diagram, ProjectionError> {
    let mut proj = Projector::new(knot);
    project_diagram_with(&mut proj, xi, eps)
}

fn project_diagram_with(
    proj: &mut Projector,
    xi: UnitVec,
    eps: f64,
) -> Result<Diagram, ProjectionError> {
    let mut crossings = Vec::new();
    let tait = proj
        .analyze(xi, eps, Some(&mut crossings))
        .map_err(ProjectionError::NotGeneric)?;
    // Independent sign computation as a consistency lock on the inline rule.
    for c in &crossings {
        let s = crossing_sign(proj.dirs[c.over_edge], proj.dirs[c.under_edge], xi, 0.0)
            .expect("transversal crossing directions");
        debug_assert_eq!(s, c.sign, "sign rule mismatch");
    }
    let frame = orthonormal_frame(xi);
    Ok(Diagram {
        direction: xi,
        frame,
        crossings,
        tait,
    })
}

/// Deterministic angle scramble for perturbation candidates.
fn salted_angle(salt: u64, ring: u32, leg: u32) -> f64 {
    let mut x = salt
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(u64::from(ring) << 32)
        .wrapping_add(u64::from(leg));
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^= x >> 31;
    (x as f64 / u64::MAX as f64) * std::f64::consts::TAU
}

/// Searches deterministically for a generic direction near `xi`, doubling the
/// search radius from `eps` outward and testing several angles per ring.
/// When `stay_in_component` is set, a candidate is accepted only if the short
/// geodesic from `xi` does not cross the indicatrix, so the Tait number at
/// the candidate equals the value at `xi`.
fn perturbed_generic_direction(
    proj: &mut Projector,
    ind: &Indicatrix,
    xi: UnitVec,
    eps: f64,
    salt: u64,
    stay_in_component: bool,
) -> Option<UnitVec> {
    let (t1, t2) = orthonormal_frame(xi);
    let mut radius = eps.max(1e-12) * 8.0;
    for ring in 0..40 {
        for leg in 0..8 {
            let phi = salted_angle(salt, ring, leg) + f64::from(leg) * std::f64::consts::TAU / 8.0;
            let w = t1.as_vec() * phi.cos() + t2.as_vec() * phi.sin();
            let cand = match normalize(xi.as_vec() * radius.cos() + w * radius.sin()) {
                Ok(c) => c,
                Err(_) => continue,
            };
            if proj.analyze(cand, eps, None).is_err() {
                continue;
            }
            if stay_in_component {
                let Ok(path) = GreatArc::new(xi, cand) else { continue };
                let crosses = ind.arcs().iter().any(|a| {
                    !matches!(
                        arc_pair_intersections(&path, a, eps),
                        ArcIntersection::Empty
                    )
                });
                if crosses {
                    continue;
                }
            }
            return Some(cand);
        }
        radius *= 2.0;
        if radius > 0.5 {
            return None;
        }
    }
    None
}

/// Tait number at `xi`: the signed crossing count of the diagram when `xi` is
/// generic, else the common value of the component of the indicatrix
/// complement containing `xi`, found by same-component perturbation.
///
/// Builds the indicatrix internally; for repeated queries against one knot,
/// use [`TaitEvaluator`].
pub fn tait_number(knot: &PLKnot, xi: UnitVec) -> Result<i64, ProjectionError> {
    TaitEvaluator::new(knot, EPS_GEO).tait(xi, 0)
}

/// Repeated Tait-number evaluation against a fixed knot.
pub struct TaitEvaluator {
    proj: Projector,
    ind: Indicatrix,
    eps: f64,
}

impl TaitEvaluator {
    pub fn new(knot: &PLKnot, eps: f64) -> TaitEvaluator {
        TaitEvaluator {
            proj: Projector::new(knot),
            ind: build_indicatrix(knot),
            eps,
        }
    }

    pub fn indicatrix(&self) -> &Indicatrix {
        &self.ind
    }

    /// Tait number off the indicatrix; `salt` steers the deterministic
    /// perturbation when `xi` is non-generic.
    pub fn tait(&mut self, xi: UnitVec, salt: u64) -> Result<i64, ProjectionError> {
        if let Ok(t) = self.proj.analyze(xi, self.eps, None) {
            return Ok(t);
        }
        if self.ind.contains(xi, self.eps) {
            return Err(ProjectionError::OnIndicatrix);
        }
        let cand =
            perturbed_generic_direction(&mut self.proj, &self.ind, xi, self.eps, salt, true)
                .ok_or(ProjectionError::NoGenericDirection)?;
        self.proj
            .analyze(cand, self.eps, None)
            .map_err(|_| ProjectionError::NoGenericDirection)
    }

    /// Tait number for grid and integration use: directions on the
    /// indicatrix are nudged into an adjacent component instead of failing.
    /// Returns the value and whether a perturbation was needed.
    pub fn tait_or_nudge(&mut self, xi: UnitVec, salt: u64) -> Result<(i64, bool), ProjectionError> {
        if let Ok(t) = self.proj.analyze(xi, self.eps, None) {
            return Ok((t, false));
        }
        let on_curve = self.ind.contains(xi, self.eps);
        let cand = perturbed_generic_direction(
            &mut self.proj,
            &self.ind,
            xi,
            self.eps,
            salt,
            !on_curve,
        )
        .ok_or(ProjectionError::NoGenericDirection)?;
        let t = self
            .proj
            .analyze(cand, self.eps, None)
            .map_err(|_| ProjectionError::NoGenericDirection)?;
        Ok((t, true))
    }
}

/// Tait numbers over a latitude-longitude grid of directions.
#[derive(Clone, Debug)]
pub struct TaitGrid {
    pub rows: usize,
    pub cols: usize,
    /// Row-major values; row 0 is the northernmost colatitude band.
    pub values: Vec<i64>,
    /// True where the grid direction was non-generic and was perturbed.
    pub mask: Vec<bool>,
}

impl TaitGrid {
    pub fn value(&self, i: usize, j: usize) -> i64 {
        self.values[i * self.cols + j]
    }

    pub fn masked(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.cols + j]
    }
}

/// Direction of the grid cell center (i, j): colatitude pi(i+1/2)/rows from
/// the +z pole, longitude 2pi(j+1/2)/cols from +x toward +y.
pub fn grid_direction(i: usize, j: usize, rows: usize, cols: usize) -> UnitVec {
    let theta = std::f64::consts::PI * (i as f64 + 0.5) / rows as f64;
    let phi = std::f64::consts::TAU * (j as f64 + 0.5) / cols as f64;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    normalize(Vec3::new(st * cp, st * sp, ct)).expect("nonzero grid direction")
}

/// Evaluates the Tait number at every cell center of a rows x cols grid.
pub fn tait_grid(knot: &PLKnot, rows: usize, cols: usize, eps: f64) -> TaitGrid {
    let mut ev = TaitEvaluator::new(knot, eps);
    let mut values = Vec::with_capacity(rows * cols);
    let mut mask = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let xi = grid_direction(i, j, rows, cols);
            let salt = (i as u64) * (cols as u64) + j as u64;
            let (t, perturbed) = ev
                .tait_or_nudge(xi, salt)
                .expect("perturbation search exhausted");
            values.push(t);
            mask.push(perturbed);
        }
    }
    TaitGrid {
        rows,
        cols,
        values,
        mask,
    }
}
