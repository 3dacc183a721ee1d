//! The direction indicatrix of a polygonal knot: for each pair of consecutive
//! edge directions the minor great-circle arc joining them, together with the
//! antipodal image of that whole curve, traversed in reverse. Reversing the
//! knot's orientation negates every edge direction and reverses their cyclic
//! order, which is exactly the antipodal image; keeping both halves makes the
//! structure orientation-free.
//!
//! Arcs that share a great circle are merged into per-circle covers carrying
//! the algebraic pass count of every maximal sub-arc: +1 for each traversal
//! counterclockwise around the circle's canonical pole, -1 for each traversal
//! the other way. These counts are the Tait-number jumps across the curve.

use crate::knot::{edge_directions, PLKnot};
use crate::sphere::{normalize, orthonormal_frame, GreatArc, UnitVec, EPS_GEO};
use std::f64::consts::TAU;

/// All arcs lying on one great circle, split at every arc endpoint into
/// elementary intervals with algebraic and geometric pass counts.
#[derive(Clone, Debug)]
pub struct CircleCover {
    /// Canonical unit normal of the circle (largest-magnitude coordinate
    /// positive), fixing the counterclockwise reference direction.
    pole: UnitVec,
    /// Angle origin on the circle.
    axis_u: UnitVec,
    /// Quarter-turn counterclockwise from `axis_u`.
    axis_v: UnitVec,
    /// Sorted cut angles in [0, 2pi); interval k spans cuts[k] to cuts[k+1]
    /// counterclockwise, cyclically.
    cuts: Vec<f64>,
    /// Net signed passes over each interval, counterclockwise positive.
    algebraic: Vec<i64>,
    /// Unsigned number of passes over each interval; 0 marks a gap that is
    /// not part of the indicatrix.
    geometric: Vec<u32>,
}

impl CircleCover {
    pub fn pole(&self) -> UnitVec {
        self.pole
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn num_intervals(&self) -> usize {
        self.cuts.len()
    }

    pub fn algebraic(&self, k: usize) -> i64 {
        self.algebraic[k]
    }

    pub fn geometric(&self, k: usize) -> u32 {
        self.geometric[k]
    }

    /// Counterclockwise angular extent of interval k.
    pub fn interval_span(&self, k: usize) -> (f64, f64) {
        let a = self.cuts[k];
        let b = self.cuts[(k + 1) % self.cuts.len()];
        let mut w = b - a;
        if w <= 0.0 {
            w += TAU;
        }
        (a, w)
    }

    /// Point on the circle at the given angle from the origin axis.
    pub fn point_at_angle(&self, theta: f64) -> UnitVec {
        let (s, c) = theta.sin_cos();
        normalize(self.axis_u.as_vec() * c + self.axis_v.as_vec() * s)
            .expect("unit circle point")
    }

    /// Angle of a point, meaningful when the point is near the circle.
    pub fn angle_of(&self, p: UnitVec) -> f64 {
        let v = p.as_vec();
        let a = v.dot(self.axis_v.as_vec()).atan2(v.dot(self.axis_u.as_vec()));
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    }

    /// Total counterclockwise angle covered by at least one pass.
    pub fn covered_angle(&self) -> f64 {
        (0..self.num_intervals())
            .filter(|&k| self.geometric[k] > 0)
            .map(|k| self.interval_span(k).1)
            .sum()
    }
}

/// The indicatrix: raw directed arcs and their per-circle multiplicity covers.
#[derive(Clone, Debug)]
pub struct Indicatrix {
    arcs: Vec<GreatArc>,
    covers: Vec<CircleCover>,
}

impl Indicatrix {
    /// Directed arcs: the curve through the edge directions first, then its
    /// reverse-oriented antipodal image. Length is twice the edge count.
    pub fn arcs(&self) -> &[GreatArc] {
        &self.arcs
    }

    pub fn covers(&self) -> &[CircleCover] {
        &self.covers
    }

    /// Whether `xi` lies on the indicatrix within `eps`. Projection along a
    /// direction is locally injective exactly off the indicatrix.
    pub fn contains(&self, xi: UnitVec, eps: f64) -> bool {
        self.arcs.iter().any(|a| a.contains_point(xi, eps))
    }

    /// Arcs and multiplicities as a JSON-friendly structure.
    pub fn debug_json(&self) -> serde_json::Value {
        let circles: Vec<serde_json::Value> = self
            .covers
            .iter()
            .map(|c| {
                let intervals: Vec<serde_json::Value> = (0..c.num_intervals())
                    .filter(|&k| c.geometric(k) > 0)
                    .map(|k| {
                        let (a, w) = c.interval_span(k);
                        serde_json::json!({
                            "from": <[f64; 3]>::from(c.point_at_angle(a).as_vec()),
                            "to": <[f64; 3]>::from(c.point_at_angle(a + w).as_vec()),
                            "algebraic": c.algebraic(k),
                            "geometric": c.geometric(k),
                        })
                    })
                    .collect();
                serde_json::json!({
                    "pole": <[f64; 3]>::from(c.pole().as_vec()),
                    "sub_arcs": intervals,
                })
            })
            .collect();
        serde_json::json!({ "circles": circles })
    }
}

/// Builds the indicatrix of a valid knot.
pub fn build_indicatrix(knot: &PLKnot) -> Indicatrix {
    let dirs = edge_directions(knot);
    let n = dirs.len();
    let mut arcs = Vec::with_capacity(2 * n);
    for i in 0..n {
        let next = dirs[(i + 1) % n];
        arcs.push(GreatArc::new(dirs[i], next).expect("validated consecutive directions"));
    }
    for i in 0..n {
        let next = dirs[(i + 1) % n];
        arcs.push(
            GreatArc::new(next.antipode(), dirs[i].antipode())
                .expect("antipodal image of a valid arc"),
        );
    }
    let covers = build_covers(&arcs);
    Indicatrix { arcs, covers }
}

/// Flips a pole so its largest-magnitude coordinate is positive.
fn canonical_pole(p: UnitVec) -> UnitVec {
    let v = p.as_vec();
    let (ax, ay, az) = (v.x.abs(), v.y.abs(), v.z.abs());
    let lead = if ax >= ay && ax >= az {
        v.x
    } else if ay >= az {
        v.y
    } else {
        v.z
    };
    if lead < 0.0 {
        p.antipode()
    } else {
        p
    }
}

fn build_covers(arcs: &[GreatArc]) -> Vec<CircleCover> {
    // Group arcs by carrying circle. Quadratic, fine at desk scale.
    let mut groups: Vec<(UnitVec, Vec<usize>)> = Vec::new();
    for (i, arc) in arcs.iter().enumerate() {
        let p = arc.pole();
        match groups
            .iter_mut()
            .find(|(gp, _)| gp.cross(p).norm() <= EPS_GEO)
        {
            Some((_, members)) => members.push(i),
            None => groups.push((canonical_pole(p), vec![i])),
        }
    }

    groups
        .into_iter()
        .map(|(pole, members)| {
            let (axis_u, axis_v) = circle_frame(pole);
            let angle_of = |p: UnitVec| -> f64 {
                let v = p.as_vec();
                let a = v.dot(axis_v.as_vec()).atan2(v.dot(axis_u.as_vec()));
                if a < 0.0 {
                    a + TAU
                } else {
                    a
                }
            };
            // Every arc endpoint is a cut.
            let mut cuts: Vec<f64> = Vec::with_capacity(2 * members.len());
            for &i in &members {
                cuts.push(angle_of(arcs[i].start()));
                cuts.push(angle_of(arcs[i].end()));
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|b, a| (*b - *a).abs() <= EPS_GEO);
            if cuts.len() > 1 {
                // Angles 0 and 2pi are the same cut.
                let wrap = cuts[0] + TAU - cuts[cuts.len() - 1];
                if wrap.abs() <= EPS_GEO {
                    cuts.pop();
                }
            }

            // Accumulate pass counts on each elementary interval's midpoint.
            let m = cuts.len();
            let mut algebraic = vec![0i64; m];
            let mut geometric = vec![0u32; m];
            for k in 0..m {
                let a = cuts[k];
                let b = cuts[(k + 1) % m];
                let width = if b > a { b - a } else { b - a + TAU };
                let mid = a + 0.5 * width;
                for &i in &members {
                    let arc = &arcs[i];
                    let ccw = arc.pole().dot(pole) > 0.0;
                    let theta_start = angle_of(arc.start());
                    // Counterclockwise start of the covered set.
                    let s0 = if ccw {
                        theta_start
                    } else {
                        theta_start - arc.length()
                    };
                    let rel = (mid - s0).rem_euclid(TAU);
                    if rel <= arc.length() {
                        geometric[k] += 1;
                        algebraic[k] += if ccw { 1 } else { -1 };
                    }
                }
            }
            CircleCover {
                pole,
                axis_u,
                axis_v,
                cuts,
                algebraic,
                geometric,
            }
        })
        .collect()
}

/// Frame (u, v) on the circle with pole `p`: points at angle theta are
/// cos(theta) u + sin(theta) v, counterclockwise around p.
fn circle_frame(pole: UnitVec) -> (UnitVec, UnitVec) {
    let (u, v) = orthonormal_frame(pole);
    debug_assert!(u.cross(v).dot(pole.as_vec()) > 0.99);
    (u, v)
}
