//! Cell decomposition of the sphere induced by the indicatrix.
//!
//! The covered portions of the indicatrix circles cut the sphere into faces
//! on which the Tait number is constant. This module builds that
//! decomposition explicitly: vertices where covered arcs meet, edges carrying
//! the algebraic pass multiplicity, and faces with areas, interior
//! representatives, and Tait offsets propagated across edges by the crossing
//! rule (crossing an edge from its south side to its north side changes the
//! Tait number by the edge's signed multiplicity).

use crate::indicatrix::{CircleCover, Indicatrix};
use crate::knot::PLKnot;
use crate::projection::TaitEvaluator;
use crate::sphere::{
    normalize, spherical_face_area, GreatArc, UnitVec, Vec3, EPS_GEO,
};
use std::collections::VecDeque;
use std::f64::consts::TAU;
use thiserror::Error;

/// Angular separation below which two events on one circle are one vertex.
const EVENT_TOL: f64 = 1e-8;
/// Chord radius for clustering candidate vertices across circles.
const CLUSTER_TOL: f64 = 1e-8;
/// Largest allowed cluster diameter before the build refuses.
const CLUSTER_DIAMETER: f64 = 5e-8;
/// Edges spanning more than this angle are subdivided so every edge arc
/// stays a strict minor arc.
const MAX_EDGE_SPAN: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum ArrangementError {
    #[error("DegenerateArrangement: {0}")]
    Degenerate(String),
    #[error("OnBoundary: direction lies on the indicatrix within tolerance")]
    OnBoundary,
    #[error(
        "InconsistentOffsets: face {face} reached with offset {found}, previously {expected}"
    )]
    InconsistentOffsets {
        face: usize,
        expected: i64,
        found: i64,
    },
}

/// A maximal sub-arc of one indicatrix circle between two arrangement
/// vertices. The reference direction runs start to end, counterclockwise
/// about the carrying circle's canonical pole; the north side of the edge is
/// where (p1 x p2) . xi > 0 for p1, p2 on the arc in reference order, which
/// is the canonical-pole side.
#[derive(Clone, Debug)]
pub struct ArrangementEdge {
    pub start: usize,
    pub end: usize,
    pub arc: GreatArc,
    /// Index of the carrying circle in the indicatrix cover list.
    pub circle: usize,
    /// Algebraic number of indicatrix passes in the reference direction.
    pub signed_multiplicity: i64,
    /// Total passes regardless of direction (always positive on an edge).
    pub geometric_multiplicity: u32,
    /// True when passes cancel exactly; the edge still separates faces but
    /// crossing it changes nothing.
    pub cancelled: bool,
    pub north_face: usize,
    pub south_face: usize,
}

/// One directed boundary element of a face: an edge traversed forward
/// (reference direction) or backward.
pub type DirectedEdge = (usize, bool);

/// A connected component of the sphere minus the indicatrix.
#[derive(Clone, Debug)]
pub struct Face {
    pub id: usize,
    /// Directed boundary walks with the face interior on the left.
    pub boundary_cycles: Vec<Vec<DirectedEdge>>,
    /// 2 minus the number of boundary cycles.
    pub euler_char: i32,
    /// Steradians.
    pub area: f64,
    /// A verified interior direction of the face.
    pub representative: UnitVec,
    /// Tait number of the face; valid once taits are assigned.
    pub tait: i64,
    /// Tait difference to the base face chosen at assignment.
    pub offset: i64,
}

pub struct Arrangement {
    vertices: Vec<UnitVec>,
    edges: Vec<ArrangementEdge>,
    faces: Vec<Face>,
    out_halves: Vec<Vec<usize>>,
    half_tangent_out: Vec<UnitVec>,
    cycle_of_half: Vec<usize>,
    face_of_cycle: Vec<usize>,
    taits_assigned: bool,
}

impl Arrangement {
    pub fn vertices(&self) -> &[UnitVec] {
        &self.vertices
    }

    pub fn edges(&self) -> &[ArrangementEdge] {
        &self.edges
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// V - E + F of the whole decomposition.
    pub fn euler_number(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn total_area(&self) -> f64 {
        self.faces.iter().map(|f| f.area).sum()
    }

    pub fn taits_assigned(&self) -> bool {
        self.taits_assigned
    }

    fn half_start(&self, h: usize) -> usize {
        let e = &self.edges[h / 2];
        if h % 2 == 0 {
            e.start
        } else {
            e.end
        }
    }

    fn half_end(&self, h: usize) -> usize {
        let e = &self.edges[h / 2];
        if h % 2 == 0 {
            e.end
        } else {
            e.start
        }
    }

    fn face_of_half(&self, h: usize) -> usize {
        self.face_of_cycle[self.cycle_of_half[h]]
    }

    /// The half-edge whose left side contains `x`, with the chord distance
    /// from `x` to the nearest edge point and whether that nearest point is
    /// interior to the arc (as opposed to an endpoint region).
    fn nearest_half(&self, x: UnitVec) -> Option<(usize, f64, bool)> {
        let xv = x.as_vec();
        let mut best: Option<(usize, f64, bool)> = None;
        for (e, edge) in self.edges.iter().enumerate() {
            let len = edge.arc.length();
            let raw = edge.arc.angle_of(x);
            let clamped = raw.clamp(0.0, len);
            let p = edge.arc.point_at_angle(clamped);
            let d = p.as_vec().dist(xv);
            if best.map_or(true, |(_, bd, _)| d < bd) {
                let interior = clamped > 1e-7 && clamped < len - 1e-7;
                let side = xv.dot(edge.arc.pole().as_vec());
                let h = if side >= 0.0 { 2 * e } else { 2 * e + 1 };
                best = Some((h, d, interior));
            }
        }
        best
    }

    /// Face id containing `x`, resolving endpoint regions via the angular
    /// wedge between spokes at the nearest vertex.
    fn face_containing(&self, x: UnitVec) -> Result<usize, ArrangementError> {
        let (h, d, interior) = self
            .nearest_half(x)
            .ok_or_else(|| ArrangementError::Degenerate("empty arrangement".into()))?;
        if d <= EPS_GEO {
            return Err(ArrangementError::OnBoundary);
        }
        if interior {
            return Ok(self.face_of_half(h));
        }
        // Nearest point is an endpoint region: find the vertex and the wedge
        // containing the direction toward x.
        let e = &self.edges[h / 2];
        let v = {
            let ds = self.vertices[e.start].as_vec().dist(x.as_vec());
            let de = self.vertices[e.end].as_vec().dist(x.as_vec());
            if ds <= de {
                e.start
            } else {
                e.end
            }
        };
        let vp = self.vertices[v].as_vec();
        let w = x.as_vec() - vp * vp.dot(x.as_vec());
        let Ok(dir) = normalize(w) else {
            // x is at the vertex antipode; every spoke wedge is equally far,
            // fall back to the side rule.
            return Ok(self.face_of_half(h));
        };
        let spokes = &self.out_halves[v];
        let ref_t = self.half_tangent_out[spokes[0]];
        let angle_from_ref = |t: UnitVec| -> f64 {
            let s = vp.dot(ref_t.cross(t));
            let c = ref_t.as_vec().dot(t.as_vec());
            s.atan2(c).rem_euclid(TAU)
        };
        let beta = angle_from_ref(dir);
        let mut best_half = spokes[0];
        let mut best_ang = f64::NEG_INFINITY;
        for &s in spokes {
            let a = angle_from_ref(self.half_tangent_out[s]);
            // Largest spoke angle not exceeding beta, cyclically.
            let rel = (beta - a).rem_euclid(TAU);
            let key = TAU - rel;
            if key > best_ang {
                best_ang = key;
                best_half = s;
            }
        }
        Ok(self.face_of_half(best_half))
    }

    /// Structured dump for debugging and external checks.
    pub fn debug_json(&self) -> serde_json::Value {
        serde_json::json!({
            "vertices": self.vertices.iter().map(|v| {
                let p = v.as_vec();
                serde_json::json!([p.x, p.y, p.z])
            }).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| serde_json::json!({
                "start": e.start,
                "end": e.end,
                "circle": e.circle,
                "signed_multiplicity": e.signed_multiplicity,
                "geometric_multiplicity": e.geometric_multiplicity,
                "cancelled": e.cancelled,
                "north_face": e.north_face,
                "south_face": e.south_face,
            })).collect::<Vec<_>>(),
            "faces": self.faces.iter().map(|f| {
                let r = f.representative.as_vec();
                serde_json::json!({
                    "id": f.id,
                    "euler_char": f.euler_char,
                    "area": f.area,
                    "representative": [r.x, r.y, r.z],
                    "tait": f.tait,
                    "offset": f.offset,
                    "cycles": f.boundary_cycles.iter()
                        .map(|c| c.len()).collect::<Vec<_>>(),
                })
            }).collect::<Vec<_>>(),
        })
    }
}

/// The face whose interior contains `xi`.
pub fn locate_face(arr: &Arrangement, xi: UnitVec) -> Result<usize, ArrangementError> {
    arr.face_containing(xi)
}

/// Tait offset of every face relative to `base`, by breadth-first traversal
/// of the face-dual graph. Crossing an edge from its south face to its north
/// face adds the edge's signed multiplicity. Any two dual paths must agree;
/// disagreement aborts.
pub fn offsets_from_base(
    arr: &Arrangement,
    base: usize,
) -> Result<Vec<i64>, ArrangementError> {
    let nf = arr.faces.len();
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); nf];
    for e in &arr.edges {
        if e.north_face == e.south_face {
            continue;
        }
        adj[e.south_face].push((e.north_face, e.signed_multiplicity));
        adj[e.north_face].push((e.south_face, -e.signed_multiplicity));
    }
    let mut offsets: Vec<Option<i64>> = vec![None; nf];
    offsets[base] = Some(0);
    let mut queue = VecDeque::from([base]);
    while let Some(f) = queue.pop_front() {
        let here = offsets[f].expect("queued faces have offsets");
        for &(g, delta) in &adj[f] {
            let there = here + delta;
            match offsets[g] {
                None => {
                    offsets[g] = Some(there);
                    queue.push_back(g);
                }
                Some(prev) if prev != there => {
                    return Err(ArrangementError::InconsistentOffsets {
                        face: g,
                        expected: prev,
                        found: there,
                    });
                }
                Some(_) => {}
            }
        }
    }
    offsets
        .into_iter()
        .enumerate()
        .map(|(f, o)| {
            o.ok_or_else(|| {
                ArrangementError::Degenerate(format!("face {f} unreachable in dual graph"))
            })
        })
        .collect()
}

/// Fills every face's offset and Tait number from the base face's directly
/// measured Tait value.
pub fn assign_taits(
    arr: &mut Arrangement,
    base: usize,
    base_tait: i64,
) -> Result<(), ArrangementError> {
    let offsets = offsets_from_base(arr, base)?;
    for (f, off) in offsets.iter().enumerate() {
        arr.faces[f].offset = *off;
        arr.faces[f].tait = base_tait + *off;
    }
    arr.taits_assigned = true;
    Ok(())
}

/// Outcome of checking one edge's crossing rule against direct projection.
#[derive(Clone, Copy, Debug)]
pub struct EdgeCheck {
    pub edge: usize,
    pub expected: i64,
    pub north_tait: i64,
    pub south_tait: i64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct CorollaryReport {
    pub checks: Vec<EdgeCheck>,
    pub all_pass: bool,
}

/// Verifies the crossing rule on every edge: the directly projected Tait
/// numbers just north and just south of the edge midpoint must differ by the
/// edge's signed multiplicity.
pub fn verify_corollary(arr: &Arrangement, knot: &PLKnot) -> CorollaryReport {
    let mut ev = TaitEvaluator::new(knot, EPS_GEO);
    let mut checks = Vec::with_capacity(arr.edges.len());
    for (idx, edge) in arr.edges.iter().enumerate() {
        let mid = edge.arc.point_at_angle(edge.arc.length() * 0.5);
        let pole = edge.arc.pole().as_vec();
        let mut result: Option<(i64, i64)> = None;
        for delta in [1e-5, 1e-6, 1e-4, 1e-7] {
            let Ok(qn) = normalize(mid.as_vec() + pole * delta) else { continue };
            let Ok(qs) = normalize(mid.as_vec() - pole * delta) else { continue };
            if arr.face_containing(qn) != Ok(edge.north_face)
                || arr.face_containing(qs) != Ok(edge.south_face)
            {
                continue;
            }
            let salt = idx as u64;
            if let (Ok(tn), Ok(ts)) = (ev.tait(qn, salt), ev.tait(qs, salt)) {
                result = Some((tn, ts));
                break;
            }
        }
        let (north_tait, south_tait, pass) = match result {
            Some((tn, ts)) => (tn, ts, tn - ts == edge.signed_multiplicity),
            None => (0, 0, false),
        };
        checks.push(EdgeCheck {
            edge: idx,
            expected: edge.signed_multiplicity,
            north_tait,
            south_tait,
            pass,
        });
    }
    let all_pass = checks.iter().all(|c| c.pass);
    CorollaryReport { checks, all_pass }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Index of the cover interval containing angle `theta` (radians, any range).
fn interval_at(cover: &CircleCover, theta: f64) -> usize {
    let t = theta.rem_euclid(TAU);
    let cuts = cover.cuts();
    let m = cuts.len();
    // Last cut at or before t, wrapping to the final interval before cuts[0].
    let mut k = m - 1;
    for (i, &c) in cuts.iter().enumerate() {
        if c <= t {
            k = i;
        } else {
            break;
        }
    }
    k
}

/// Builds the cell decomposition from the indicatrix covers.
pub fn build_arrangement(ind: &Indicatrix) -> Result<Arrangement, ArrangementError> {
    let covers = ind.covers();
    if covers.is_empty() {
        return Err(ArrangementError::Degenerate("no covered circles".into()));
    }

    // Events: cover cut angles, plus crossing points of circle pairs where
    // both circles are covered, plus splits of overlong spans.
    let mut events: Vec<Vec<f64>> = covers.iter().map(|c| c.cuts().to_vec()).collect();
    let covered_at = |c: &CircleCover, theta: f64| -> bool {
        c.geometric(interval_at(c, theta)) > 0
    };
    for a in 0..covers.len() {
        for b in (a + 1)..covers.len() {
            let axis = covers[a].pole().cross(covers[b].pole());
            if axis.norm() <= EPS_GEO {
                return Err(ArrangementError::Degenerate(format!(
                    "covers {a} and {b} share a circle"
                )));
            }
            let q = normalize(axis).expect("transversal poles");
            for cand in [q, q.antipode()] {
                let ta = covers[a].angle_of(cand);
                let tb = covers[b].angle_of(cand);
                if covered_at(&covers[a], ta) && covered_at(&covers[b], tb) {
                    events[a].push(ta);
                    events[b].push(tb);
                }
            }
        }
    }
    for (c, list) in events.iter_mut().enumerate() {
        list.sort_by(f64::total_cmp);
        list.dedup_by(|x, y| (*x - *y).abs() <= EVENT_TOL);
        if list.len() > 1 && (list[0] + TAU - list[list.len() - 1]).abs() <= EVENT_TOL {
            list.pop();
        }
        // Split covered spans that are too long for minor arcs.
        let mut extra = Vec::new();
        for k in 0..list.len() {
            let a = list[k];
            let b = if k + 1 < list.len() { list[k + 1] } else { list[0] + TAU };
            let span = b - a;
            if span > MAX_EDGE_SPAN && covered_at(&covers[c], a + span * 0.5) {
                extra.push((a + span / 3.0).rem_euclid(TAU));
                extra.push((a + span * 2.0 / 3.0).rem_euclid(TAU));
            }
        }
        list.extend(extra);
        list.sort_by(f64::total_cmp);
        list.dedup_by(|x, y| (*x - *y).abs() <= EVENT_TOL);
    }

    // Cluster event points into arrangement vertices.
    let mut pts: Vec<(usize, usize, Vec3)> = Vec::new();
    for (c, list) in events.iter().enumerate() {
        for (k, &theta) in list.iter().enumerate() {
            pts.push((c, k, covers[c].point_at_angle(theta).as_vec()));
        }
    }
    let mut uf = UnionFind::new(pts.len());
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            if pts[i].2.dist(pts[j].2) <= CLUSTER_TOL {
                uf.union(i, j);
            }
        }
    }
    let mut cluster_ids: Vec<usize> = Vec::new();
    let mut vertex_of_pt: Vec<usize> = vec![usize::MAX; pts.len()];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..pts.len() {
        let root = uf.find(i);
        let vid = match cluster_ids.iter().position(|&r| r == root) {
            Some(v) => v,
            None => {
                cluster_ids.push(root);
                members.push(Vec::new());
                cluster_ids.len() - 1
            }
        };
        vertex_of_pt[i] = vid;
        members[vid].push(i);
    }
    let mut vertices: Vec<UnitVec> = Vec::with_capacity(members.len());
    for group in &members {
        for &i in group {
            for &j in group {
                if pts[i].2.dist(pts[j].2) > CLUSTER_DIAMETER {
                    return Err(ArrangementError::Degenerate(format!(
                        "vertex cluster spans {:.3e}, tolerance collapse is inconsistent",
                        pts[i].2.dist(pts[j].2)
                    )));
                }
            }
        }
        let mut sum = Vec3::new(0.0, 0.0, 0.0);
        for &i in group {
            sum = sum + pts[i].2;
        }
        vertices.push(
            normalize(sum)
                .map_err(|_| ArrangementError::Degenerate("vertex cluster sums to zero".into()))?,
        );
    }
    let vertex_at = |c: usize, k: usize| -> usize {
        let idx = pts
            .iter()
            .position(|&(pc, pk, _)| pc == c && pk == k)
            .expect("event registered");
        vertex_of_pt[idx]
    };

    // Edges: consecutive event pairs whose midpoint is covered.
    let mut edges: Vec<ArrangementEdge> = Vec::new();
    for (c, list) in events.iter().enumerate() {
        let m = list.len();
        if m < 2 {
            // A covered circle always has at least the split points.
            if covers[c].covered_angle() > 0.0 {
                return Err(ArrangementError::Degenerate(format!(
                    "circle {c} covered but carries {m} events"
                )));
            }
            continue;
        }
        for k in 0..m {
            let a = list[k];
            let b = if k + 1 < m { list[k + 1] } else { list[0] + TAU };
            let mid = (a + b) * 0.5;
            let interval = interval_at(&covers[c], mid);
            let geo = covers[c].geometric(interval);
            if geo == 0 {
                continue;
            }
            let alg = covers[c].algebraic(interval);
            let pa = covers[c].point_at_angle(a);
            let pb = covers[c].point_at_angle(b);
            let arc = GreatArc::new(pa, pb).map_err(|e| {
                ArrangementError::Degenerate(format!("edge arc on circle {c}: {e}"))
            })?;
            debug_assert!(arc.pole().dot(covers[c].pole()) > 0.999_999);
            edges.push(ArrangementEdge {
                start: vertex_at(c, k),
                end: vertex_at(c, (k + 1) % m),
                arc,
                circle: c,
                signed_multiplicity: alg,
                geometric_multiplicity: geo,
                cancelled: alg == 0,
                north_face: usize::MAX,
                south_face: usize::MAX,
            });
        }
    }
    if edges.is_empty() {
        return Err(ArrangementError::Degenerate("no covered edges".into()));
    }

    // Half-edge tables. Half 2e runs start->end (reference direction), half
    // 2e+1 runs end->start.
    let nh = 2 * edges.len();
    let mut out_halves: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    let mut tan_out: Vec<UnitVec> = Vec::with_capacity(nh);
    let mut tan_in: Vec<UnitVec> = Vec::with_capacity(nh);
    for e in &edges {
        tan_out.push(e.arc.tangent_at_start());
        tan_in.push(e.arc.tangent_at_end());
        tan_out.push(-e.arc.tangent_at_end());
        tan_in.push(-e.arc.tangent_at_start());
    }
    for (e, edge) in edges.iter().enumerate() {
        out_halves[edge.start].push(2 * e);
        out_halves[edge.end].push(2 * e + 1);
    }

    // Next half-edge in the face walk: arriving at a vertex, take the
    // outgoing half making the largest counterclockwise angle from the
    // reversed incoming tangent; the twin only when nothing else leaves.
    let half_end = |h: usize| -> usize {
        if h % 2 == 0 {
            edges[h / 2].end
        } else {
            edges[h / 2].start
        }
    };
    let mut next: Vec<usize> = vec![usize::MAX; nh];
    for h in 0..nh {
        let v = half_end(h);
        let vp = vertices[v].as_vec();
        let back = -tan_in[h];
        let twin = h ^ 1;
        let mut best: Option<(f64, usize)> = None;
        for &cand in &out_halves[v] {
            if cand == twin {
                continue;
            }
            let u = tan_out[cand];
            let ang = vp
                .dot(back.cross(u))
                .atan2(back.as_vec().dot(u.as_vec()))
                .rem_euclid(TAU);
            let ang = if ang <= 1e-12 { TAU } else { ang };
            if best.map_or(true, |(ba, _)| ang > ba) {
                best = Some((ang, cand));
            }
        }
        next[h] = best.map_or(twin, |(_, c)| c);
    }

    // Trace boundary cycles (face interior on the left of each half).
    let mut cycle_of_half: Vec<usize> = vec![usize::MAX; nh];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for h0 in 0..nh {
        if cycle_of_half[h0] != usize::MAX {
            continue;
        }
        let id = cycles.len();
        let mut walk = Vec::new();
        let mut h = h0;
        loop {
            if cycle_of_half[h] != usize::MAX {
                return Err(ArrangementError::Degenerate(
                    "half-edge revisited during face walk".into(),
                ));
            }
            cycle_of_half[h] = id;
            walk.push(h);
            h = next[h];
            if h == h0 {
                break;
            }
        }
        cycles.push(walk);
    }

    // Connected components of the covered graph.
    let mut vf = UnionFind::new(vertices.len());
    for e in &edges {
        vf.union(e.start, e.end);
    }
    let mut comp_roots: Vec<usize> = Vec::new();
    let mut comp_of_vertex: Vec<usize> = vec![usize::MAX; vertices.len()];
    for v in 0..vertices.len() {
        let root = vf.find(v);
        let c = match comp_roots.iter().position(|&r| r == root) {
            Some(c) => c,
            None => {
                comp_roots.push(root);
                comp_roots.len() - 1
            }
        };
        comp_of_vertex[v] = c;
    }
    let ncomp = comp_roots.len();
    let comp_of_cycle: Vec<usize> = cycles
        .iter()
        .map(|walk| {
            let h = walk[0];
            let e = &edges[h / 2];
            comp_of_vertex[e.start]
        })
        .collect();

    // An interior probe point just left of each cycle's longest half.
    let left_probe = |h: usize, delta: f64| -> Option<UnitVec> {
        let e = &edges[h / 2];
        let mid = e.arc.point_at_angle(e.arc.length() * 0.5);
        let pole = e.arc.pole().as_vec();
        let sign = if h % 2 == 0 { 1.0 } else { -1.0 };
        normalize(mid.as_vec() + pole * (sign * delta)).ok()
    };
    let nearest_half_among = |x: UnitVec, allow: &dyn Fn(usize) -> bool| -> Option<(usize, f64)> {
        let xv = x.as_vec();
        let mut best: Option<(usize, f64)> = None;
        for (e, edge) in edges.iter().enumerate() {
            if !allow(e) {
                continue;
            }
            let len = edge.arc.length();
            let clamped = edge.arc.angle_of(x).clamp(0.0, len);
            let p = edge.arc.point_at_angle(clamped);
            let d = p.as_vec().dist(xv);
            if best.map_or(true, |(_, bd)| d < bd) {
                let side = xv.dot(edge.arc.pole().as_vec());
                let h = if side >= 0.0 { 2 * e } else { 2 * e + 1 };
                best = Some((h, d));
            }
        }
        best
    };
    let mut cycle_probe: Vec<UnitVec> = Vec::with_capacity(cycles.len());
    for walk in &cycles {
        let mut halves: Vec<usize> = walk.clone();
        halves.sort_by(|&a, &b| {
            edges[b / 2]
                .arc
                .length()
                .total_cmp(&edges[a / 2].arc.length())
        });
        let mut found = None;
        'search: for &h in halves.iter().take(6) {
            for delta in [1e-5, 1e-6, 1e-7] {
                let Some(q) = left_probe(h, delta) else { continue };
                if let Some((nh_, _)) = nearest_half_among(q, &|_| true) {
                    if cycle_of_half[nh_] == cycle_of_half[h] {
                        found = Some(q);
                        break 'search;
                    }
                }
            }
        }
        let q = found.ok_or_else(|| {
            ArrangementError::Degenerate("no valid interior probe for a boundary cycle".into())
        })?;
        cycle_probe.push(q);
    }

    // Group cycles into faces. With one graph component every cycle bounds
    // its own face; otherwise cycles from different components that contain
    // each other's probes bound a common face.
    let mut cf = UnionFind::new(cycles.len());
    if ncomp > 1 {
        let region_of = |x: UnitVec, comp: usize| -> Option<usize> {
            nearest_half_among(x, &|e| comp_of_vertex[edges[e].start] == comp)
                .map(|(h, _)| cycle_of_half[h])
        };
        for ci in 0..cycles.len() {
            for cj in (ci + 1)..cycles.len() {
                if comp_of_cycle[ci] == comp_of_cycle[cj] {
                    continue;
                }
                let a = region_of(cycle_probe[ci], comp_of_cycle[cj]);
                let b = region_of(cycle_probe[cj], comp_of_cycle[ci]);
                if a == Some(cj) && b == Some(ci) {
                    cf.union(ci, cj);
                }
            }
        }
    }
    let mut face_roots: Vec<usize> = Vec::new();
    let mut face_of_cycle: Vec<usize> = vec![usize::MAX; cycles.len()];
    for c in 0..cycles.len() {
        let root = cf.find(c);
        let f = match face_roots.iter().position(|&r| r == root) {
            Some(f) => f,
            None => {
                face_roots.push(root);
                face_roots.len() - 1
            }
        };
        face_of_cycle[c] = f;
    }
    let expected_faces =
        1 + ncomp as i64 + edges.len() as i64 - vertices.len() as i64;
    if face_roots.len() as i64 != expected_faces {
        return Err(ArrangementError::Degenerate(format!(
            "face count {} does not match V-E accounting {}",
            face_roots.len(),
            expected_faces
        )));
    }

    // Assemble faces: boundary cycles, Euler characteristic, area,
    // representative.
    let mut faces: Vec<Face> = Vec::with_capacity(face_roots.len());
    for f in 0..face_roots.len() {
        let cycle_ids: Vec<usize> = (0..cycles.len())
            .filter(|&c| face_of_cycle[c] == f)
            .collect();
        let euler_char = 2 - cycle_ids.len() as i32;
        let mut cycles_arcs: Vec<Vec<GreatArc>> = Vec::new();
        let mut boundary_cycles: Vec<Vec<DirectedEdge>> = Vec::new();
        for &c in &cycle_ids {
            let mut arcs = Vec::with_capacity(cycles[c].len());
            let mut dirs = Vec::with_capacity(cycles[c].len());
            for &h in &cycles[c] {
                let e = h / 2;
                let forward = h % 2 == 0;
                arcs.push(if forward {
                    edges[e].arc
                } else {
                    edges[e].arc.reversed()
                });
                dirs.push((e, forward));
            }
            cycles_arcs.push(arcs);
            boundary_cycles.push(dirs);
        }
        let area = spherical_face_area(&cycles_arcs, euler_char)
            .map_err(|e| ArrangementError::Degenerate(format!("face area: {e}")))?;
        if area < -1e-6 {
            return Err(ArrangementError::Degenerate(format!(
                "face {f} has negative area {area:.3e}"
            )));
        }

        // Area-weighted centroid direction from the boundary integral: the
        // integral of the position over the face equals half the sum of
        // directed pole vectors weighted by arc length.
        let mut centroid = Vec3::new(0.0, 0.0, 0.0);
        for &c in &cycle_ids {
            for &h in &cycles[c] {
                let e = &edges[h / 2];
                let sign = if h % 2 == 0 { 1.0 } else { -1.0 };
                centroid = centroid + e.arc.pole().as_vec() * (sign * e.arc.length());
            }
        }
        let seed = normalize(centroid).unwrap_or(cycle_probe[cycle_ids[0]]);
        let cap = (area / std::f64::consts::PI).sqrt().clamp(0.05, 1.2);
        let mut representative = None;
        'rep: for ring in 0..20 {
            let r = cap * 0.75_f64.powi(ring);
            let (t1, t2) = crate::sphere::orthonormal_frame(seed);
            for leg in 0..8 {
                let phi = f64::from(leg) * TAU / 8.0 + f64::from(ring) * 0.37;
                let w = t1.as_vec() * phi.cos() + t2.as_vec() * phi.sin();
                let Ok(q) = normalize(seed.as_vec() * r.cos() + w * r.sin()) else {
                    continue;
                };
                if let Some((h, d)) = nearest_half_among(q, &|_| true) {
                    if d >= 1e-7 && face_of_cycle[cycle_of_half[h]] == f {
                        representative = Some(q);
                        break 'rep;
                    }
                }
            }
        }
        let representative = representative.unwrap_or(cycle_probe[cycle_ids[0]]);
        faces.push(Face {
            id: f,
            boundary_cycles,
            euler_char,
            area,
            representative,
            tait: 0,
            offset: 0,
        });
    }

    // North and south faces per edge: the forward half has the
    // canonical-pole side on its left.
    for (e, edge) in edges.iter_mut().enumerate() {
        edge.north_face = face_of_cycle[cycle_of_half[2 * e]];
        edge.south_face = face_of_cycle[cycle_of_half[2 * e + 1]];
    }

    Ok(Arrangement {
        vertices,
        edges,
        faces,
        out_halves,
        half_tangent_out: tan_out,
        cycle_of_half,
        face_of_cycle,
        taits_assigned: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indicatrix::build_indicatrix;
    use crate::knot::{build_pl_knot, parse_lattice};
    use crate::projection::tait_number;
    use crate::sphere::sample_uniform_direction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn square_knot() -> PLKnot {
        build_pl_knot(
            &[
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            1e-9,
        )
        .unwrap()
    }

    fn arrangement_of(knot: &PLKnot) -> Arrangement {
        build_arrangement(&build_indicatrix(knot)).unwrap()
    }

    fn random_knot(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> PLKnot {
        loop {
            let n = rng.random_range(lo..=hi);
            let verts: Vec<Vec3> = (0..n)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            if let Ok(k) = build_pl_knot(&verts, 1e-9) {
                if k.num_edges() >= lo {
                    return k;
                }
            }
        }
    }

    #[test]
    fn planar_square_structure() {
        let arr = arrangement_of(&square_knot());
        assert_eq!(arr.num_vertices(), 8);
        assert_eq!(arr.num_edges(), 8);
        assert_eq!(arr.num_faces(), 2);
        assert_eq!(arr.euler_number(), 2);
        for f in arr.faces() {
            assert!((f.area - 2.0 * PI).abs() < 1e-9, "area {}", f.area);
            assert_eq!(f.euler_char, 1);
        }
        for e in arr.edges() {
            assert_eq!(e.signed_multiplicity, 0);
            assert!(e.cancelled);
            assert_eq!(e.geometric_multiplicity, 2);
        }
        assert!((arr.total_area() - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn planar_square_offsets_are_zero() {
        let mut arr = arrangement_of(&square_knot());
        let offs = offsets_from_base(&arr, 0).unwrap();
        assert_eq!(offs, vec![0, 0]);
        assign_taits(&mut arr, 0, 0).unwrap();
        assert!(arr.faces().iter().all(|f| f.tait == 0 && f.offset == 0));
    }

    #[test]
    fn staircase_hexagon_structure() {
        let lk = parse_lattice("RRFFUULLBBDD").unwrap();
        let arr = arrangement_of(lk.knot());
        assert_eq!(arr.num_vertices(), 6);
        assert_eq!(arr.num_edges(), 6);
        assert_eq!(arr.num_faces(), 2);
        assert_eq!(arr.euler_number(), 2);
        for f in arr.faces() {
            assert!((f.area - 2.0 * PI).abs() < 1e-9, "area {}", f.area);
        }
        assert!(arr.edges().iter().all(|e| e.cancelled));
        let offs = offsets_from_base(&arr, 1).unwrap();
        assert_eq!(offs, vec![0, 0]);
    }

    #[test]
    fn full_coverage_walk_gives_octants() {
        let lk = parse_lattice("RDBLDDFURRBUULLLFR").unwrap();
        let arr = arrangement_of(lk.knot());
        assert_eq!(arr.num_vertices(), 6);
        assert_eq!(arr.num_edges(), 12);
        assert_eq!(arr.num_faces(), 8);
        assert_eq!(arr.euler_number(), 2);
        for f in arr.faces() {
            assert!(
                (f.area - PI / 2.0).abs() < 1e-9,
                "octant area {}",
                f.area
            );
            assert_eq!(f.boundary_cycles.len(), 1);
            assert_eq!(f.boundary_cycles[0].len(), 3);
        }
        assert!((arr.total_area() - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn octant_taits_match_direct_projection() {
        let lk = parse_lattice("RDBLDDFURRBUULLLFR").unwrap();
        let knot = lk.knot().clone();
        let mut arr = arrangement_of(&knot);
        let base = 0;
        let base_tait = tait_number(&knot, arr.faces()[base].representative).unwrap();
        assign_taits(&mut arr, base, base_tait).unwrap();
        // Frozen values per octant, computed by an independent exact-integer
        // implementation of the projection count.
        let expect = |sx: f64, sy: f64, sz: f64| -> i64 {
            match (sx > 0.0, sy > 0.0, sz > 0.0) {
                (true, true, true) => 2,
                (true, true, false) => 2,
                (false, false, true) => 2,
                (false, false, false) => 2,
                _ => 0,
            }
        };
        for f in arr.faces() {
            let r = f.representative.as_vec();
            assert_eq!(
                f.tait,
                expect(r.x, r.y, r.z),
                "octant ({:+.2},{:+.2},{:+.2})",
                r.x,
                r.y,
                r.z
            );
            let direct = tait_number(&knot, f.representative).unwrap();
            assert_eq!(f.tait, direct);
        }
    }

    #[test]
    fn locate_face_round_trips_and_finds_octant() {
        let lk = parse_lattice("RDBLDDFURRBUULLLFR").unwrap();
        let arr = arrangement_of(lk.knot());
        for f in arr.faces() {
            assert_eq!(locate_face(&arr, f.representative).unwrap(), f.id);
        }
        let diag = normalize(Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let id = locate_face(&arr, diag).unwrap();
        let r = arr.faces()[id].representative.as_vec();
        assert!(r.x > 0.0 && r.y > 0.0 && r.z > 0.0);
        assert_eq!(
            locate_face(&arr, UnitVec::PLUS_X),
            Err(ArrangementError::OnBoundary)
        );
    }

    #[test]
    fn offsets_are_base_independent() {
        let lk = parse_lattice("LBURBLUFRFRDFLDB").unwrap();
        let arr = arrangement_of(lk.knot());
        let off0 = offsets_from_base(&arr, 0).unwrap();
        let off3 = offsets_from_base(&arr, 3).unwrap();
        let shift = off0[3];
        for f in 0..arr.num_faces() {
            assert_eq!(off0[f] - off3[f], shift);
        }
    }

    #[test]
    fn crossing_rule_verified_on_lattice_fixtures() {
        for moves in ["RDBLDDFURRBUULLLFR", "LBURBLUFRFRDFLDB", "RRFFUULLBBDD"] {
            let lk = parse_lattice(moves).unwrap();
            let arr = arrangement_of(lk.knot());
            let report = verify_corollary(&arr, lk.knot());
            assert!(report.all_pass, "crossing rule failed for {moves}");
        }
    }

    #[test]
    fn random_knots_satisfy_global_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for round in 0..8 {
            let knot = random_knot(&mut rng, 5, 8);
            let mut arr = arrangement_of(&knot);
            assert_eq!(arr.euler_number(), 2, "round {round}");
            assert!(
                (arr.total_area() - 4.0 * PI).abs() < 1e-8,
                "round {round}: area {}",
                arr.total_area()
            );
            let base_tait = tait_number(&knot, arr.faces()[0].representative).unwrap();
            assign_taits(&mut arr, 0, base_tait).unwrap();
            for f in arr.faces() {
                let direct = tait_number(&knot, f.representative).unwrap();
                assert_eq!(f.tait, direct, "round {round} face {}", f.id);
            }
        }
    }

    #[test]
    fn random_knot_crossing_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..4 {
            let knot = random_knot(&mut rng, 5, 7);
            let arr = arrangement_of(&knot);
            let report = verify_corollary(&arr, &knot);
            assert!(report.all_pass);
        }
    }

    #[test]
    fn antipodal_faces_pair_up() {
        let lk = parse_lattice("LBURBLUFRFRDFLDB").unwrap();
        let knot = lk.knot().clone();
        let mut arr = arrangement_of(&knot);
        let base_tait = tait_number(&knot, arr.faces()[0].representative).unwrap();
        assign_taits(&mut arr, 0, base_tait).unwrap();
        for f in arr.faces() {
            let anti = locate_face(&arr, f.representative.antipode()).unwrap();
            let g = &arr.faces()[anti];
            assert!((f.area - g.area).abs() < 1e-6);
            assert_eq!(f.tait, g.tait);
        }
    }

    #[test]
    fn random_directions_locate_consistently_with_projection() {
        let lk = parse_lattice("RDBLDDFURRBUULLLFR").unwrap();
        let knot = lk.knot().clone();
        let mut arr = arrangement_of(&knot);
        let base_tait = tait_number(&knot, arr.faces()[0].representative).unwrap();
        assign_taits(&mut arr, 0, base_tait).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        while checked < 200 {
            let xi = sample_uniform_direction(&mut rng);
            let (Ok(face), Ok(direct)) = (locate_face(&arr, xi), tait_number(&knot, xi))
            else {
                continue;
            };
            assert_eq!(arr.faces()[face].tait, direct);
            checked += 1;
        }
    }

    #[test]
    fn debug_json_shape() {
        let arr = arrangement_of(&square_knot());
        let j = arr.debug_json();
        assert_eq!(j["vertices"].as_array().unwrap().len(), 8);
        assert_eq!(j["edges"].as_array().unwrap().len(), 8);
        assert_eq!(j["faces"].as_array().unwrap().len(), 2);
    }
}
