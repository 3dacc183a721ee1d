//! Closed polygonal space curves and their cubic-lattice specialization:
//! construction, validation, file parsing, and edge-direction extraction.

use crate::sphere::{normalize, UnitVec, Vec3, EPS_LEN};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KnotError {
    #[error("NotClosedDegenerate: fewer than 3 vertices remain after merging collinear edges")]
    NotClosedDegenerate,
    #[error("ZeroEdge: edge {index} has length <= {eps:e}")]
    ZeroEdge { index: usize, eps: f64 },
    #[error("Backtracking: edges {index} and {} are anti-parallel", index + 1)]
    Backtracking { index: usize },
    #[error("SelfIntersecting: non-adjacent edges {e1} and {e2} come within tolerance")]
    SelfIntersecting { e1: usize, e2: usize },
    #[error("BadCharacter: '{ch}' at position {pos}, expected one of R L U D F B")]
    BadCharacter { ch: char, pos: usize },
    #[error("NotClosed: walk ends at ({x}, {y}, {z}), not at the origin")]
    NotClosed { x: i64, y: i64, z: i64 },
    #[error("InvalidCoordinate: vertex {index} has a non-finite coordinate")]
    InvalidCoordinate { index: usize },
    #[error("BadFormat: {0}")]
    BadFormat(String),
}

/// A closed embedded polygon in R^3. Vertex i connects to vertex i+1, and the
/// last vertex connects back to the first. Adjacent edges are never collinear,
/// every edge has positive length, and non-adjacent edges are disjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct PLKnot {
    vertices: Vec<Vec3>,
}

impl PLKnot {
    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }

    /// Endpoints of edge i, namely vertices i and i+1 (cyclic).
    pub fn edge(&self, i: usize) -> (Vec3, Vec3) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    pub fn edge_vector(&self, i: usize) -> Vec3 {
        let (a, b) = self.edge(i);
        b - a
    }

    /// The same curve traversed in the opposite direction.
    pub fn reversed(&self) -> PLKnot {
        let mut v = self.vertices.clone();
        v[1..].reverse();
        PLKnot { vertices: v }
    }

    /// Applies a point transform to every vertex and rebuilds.
    pub fn transformed(
        &self,
        f: impl Fn(Vec3) -> Vec3,
        eps: f64,
    ) -> Result<PLKnot, KnotError> {
        build_pl_knot(&self.vertices.iter().map(|&p| f(p)).collect::<Vec<_>>(), eps)
    }
}

/// Validates and normalizes a closed polygon: collinear adjacent edges are
/// merged, then closure, edge lengths, backtracking, and embeddedness are
/// checked. Vertex order is preserved apart from merged vertices.
pub fn build_pl_knot(vertices: &[Vec3], eps: f64) -> Result<PLKnot, KnotError> {
    for (i, v) in vertices.iter().enumerate() {
        if !v.is_finite() {
            return Err(KnotError::InvalidCoordinate { index: i });
        }
    }
    if vertices.len() < 3 {
        return Err(KnotError::NotClosedDegenerate);
    }
    let eps_len = eps.max(EPS_LEN);
    let mut v: Vec<Vec3> = vertices.to_vec();

    // Zero edges are rejected rather than merged, so duplicated input points
    // surface as errors instead of silently changing the model.
    let n = v.len();
    for i in 0..n {
        if (v[(i + 1) % n] - v[i]).norm() <= eps_len {
            return Err(KnotError::ZeroEdge { index: i, eps: eps_len });
        }
    }

    // Merge collinear continuations until stable; merging takes priority
    // over reporting reversals so that degenerate flat polygons collapse
    // before the anti-parallel check fires.
    'merge: loop {
        if v.len() < 3 {
            return Err(KnotError::NotClosedDegenerate);
        }
        let n = v.len();
        let mut reversal = None;
        for i in 0..n {
            let prev = v[(i + n - 1) % n];
            let here = v[i];
            let next = v[(i + 1) % n];
            let d1 = here - prev;
            let d2 = next - here;
            if d1.cross(d2).norm() <= eps * d1.norm() * d2.norm() {
                if d1.dot(d2) > 0.0 {
                    v.remove(i);
                    continue 'merge;
                }
                reversal.get_or_insert((i + n - 1) % n);
            }
        }
        if let Some(index) = reversal {
            return Err(KnotError::Backtracking { index });
        }
        break;
    }

    // Embedding: non-adjacent edges must stay apart. Adjacent pairs are
    // already safe, two non-parallel segments sharing an endpoint meet only
    // there.
    let n = v.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let d = segment_distance(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]);
            if d <= eps_len {
                return Err(KnotError::SelfIntersecting { e1: i, e2: j });
            }
        }
    }
    Ok(PLKnot { vertices: v })
}

/// Treats the points as samples along a closed curve and builds the polygon
/// through them. The polygon's writhe approximates the sampled curve's writhe
/// as the sampling refines; no error bound is claimed.
pub fn sample_closed_curve(points: &[Vec3], eps: f64) -> Result<PLKnot, KnotError> {
    build_pl_knot(points, eps)
}

/// Unit direction of every edge, in cyclic order. Consecutive entries are
/// never equal or antipodal on a valid knot.
pub fn edge_directions(knot: &PLKnot) -> Vec<UnitVec> {
    (0..knot.num_edges())
        .map(|i| normalize(knot.edge_vector(i)).expect("validated edge length"))
        .collect()
}

/// Minimum distance between segments [p1,p2] and [q1,q2].
fn segment_distance(p1: Vec3, p2: Vec3, q1: Vec3, q2: Vec3) -> f64 {
    // Clamped closest-point computation on the two parameter intervals.
    let d1 = p2 - p1;
    let d2 = q2 - q1;
    let r = p1 - q1;
    let a = d1.norm2();
    let e = d2.norm2();
    let f = d2.dot(r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return r.norm();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    ((p1 + d1 * s) - (q1 + d2 * t)).norm()
}

/// A closed self-avoiding walk on the cubic lattice, stored as its move
/// string and as the polygon through its corner points.
#[derive(Clone, Debug)]
pub struct LatticeKnot {
    moves: String,
    knot: PLKnot,
}

impl LatticeKnot {
    pub fn moves(&self) -> &str {
        &self.moves
    }

    pub fn knot(&self) -> &PLKnot {
        &self.knot
    }
}

fn step_of(ch: char) -> Option<(i64, i64, i64)> {
    // R/L move along x, F/B along y, U/D along z.
    match ch {
        'R' => Some((1, 0, 0)),
        'L' => Some((-1, 0, 0)),
        'F' => Some((0, 1, 0)),
        'B' => Some((0, -1, 0)),
        'U' => Some((0, 0, 1)),
        'D' => Some((0, 0, -1)),
        _ => None,
    }
}

/// Parses a move string over R L U D F B (whitespace ignored) into a closed
/// self-avoiding lattice polygon anchored at the origin.
pub fn parse_lattice(moves: &str) -> Result<LatticeKnot, KnotError> {
    let mut cleaned = String::new();
    let mut steps: Vec<(i64, i64, i64)> = Vec::new();
    for (pos, ch) in moves.chars().enumerate() {
        if ch.is_whitespace() {
            continue;
        }
        match step_of(ch) {
            Some(s) => {
                cleaned.push(ch);
                steps.push(s);
            }
            None => return Err(KnotError::BadCharacter { ch, pos }),
        }
    }
    if steps.is_empty() {
        return Err(KnotError::BadFormat("empty move string".into()));
    }
    let n = steps.len();
    for i in 0..n {
        let (a, b) = (steps[i], steps[(i + 1) % n]);
        if a.0 + b.0 == 0 && a.1 + b.1 == 0 && a.2 + b.2 == 0 {
            return Err(KnotError::Backtracking { index: i });
        }
    }
    let mut pos = (0i64, 0i64, 0i64);
    let mut path = vec![pos];
    for s in &steps {
        pos = (pos.0 + s.0, pos.1 + s.1, pos.2 + s.2);
        path.push(pos);
    }
    if pos != (0, 0, 0) {
        return Err(KnotError::NotClosed { x: pos.0, y: pos.1, z: pos.2 });
    }
    path.pop();
    let mut seen = std::collections::HashSet::with_capacity(path.len());
    for p in &path {
        if !seen.insert(*p) {
            return Err(KnotError::SelfIntersecting { e1: 0, e2: 0 });
        }
    }
    let verts: Vec<Vec3> = path
        .iter()
        .map(|&(x, y, z)| Vec3::new(x as f64, y as f64, z as f64))
        .collect();
    let knot = build_pl_knot(&verts, 1e-12)?;
    Ok(LatticeKnot { moves: cleaned, knot })
}

/// Parses the JSON knot format: an object with a "vertices" array of [x,y,z]
/// triples; the cycle closes implicitly from the last vertex to the first.
pub fn parse_knot_json(text: &str, eps: f64) -> Result<PLKnot, KnotError> {
    #[derive(serde::Deserialize)]
    struct KnotFile {
        vertices: Vec<[f64; 3]>,
    }
    let file: KnotFile =
        serde_json::from_str(text).map_err(|e| KnotError::BadFormat(e.to_string()))?;
    let verts: Vec<Vec3> = file.vertices.into_iter().map(Vec3::from).collect();
    build_pl_knot(&verts, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{rotate_about, sample_uniform_direction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Vec<Vec3> {
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ]
    }

    #[test]
    fn square_is_valid() {
        let k = build_pl_knot(&square(), 1e-9).unwrap();
        assert_eq!(k.num_edges(), 4);
    }

    #[test]
    fn midpoint_vertex_merges() {
        let mut v = square();
        v.insert(1, Vec3::new(0.5, 0.0, 0.0));
        let k = build_pl_knot(&v, 1e-9).unwrap();
        assert_eq!(k.num_edges(), 4);
        assert_eq!(k.vertices(), square().as_slice());
    }

    #[test]
    fn crossing_quad_rejected() {
        let bowtie = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        assert!(matches!(
            build_pl_knot(&bowtie, 1e-9),
            Err(KnotError::SelfIntersecting { .. })
        ));
    }

    #[test]
    fn collinear_triple_degenerates() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        assert_eq!(
            sample_closed_curve(&pts, 1e-9),
            Err(KnotError::NotClosedDegenerate)
        );
    }

    #[test]
    fn duplicate_point_rejected() {
        let mut v = square();
        v.insert(1, Vec3::new(0.0, 0.0, 0.0));
        assert!(matches!(build_pl_knot(&v, 1e-9), Err(KnotError::ZeroEdge { .. })));
    }

    #[test]
    fn build_is_idempotent() {
        let k = build_pl_knot(&square(), 1e-9).unwrap();
        let k2 = build_pl_knot(k.vertices(), 1e-9).unwrap();
        assert_eq!(k, k2);
    }

    #[test]
    fn rotation_commutes_with_build() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let axis = sample_uniform_direction(&mut rng);
            let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let rot = |p| rotate_about(axis, ang, p);
            let built_then_rot: Vec<Vec3> = build_pl_knot(&square(), 1e-9)
                .unwrap()
                .vertices()
                .iter()
                .map(|&p| rot(p))
                .collect();
            let rot_then_built =
                build_pl_knot(&square().iter().map(|&p| rot(p)).collect::<Vec<_>>(), 1e-9)
                    .unwrap();
            for (a, b) in built_then_rot.iter().zip(rot_then_built.vertices()) {
                assert!(a.dist(*b) < 1e-12);
            }
        }
    }

    #[test]
    fn square_edge_directions() {
        let k = build_pl_knot(&square(), 1e-9).unwrap();
        let dirs = edge_directions(&k);
        let expect = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
        ];
        for (d, e) in dirs.iter().zip(expect) {
            assert!(d.as_vec().dist(e) < 1e-15);
        }
    }

    #[test]
    fn reversal_negates_and_reverses_directions() {
        let verts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 1.0),
            Vec3::new(1.0, 2.0, 0.0),
            Vec3::new(0.0, 1.0, 2.0),
            Vec3::new(-1.0, 0.0, 1.0),
        ];
        let k = build_pl_knot(&verts, 1e-9).unwrap();
        let dirs = edge_directions(&k);
        let rdirs = edge_directions(&k.reversed());
        let n = dirs.len();
        assert_eq!(rdirs.len(), n);
        for i in 0..n {
            let want = dirs[n - 1 - i].antipode();
            assert!(rdirs[i].approx_eq(want, 1e-12));
        }
    }

    #[test]
    fn lattice_square_merges_to_rectangle() {
        let lk = parse_lattice("RRUULLDD").unwrap();
        assert_eq!(lk.knot().num_edges(), 4);
        assert_eq!(lk.moves(), "RRUULLDD");
        let dirs = edge_directions(lk.knot());
        for d in dirs {
            let v = d.as_vec();
            let axes = v.x.abs() + v.y.abs() + v.z.abs();
            assert!((axes - 1.0).abs() < 1e-12, "direction off-axis: {v:?}");
        }
    }

    #[test]
    fn lattice_whitespace_ignored() {
        let lk = parse_lattice("RR UU\nLL DD").unwrap();
        assert_eq!(lk.moves(), "RRUULLDD");
    }

    #[test]
    fn lattice_open_walk_rejected() {
        assert!(matches!(parse_lattice("RU"), Err(KnotError::NotClosed { .. })));
    }

    #[test]
    fn lattice_backtracking_rejected() {
        assert!(matches!(parse_lattice("RL"), Err(KnotError::Backtracking { .. })));
        assert!(matches!(
            parse_lattice("RLRU"),
            Err(KnotError::Backtracking { .. })
        ));
    }

    #[test]
    fn lattice_bad_character_rejected() {
        match parse_lattice("RRxU") {
            Err(KnotError::BadCharacter { ch: 'x', pos: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lattice_self_intersection_rejected() {
        // Two loops sharing the lattice point (1,0,0).
        let r = parse_lattice("RURDRULD");
        assert!(r.is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]]}"#;
        let k = parse_knot_json(text, 1e-9).unwrap();
        assert_eq!(k.num_edges(), 4);
        assert!(parse_knot_json("{}", 1e-9).is_err());
    }

    #[test]
    fn sampled_circle_is_valid() {
        let pts: Vec<Vec3> = (0..64)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 64.0;
                Vec3::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let k = sample_closed_curve(&pts, 1e-9).unwrap();
        assert_eq!(k.num_edges(), 64);
    }

    #[test]
    fn random_ball_polygons_build_or_fail_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut ok = 0;
        for _ in 0..200 {
            let n = rng.random_range(4..=12);
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
                ok += 1;
                assert!(k.num_edges() >= 3);
                let dirs = edge_directions(&k);
                for i in 0..dirs.len() {
                    let next = dirs[(i + 1) % dirs.len()];
                    assert!(dirs[i].cross(next).norm() > 1e-12);
                }
            }
        }
        // Random points in general position are almost always embeddable.
        assert!(ok > 150, "only {ok}/200 random polygons built");
    }
}
