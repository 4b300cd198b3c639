use std::collections::BTreeMap;

use super::sample::{part_count, piece_end_positions, piece_range};
use super::{CurveSegment, Diagnostic, DiagnosticKind, PVCurve, PVPoint, PieceRef, PointRef, Tolerances};
use crate::eigensystem::Vec3;
use crate::extended::ExtendedReal;
use crate::mesh::TetMesh;

// Two pieces between the same pair of nodes whose midpoints agree to this
// fraction of the mesh diameter trace the same curve on a shared face or edge.
const DUPLICATE_REL: f64 = 1e-7;

#[derive(Clone, Debug, Default)]
pub struct StitchOutput {
    pub curves: Vec<PVCurve>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum NodeKey {
    Point(PointRef),
    /// The λ = ∞ point inside a segment.
    Critical(usize),
    /// A finite segment end without a face point: (segment, slot).
    Unmatched(usize, usize),
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    /// Keeps the smaller index as the root.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Merges referenced face points that are the same point of space seen from
/// different faces (curves through edges or vertices).
fn merge_points(refs: &[PointRef], face_points: &[Vec<PVPoint>], tol: &Tolerances, eps_pos: f64) -> Vec<usize> {
    let pts: Vec<&PVPoint> = refs.iter().map(|r| &face_points[r.face][r.index]).collect();
    let mut order: Vec<usize> = (0..refs.len()).collect();
    order.sort_by(|&a, &b| pts[a].position[0].total_cmp(&pts[b].position[0]).then(a.cmp(&b)));
    let mut uf = UnionFind((0..refs.len()).collect());
    for (oi, &i) in order.iter().enumerate() {
        for &j in &order[oi + 1..] {
            if pts[j].position[0] - pts[i].position[0] > eps_pos {
                break;
            }
            if tol.lambda_close(pts[i].lambda, pts[j].lambda) && (pts[i].position() - pts[j].position()).norm() <= eps_pos {
                uf.union(i, j);
            }
        }
    }
    (0..refs.len()).map(|i| uf.find(i)).collect()
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    segment: usize,
    part: u8,
    /// Nodes at the low-λ and high-λ ends; `None` for a closed full circle.
    ends: Option<(usize, usize)>,
}

fn piece_midpoint(seg: &CurveSegment, part: u8) -> Vec3 {
    let (a, b) = piece_range(seg, part);
    let t = 0.5 * (a.max(-1e300).atan() + b.min(1e300).atan());
    (0..4)
        .map(|i| {
            let (p, q) = &seg.rationals[i];
            let l = t.tan();
            Vec3::from(seg.vertices[i]) * (p.eval(l) / q.eval(l))
        })
        .sum()
}

/// Joins segments into curves through their shared face points.
///
/// A node of degree other than two ends a curve, as does any λ = ∞ point.
/// Nodes where more than two pieces meet are reported and left as curve ends.
pub fn stitch(mesh: &TetMesh, face_points: &[Vec<PVPoint>], segments: &[CurveSegment], tol: &Tolerances) -> StitchOutput {
    let eps_pos = tol.eps_pos_rel * mesh.diameter();
    let mut out = StitchOutput::default();

    let mut refs: Vec<PointRef> = segments.iter().flat_map(|s| s.endpoints.iter().flatten().copied()).collect();
    refs.sort();
    refs.dedup();
    let rep = merge_points(&refs, face_points, tol, eps_pos);
    let ref_index: BTreeMap<PointRef, usize> = refs.iter().enumerate().map(|(i, r)| (*r, i)).collect();

    let mut node_ids: BTreeMap<NodeKey, usize> = BTreeMap::new();
    let mut node_keys: Vec<NodeKey> = Vec::new();
    let mut node = |key: NodeKey| -> usize {
        let key = match key {
            NodeKey::Point(r) => NodeKey::Point(refs[rep[ref_index[&r]]]),
            k => k,
        };
        *node_ids.entry(key).or_insert_with(|| {
            node_keys.push(key);
            node_keys.len() - 1
        })
    };

    let mut pieces: Vec<Piece> = Vec::new();
    for seg in segments {
        if seg.interval.is_full_circle() {
            pieces.push(Piece {
                segment: seg.id,
                part: 0,
                ends: None,
            });
            continue;
        }
        let mut end_node = |slot: usize, at: ExtendedReal, out: &mut StitchOutput| match seg.endpoints[slot] {
            Some(r) => node(NodeKey::Point(r)),
            None if at.is_infinite() => node(NodeKey::Critical(seg.id)),
            None => {
                out.diagnostics.push(Diagnostic {
                    kind: DiagnosticKind::UnmatchedEndpoint,
                    id: seg.tet_id,
                    detail: format!("segment {} end at λ = {at} has no face point", seg.id),
                });
                node(NodeKey::Unmatched(seg.id, slot))
            }
        };
        let lo = end_node(0, seg.interval.lo, &mut out);
        let hi = end_node(1, seg.interval.hi, &mut out);
        if part_count(seg) == 2 {
            let crit = node(NodeKey::Critical(seg.id));
            pieces.push(Piece {
                segment: seg.id,
                part: 0,
                ends: Some((lo, crit)),
            });
            pieces.push(Piece {
                segment: seg.id,
                part: 1,
                ends: Some((crit, hi)),
            });
        } else {
            pieces.push(Piece {
                segment: seg.id,
                part: 0,
                ends: Some((lo, hi)),
            });
        }
    }

    // Number nodes by key so that traversal order follows face ids.
    let mut order: Vec<usize> = (0..node_keys.len()).collect();
    order.sort_by_key(|&i| node_keys[i]);
    let mut rank = vec![0; order.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let node_keys: Vec<NodeKey> = order.iter().map(|&i| node_keys[i]).collect();
    for p in &mut pieces {
        p.ends = p.ends.map(|(a, b)| (rank[a], rank[b]));
    }

    // Curves lying in a face or along an edge are found by every tet sharing it.
    let dup_tol = DUPLICATE_REL * mesh.diameter();
    let mut by_ends: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut keep = vec![true; pieces.len()];
    for (i, p) in pieces.iter().enumerate() {
        let Some((a, b)) = p.ends else { continue };
        let key = (a.min(b), a.max(b));
        let mid = piece_midpoint(&segments[p.segment], p.part);
        let same = by_ends.get(&key).is_some_and(|others| {
            others
                .iter()
                .any(|&j| (piece_midpoint(&segments[pieces[j].segment], pieces[j].part) - mid).norm() <= dup_tol)
        });
        if same {
            keep[i] = false;
        } else {
            by_ends.entry(key).or_default().push(i);
        }
    }

    let n_nodes = node_keys.len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (i, p) in pieces.iter().enumerate() {
        if let (true, Some((a, b))) = (keep[i], p.ends) {
            incident[a].push(i);
            incident[b].push(i);
        }
    }
    let mut terminal: Vec<bool> = (0..n_nodes)
        .map(|n| {
            let is_point_at_infinity = match node_keys[n] {
                NodeKey::Critical(_) => true,
                NodeKey::Point(r) => face_points[r.face][r.index].lambda.is_infinite(),
                NodeKey::Unmatched(..) => false,
            };
            is_point_at_infinity || incident[n].len() != 2
        })
        .collect();
    for n in 0..n_nodes {
        if incident[n].len() > 2 {
            let (id, what) = match node_keys[n] {
                NodeKey::Point(r) => (r.face, "face"),
                NodeKey::Critical(s) | NodeKey::Unmatched(s, _) => (segments[s].tet_id, "tet"),
            };
            let tets: Vec<String> = incident[n].iter().map(|&i| segments[pieces[i].segment].tet_id.to_string()).collect();
            out.diagnostics.push(Diagnostic {
                kind: DiagnosticKind::AmbiguousJunction,
                id,
                detail: format!("{} pieces meet at {what} {id} (tets {})", incident[n].len(), tets.join(",")),
            });
            terminal[n] = true;
        }
    }

    let mut used = vec![false; pieces.len()];
    let piece_ref = |i: usize, from: usize| {
        let p = &pieces[i];
        let (a, b) = p.ends.unwrap();
        let reversed = a != from;
        (
            PieceRef {
                segment: p.segment,
                part: p.part,
                reversed,
            },
            if reversed { a } else { b },
        )
    };
    let walk = |start_node: usize, first: usize, used: &mut Vec<bool>| -> (Vec<PieceRef>, usize) {
        let mut refs = Vec::new();
        let (mut cur, mut piece) = (start_node, first);
        loop {
            used[piece] = true;
            let (r, next) = piece_ref(piece, cur);
            refs.push(r);
            cur = next;
            if terminal[cur] {
                break;
            }
            match incident[cur].iter().find(|&&i| !used[i]) {
                Some(&i) => piece = i,
                None => break,
            }
        }
        (refs, cur)
    };
    for n in 0..n_nodes {
        if !terminal[n] {
            continue;
        }
        for k in 0..incident[n].len() {
            let first = incident[n][k];
            if used[first] {
                continue;
            }
            let (refs, _) = walk(n, first, &mut used);
            out.curves.push(PVCurve {
                pieces: refs,
                closed: false,
                polyline: Vec::new(),
            });
        }
    }
    for i in 0..pieces.len() {
        if used[i] || !keep[i] {
            continue;
        }
        match pieces[i].ends {
            None => {
                used[i] = true;
                out.curves.push(PVCurve {
                    pieces: vec![PieceRef {
                        segment: pieces[i].segment,
                        part: 0,
                        reversed: false,
                    }],
                    closed: true,
                    polyline: Vec::new(),
                });
            }
            Some((a, _)) => {
                let (refs, end) = walk(a, i, &mut used);
                out.curves.push(PVCurve {
                    pieces: refs,
                    closed: end == a,
                    polyline: Vec::new(),
                });
            }
        }
    }
    out
}

/// Distances between consecutive pieces of a curve where they meet, computed
/// independently from each side.
pub fn junction_gaps(curve: &PVCurve, segments: &[CurveSegment]) -> Vec<f64> {
    let ends: Vec<(Vec3, Vec3)> = curve
        .pieces
        .iter()
        .map(|p| {
            let (a, b) = piece_end_positions(&segments[p.segment], p.part);
            if p.reversed {
                (b, a)
            } else {
                (a, b)
            }
        })
        .collect();
    let mut gaps: Vec<f64> = ends.windows(2).map(|w| (w[0].1 - w[1].0).norm()).collect();
    if curve.closed && ends.len() > 1 {
        gaps.push((ends[ends.len() - 1].1 - ends[0].0).norm());
    }
    gaps
}
