use rayon::prelude::*;

use super::{CurveSegment, Diagnostic, DiagnosticKind, ExtractionError, NumeratorOutput, PVPoint, PointRef, Tolerances};
use crate::eigensystem::{build_system, numerators, Degeneracy, Vec3};
use crate::extended::ExtendedReal;
use crate::intervals::{feasible_regions_with, LambdaInterval};
use crate::mesh::{TetMesh, VertexField};
use crate::polynomial::{deflate_with_roots, real_roots_with, CubicPolynomial};

// Barycentric weight below which an endpoint is taken to lie on the opposite face.
const ON_FACE: f64 = 1e-6;
// Position agreement, relative to the mesh diameter, when pairing an endpoint
// with a face point of matching λ.
const ENDPOINT_POS_REL: f64 = 1e-6;

#[derive(Clone, Debug, Default)]
pub struct DenominatorOutput {
    pub segments: Vec<CurveSegment>,
    pub diagnostics: Vec<Diagnostic>,
    pub branch_histogram: [usize; 7],
    pub degenerate_cells: usize,
}

enum TetOutcome {
    Segments(Vec<CurveSegment>),
    Degenerate(String),
}

fn rational_at(p: &CubicPolynomial, q: &CubicPolynomial, x: ExtendedReal) -> f64 {
    match x {
        ExtendedReal::Finite(l) => p.eval(l) / q.eval(l),
        ExtendedReal::Infinity => {
            let (Some(dp), Some(dq)) = (p.effective_degree(), q.effective_degree()) else {
                return 0.0;
            };
            match dp.cmp(&dq) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => p.leading() / q.leading(),
                std::cmp::Ordering::Greater => f64::INFINITY,
            }
        }
    }
}

fn mu_at(rationals: &[(CubicPolynomial, CubicPolynomial); 4], x: ExtendedReal) -> [f64; 4] {
    std::array::from_fn(|i| rational_at(&rationals[i].0, &rationals[i].1, x))
}

fn embed(vertices: &[[f64; 3]; 4], mu: &[f64; 4]) -> Vec3 {
    (0..4).map(|i| Vec3::from(vertices[i]) * mu[i]).sum()
}

/// Limit of the segment as λ → ∞: the point where `w` vanishes.
pub fn limit_point(seg: &CurveSegment) -> ([f64; 4], Vec3) {
    let mu = mu_at(&seg.rationals, ExtendedReal::Infinity);
    (mu, embed(&seg.vertices, &mu))
}

fn within_interval(iv: &LambdaInterval, x: ExtendedReal, slack: f64) -> bool {
    if iv.contains(x) {
        return true;
    }
    let ExtendedReal::Finite(l) = x else {
        return false;
    };
    iv.finite_endpoints()
        .iter()
        .any(|&(e, _)| (l - e).abs() <= slack * (1.0 + e.abs()))
}

/// Barycentric weights and position of the segment at `λ`.
pub fn evaluate_segment(seg: &CurveSegment, lambda: ExtendedReal) -> Result<([f64; 4], Vec3), ExtractionError> {
    if !within_interval(&seg.interval, lambda, 1e-8) {
        return Err(ExtractionError::OutOfInterval(lambda));
    }
    let mu = mu_at(&seg.rationals, lambda);
    Ok((mu, embed(&seg.vertices, &mu)))
}

/// Face point of this tet matching an end of a segment.
fn match_endpoint(
    lambda: ExtendedReal,
    mu: &[f64; 4],
    position: Vec3,
    tet_faces: [usize; 4],
    face_points: &[Vec<PVPoint>],
    tol: &Tolerances,
    diameter: f64,
) -> Option<PointRef> {
    let mut best: Option<(f64, PointRef)> = None;
    for k in 0..4 {
        if mu[k].abs() > ON_FACE {
            continue;
        }
        let face = tet_faces[k];
        for (index, p) in face_points[face].iter().enumerate() {
            if !tol.lambda_close(p.lambda, lambda) {
                continue;
            }
            let d = (p.position() - position).norm();
            if d <= ENDPOINT_POS_REL * diameter && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, PointRef { face, index }));
            }
        }
    }
    best.map(|(_, r)| r)
}

fn process_tet(
    mesh: &TetMesh,
    v: &VertexField,
    w: &VertexField,
    num: &NumeratorOutput,
    t: usize,
    tol: &Tolerances,
    diameter: f64,
) -> TetOutcome {
    let values = mesh.tet_values(t, v, w);
    let sys = match build_system(&values) {
        Ok(s) => s,
        Err(e) => return TetOutcome::Degenerate(e.to_string()),
    };
    let tp = numerators(&sys);
    if tp.degeneracy != Degeneracy::None {
        return TetOutcome::Degenerate(format!("{:?}", tp.degeneracy));
    }
    let Ok(q_roots) = real_roots_with(&tp.q, tol.eps_root) else {
        return TetOutcome::Degenerate("ZeroQ".into());
    };
    let mut rationals = [(CubicPolynomial::ZERO, tp.q); 4];
    let mut shared = Vec::with_capacity(4);
    for i in 0..4 {
        match real_roots_with(&tp.p[i], tol.eps_root) {
            Ok(p_roots) => {
                let (pd, qd, s) = deflate_with_roots(&tp.p[i], &p_roots, &tp.q, &q_roots, tol.eps_root);
                rationals[i] = (pd, qd);
                shared.push(Some(s));
            }
            Err(_) => shared.push(None),
        }
    }
    // A root of Q shared by every numerator means v = λ₀w on a whole line or plane.
    for r in q_roots.values() {
        let everywhere = shared
            .iter()
            .all(|s| s.as_ref().is_none_or(|s| s.find(r, tol.eps_root).is_some()));
        if everywhere {
            return TetOutcome::Degenerate(format!("parallel on a set of constant λ = {r}"));
        }
    }
    let region = match feasible_regions_with(&tp, tol.eps_root) {
        Ok(r) => r,
        Err(e) => return TetOutcome::Degenerate(e.to_string()),
    };
    let vertices = mesh.tet_positions(t).map(<[f64; 3]>::from);
    let tet_faces = mesh.tet_faces(t);
    let mut segments = Vec::new();
    for interval in region.intervals() {
        let single_point = interval.lo == interval.hi && interval.lo_closed;
        if single_point {
            continue;
        }
        let mut endpoints = [None, None];
        for (slot, (end, closed)) in [(interval.lo, interval.lo_closed), (interval.hi, interval.hi_closed)]
            .into_iter()
            .enumerate()
        {
            // Ends at ∞ inside an arc through ∞ are interior, not endpoints.
            if end.is_infinite() && !closed {
                continue;
            }
            let mu = mu_at(&rationals, end);
            let pos = embed(&vertices, &mu);
            endpoints[slot] = match_endpoint(end, &mu, pos, tet_faces, &num.face_points, tol, diameter);
        }
        segments.push(CurveSegment {
            id: 0,
            tet_id: t,
            interval,
            rationals,
            vertices,
            endpoints,
            has_w_critical_point: interval.contains_infinity,
        });
    }
    TetOutcome::Segments(segments)
}

pub fn denominator_pass(
    mesh: &TetMesh,
    v: &VertexField,
    w: &VertexField,
    num: &NumeratorOutput,
    tol: &Tolerances,
) -> DenominatorOutput {
    let diameter = mesh.diameter();
    let outcomes: Vec<(usize, TetOutcome)> = num
        .labeled_tets
        .par_iter()
        .map(|&t| (t, process_tet(mesh, v, w, num, t, tol, diameter)))
        .collect();
    let mut out = DenominatorOutput::default();
    for (t, outcome) in outcomes {
        match outcome {
            TetOutcome::Segments(segs) => {
                out.branch_histogram[segs.len().min(6)] += 1;
                for mut s in segs {
                    s.id = out.segments.len();
                    out.segments.push(s);
                }
            }
            TetOutcome::Degenerate(detail) => {
                out.degenerate_cells += 1;
                out.diagnostics.push(Diagnostic {
                    kind: DiagnosticKind::DegenerateCell,
                    id: t,
                    detail,
                });
            }
        }
    }
    out
}
