use rayon::prelude::*;

use super::{Diagnostic, DiagnosticKind, PVPoint, Tolerances};
use crate::eigensystem::{solve_face_points, triangle_characteristic, EigenError, Mat3, VertexPair, EPS_BARY};
use crate::mesh::{TetMesh, VertexField};

#[derive(Clone, Debug, Default)]
pub struct NumeratorOutput {
    /// Points per face id.
    pub face_points: Vec<Vec<PVPoint>>,
    /// Sorted ids of tets to examine in the denominator pass.
    pub labeled_tets: Vec<usize>,
    pub degenerate_faces: Vec<usize>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Whether `w` vanishes somewhere in the closed tet. Such tets can hold a
/// closed branch through λ = ∞ that never crosses a face.
fn has_w_zero(values: &[VertexPair; 4]) -> bool {
    let w3 = values[3].1;
    let m = Mat3::from_columns(&[values[0].1 - w3, values[1].1 - w3, values[2].1 - w3]);
    let Some(mu) = m.lu().solve(&(-w3)) else {
        return false;
    };
    let mu3 = 1.0 - mu.sum();
    mu.iter()
        .chain(std::iter::once(&mu3))
        .all(|&x| x.is_finite() && (-EPS_BARY..=1.0 + EPS_BARY).contains(&x))
}

pub fn numerator_pass(mesh: &TetMesh, v: &VertexField, w: &VertexField, tol: &Tolerances) -> NumeratorOutput {
    let per_face: Vec<Result<Vec<PVPoint>, EigenError>> = (0..mesh.faces().len())
        .into_par_iter()
        .map(|f| {
            let values = mesh.face_values(f, v, w);
            let poly = triangle_characteristic(&values)?;
            let corners = mesh.face_positions(f);
            Ok(solve_face_points(&values, &poly, tol.eps_root)?
                .into_iter()
                .map(|p| {
                    let pos = corners[0] * p.mu[0] + corners[1] * p.mu[1] + corners[2] * p.mu[2];
                    PVPoint {
                        face_id: f,
                        lambda: p.lambda,
                        mu: p.mu,
                        position: pos.into(),
                    }
                })
                .collect())
        })
        .collect();
    let critical: Vec<bool> = (0..mesh.tet_count())
        .into_par_iter()
        .map(|t| has_w_zero(&mesh.tet_values(t, v, w)))
        .collect();

    let mut out = NumeratorOutput::default();
    let mut labeled = critical;
    for (f, res) in per_face.into_iter().enumerate() {
        let mark = match res {
            Ok(points) => {
                let any = !points.is_empty();
                out.face_points.push(points);
                any
            }
            Err(err) => {
                out.face_points.push(Vec::new());
                out.degenerate_faces.push(f);
                out.diagnostics.push(Diagnostic {
                    kind: DiagnosticKind::DegenerateFace,
                    id: f,
                    detail: err.to_string(),
                });
                true
            }
        };
        if mark {
            for &t in &mesh.faces()[f].tets {
                labeled[t] = true;
            }
        }
    }
    out.labeled_tets = labeled
        .iter()
        .enumerate()
        .filter_map(|(t, &l)| l.then_some(t))
        .collect();
    out
}
