//! Mesh-wide curve extraction in two passes.
//!
//! The numerator pass finds the parallel-vector points on every triangle from
//! its characteristic polynomial. The denominator pass turns every tet that
//! touches such a point into exact rational curve segments over the feasible λ
//! intervals. Stitching then joins segments that meet at a shared face point.

mod denominator;
mod numerator;
mod sample;
mod stitch;

pub use denominator::{denominator_pass, evaluate_segment, limit_point, DenominatorOutput};
pub use numerator::{numerator_pass, NumeratorOutput};
pub use sample::{sample_piece, sample_polyline};
pub use stitch::{junction_gaps, stitch, StitchOutput};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensystem::Vec3;
use crate::extended::ExtendedReal;
use crate::intervals::LambdaInterval;
use crate::mesh::{MeshError, TetMesh, VertexField};
use crate::polynomial::{CubicPolynomial, EPS_ROOT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative root clustering, applied as `eps_root * (1 + |λ|)`.
    pub eps_root: f64,
    /// Relative λ agreement for matching endpoints, `eps_match * (1 + |λ|)`.
    pub eps_match: f64,
    /// Position agreement as a fraction of the mesh diameter.
    pub eps_pos_rel: f64,
    /// Largest allowed distance between a polyline chord and the curve.
    pub max_chord_error: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_root: EPS_ROOT,
            eps_match: 1e-7,
            eps_pos_rel: 1e-9,
            max_chord_error: 1e-3,
        }
    }
}

impl Tolerances {
    pub fn lambda_close(&self, a: ExtendedReal, b: ExtendedReal) -> bool {
        match (a, b) {
            (ExtendedReal::Infinity, ExtendedReal::Infinity) => true,
            (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) => {
                (x - y).abs() <= self.eps_match * (1.0 + x.abs().max(y.abs()))
            }
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("λ = {0} lies outside the segment interval")]
    OutOfInterval(ExtendedReal),
}

/// Intersection of a curve with a triangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PVPoint {
    pub face_id: usize,
    pub lambda: ExtendedReal,
    /// Barycentric coordinates with respect to the sorted face vertices.
    pub mu: [f64; 3],
    pub position: [f64; 3],
}

impl PVPoint {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

/// Index of a point in the numerator-pass output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PointRef {
    pub face: usize,
    pub index: usize,
}

/// One branch of the curve inside one tet, `μ_i(λ) = P_i(λ)/Q_i(λ)` over `interval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSegment {
    pub id: usize,
    pub tet_id: usize,
    pub interval: LambdaInterval,
    /// `(P_i, Q)` for each vertex with their common roots cancelled.
    pub rationals: [(CubicPolynomial, CubicPolynomial); 4],
    /// Vertex positions of the tet, in its local order.
    pub vertices: [[f64; 3]; 4],
    /// Face points at the `lo` and `hi` ends of the interval, when finite and found.
    pub endpoints: [Option<PointRef>; 2],
    pub has_w_critical_point: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagnosticKind {
    DegenerateFace,
    DegenerateCell,
    AmbiguousJunction,
    UnmatchedEndpoint,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiagnosticKind::DegenerateFace => "degenerate-face",
            DiagnosticKind::DegenerateCell => "degenerate-cell",
            DiagnosticKind::AmbiguousJunction => "ambiguous-junction",
            DiagnosticKind::UnmatchedEndpoint => "unmatched-endpoint",
        };
        f.write_str(s)
    }
}

/// An anomaly found during extraction. `id` is a face id for face diagnostics
/// and a tet id otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub id: usize,
    pub detail: String,
}

/// A traversal of part of a segment. Segments through ∞ have two parts,
/// `0` from `lo` up to ∞ and `1` from ∞ up to `hi`; every other segment has
/// only part `0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceRef {
    pub segment: usize,
    pub part: u8,
    pub reversed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolylinePoint {
    pub position: [f64; 3],
    pub lambda: ExtendedReal,
    pub tet_id: usize,
}

/// A mesh-wide curve: segment pieces in order plus the sampled polyline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PVCurve {
    pub pieces: Vec<PieceRef>,
    pub closed: bool,
    pub polyline: Vec<PolylinePoint>,
}

impl PVCurve {
    /// Segment ids in traversal order.
    pub fn segments(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for p in &self.pieces {
            if out.last() != Some(&p.segment) {
                out.push(p.segment);
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub face_points: Vec<Vec<PVPoint>>,
    pub segments: Vec<CurveSegment>,
    pub curves: Vec<PVCurve>,
    pub diagnostics: Vec<Diagnostic>,
    /// Number of tets producing 0, 1, 2, 3 and 4 segments, over processed tets.
    pub branch_histogram: [usize; 7],
    pub processed_tets: usize,
    pub degenerate_cells: usize,
}

/// Runs both passes, stitching and polyline sampling.
pub fn extract(mesh: &TetMesh, v: &VertexField, w: &VertexField, tol: &Tolerances) -> Result<Extraction, ExtractionError> {
    v.validate(mesh)?;
    w.validate(mesh)?;
    let num = numerator_pass(mesh, v, w, tol);
    let den = denominator_pass(mesh, v, w, &num, tol);
    let st = stitch(mesh, &num.face_points, &den.segments, tol);
    let curves = st
        .curves
        .into_iter()
        .map(|mut c| {
            c.polyline = sample_polyline(&c, &den.segments, tol.max_chord_error);
            c
        })
        .collect();
    let mut diagnostics = num.diagnostics;
    diagnostics.extend(den.diagnostics);
    diagnostics.extend(st.diagnostics);
    Ok(Extraction {
        face_points: num.face_points,
        segments: den.segments,
        curves,
        diagnostics,
        branch_histogram: den.branch_histogram,
        processed_tets: num.labeled_tets.len(),
        degenerate_cells: den.degenerate_cells,
    })
}

#[cfg(test)]
mod tests;
