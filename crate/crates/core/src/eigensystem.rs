//! Per-cell generalized underdetermined eigensystem `Vμ + v₃ = λ(Wμ + w₃)`.
//!
//! Inside one tetrahedron both fields are affine in the barycentric
//! coordinates, so the parallel condition `v = λw` becomes
//! `(A - λB)μ = -(a - λb)` with `A`, `B` holding the vertex differences and
//! `a`, `b` the values at the last vertex. Multiplying by the adjugate gives
//! `Q(λ)μ = P(λ)` where `Q = det(A - λB)` and every component of `P` is a cubic.
//! All coefficients are obtained by exact cofactor expansion.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extended::ExtendedReal;
use crate::polynomial::{real_roots_with, CubicPolynomial};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// `(v, w)` at one vertex.
pub type VertexPair = (Vec3, Vec3);

/// Barycentric tolerance for accepting a face point as inside its triangle.
pub const EPS_BARY: f64 = 1e-9;
/// Ratio of the middle to the largest singular value below which a null space
/// is taken to have dimension greater than one.
pub const RANK_RATIO: f64 = 1e-10;

// Face polynomials with every coefficient below this fraction of the field
// scale cubed are treated as identically zero.
const FACE_ZERO_REL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("non-finite vertex value")]
    NonFiniteInput,
    #[error("face has a line of parallel solutions at λ = {lambda}")]
    DegenerateFace { lambda: ExtendedReal },
}

/// The per-tetrahedron linear pencil.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    /// Columns `v_i - v_3`, i = 0..2.
    pub v_matrix: Mat3,
    /// Columns `w_i - w_3`, i = 0..2.
    pub w_matrix: Mat3,
    /// `v_3`.
    pub v_offset: Vec3,
    /// `w_3`.
    pub w_offset: Vec3,
    /// The vertex values the system was built from.
    pub vertices: [VertexPair; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degeneracy {
    None,
    /// `Q ≡ 0` while some numerator is not.
    ZeroQ,
    /// `Q` and every numerator vanish identically.
    ZeroEverything,
}

/// Denominator and the four numerators of the barycentric rational curve
/// `μ_i(λ) = P_i(λ) / Q(λ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TetPolynomials {
    pub q: CubicPolynomial,
    pub p: [CubicPolynomial; 4],
    pub degeneracy: Degeneracy,
}

pub fn build_system(vertices: &[VertexPair; 4]) -> Result<EigenSystem, EigenError> {
    let finite = vertices
        .iter()
        .all(|(v, w)| v.iter().chain(w.iter()).all(|x| x.is_finite()));
    if !finite {
        return Err(EigenError::NonFiniteInput);
    }
    let (v3, w3) = vertices[3];
    let v_matrix = Mat3::from_columns(&[vertices[0].0 - v3, vertices[1].0 - v3, vertices[2].0 - v3]);
    let w_matrix = Mat3::from_columns(&[vertices[0].1 - w3, vertices[1].1 - w3, vertices[2].1 - w3]);
    Ok(EigenSystem {
        v_matrix,
        w_matrix,
        v_offset: v3,
        w_offset: w3,
        vertices: *vertices,
    })
}

fn det_columns(x: &Vec3, y: &Vec3, z: &Vec3) -> f64 {
    x.dot(&y.cross(z))
}

/// `det(α - λβ)` expanded column-multilinearly.
pub fn pencil_determinant(alpha: &Mat3, beta: &Mat3) -> CubicPolynomial {
    let a = [alpha.column(0).into_owned(), alpha.column(1).into_owned(), alpha.column(2).into_owned()];
    let b = [beta.column(0).into_owned(), beta.column(1).into_owned(), beta.column(2).into_owned()];
    let c0 = det_columns(&a[0], &a[1], &a[2]);
    let c1 = -(det_columns(&b[0], &a[1], &a[2])
        + det_columns(&a[0], &b[1], &a[2])
        + det_columns(&a[0], &a[1], &b[2]));
    let c2 = det_columns(&a[0], &b[1], &b[2])
        + det_columns(&b[0], &a[1], &b[2])
        + det_columns(&b[0], &b[1], &a[2]);
    let c3 = -det_columns(&b[0], &b[1], &b[2]);
    CubicPolynomial::new(c0, c1, c2, c3)
}

/// `Q(λ) = det(A - λB)`.
pub fn denominator(sys: &EigenSystem) -> CubicPolynomial {
    pencil_determinant(&sys.v_matrix, &sys.w_matrix)
}

/// `(α_r1c1 - λβ_r1c1)(α_r2c2 - λβ_r2c2) - (α_r1c2 - λβ_r1c2)(α_r2c1 - λβ_r2c1)`.
fn pencil_minor(alpha: &Mat3, beta: &Mat3, rows: (usize, usize), cols: (usize, usize)) -> CubicPolynomial {
    let prod = |(r1, c1): (usize, usize), (r2, c2): (usize, usize)| {
        let (a1, b1) = (alpha[(r1, c1)], beta[(r1, c1)]);
        let (a2, b2) = (alpha[(r2, c2)], beta[(r2, c2)]);
        CubicPolynomial::new(a1 * a2, -(a1 * b2 + b1 * a2), b1 * b2, 0.0)
    };
    let (r1, r2) = rows;
    let (c1, c2) = cols;
    prod((r1, c1), (r2, c2)) - prod((r1, c2), (r2, c1))
}

fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Entry `(row, col)` of `adj(α - λβ)`, i.e. the cofactor at `(col, row)`.
pub fn pencil_adjugate_entry(alpha: &Mat3, beta: &Mat3, row: usize, col: usize) -> CubicPolynomial {
    let minor = pencil_minor(alpha, beta, others(col), others(row));
    if (row + col).is_multiple_of(2) {
        minor
    } else {
        -minor
    }
}

/// Component `i` of `-adj(A - λB)(a - λb)` for `i < 3`; uses only columns
/// `j ≠ i` of the pencil, so it never reads vertex `i`.
fn adjugate_numerator(sys: &EigenSystem, i: usize) -> CubicPolynomial {
    (0..3).fold(CubicPolynomial::ZERO, |acc, k| {
        let entry = pencil_adjugate_entry(&sys.v_matrix, &sys.w_matrix, i, k);
        acc - entry.mul_linear(sys.v_offset[k], -sys.w_offset[k])
    })
}

/// Denominator and numerators for one cell.
///
/// `P_0..P_2` come from the adjugate expansion. `P_3` is the face polynomial of
/// vertices 0, 1, 2, which equals `Q - P_0 - P_1 - P_2` but is evaluated without
/// touching vertex 3.
pub fn numerators(sys: &EigenSystem) -> TetPolynomials {
    let q = denominator(sys);
    let face = [sys.vertices[0], sys.vertices[1], sys.vertices[2]];
    let p = [
        adjugate_numerator(sys, 0),
        adjugate_numerator(sys, 1),
        adjugate_numerator(sys, 2),
        face_polynomial(&face),
    ];
    let degeneracy = if !q.is_zero() {
        Degeneracy::None
    } else if p.iter().all(CubicPolynomial::is_zero) {
        Degeneracy::ZeroEverything
    } else {
        Degeneracy::ZeroQ
    };
    TetPolynomials { q, p, degeneracy }
}

/// Convenience: system plus polynomials for four vertex pairs.
pub fn tet_polynomials(vertices: &[VertexPair; 4]) -> Result<TetPolynomials, EigenError> {
    Ok(numerators(&build_system(vertices)?))
}

fn face_matrices(face: &[VertexPair; 3]) -> (Mat3, Mat3) {
    (
        Mat3::from_columns(&[face[0].0, face[1].0, face[2].0]),
        Mat3::from_columns(&[face[0].1, face[1].1, face[2].1]),
    )
}

fn face_polynomial(face: &[VertexPair; 3]) -> CubicPolynomial {
    let (v, w) = face_matrices(face);
    pencil_determinant(&v, &w)
}

/// Characteristic polynomial `det(V - λW)` of a triangle whose matrices hold the
/// vertex values as columns.
///
/// The constant coefficient is `det V` and the cubic one is `-det W`, so the
/// roots are exactly the λ with `Vμ = λWμ`, and the polynomial coincides with
/// the numerator of the barycentric weight of the opposite vertex in every
/// tetrahedron containing the face.
pub fn triangle_characteristic(face: &[VertexPair; 3]) -> Result<CubicPolynomial, EigenError> {
    let finite = face
        .iter()
        .all(|(v, w)| v.iter().chain(w.iter()).all(|x| x.is_finite()));
    if !finite {
        return Err(EigenError::NonFiniteInput);
    }
    Ok(face_polynomial(face))
}

/// A parallel-vector point on a triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FacePoint {
    pub lambda: ExtendedReal,
    /// Barycentric coordinates with respect to the three face vertices.
    pub mu: [f64; 3],
}

/// Solutions of `Mμ = 0` on the plane `μ_0 + μ_1 + μ_2 = 1`.
enum AffineKernel {
    /// At most one solution, returned when it lies in the triangle.
    Point(Option<[f64; 3]>),
    /// A line or plane of solutions.
    Degenerate,
}

fn affine_kernel(m: &Mat3) -> AffineKernel {
    let svd = m.svd(false, true);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = order.map(|k| svd.singular_values[k]);
    if s[0] == 0.0 {
        return AffineKernel::Degenerate;
    }
    if s[1] > RANK_RATIO * s[0] {
        return AffineKernel::Point(to_barycentric(&null_vector(m)));
    }
    // Rank one: the kernel is the plane orthogonal to the dominant row
    // direction, which misses the affine plane only when that direction is
    // parallel to (1, 1, 1).
    let v_t = svd.v_t.expect("requested");
    let r = v_t.row(order[0]).transpose();
    let along_ones = (r.x + r.y + r.z).abs() / (r.norm() * 3f64.sqrt());
    if along_ones >= 1.0 - RANK_RATIO {
        AffineKernel::Point(None)
    } else {
        AffineKernel::Degenerate
    }
}

/// Null vector of a rank-two matrix as the widest cross product of two rows.
fn null_vector(m: &Mat3) -> Vec3 {
    let rows = [m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()];
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| rows[i].cross(&rows[j]))
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
        .unwrap()
}

/// Normalizes a homogeneous null vector to barycentric form and keeps it only
/// when it lies in the closed triangle (within `EPS_BARY`), clamping the result.
fn to_barycentric(n: &Vec3) -> Option<[f64; 3]> {
    let sum = n.x + n.y + n.z;
    let l1 = n.x.abs() + n.y.abs() + n.z.abs();
    if l1 == 0.0 || sum.abs() <= 1e-12 * l1 {
        return None;
    }
    let mu = [n.x / sum, n.y / sum, n.z / sum];
    if mu.iter().any(|&m| !(-EPS_BARY..=1.0 + EPS_BARY).contains(&m)) {
        return None;
    }
    let clamped = mu.map(|m| m.clamp(0.0, 1.0));
    let s: f64 = clamped.iter().sum();
    Some(clamped.map(|m| m / s))
}

/// Parallel-vector points of a triangle for its characteristic polynomial.
///
/// Every real root yields at most one point (the null vector of `V - λW`).
/// A drop of the effective degree below three contributes a root at infinity,
/// i.e. a zero of `w` in the face. When the polynomial vanishes identically the
/// solution curve lies in the plane of the face, and the points reported are
/// where that curve meets the triangle's edges.
pub fn solve_face_points(
    face: &[VertexPair; 3],
    poly: &CubicPolynomial,
    eps_root: f64,
) -> Result<Vec<FacePoint>, EigenError> {
    let (v, w) = face_matrices(face);
    let scale = v.abs().max() + w.abs().max();
    if poly.norm_inf() <= FACE_ZERO_REL * scale.powi(3) {
        return in_plane_points(face, &v, &w);
    }
    let mut out = Vec::new();
    let roots = real_roots_with(poly, eps_root).expect("nonzero polynomial");
    for root in roots.iter() {
        let lambda = ExtendedReal::Finite(root.value);
        match affine_kernel(&(v - w * root.value)) {
            AffineKernel::Degenerate => return Err(EigenError::DegenerateFace { lambda }),
            AffineKernel::Point(Some(mu)) => out.push(FacePoint { lambda, mu }),
            AffineKernel::Point(None) => {}
        }
    }
    if poly.effective_degree().is_some_and(|d| d < 3) {
        let lambda = ExtendedReal::Infinity;
        match affine_kernel(&w) {
            AffineKernel::Degenerate => return Err(EigenError::DegenerateFace { lambda }),
            AffineKernel::Point(Some(mu)) => out.push(FacePoint { lambda, mu }),
            AffineKernel::Point(None) => {}
        }
    }
    Ok(out)
}

/// Face points for a face whose characteristic polynomial is identically zero.
fn in_plane_points(face: &[VertexPair; 3], v: &Mat3, w: &Mat3) -> Result<Vec<FacePoint>, EigenError> {
    // v × w is quadratic on the face; vanishing at the vertices and the edge
    // midpoints makes the whole triangle parallel.
    let samples = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ];
    let scale = v.abs().max() * w.abs().max();
    let all_parallel = samples.iter().all(|mu| {
        let m = Vec3::new(mu[0], mu[1], mu[2]);
        (v * m).cross(&(w * m)).norm() <= FACE_ZERO_REL * scale
    });
    if all_parallel {
        let centroid = Vec3::repeat(1.0 / 3.0);
        let (vc, wc) = (v * centroid, w * centroid);
        let lambda = if wc.norm_squared() > 0.0 {
            ExtendedReal::Finite(vc.dot(&wc) / wc.norm_squared())
        } else {
            ExtendedReal::Infinity
        };
        return Err(EigenError::DegenerateFace { lambda });
    }
    // Generic rank of the pencil, probed at two unremarkable parameters.
    for lambda in [0.577_215_664_9, -1.618_033_988_7] {
        if matches!(affine_kernel(&(v - w * lambda)), AffineKernel::Degenerate) {
            return Err(EigenError::DegenerateFace {
                lambda: ExtendedReal::Finite(lambda),
            });
        }
    }
    let mut out: Vec<FacePoint> = Vec::new();
    for (a, b) in [(0usize, 1usize), (1, 2), (0, 2)] {
        for t in edge_parallel_params(&face[a], &face[b]) {
            let mut mu = [0.0; 3];
            mu[a] = 1.0 - t;
            mu[b] = t;
            let vp = face[a].0 * (1.0 - t) + face[b].0 * t;
            let wp = face[a].1 * (1.0 - t) + face[b].1 * t;
            let field_scale = face[a].0.norm().max(face[b].0.norm()) + face[a].1.norm().max(face[b].1.norm());
            let lambda = if wp.norm() > 1e-14 * field_scale {
                ExtendedReal::Finite(vp.dot(&wp) / wp.norm_squared())
            } else if vp.norm() > 1e-14 * field_scale {
                ExtendedReal::Infinity
            } else {
                continue;
            };
            let duplicate = out
                .iter()
                .any(|p| p.mu.iter().zip(&mu).all(|(x, y)| (x - y).abs() <= EPS_BARY));
            if !duplicate {
                out.push(FacePoint { lambda, mu });
            }
        }
    }
    Ok(out)
}

/// Parameters `t ∈ [0, 1]` along the edge `a → b` where `v × w = 0`.
fn edge_parallel_params(a: &VertexPair, b: &VertexPair) -> Vec<f64> {
    let dv = b.0 - a.0;
    let dw = b.1 - a.1;
    // v(t) × w(t) = c0 + c1 t + c2 t²
    let c0 = a.0.cross(&a.1);
    let c1 = a.0.cross(&dw) + dv.cross(&a.1);
    let c2 = dv.cross(&dw);
    let scale = (a.0.norm() + dv.norm()) * (a.1.norm() + dw.norm());
    let comp_norm = |k: usize| c0[k].abs().max(c1[k].abs()).max(c2[k].abs());
    let k = (0..3).max_by(|&i, &j| comp_norm(i).total_cmp(&comp_norm(j))).unwrap();
    if scale == 0.0 || comp_norm(k) <= FACE_ZERO_REL * scale {
        return vec![0.0, 1.0];
    }
    let poly = CubicPolynomial::new(c0[k], c1[k], c2[k], 0.0);
    let Ok(roots) = real_roots_with(&poly, crate::polynomial::EPS_ROOT) else {
        return Vec::new();
    };
    roots
        .values()
        .filter(|t| (-EPS_BARY..=1.0 + EPS_BARY).contains(t))
        .map(|t| t.clamp(0.0, 1.0))
        .filter(|&t| {
            let c = c0 + c1 * t + c2 * (t * t);
            c.norm() <= 1e-9 * scale
        })
        .collect()
}
