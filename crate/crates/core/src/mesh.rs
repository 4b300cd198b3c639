//! Tetrahedral meshes with shared-face adjacency and per-vertex vector fields.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensystem::{Mat3, Vec3, VertexPair};

const BARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("grid dimensions must be at least 2 along every axis, got {0:?}")]
    BadDims([usize; 3]),
    #[error("tet {tet} references vertex {vertex} but the mesh has {count} vertices")]
    IndexOutOfRange { tet: usize, vertex: usize, count: usize },
    #[error("tet {0} has zero volume")]
    ZeroVolume(usize),
    #[error("face {0:?} is shared by more than two tets")]
    NonManifoldFace([usize; 3]),
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinitePosition(usize),
    #[error("field has {got} values for {expected} vertices")]
    FieldLength { expected: usize, got: usize },
    #[error("field value at vertex {0} is not finite")]
    NonFiniteField(usize),
    #[error("barycentric coordinates {0:?} are not a convex combination")]
    BadBarycentric([f64; 4]),
    #[error("tet {0} is degenerate in the Jacobian stencil")]
    DegenerateCell(usize),
}

/// A triangle shared by one (boundary) or two (interior) tets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    /// Sorted vertex indices.
    pub vertices: [usize; 3],
    pub tets: Vec<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.tets.len() == 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TetMesh {
    vertices: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    faces: Vec<Face>,
    /// `tet_faces[t][k]` is the face opposite local vertex `k`.
    tet_faces: Vec<[usize; 4]>,
}

/// Values of one vector field at the mesh vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexField {
    pub values: Vec<Vec3>,
}

impl VertexField {
    pub fn new(values: Vec<Vec3>) -> Self {
        VertexField { values }
    }

    pub fn validate(&self, mesh: &TetMesh) -> Result<(), MeshError> {
        if self.values.len() != mesh.vertex_count() {
            return Err(MeshError::FieldLength {
                expected: mesh.vertex_count(),
                got: self.values.len(),
            });
        }
        match self.values.iter().position(|v| !v.iter().all(|x| x.is_finite())) {
            Some(i) => Err(MeshError::NonFiniteField(i)),
            None => Ok(()),
        }
    }
}

fn signed_volume(p: &[Vec3; 4]) -> f64 {
    (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))) / 6.0
}

fn face_key(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut k = [a, b, c];
    k.sort_unstable();
    k
}

/// Local vertex indices of the face opposite local vertex `k`, in increasing order.
pub fn opposite_face(k: usize) -> [usize; 3] {
    match k {
        0 => [1, 2, 3],
        1 => [0, 2, 3],
        2 => [0, 1, 3],
        _ => [0, 1, 2],
    }
}

impl TetMesh {
    /// Validates indices and volumes, flips negatively oriented tets by
    /// swapping their last two vertices, and builds the face table.
    pub fn new(vertices: Vec<Vec3>, mut tets: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        if let Some(i) = vertices.iter().position(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(MeshError::NonFinitePosition(i));
        }
        for (t, tet) in tets.iter_mut().enumerate() {
            if let Some(&vertex) = tet.iter().find(|&&v| v >= vertices.len()) {
                return Err(MeshError::IndexOutOfRange {
                    tet: t,
                    vertex,
                    count: vertices.len(),
                });
            }
            let vol = signed_volume(&tet.map(|i| vertices[i]));
            if vol == 0.0 || !vol.is_finite() {
                return Err(MeshError::ZeroVolume(t));
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }
        let mut table: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for k in 0..4 {
                let [a, b, c] = opposite_face(k).map(|j| tet[j]);
                table.entry(face_key(a, b, c)).or_default().push(t);
            }
        }
        let mut ids = BTreeMap::new();
        let mut faces = Vec::with_capacity(table.len());
        for (key, incident) in table {
            if incident.len() > 2 {
                return Err(MeshError::NonManifoldFace(key));
            }
            ids.insert(key, faces.len());
            faces.push(Face {
                vertices: key,
                tets: incident,
            });
        }
        let tet_faces = tets
            .iter()
            .map(|tet| {
                std::array::from_fn(|k| {
                    let [a, b, c] = opposite_face(k).map(|j| tet[j]);
                    ids[&face_key(a, b, c)]
                })
            })
            .collect();
        Ok(TetMesh {
            vertices,
            tets,
            faces,
            tet_faces,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn tet_count(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_faces(&self, tet: usize) -> [usize; 4] {
        self.tet_faces[tet]
    }

    pub fn tet_positions(&self, tet: usize) -> [Vec3; 4] {
        self.tets[tet].map(|i| self.vertices[i])
    }

    pub fn tet_volume(&self, tet: usize) -> f64 {
        signed_volume(&self.tet_positions(tet))
    }

    pub fn face_positions(&self, face: usize) -> [Vec3; 3] {
        self.faces[face].vertices.map(|i| self.vertices[i])
    }

    /// `(v, w)` at the four vertices of a tet, in its local order.
    pub fn tet_values(&self, tet: usize, v: &VertexField, w: &VertexField) -> [VertexPair; 4] {
        self.tets[tet].map(|i| (v.values[i], w.values[i]))
    }

    pub fn face_values(&self, face: usize, v: &VertexField, w: &VertexField) -> [VertexPair; 3] {
        self.faces[face].vertices.map(|i| (v.values[i], w.values[i]))
    }

    /// Length of the bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        let Some(first) = self.vertices.first() else {
            return 0.0;
        };
        let (lo, hi) = self
            .vertices
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        (hi - lo).norm()
    }
}

/// Piecewise-linear interpolant of `field` at barycentric `mu` in `tet`.
pub fn interpolate(mesh: &TetMesh, field: &VertexField, tet: usize, mu: [f64; 4]) -> Result<Vec3, MeshError> {
    let sum: f64 = mu.iter().sum();
    if mu.iter().any(|&m| !(-BARY_TOL..=1.0 + BARY_TOL).contains(&m)) || (sum - 1.0).abs() > BARY_TOL {
        return Err(MeshError::BadBarycentric(mu));
    }
    let idx = mesh.tets()[tet];
    Ok((0..4).map(|k| field.values[idx[k]] * mu[k]).sum())
}

/// Regular grid of sample points, x varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl GridSpec {
    pub fn vertex_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        )
    }

    pub fn positions(&self) -> Vec<Vec3> {
        let [nx, ny, nz] = self.dims;
        let mut out = Vec::with_capacity(self.vertex_count());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    out.push(self.position(i, j, k));
                }
            }
        }
        out
    }

    /// Samples an analytic field at every grid vertex.
    pub fn sample(&self, f: impl Fn(Vec3) -> Vec3) -> VertexField {
        VertexField::new(self.positions().into_iter().map(f).collect())
    }
}

/// Splits each cube of a grid into tetrahedra.
pub trait Tessellation: Send + Sync {
    fn name(&self) -> &'static str;
    /// Tets of the unit cube as corner offsets in `{0, 1}³`.
    fn cube_tets(&self) -> Vec<[[usize; 3]; 4]>;
}

/// Six tets per cube sharing the main diagonal, one per ordering of the axes.
/// Every cube uses the same diagonal, so shared quad faces split identically.
pub struct Freudenthal;

impl Tessellation for Freudenthal {
    fn name(&self) -> &'static str {
        "freudenthal"
    }

    fn cube_tets(&self) -> Vec<[[usize; 3]; 4]> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        PERMS
            .iter()
            .map(|perm| {
                let mut corner = [0usize; 3];
                let mut tet = [[0usize; 3]; 4];
                for (step, &axis) in perm.iter().enumerate() {
                    corner[axis] = 1;
                    tet[step + 1] = corner;
                }
                tet
            })
            .collect()
    }
}

/// Tessellates the grid and validates the accompanying fields.
pub fn tessellate_grid_with(
    scheme: &dyn Tessellation,
    grid: &GridSpec,
    fields: Vec<VertexField>,
) -> Result<(TetMesh, Vec<VertexField>), MeshError> {
    let [nx, ny, nz] = grid.dims;
    if grid.dims.iter().any(|&d| d < 2) {
        return Err(MeshError::BadDims(grid.dims));
    }
    let pattern = scheme.cube_tets();
    let mut tets = Vec::with_capacity((nx - 1) * (ny - 1) * (nz - 1) * pattern.len());
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                for tet in &pattern {
                    tets.push(tet.map(|[a, b, c]| grid.index(i + a, j + b, k + c)));
                }
            }
        }
    }
    let mesh = TetMesh::new(grid.positions(), tets)?;
    for f in &fields {
        f.validate(&mesh)?;
    }
    Ok((mesh, fields))
}

pub fn tessellate_grid(grid: &GridSpec, fields: Vec<VertexField>) -> Result<(TetMesh, Vec<VertexField>), MeshError> {
    tessellate_grid_with(&Freudenthal, grid, fields)
}

/// Computes a second field from the first.
pub trait DerivedField: Send + Sync {
    fn name(&self) -> &'static str;
    fn derive(&self, mesh: &TetMesh, v: &VertexField) -> Result<VertexField, MeshError>;
}

/// `w = (∇v)v`, with `∇v` at each vertex the volume-weighted mean of the
/// constant Jacobians of its incident tets.
pub struct SujudiHaimes;

impl DerivedField for SujudiHaimes {
    fn name(&self) -> &'static str {
        "sujudi-haimes"
    }

    fn derive(&self, mesh: &TetMesh, v: &VertexField) -> Result<VertexField, MeshError> {
        sujudi_haimes_field(mesh, v)
    }
}

/// Constant Jacobian of the linear interpolant of `v` over one tet.
pub fn tet_jacobian(mesh: &TetMesh, v: &VertexField, tet: usize) -> Result<Mat3, MeshError> {
    let p = mesh.tet_positions(tet);
    let idx = mesh.tets()[tet];
    let dx = Mat3::from_columns(&[p[0] - p[3], p[1] - p[3], p[2] - p[3]]);
    let dv = Mat3::from_columns(&[
        v.values[idx[0]] - v.values[idx[3]],
        v.values[idx[1]] - v.values[idx[3]],
        v.values[idx[2]] - v.values[idx[3]],
    ]);
    let inv = dx.try_inverse().ok_or(MeshError::DegenerateCell(tet))?;
    Ok(dv * inv)
}

pub fn sujudi_haimes_field(mesh: &TetMesh, v: &VertexField) -> Result<VertexField, MeshError> {
    v.validate(mesh)?;
    let mut jac = vec![Mat3::zeros(); mesh.vertex_count()];
    let mut weight = vec![0.0; mesh.vertex_count()];
    for t in 0..mesh.tet_count() {
        let vol = mesh.tet_volume(t);
        if vol <= 0.0 {
            return Err(MeshError::DegenerateCell(t));
        }
        let j = tet_jacobian(mesh, v, t)?;
        for &i in &mesh.tets()[t] {
            jac[i] += j * vol;
            weight[i] += vol;
        }
    }
    let values = (0..mesh.vertex_count())
        .map(|i| {
            if weight[i] == 0.0 {
                Vec3::zeros()
            } else {
                (jac[i] / weight[i]) * v.values[i]
            }
        })
        .collect();
    Ok(VertexField::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(dims: [usize; 3]) -> GridSpec {
        GridSpec {
            dims,
            spacing: [0.5, 0.7, 0.3],
            origin: [-1.0, 0.25, 2.0],
        }
    }

    fn unit_mesh() -> TetMesh {
        TetMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()], vec![[0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn interpolation_at_vertices_and_centroid() {
        let mesh = unit_mesh();
        let f = VertexField::new(vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.5, 0.0), Vec3::new(4.0, 4.0, 4.0), Vec3::new(0.0, 0.0, -8.0)]);
        assert_eq!(interpolate(&mesh, &f, 0, [1.0, 0.0, 0.0, 0.0]).unwrap(), f.values[0]);
        let mean: Vec3 = f.values.iter().sum::<Vec3>() / 4.0;
        assert!((interpolate(&mesh, &f, 0, [0.25; 4]).unwrap() - mean).norm() <= 1e-15);
        assert!(matches!(interpolate(&mesh, &f, 0, [0.5, 0.6, 0.0, -0.1]), Err(MeshError::BadBarycentric(_))));
    }

    #[test]
    fn interpolation_matches_affine_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let pos: Vec<Vec3> = (0..4).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
            let Ok(mesh) = TetMesh::new(pos.clone(), vec![[0, 1, 2, 3]]) else { continue };
            let m = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let c = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let field = VertexField::new(pos.iter().map(|p| m * p + c).collect());
            let tp = mesh.tet_positions(0);
            for _ in 0..10 {
                let mut mu: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
                let s: f64 = mu.iter().sum();
                mu.iter_mut().for_each(|x| *x /= s);
                let x: Vec3 = (0..4).map(|k| tp[k] * mu[k]).sum();
                let got = interpolate(&mesh, &field, 0, mu).unwrap();
                assert!((got - (m * x + c)).norm() <= 1e-12 * (1.0 + got.norm()));
            }
        }
    }

    #[test]
    fn negative_tets_are_flipped_and_flat_tets_rejected() {
        let pos = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        let mesh = TetMesh::new(pos.clone(), vec![[0, 2, 1, 3]]).unwrap();
        assert!(mesh.tet_volume(0) > 0.0);
        let flat = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        assert_eq!(TetMesh::new(flat, vec![[0, 1, 2, 3]]), Err(MeshError::ZeroVolume(0)));
        assert!(matches!(TetMesh::new(pos, vec![[0, 1, 2, 7]]), Err(MeshError::IndexOutOfRange { .. })));
    }

    #[test]
    fn single_cube_counts() {
        let (mesh, _) = tessellate_grid(&grid([2, 2, 2]), vec![]).unwrap();
        assert_eq!(mesh.vertex_count(), 8);
        assert_eq!(mesh.tet_count(), 6);
        assert_eq!(mesh.faces().len(), 18);
        let boundary = mesh.faces().iter().filter(|f| f.is_boundary()).count();
        assert_eq!(boundary, 12);
        assert_eq!(mesh.faces().len() - boundary, 6);
        assert!((0..6).all(|t| mesh.tet_volume(t) > 0.0));
    }

    #[test]
    fn adjacent_cubes_share_diagonals() {
        let (mesh, _) = tessellate_grid(&grid([3, 2, 2]), vec![]).unwrap();
        assert_eq!(mesh.tet_count(), 12);
        // 2 cubes: 12 boundary triangles each minus the shared quad seen from
        // both sides, which must be split identically into 2 interior faces.
        let boundary = mesh.faces().iter().filter(|f| f.is_boundary()).count();
        assert_eq!(boundary, 20);
        assert_eq!(mesh.faces().len(), 20 + 14);
        adjacency_is_complete(&mesh);
    }

    fn adjacency_is_complete(mesh: &TetMesh) {
        for t in 0..mesh.tet_count() {
            for (k, &f) in mesh.tet_faces(t).iter().enumerate() {
                assert!(mesh.faces()[f].tets.contains(&t));
                let mut key = opposite_face(k).map(|j| mesh.tets()[t][j]);
                key.sort_unstable();
                assert_eq!(mesh.faces()[f].vertices, key);
            }
        }
        for (f, face) in mesh.faces().iter().enumerate() {
            assert!((1..=2).contains(&face.tets.len()));
            for &t in &face.tets {
                assert!(mesh.tet_faces(t).contains(&f));
            }
        }
    }

    #[test]
    fn tessellation_fills_the_box() {
        let g = grid([5, 4, 6]);
        let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
        let total: f64 = (0..mesh.tet_count()).map(|t| mesh.tet_volume(t)).sum();
        let want = (0..3).map(|a| (g.dims[a] - 1) as f64 * g.spacing[a]).product::<f64>();
        assert!((total - want).abs() <= 1e-10 * want);
        adjacency_is_complete(&mesh);
    }

    #[test]
    fn bad_dims_and_field_lengths() {
        assert_eq!(tessellate_grid(&grid([1, 3, 3]), vec![]).unwrap_err(), MeshError::BadDims([1, 3, 3]));
        let err = tessellate_grid(&grid([2, 2, 2]), vec![VertexField::new(vec![Vec3::zeros(); 3])]).unwrap_err();
        assert_eq!(err, MeshError::FieldLength { expected: 8, got: 3 });
    }

    #[test]
    fn linear_fields_are_reproduced() {
        let g = grid([4, 4, 4]);
        let m = Mat3::new(0.3, -1.0, 2.0, 0.5, 0.25, -0.75, 1.5, 0.0, -2.0);
        let c = Vec3::new(0.1, -0.2, 0.3);
        let f = move |x: Vec3| m * x + c;
        let field = g.sample(f);
        let (mesh, _) = tessellate_grid(&g, vec![field.clone()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..1000 {
            let t = rng.gen_range(0..mesh.tet_count());
            let mut mu: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            let s: f64 = mu.iter().sum();
            mu.iter_mut().for_each(|x| *x /= s);
            let p = mesh.tet_positions(t);
            let x: Vec3 = (0..4).map(|k| p[k] * mu[k]).sum();
            let got = interpolate(&mesh, &field, t, mu).unwrap();
            assert!((got - f(x)).norm() <= 1e-12 * (1.0 + got.norm()));
        }
    }

    #[test]
    fn sujudi_haimes_of_constant_and_linear_fields() {
        let g = grid([3, 3, 3]);
        let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
        let w = sujudi_haimes_field(&mesh, &g.sample(|_| Vec3::new(1.0, -2.0, 0.5))).unwrap();
        assert!(w.values.iter().all(|x| x.norm() <= 1e-14));

        let m = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.3);
        let v = g.sample(|x| m * x);
        let w = sujudi_haimes_field(&mesh, &v).unwrap();
        for (wi, vi) in w.values.iter().zip(&v.values) {
            assert!((wi - m * vi).norm() <= 1e-12 * (1.0 + vi.norm()));
        }
        for t in 0..mesh.tet_count() {
            assert!((tet_jacobian(&mesh, &v, t).unwrap() - m).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn rotation_gives_inward_acceleration() {
        let g = grid([4, 4, 3]);
        let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
        let v = g.sample(|x| Vec3::new(-x.y, x.x, 0.0));
        let w = sujudi_haimes_field(&mesh, &v).unwrap();
        for (wi, p) in w.values.iter().zip(mesh.vertices()) {
            assert!((wi - Vec3::new(-p.x, -p.y, 0.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn freudenthal_tets_share_the_diagonal() {
        for tet in Freudenthal.cube_tets() {
            assert_eq!(tet[0], [0, 0, 0]);
            assert_eq!(tet[3], [1, 1, 1]);
        }
    }
}
