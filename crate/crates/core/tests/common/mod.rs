#![allow(dead_code)]

use pvcurve::eigensystem::{Vec3, VertexPair};
use pvcurve::extraction::Extraction;
use pvcurve::mesh::{sujudi_haimes_field, tessellate_grid, GridSpec, TetMesh, VertexField};
use rand::Rng;
use serde::Deserialize;

pub fn rand_vec(rng: &mut impl Rng) -> Vec3 {
    Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_pairs(rng: &mut impl Rng) -> [VertexPair; 4] {
    std::array::from_fn(|_| (rand_vec(rng), rand_vec(rng)))
}

pub fn unit_tet() -> TetMesh {
    TetMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()], vec![[0, 1, 2, 3]]).unwrap()
}

pub fn fields_of(pairs: &[VertexPair; 4]) -> (VertexField, VertexField) {
    (
        VertexField::new(pairs.iter().map(|p| p.0).collect()),
        VertexField::new(pairs.iter().map(|p| p.1).collect()),
    )
}

/// `v = position` and constant `w = ẑ` on the unit tet: the PV curve is the
/// edge from the origin up the z-axis.
pub fn z_axis_case() -> (TetMesh, VertexField, VertexField) {
    let mesh = unit_tet();
    let v = VertexField::new(mesh.vertices().to_vec());
    let w = VertexField::new(vec![Vec3::z(); 4]);
    (mesh, v, w)
}

/// Random smooth fields on a 5³ grid of the unit cube.
pub fn random_smooth_grid(rng: &mut impl Rng) -> (GridSpec, TetMesh, VertexField, VertexField) {
    let g = GridSpec {
        dims: [5, 5, 5],
        spacing: [0.25; 3],
        origin: [0.0; 3],
    };
    let c: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = move |x: Vec3, o: usize| {
        Vec3::new(
            c[o] + c[o + 1] * x.x + c[o + 2] * (3.0 * x.y).sin() + c[o + 3] * x.z * x.x,
            c[o + 4] + c[o + 5] * x.y + c[o + 6] * (2.0 * x.z).cos() + c[o + 7] * x.x * x.y,
            c[o + 8] + c[o + 9] * x.z + c[o + 10] * (2.5 * x.x).sin() + c[o + 11] * x.y * x.z,
        )
    };
    let v = g.sample(|x| f(x, 0));
    let w = g.sample(|x| f(x, 12));
    let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
    (g, mesh, v, w)
}

pub fn swirl_grid_spec() -> GridSpec {
    GridSpec {
        dims: [5, 5, 5],
        spacing: [0.5; 3],
        origin: [-1.1, -0.95, 0.0],
    }
}

/// A swirl around the z-axis with axial stretching; its vortex core is the
/// z-axis.
pub fn swirl_field(x: Vec3) -> Vec3 {
    Vec3::new(-x.y, x.x, (0.5 * x.z).exp())
}

pub fn swirl_grid() -> (GridSpec, TetMesh, VertexField, VertexField) {
    let g = swirl_grid_spec();
    let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
    let v = g.sample(swirl_field);
    let w = sujudi_haimes_field(&mesh, &v).unwrap();
    (g, mesh, v, w)
}

#[derive(Debug, Deserialize)]
pub struct BranchConfig {
    pub case: String,
    pub branches: usize,
    pub v_critical: bool,
    pub w_critical: bool,
    pub v: Vec<[f64; 3]>,
    pub w: Vec<[f64; 3]>,
}

impl BranchConfig {
    pub fn fields(&self) -> (VertexField, VertexField) {
        let f = |xs: &[[f64; 3]]| VertexField::new(xs.iter().map(|x| Vec3::from(*x)).collect());
        (f(&self.v), f(&self.w))
    }
}

pub fn branch_configurations() -> Vec<BranchConfig> {
    serde_json::from_str(include_str!("../fixtures/branch_configurations.json")).unwrap()
}

/// Normalized parallelism check. Where either field vanishes to rounding
/// precision the normalized residual is 0/0, and the point is a critical point
/// of that field, which lies on the curve.
pub fn parallel_ok(fv: Vec3, fw: Vec3, scale_v: f64, scale_w: f64, tol: f64) -> bool {
    fv.cross(&fw).norm() <= tol * fv.norm() * fw.norm() || fv.norm() <= 1e-12 * scale_v || fw.norm() <= 1e-12 * scale_w
}

fn field_scale(f: &VertexField, ids: &[usize]) -> f64 {
    ids.iter().map(|&i| f.values[i].norm()).fold(0.0, f64::max)
}

/// Barycentric weights of `x` in `tet`.
pub fn barycentric(mesh: &TetMesh, tet: usize, x: Vec3) -> [f64; 4] {
    let p = mesh.tet_positions(tet);
    let m = pvcurve::eigensystem::Mat3::from_columns(&[p[0] - p[3], p[1] - p[3], p[2] - p[3]]);
    let s = m.lu().solve(&(x - p[3])).unwrap();
    [s[0], s[1], s[2], 1.0 - s.sum()]
}

/// Worst normalized residual over all face points and finite polyline points,
/// with the number of points checked and failures at `tol`.
pub fn residual_report(mesh: &TetMesh, v: &VertexField, w: &VertexField, ex: &Extraction, tol: f64) -> (f64, usize, usize) {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut failed = 0;
    let mut check = |fv: Vec3, fw: Vec3, sv: f64, sw: f64| {
        checked += 1;
        if !parallel_ok(fv, fw, sv, sw, tol) {
            failed += 1;
        }
        if fv.norm() > 1e-12 * sv && fw.norm() > 1e-12 * sw {
            worst = worst.max(fv.cross(&fw).norm() / (fv.norm() * fw.norm()));
        }
    };
    for pts in &ex.face_points {
        for p in pts {
            let f = mesh.faces()[p.face_id].vertices;
            let fv: Vec3 = (0..3).map(|k| v.values[f[k]] * p.mu[k]).sum();
            let fw: Vec3 = (0..3).map(|k| w.values[f[k]] * p.mu[k]).sum();
            check(fv, fw, field_scale(v, &f), field_scale(w, &f));
        }
    }
    for c in &ex.curves {
        for p in &c.polyline {
            let ids = mesh.tets()[p.tet_id];
            let mu = barycentric(mesh, p.tet_id, Vec3::from(p.position));
            let fv: Vec3 = (0..4).map(|k| v.values[ids[k]] * mu[k]).sum();
            let fw: Vec3 = (0..4).map(|k| w.values[ids[k]] * mu[k]).sum();
            check(fv, fw, field_scale(v, &ids), field_scale(w, &ids));
        }
    }
    (worst, checked, failed)
}
