use super::*;
use crate::eigensystem::Vec3;
use crate::mesh::{sujudi_haimes_field, tessellate_grid, GridSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_positions() -> Vec<Vec3> {
    vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]
}

fn z_axis_case() -> (TetMesh, VertexField, VertexField) {
    let pos = unit_positions();
    let mesh = TetMesh::new(pos.clone(), vec![[0, 1, 2, 3]]).unwrap();
    let v = VertexField::new(pos);
    let w = VertexField::new(vec![Vec3::z(); 4]);
    (mesh, v, w)
}

/// Fields at a barycentric point of a segment's tet.
fn fields_at(mesh: &TetMesh, v: &VertexField, w: &VertexField, tet: usize, mu: [f64; 4]) -> (Vec3, Vec3) {
    let idx = mesh.tets()[tet];
    let fv = (0..4).map(|k| v.values[idx[k]] * mu[k]).sum();
    let fw = (0..4).map(|k| w.values[idx[k]] * mu[k]).sum();
    (fv, fw)
}

/// Parallelism residual check. At λ = 0 and λ = ∞ one field vanishes, so the
/// normalized residual is 0/0; those points are accepted when the vanishing
/// field is zero to rounding.
fn parallel_ok(fv: Vec3, fw: Vec3, scale_v: f64, scale_w: f64) -> bool {
    fv.cross(&fw).norm() <= 1e-8 * fv.norm() * fw.norm() || fv.norm() <= 1e-12 * scale_v || fw.norm() <= 1e-12 * scale_w
}

fn barycentric(mesh: &TetMesh, tet: usize, x: Vec3) -> [f64; 4] {
    let p = mesh.tet_positions(tet);
    let m = crate::eigensystem::Mat3::from_columns(&[p[0] - p[3], p[1] - p[3], p[2] - p[3]]);
    let s = m.lu().solve(&(x - p[3])).unwrap();
    [s[0], s[1], s[2], 1.0 - s.sum()]
}

fn check_polylines(mesh: &TetMesh, v: &VertexField, w: &VertexField, ex: &Extraction) -> usize {
    let sv = v.values.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let sw = w.values.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut n = 0;
    for c in &ex.curves {
        for p in &c.polyline {
            let mu = barycentric(mesh, p.tet_id, Vec3::from(p.position));
            assert!(mu.iter().all(|&m| m >= -1e-7), "point outside its tet: {mu:?}");
            let (fv, fw) = fields_at(mesh, v, w, p.tet_id, mu);
            assert!(parallel_ok(fv, fw, sv, sw), "residual at {p:?}: {:e}", fv.cross(&fw).norm() / (fv.norm() * fw.norm()));
            n += 1;
        }
    }
    n
}

#[test]
fn z_axis_single_tet() {
    let (mesh, v, w) = z_axis_case();
    let tol = Tolerances::default();
    let ex = extract(&mesh, &v, &w, &tol).unwrap();
    assert_eq!(ex.segments.len(), 1);
    let seg = &ex.segments[0];
    let spans = seg.interval.real_spans();
    assert_eq!(spans.len(), 1);
    assert_eq!((spans[0].lo, spans[0].hi), (0.0, 1.0));
    assert!(seg.endpoints.iter().all(Option::is_some));
    let (_, pos) = evaluate_segment(seg, ExtendedReal::Finite(0.5)).unwrap();
    assert!((pos - Vec3::new(0.0, 0.0, 0.5)).norm() <= 1e-15);
    assert!(evaluate_segment(seg, ExtendedReal::Finite(1.5)).is_err());
    for (slot, lambda) in [(0, 0.0), (1, 1.0)] {
        let r = seg.endpoints[slot].unwrap();
        let p = ex.face_points[r.face][r.index];
        let (_, pos) = evaluate_segment(seg, ExtendedReal::Finite(lambda)).unwrap();
        assert!((pos - p.position()).norm() <= 1e-10);
    }
    assert_eq!(ex.curves.len(), 1);
    let poly = &ex.curves[0].polyline;
    assert_eq!(poly.len(), 2);
    for p in poly {
        assert!(Vec3::from(p.position).xy().norm() <= 1e-15);
    }
    assert!(ex.diagnostics.is_empty(), "{:?}", ex.diagnostics);
}

#[test]
fn z_axis_faces_carry_points_only_where_pierced() {
    // Shift the tet so the axis passes through the interior of exactly two faces.
    let pos: Vec<Vec3> = unit_positions().iter().map(|p| p - Vec3::new(0.2, 0.2, 0.0)).collect();
    let mesh = TetMesh::new(pos.clone(), vec![[0, 1, 2, 3]]).unwrap();
    let v = VertexField::new(pos);
    let w = VertexField::new(vec![Vec3::z(); 4]);
    let num = numerator_pass(&mesh, &v, &w, &Tolerances::default());
    let with_points: Vec<usize> = (0..4).filter(|&f| !num.face_points[f].is_empty()).collect();
    assert_eq!(with_points.len(), 2);
    for f in with_points {
        assert_eq!(num.face_points[f].len(), 1);
        assert!(num.face_points[f][0].position().xy().norm() <= 1e-15);
    }
}

#[test]
fn two_tets_through_a_shared_face() {
    let pos = vec![
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(-1.0, 1.0, 0.1),
        Vec3::new(-1.0, -1.0, -0.1),
        Vec3::new(0.1, 0.2, 1.0),
        Vec3::new(-0.2, 0.1, -1.0),
    ];
    let mesh = TetMesh::new(pos.clone(), vec![[0, 1, 2, 3], [0, 1, 2, 4]]).unwrap();
    let v = VertexField::new(pos);
    let w = VertexField::new(vec![Vec3::z(); 5]);
    let tol = Tolerances::default();
    let ex = extract(&mesh, &v, &w, &tol).unwrap();
    assert_eq!(ex.segments.len(), 2);
    assert_eq!(ex.curves.len(), 1);
    assert_eq!(ex.curves[0].segments().len(), 2);
    for g in junction_gaps(&ex.curves[0], &ex.segments) {
        assert!(g <= 1e-12);
    }
    for p in &ex.curves[0].polyline {
        assert!(Vec3::from(p.position).xy().norm() <= 1e-12);
    }
    assert!(ex.diagnostics.is_empty(), "{:?}", ex.diagnostics);
}

#[test]
fn constant_parallel_fields_are_degenerate_everywhere() {
    let g = GridSpec {
        dims: [3, 3, 3],
        spacing: [1.0; 3],
        origin: [0.0; 3],
    };
    let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
    let v = g.sample(|_| Vec3::x());
    let ex = extract(&mesh, &v, &v, &Tolerances::default()).unwrap();
    assert!(ex.face_points.iter().all(Vec::is_empty));
    let deg_faces = ex.diagnostics.iter().filter(|d| d.kind == DiagnosticKind::DegenerateFace).count();
    assert_eq!(deg_faces, mesh.faces().len());
    assert_eq!(ex.degenerate_cells, mesh.tet_count());
    assert!(ex.curves.is_empty());
}

#[test]
fn identical_linear_fields_are_degenerate() {
    let g = GridSpec {
        dims: [3, 3, 3],
        spacing: [1.0; 3],
        origin: [-1.0; 3],
    };
    let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
    let v = g.sample(|x| Vec3::new(x.x + 0.3 * x.y, x.y - 0.2, 0.5 * x.z + 0.1));
    let ex = extract(&mesh, &v, &v, &Tolerances::default()).unwrap();
    assert!(ex.curves.is_empty());
    assert!(ex.degenerate_cells > 0);
}

#[test]
fn zero_fields_are_degenerate() {
    let g = GridSpec {
        dims: [2, 2, 2],
        spacing: [1.0; 3],
        origin: [0.0; 3],
    };
    let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
    let z = g.sample(|_| Vec3::zeros());
    let ex = extract(&mesh, &z, &z, &Tolerances::default()).unwrap();
    assert!(ex.curves.is_empty());
    assert_eq!(ex.degenerate_cells, mesh.tet_count());
}

fn rand_vec(rng: &mut impl Rng) -> Vec3 {
    Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_single_tet(rng: &mut impl Rng) -> (TetMesh, VertexField, VertexField) {
    let mesh = TetMesh::new(unit_positions(), vec![[0, 1, 2, 3]]).unwrap();
    let v = VertexField::new((0..4).map(|_| rand_vec(rng)).collect());
    let w = VertexField::new((0..4).map(|_| rand_vec(rng)).collect());
    (mesh, v, w)
}

#[test]
fn random_tets_pass_the_residual_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let tol = Tolerances {
        max_chord_error: 1e-3,
        ..Tolerances::default()
    };
    let mut points = 0;
    for _ in 0..1000 {
        let (mesh, v, w) = random_single_tet(&mut rng);
        let ex = extract(&mesh, &v, &w, &tol).unwrap();
        points += check_polylines(&mesh, &v, &w, &ex);
        for seg in &ex.segments {
            for (slot, (end, closed)) in [(seg.interval.lo, seg.interval.lo_closed), (seg.interval.hi, seg.interval.hi_closed)]
                .into_iter()
                .enumerate()
            {
                if !end.is_infinite() || closed {
                    assert!(seg.endpoints[slot].is_some(), "end {end} of {:?} unmatched", seg.interval);
                }
            }
        }
    }
    assert!(points > 1000);
}

#[test]
fn segment_weights_stay_barycentric() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..500 {
        let (mesh, v, w) = random_single_tet(&mut rng);
        let ex = extract(&mesh, &v, &w, &Tolerances::default()).unwrap();
        for seg in &ex.segments {
            for s in seg.interval.real_spans() {
                let (a, b) = (s.lo.max(-1e3), s.hi.min(1e3));
                for k in 0..=20 {
                    let l = a + (b - a) * k as f64 / 20.0;
                    let (mu, pos) = evaluate_segment(seg, ExtendedReal::Finite(l)).unwrap();
                    let sum: f64 = mu.iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-10);
                    assert!(mu.iter().all(|&m| (-1e-9..=1.0 + 1e-9).contains(&m)), "{mu:?}");
                    let (fv, fw) = fields_at(&mesh, &v, &w, 0, mu);
                    assert!((fv - fw * l).norm() <= 1e-8 * fv.norm().max(1e-300) + 1e-14 * (1.0 + l.abs()));
                    assert!(pos.iter().all(|x| x.is_finite()));
                }
            }
        }
    }
}

fn random_smooth_grid(rng: &mut impl Rng) -> (GridSpec, TetMesh, VertexField, VertexField) {
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

#[test]
fn grid_face_points_pass_the_residual_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..5 {
        let (_, mesh, v, w) = random_smooth_grid(&mut rng);
        let num = numerator_pass(&mesh, &v, &w, &Tolerances::default());
        for pts in &num.face_points {
            for p in pts {
                let f = mesh.faces()[p.face_id].vertices;
                let fv: Vec3 = (0..3).map(|k| v.values[f[k]] * p.mu[k]).sum();
                let fw: Vec3 = (0..3).map(|k| w.values[f[k]] * p.mu[k]).sum();
                assert!(fv.cross(&fw).norm() <= 1e-8 * fv.norm() * fw.norm() + 1e-300);
            }
        }
    }
}

#[test]
fn grid_extraction_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let tol = Tolerances::default();
    let mut segments = 0;
    for _ in 0..5 {
        let (_, mesh, v, w) = random_smooth_grid(&mut rng);
        let ex = extract(&mesh, &v, &w, &tol).unwrap();
        segments += ex.segments.len();
        check_polylines(&mesh, &v, &w, &ex);
        let bad: Vec<_> = ex.diagnostics.iter().filter(|d| d.kind != DiagnosticKind::DegenerateFace).collect();
        assert!(bad.is_empty(), "{bad:?}");
        for c in &ex.curves {
            for g in junction_gaps(c, &ex.segments) {
                assert!(g <= 1e-9 * mesh.diameter(), "gap {g:e}");
            }
        }
    }
    assert!(segments > 0);
}

/// Curves as point lists, oriented and ordered by their first coordinates.
fn canonical_curves(ex: &Extraction) -> Vec<Vec<Vec3>> {
    let key = |p: &Vec3| [p.x, p.y, p.z];
    let mut out: Vec<Vec<Vec3>> = ex
        .curves
        .iter()
        .map(|c| {
            let mut pts: Vec<Vec3> = c.polyline.iter().map(|p| Vec3::from(p.position)).collect();
            if key(&pts[pts.len() - 1]) < key(&pts[0]) {
                pts.reverse();
            }
            pts
        })
        .collect();
    out.sort_by(|a, b| key(&a[0]).partial_cmp(&key(&b[0])).unwrap());
    out
}

#[test]
fn stitching_ignores_tet_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let tol = Tolerances::default();
    for _ in 0..3 {
        let (_, mesh, v, w) = random_smooth_grid(&mut rng);
        let base = extract(&mesh, &v, &w, &tol).unwrap();
        let mut tets = mesh.tets().to_vec();
        tets.shuffle(&mut rng);
        let shuffled = TetMesh::new(mesh.vertices().to_vec(), tets).unwrap();
        let other = extract(&shuffled, &v, &w, &tol).unwrap();
        let (a, b) = (canonical_curves(&base), canonical_curves(&other));
        assert_eq!(a.len(), b.len());
        for (ca, cb) in a.iter().zip(&b) {
            assert_eq!(ca.len(), cb.len());
            for (pa, pb) in ca.iter().zip(cb) {
                assert!((pa - pb).norm() <= 1e-12 * mesh.diameter());
            }
        }
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let (_, mesh, v, w) = random_smooth_grid(&mut rng);
    let run = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| extract(&mesh, &v, &w, &Tolerances::default()).unwrap())
    };
    let (a, b) = (run(1), run(8));
    assert_eq!(a.segments, b.segments);
    assert_eq!(a.curves, b.curves);
}

/// Swirl around the z-axis with accelerating axial flow. Its Sujudi–Haimes
/// core is exactly the axis, also after linear interpolation.
fn swirl_grid() -> (GridSpec, TetMesh, VertexField, VertexField) {
    let g = GridSpec {
        dims: [5, 5, 5],
        spacing: [0.5; 3],
        origin: [-1.1, -0.95, 0.0],
    };
    let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
    let v = g.sample(|x| Vec3::new(-x.y, x.x, (0.5 * x.z).exp()));
    let w = sujudi_haimes_field(&mesh, &v).unwrap();
    (g, mesh, v, w)
}

#[test]
fn vortex_core_is_the_axis() {
    let (_, mesh, v, w) = swirl_grid();
    let ex = extract(&mesh, &v, &w, &Tolerances::default()).unwrap();
    assert!(ex.diagnostics.is_empty(), "{:?}", ex.diagnostics);
    assert_eq!(ex.curves.len(), 1);
    let c = &ex.curves[0];
    assert!(!c.closed);
    let zs: Vec<f64> = c.polyline.iter().map(|p| p.position[2]).collect();
    let (zmin, zmax) = zs.iter().fold((f64::MAX, f64::MIN), |(a, b), &z| (a.min(z), b.max(z)));
    assert!(zmin <= 1e-12 && zmax >= 2.0 - 1e-12);
    for p in &c.polyline {
        assert!(Vec3::from(p.position).xy().norm() <= 1e-6);
    }
    check_polylines(&mesh, &v, &w, &ex);
}

/// Rigid rotation: v and w vanish together on the axis, the excluded
/// degenerate case, so no curve is extracted and the cells holding the axis
/// have vanishing polynomials.
#[test]
fn rigid_rotation_yields_no_core() {
    let g = GridSpec {
        dims: [5, 5, 5],
        spacing: [0.5; 3],
        origin: [-1.1, -0.95, 0.0],
    };
    let (mesh, _) = tessellate_grid(&g, vec![]).unwrap();
    let v = g.sample(|x| Vec3::new(-x.y, x.x, 0.0));
    let w = sujudi_haimes_field(&mesh, &v).unwrap();
    let ex = extract(&mesh, &v, &w, &Tolerances::default()).unwrap();
    assert!(ex.curves.is_empty());
    let tp = crate::eigensystem::tet_polynomials(&mesh.tet_values(0, &v, &w)).unwrap();
    assert_ne!(tp.degeneracy, crate::eigensystem::Degeneracy::None);
}

fn curved_segment() -> CurveSegment {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    loop {
        let (mesh, v, w) = random_single_tet(&mut rng);
        let ex = extract(&mesh, &v, &w, &Tolerances::default()).unwrap();
        if let Some(seg) = ex.segments.into_iter().find(|s| {
            let sp = s.interval.real_spans();
            sp.len() == 1 && sp[0].lo.is_finite() && sp[0].hi.is_finite()
        }) {
            let pts = sample_piece(&seg, 0, 1e-2);
            if pts.len() > 3 {
                return seg;
            }
        }
    }
}

fn measured_deviation(seg: &CurveSegment, pts: &[PolylinePoint]) -> f64 {
    let mut worst: f64 = 0.0;
    for pair in pts.windows(2) {
        let (l0, l1) = (pair[0].lambda.to_f64(), pair[1].lambda.to_f64());
        let (a, b) = (Vec3::from(pair[0].position), Vec3::from(pair[1].position));
        for k in 1..50 {
            let l = l0 + (l1 - l0) * k as f64 / 50.0;
            let (_, p) = evaluate_segment(seg, ExtendedReal::Finite(l)).unwrap();
            let d = b - a;
            let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            worst = worst.max((p - (a + d * t)).norm());
        }
    }
    worst
}

#[test]
fn sampling_refines_monotonically() {
    let seg = curved_segment();
    let mut prev: Option<(usize, f64)> = None;
    let mut tol = 1e-2;
    for _ in 0..6 {
        let pts = sample_piece(&seg, 0, tol);
        let dev = measured_deviation(&seg, &pts);
        assert!(dev <= tol * 1.0001, "deviation {dev} above {tol}");
        if let Some((n, d)) = prev {
            assert!(pts.len() <= 2 * n + 1);
            assert!(dev <= d);
        }
        prev = Some((pts.len(), dev));
        tol /= 2.0;
    }
}

#[test]
fn straight_segments_need_two_points() {
    let (mesh, v, w) = z_axis_case();
    let ex = extract(&mesh, &v, &w, &Tolerances::default()).unwrap();
    for tol in [1e-1, 1e-6, 1e-12] {
        assert_eq!(sample_piece(&ex.segments[0], 0, tol).len(), 2);
    }
}
