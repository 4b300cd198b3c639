//! Searches random single tets for each of the eight reference branch
//! configurations and prints the first hit per case as vertex data.
//!
//! Run with `cargo run --release --example branch_search`.

use pvcurve::eigensystem::Vec3;
use pvcurve::extended::ExtendedReal;
use pvcurve::extraction::{extract, Extraction, Tolerances};
use pvcurve::mesh::{TetMesh, VertexField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Branch count, and whether λ = 0 or λ = ∞ must lie on some branch.
struct Target {
    name: char,
    branches: usize,
    v_critical: bool,
    w_critical: bool,
    /// λ = 0 and λ = ∞ on different branches.
    split: bool,
}

const TARGETS: [Target; 8] = [
    Target { name: 'a', branches: 1, v_critical: false, w_critical: false, split: false },
    Target { name: 'b', branches: 1, v_critical: true, w_critical: false, split: false },
    Target { name: 'c', branches: 1, v_critical: true, w_critical: true, split: false },
    Target { name: 'd', branches: 2, v_critical: false, w_critical: false, split: false },
    Target { name: 'e', branches: 2, v_critical: true, w_critical: true, split: true },
    Target { name: 'f', branches: 3, v_critical: false, w_critical: false, split: false },
    Target { name: 'g', branches: 3, v_critical: false, w_critical: true, split: false },
    Target { name: 'h', branches: 4, v_critical: false, w_critical: true, split: false },
];

fn classify(ex: &Extraction) -> (usize, Option<usize>, Option<usize>) {
    let zero = ex.segments.iter().position(|s| s.interval.contains(ExtendedReal::Finite(0.0)));
    let inf = ex.segments.iter().position(|s| s.has_w_critical_point);
    (ex.segments.len(), zero, inf)
}

fn matches(t: &Target, ex: &Extraction) -> bool {
    let (n, zero, inf) = classify(ex);
    n == t.branches
        && zero.is_some() == t.v_critical
        && inf.is_some() == t.w_critical
        && (!t.split || zero != inf)
        && ex.diagnostics.is_empty()
        && ex.curves.iter().all(|c| !c.closed)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mesh = TetMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()], vec![[0, 1, 2, 3]]).unwrap();
    let mut found: [Option<(Vec<Vec3>, Vec<Vec3>)>; 8] = Default::default();
    for trial in 0..20_000_000u64 {
        let mut draw = || Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let v: Vec<Vec3> = (0..4).map(|_| draw()).collect();
        let w: Vec<Vec3> = (0..4).map(|_| draw()).collect();
        let ex = extract(&mesh, &VertexField::new(v.clone()), &VertexField::new(w.clone()), &Tolerances::default()).unwrap();
        for (i, t) in TARGETS.iter().enumerate() {
            if found[i].is_none() && matches(t, &ex) {
                eprintln!("({}) found at trial {trial}", t.name);
                found[i] = Some((v.clone(), w.clone()));
            }
        }
        if found.iter().all(Option::is_some) {
            break;
        }
    }
    for (t, f) in TARGETS.iter().zip(&found) {
        match f {
            Some((v, w)) => {
                println!("// ({})", t.name);
                let fmt = |xs: &Vec<Vec3>| {
                    xs.iter().map(|x| format!("[{:?}, {:?}, {:?}]", x.x, x.y, x.z)).collect::<Vec<_>>().join(", ")
                };
                println!("v: [{}],", fmt(v));
                println!("w: [{}],", fmt(w));
            }
            None => println!("// ({}) not found", t.name),
        }
    }
}
