//! Brute-force validation of extracted segments.
//!
//! Each tet is covered by the barycentric lattice with `grid_n` subdivisions
//! per edge, on which the normalized residual `|v×w| / (|v||w|)` is sampled.
//! Lattice points close to a zero of `v×w` (within two cells, judged by its
//! local Jacobian) form connected clusters. The minimum of each cluster is
//! refined by Levenberg–Marquardt, and the cluster is flagged when the refined
//! residual drops below the threshold. Flagged clusters and segments must then
//! match in both directions within two lattice cells.
//!
//! Only vertex values, mesh geometry and the raw polynomial coefficients of
//! segments are used here.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensystem::{Mat3, Vec3, VertexPair};
use crate::extended::ExtendedReal;
use crate::extraction::CurveSegment;
use crate::mesh::{TetMesh, VertexField};

pub const EPS_NORM: f64 = 1e-300;
pub const DEFAULT_RESIDUAL_THRESHOLD: f64 = 1e-4;
/// Matching radius in lattice cells.
pub const MATCH_CELLS: f64 = 2.0;

// A lattice point where both fields are below this fraction of their vertex
// scale is labeled degenerate.
const DEGENERATE_REL: f64 = 1e-14;
// A field below this fraction of its vertex scale counts as vanishing, where
// the normalized residual is 0/0.
const CRITICAL_REL: f64 = 1e-12;
// Refined residual treated as an exact zero.
const ZERO_RESIDUAL: f64 = 1e-7;
// Barycentric weight below which a refined point lies on the tet boundary.
const BOUNDARY_MU: f64 = 1e-12;
// Barycentric slack for unconstrained zeros on the tet boundary.
const INSIDE_SLACK: f64 = 1e-9;
const REFINE_ITERATIONS: usize = 60;
const REFINE_STARTS: usize = 64;
const SEGMENT_SAMPLES: usize = 400;
// Largest |λ| used when sampling towards λ = ∞.
const THETA_LIMIT: f64 = FRAC_PI_2 - 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Agree,
    Disagree,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub case_id: String,
    /// Largest normalized residual over the sampled segment points.
    pub max_residual: f64,
    pub matched_clusters: usize,
    pub unmatched_clusters: usize,
    pub matched_segments: usize,
    pub unmatched_segments: usize,
    pub degenerate_points: usize,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualSample {
    pub mu: [f64; 4],
    pub residual: f64,
    /// Both fields vanish here; `residual` is meaningless.
    pub degenerate: bool,
}

struct TetFields {
    v: [Vec3; 4],
    w: [Vec3; 4],
    scale_v: f64,
    scale_w: f64,
}

impl TetFields {
    fn new(values: &[VertexPair; 4]) -> Self {
        let v = values.map(|p| p.0);
        let w = values.map(|p| p.1);
        let scale_v = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let scale_w = w.iter().map(|x| x.norm()).fold(0.0, f64::max);
        TetFields { v, w, scale_v, scale_w }
    }

    fn at(&self, mu: &[f64; 4]) -> (Vec3, Vec3) {
        let mut fv = Vec3::zeros();
        let mut fw = Vec3::zeros();
        for k in 0..4 {
            fv += self.v[k] * mu[k];
            fw += self.w[k] * mu[k];
        }
        (fv, fw)
    }

    fn is_degenerate(&self, fv: &Vec3, fw: &Vec3) -> bool {
        fv.norm() <= DEGENERATE_REL * self.scale_v && fw.norm() <= DEGENERATE_REL * self.scale_w
    }

    fn residual(&self, mu: &[f64; 4]) -> f64 {
        let (fv, fw) = self.at(mu);
        fv.cross(&fw).norm() / (fv.norm() * fw.norm() + EPS_NORM)
    }

    /// `v×w` scaled by the vertex magnitudes, with its Jacobian with respect
    /// to the weights in `params`, the weight `pivot` absorbing their sum.
    /// Columns for `fixed` weights are zero.
    fn scaled_cross(&self, mu: &[f64; 4], params: [usize; 3], pivot: usize, fixed: Option<usize>) -> (Vec3, Mat3) {
        let (fv, fw) = self.at(mu);
        let s = 1.0 / (self.scale_v * self.scale_w + EPS_NORM);
        let mut jac = Mat3::zeros();
        for (col, &k) in params.iter().enumerate() {
            if fixed == Some(k) {
                continue;
            }
            let dv = self.v[k] - self.v[pivot];
            let dw = self.w[k] - self.w[pivot];
            jac.set_column(col, &((dv.cross(&fw) + fv.cross(&dw)) * s));
        }
        (fv.cross(&fw) * s, jac)
    }

    /// Normalized residual, taken as zero where either field vanishes.
    fn flag_residual(&self, mu: &[f64; 4]) -> f64 {
        let (fv, fw) = self.at(mu);
        if fv.norm() <= CRITICAL_REL * self.scale_v || fw.norm() <= CRITICAL_REL * self.scale_w {
            return 0.0;
        }
        fv.cross(&fw).norm() / (fv.norm() * fw.norm() + EPS_NORM)
    }

    /// Frobenius norm of the Jacobian of `v×w` with respect to
    /// `(μ0, μ1, μ2)` with `μ3 = 1 - μ0 - μ1 - μ2`.
    fn cross_jacobian_norm(&self, fv: &Vec3, fw: &Vec3) -> f64 {
        (0..3)
            .map(|k| {
                let dv = self.v[k] - self.v[3];
                let dw = self.w[k] - self.w[3];
                (dv.cross(fw) + fv.cross(&dw)).norm_squared()
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Lattice point `(i, j, k)` with `l = n - i - j - k`.
#[derive(Clone, Copy)]
struct Lattice {
    n: usize,
}

impl Lattice {
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.n + 1) * (j + (self.n + 1) * k)
    }

    fn mu(&self, i: usize, j: usize, k: usize) -> [f64; 4] {
        let n = self.n as f64;
        let l = self.n - i - j - k;
        [i as f64 / n, j as f64 / n, k as f64 / n, l as f64 / n]
    }

    fn for_each(&self, mut f: impl FnMut(usize, usize, usize)) {
        for k in 0..=self.n {
            for j in 0..=self.n - k {
                for i in 0..=self.n - k - j {
                    f(i, j, k);
                }
            }
        }
    }

    fn contains(&self, i: isize, j: isize, k: isize) -> bool {
        i >= 0 && j >= 0 && k >= 0 && (i + j + k) as usize <= self.n
    }
}

/// Residual on the barycentric lattice with `grid_n` subdivisions per edge.
pub fn sample_tet_residual(values: &[VertexPair; 4], grid_n: usize) -> Vec<ResidualSample> {
    let fields = TetFields::new(values);
    let lattice = Lattice { n: grid_n };
    let mut out = Vec::new();
    lattice.for_each(|i, j, k| {
        let mu = lattice.mu(i, j, k);
        let (fv, fw) = fields.at(&mu);
        out.push(ResidualSample {
            mu,
            residual: fv.cross(&fw).norm() / (fv.norm() * fw.norm() + EPS_NORM),
            degenerate: fields.is_degenerate(&fv, &fw),
        });
    });
    out
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(x: [f64; 4]) -> [f64; 4] {
    let mut u = x;
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (r, &ur) in u.iter().enumerate() {
        cum += ur;
        let t = (cum - 1.0) / (r + 1) as f64;
        if ur - t > 0.0 {
            theta = t;
        }
    }
    x.map(|xi| (xi - theta).max(0.0))
}

#[derive(Clone, Copy, PartialEq)]
enum Domain {
    /// The affine extension beyond the tet.
    Free,
    /// The tet, by projection after each step.
    Tet,
    /// The plane of the face opposite the given vertex.
    FacePlane(usize),
}

/// Levenberg–Marquardt on the scaled `v×w` over `domain`. Returns the refined
/// point and its normalized residual.
fn refine(fields: &TetFields, start: [f64; 4], domain: Domain) -> ([f64; 4], f64) {
    let fixed = match domain {
        Domain::FacePlane(f) => Some(f),
        _ => None,
    };
    let pivot = if fixed == Some(3) { 2 } else { 3 };
    let params: [usize; 3] = {
        let mut p = [0; 3];
        let mut n = 0;
        for k in (0..4).filter(|&k| k != pivot) {
            p[n] = k;
            n += 1;
        }
        p
    };
    let mut mu = start;
    if let Some(f) = fixed {
        mu[pivot] += mu[f];
        mu[f] = 0.0;
    }
    let (mut r, mut jac) = fields.scaled_cross(&mu, params, pivot, fixed);
    let mut cost = r.norm_squared();
    let mut damping = 1e-6;
    for _ in 0..REFINE_ITERATIONS {
        if cost.sqrt() <= 1e-17 {
            break;
        }
        let jt = jac.transpose();
        let jtj = jt * jac;
        let g = jt * r;
        let mut improved = false;
        for _ in 0..24 {
            let a = jtj + Mat3::identity() * (damping * jtj.trace() + EPS_NORM);
            let Some(step) = a.lu().solve(&(-g)) else {
                damping *= 10.0;
                continue;
            };
            let mut cand = mu;
            for c in 0..3 {
                cand[params[c]] += step[c];
            }
            cand[pivot] -= step.sum();
            if domain == Domain::Tet {
                cand = project_simplex(cand);
            }
            let (rc, jc) = fields.scaled_cross(&cand, params, pivot, fixed);
            let cc = rc.norm_squared();
            if cc < cost {
                mu = cand;
                r = rc;
                jac = jc;
                cost = cc;
                damping = (damping * 0.3).max(1e-15);
                improved = true;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (mu, fields.flag_residual(&mu))
}

struct Cluster {
    refined: [f64; 4],
    flagged: bool,
}

struct TetAnalysis {
    lattice: Lattice,
    /// Cluster id per lattice index, `usize::MAX` outside the tube.
    label: Vec<usize>,
    clusters: Vec<Cluster>,
    degenerate_points: usize,
}

fn analyze_tet(fields: &TetFields, grid_n: usize, threshold: f64) -> TetAnalysis {
    let lattice = Lattice { n: grid_n };
    let size = (grid_n + 1).pow(3);
    let mut in_tube = vec![false; size];
    let mut dist = vec![f64::INFINITY; size];
    let mut degenerate_points = 0;
    let h = 1.0 / grid_n as f64;
    lattice.for_each(|i, j, k| {
        let mu = lattice.mu(i, j, k);
        let (fv, fw) = fields.at(&mu);
        if fields.is_degenerate(&fv, &fw) {
            degenerate_points += 1;
            return;
        }
        let c = fv.cross(&fw).norm();
        let f = c / (fv.norm() * fw.norm() + EPS_NORM);
        let idx = lattice.index(i, j, k);
        // First-order estimate of the distance to the zero set of v×w.
        dist[idx] = c / (fields.cross_jacobian_norm(&fv, &fw) + EPS_NORM);
        in_tube[idx] = f <= threshold || dist[idx] <= MATCH_CELLS * h;
    });

    let mut label = vec![usize::MAX; size];
    let mut clusters = Vec::new();
    let mut stack = Vec::new();
    lattice.for_each(|i, j, k| {
        let idx = lattice.index(i, j, k);
        if !in_tube[idx] || label[idx] != usize::MAX {
            return;
        }
        let id = clusters.len();
        let mut members = Vec::new();
        label[idx] = id;
        stack.push((i, j, k));
        while let Some((a, b, c)) = stack.pop() {
            members.push(lattice.index(a, b, c));
            for nidx in neighbors(&lattice, a, b, c) {
                if in_tube[nidx] && label[nidx] == usize::MAX {
                    label[nidx] = id;
                    stack.push(unindex(nidx, grid_n));
                }
            }
        }
        // Refinement starts from every local minimum of the distance
        // estimate, then from the lowest points overall.
        let (mut starts, mut rest): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&m| {
            let (a, b, c) = unindex(m, grid_n);
            neighbors(&lattice, a, b, c).all(|n| dist[n] >= dist[m])
        });
        starts.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        rest.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        starts.extend(rest.into_iter().take(REFINE_STARTS));
        // A zero of the affine extension counts when it lies in the tet. A
        // minimum on the tet boundary with a small but nonzero residual is
        // either a curve passing just outside or a short clip of a corner,
        // which an exact zero in a face plane through that point tells apart.
        let inside = |m: &[f64; 4]| m.iter().all(|&x| x >= -INSIDE_SLACK);
        let mut refined = [0.0; 4];
        let mut res = f64::INFINITY;
        let mut flagged = false;
        'starts: for &start in &starts {
            let (i, j, k) = unindex(start, grid_n);
            let (m, r) = refine(fields, lattice.mu(i, j, k), Domain::Free);
            if r <= threshold && inside(&m) {
                refined = project_simplex(m);
                flagged = true;
                break;
            }
            let (m, r) = refine(fields, lattice.mu(i, j, k), Domain::Tet);
            if r <= threshold && (r <= ZERO_RESIDUAL || m.iter().all(|&x| x > BOUNDARY_MU)) {
                refined = m;
                flagged = true;
                break;
            }
            for f in (0..4).filter(|&f| m[f] <= BOUNDARY_MU) {
                let (mf, rf) = refine(fields, m, Domain::FacePlane(f));
                if rf <= ZERO_RESIDUAL && inside(&mf) {
                    refined = project_simplex(mf);
                    flagged = true;
                    break 'starts;
                }
            }
            if r < res {
                refined = m;
                res = r;
            }
        }
        clusters.push(Cluster {
            refined,
            flagged,
        });
    });
    TetAnalysis {
        lattice,
        label,
        clusters,
        degenerate_points,
    }
}

/// Lattice indices of the 26-neighborhood of `(a, b, c)` inside the tet.
fn neighbors(lattice: &Lattice, a: usize, b: usize, c: usize) -> impl Iterator<Item = usize> + '_ {
    (0..27).filter(|&o| o != 13).filter_map(move |o| {
        let (x, y, z) = (a as isize + o % 3 - 1, b as isize + (o / 3) % 3 - 1, c as isize + o / 9 - 1);
        lattice
            .contains(x, y, z)
            .then(|| lattice.index(x as usize, y as usize, z as usize))
    })
}

fn unindex(idx: usize, n: usize) -> (usize, usize, usize) {
    let m = n + 1;
    (idx % m, (idx / m) % m, idx / (m * m))
}

fn horner(c: &[f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

/// θ ranges (λ = tan θ) covered by a segment's interval.
fn theta_ranges(seg: &CurveSegment) -> Vec<(f64, f64)> {
    let iv = &seg.interval;
    let th = |x: ExtendedReal, upper: bool| match x {
        ExtendedReal::Finite(l) => l.atan(),
        ExtendedReal::Infinity if upper => THETA_LIMIT,
        ExtendedReal::Infinity => -THETA_LIMIT,
    };
    match (iv.lo, iv.hi) {
        (ExtendedReal::Infinity, ExtendedReal::Infinity) if iv.lo_closed => vec![],
        (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) if iv.contains_infinity => {
            vec![(a.atan(), THETA_LIMIT), (-THETA_LIMIT, b.atan())]
        }
        (lo, hi) => vec![(th(lo, false), th(hi, true))],
    }
}

/// Barycentric samples along a segment, from its own coefficients.
fn segment_samples(seg: &CurveSegment) -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    for (t0, t1) in theta_ranges(seg) {
        for s in 0..=SEGMENT_SAMPLES {
            let l = (t0 + (t1 - t0) * s as f64 / SEGMENT_SAMPLES as f64).tan();
            out.push(std::array::from_fn(|i| {
                let (p, q) = &seg.rationals[i];
                horner(&p.coeffs, l) / horner(&q.coeffs, l)
            }));
        }
    }
    out
}

fn dist4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    (0..4).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

fn point_polyline_distance(p: &[f64; 4], line: &[[f64; 4]]) -> f64 {
    if line.len() == 1 {
        return dist4(p, &line[0]);
    }
    line.windows(2)
        .map(|w| {
            let d: [f64; 4] = std::array::from_fn(|k| w[1][k] - w[0][k]);
            let len2: f64 = d.iter().map(|x| x * x).sum();
            let t = if len2 > 0.0 {
                ((0..4).map(|k| (p[k] - w[0][k]) * d[k]).sum::<f64>() / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q: [f64; 4] = std::array::from_fn(|k| w[0][k] + d[k] * t);
            dist4(p, &q)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Whether a flagged cluster has a lattice point within `MATCH_CELLS` cells of `mu`.
fn near_flagged(an: &TetAnalysis, mu: &[f64; 4]) -> bool {
    let n = an.lattice.n as f64;
    let h = 1.0 / n;
    let c = [mu[0] * n, mu[1] * n, mu[2] * n];
    let r = MATCH_CELLS.ceil() as isize + 1;
    let base = c.map(|x| x.round() as isize);
    for dk in -r..=r {
        for dj in -r..=r {
            for di in -r..=r {
                let (i, j, k) = (base[0] + di, base[1] + dj, base[2] + dk);
                if !an.lattice.contains(i, j, k) {
                    continue;
                }
                let (i, j, k) = (i as usize, j as usize, k as usize);
                let id = an.label[an.lattice.index(i, j, k)];
                if id == usize::MAX || !an.clusters[id].flagged {
                    continue;
                }
                if dist4(&an.lattice.mu(i, j, k), mu) <= MATCH_CELLS * h {
                    return true;
                }
            }
        }
    }
    false
}

#[derive(Clone, Copy, Debug, Default)]
struct TetTally {
    max_residual: f64,
    matched_clusters: usize,
    unmatched_clusters: usize,
    matched_segments: usize,
    unmatched_segments: usize,
    degenerate_points: usize,
}

fn verify_tet(values: &[VertexPair; 4], segments: &[&CurveSegment], grid_n: usize, threshold: f64) -> TetTally {
    let fields = TetFields::new(values);
    let an = analyze_tet(&fields, grid_n, threshold);
    let h = 1.0 / grid_n as f64;
    let samples: Vec<Vec<[f64; 4]>> = segments.iter().map(|s| segment_samples(s)).collect();
    let mut tally = TetTally {
        degenerate_points: an.degenerate_points,
        ..TetTally::default()
    };
    for cl in an.clusters.iter().filter(|c| c.flagged) {
        let hit = samples
            .iter()
            .any(|line| point_polyline_distance(&cl.refined, line) <= MATCH_CELLS * h);
        if hit {
            tally.matched_clusters += 1;
        } else {
            tally.unmatched_clusters += 1;
        }
    }
    for line in &samples {
        for mu in line {
            let (fv, fw) = fields.at(mu);
            if !fields.is_degenerate(&fv, &fw) && fv.norm() > DEGENERATE_REL * fields.scale_v && fw.norm() > DEGENERATE_REL * fields.scale_w {
                tally.max_residual = tally.max_residual.max(fields.residual(mu));
            }
        }
        if line.iter().all(|mu| near_flagged(&an, mu)) {
            tally.matched_segments += 1;
        } else {
            tally.unmatched_segments += 1;
        }
    }
    tally
}

/// Single-tet form of [`verify_segments`].
pub fn verify_tet_segments(
    case_id: &str,
    values: &[VertexPair; 4],
    segments: &[CurveSegment],
    grid_n: usize,
    threshold: f64,
) -> OracleReport {
    let refs: Vec<&CurveSegment> = segments.iter().collect();
    report(case_id, [verify_tet(values, &refs, grid_n, threshold)].into_iter())
}

fn report(case_id: &str, tallies: impl Iterator<Item = TetTally>) -> OracleReport {
    let mut total = TetTally::default();
    for t in tallies {
        total.max_residual = total.max_residual.max(t.max_residual);
        total.matched_clusters += t.matched_clusters;
        total.unmatched_clusters += t.unmatched_clusters;
        total.matched_segments += t.matched_segments;
        total.unmatched_segments += t.unmatched_segments;
        total.degenerate_points += t.degenerate_points;
    }
    let verdict = if total.unmatched_clusters > 0 || total.unmatched_segments > 0 {
        if total.degenerate_points > 0 {
            Verdict::Degenerate
        } else {
            Verdict::Disagree
        }
    } else {
        Verdict::Agree
    };
    OracleReport {
        case_id: case_id.to_string(),
        max_residual: total.max_residual,
        matched_clusters: total.matched_clusters,
        unmatched_clusters: total.unmatched_clusters,
        matched_segments: total.matched_segments,
        unmatched_segments: total.unmatched_segments,
        degenerate_points: total.degenerate_points,
        verdict,
    }
}

/// Checks segments against the brute-force residual on the given tets (all
/// tets when `tets` is `None`).
pub fn verify_segments(
    case_id: &str,
    mesh: &TetMesh,
    v: &VertexField,
    w: &VertexField,
    segments: &[CurveSegment],
    grid_n: usize,
    threshold: f64,
    tets: Option<&[usize]>,
) -> OracleReport {
    let all: Vec<usize>;
    let tets = match tets {
        Some(t) => t,
        None => {
            all = (0..mesh.tet_count()).collect();
            &all
        }
    };
    let mut by_tet: Vec<Vec<&CurveSegment>> = vec![Vec::new(); mesh.tet_count()];
    for s in segments {
        by_tet[s.tet_id].push(s);
    }
    let tallies: Vec<TetTally> = tets
        .par_iter()
        .map(|&t| verify_tet(&mesh.tet_values(t, v, w), &by_tet[t], grid_n, threshold))
        .collect();
    report(case_id, tallies.into_iter())
}
