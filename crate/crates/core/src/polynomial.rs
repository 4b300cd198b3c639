//! Real polynomials of degree at most three.
//!
//! Every polynomial that appears in the per-cell curve representation (the
//! denominator `Q(λ)` and the numerators `P_i(λ)`) is a cubic in λ, so a fixed
//! four-coefficient representation is enough. Roots are computed in closed
//! form and then polished with guarded Newton steps.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

use crate::extended::ExtendedReal;

/// Relative threshold below which a coefficient does not count toward the degree.
pub const EPS_DEG: f64 = 1e-10;
/// Absolute threshold below which every coefficient makes the zero polynomial.
pub const EPS_ZERO: f64 = 1e-300;
/// Default relative root-clustering tolerance, applied as `EPS_ROOT * (1 + |λ|)`.
pub const EPS_ROOT: f64 = 1e-8;

// Relative discriminant magnitude treated as an exact double root.
const EPS_DISCRIMINANT: f64 = 1e-14;
const NEWTON_STEPS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
}

/// `c[3]·λ³ + c[2]·λ² + c[1]·λ + c[0]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CubicPolynomial {
    pub coeffs: [f64; 4],
}

impl CubicPolynomial {
    pub const ZERO: CubicPolynomial = CubicPolynomial { coeffs: [0.0; 4] };

    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64) -> Self {
        Self {
            coeffs: [c0, c1, c2, c3],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, 0.0, 0.0, 0.0)
    }

    /// `lead · Π (λ - r)` for up to three roots.
    pub fn from_roots(lead: f64, roots: &[f64]) -> Self {
        assert!(roots.len() <= 3, "at most three roots");
        let mut p = Self::constant(lead);
        for &r in roots {
            p = p.mul_linear(-r, 1.0);
        }
        p
    }

    /// Multiplies by `(a + b·λ)`. The cubic coefficient must not overflow into λ⁴.
    pub fn mul_linear(&self, a: f64, b: f64) -> Self {
        let c = &self.coeffs;
        debug_assert!(c[3] == 0.0 || b == 0.0, "product exceeds degree three");
        Self::new(
            a * c[0],
            a * c[1] + b * c[0],
            a * c[2] + b * c[1],
            a * c[3] + b * c[2],
        )
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Largest coefficient magnitude.
    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.norm_inf() < EPS_ZERO
    }

    /// Degree after discarding coefficients that are negligible relative to the
    /// largest one; `None` for the zero polynomial.
    pub fn effective_degree(&self) -> Option<usize> {
        let scale = self.norm_inf();
        if scale < EPS_ZERO {
            return None;
        }
        (0..4).rev().find(|&k| self.coeffs[k].abs() > EPS_DEG * scale)
    }

    /// The polynomial with coefficients above the effective degree set to zero.
    pub fn truncated(&self) -> Self {
        match self.effective_degree() {
            None => Self::ZERO,
            Some(d) => {
                let mut out = *self;
                for c in out.coeffs.iter_mut().skip(d + 1) {
                    *c = 0.0;
                }
                out
            }
        }
    }

    /// Leading coefficient at the effective degree (0 for the zero polynomial).
    pub fn leading(&self) -> f64 {
        self.effective_degree().map_or(0.0, |d| self.coeffs[d])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let c = &self.coeffs;
        ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
    }

    /// Value at a point of the extended line. At infinity this is the limit for
    /// λ → +∞ of the effective polynomial: a signed IEEE infinity, or the
    /// constant itself when the effective degree is zero.
    pub fn eval_ext(&self, x: ExtendedReal) -> f64 {
        match x {
            ExtendedReal::Finite(x) => self.eval(x),
            ExtendedReal::Infinity => match self.effective_degree() {
                None => 0.0,
                Some(0) => self.coeffs[0],
                Some(d) => self.coeffs[d].signum() * f64::INFINITY,
            },
        }
    }

    pub fn derivative(&self) -> Self {
        let c = &self.coeffs;
        Self::new(c[1], 2.0 * c[2], 3.0 * c[3], 0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            coeffs: self.coeffs.map(|c| c * k),
        }
    }

    /// Synthetic division by `(λ - r)`; returns quotient and remainder.
    pub fn divide_linear(&self, r: f64) -> (Self, f64) {
        let c = &self.truncated().coeffs;
        let q2 = c[3];
        let q1 = c[2] + r * q2;
        let q0 = c[1] + r * q1;
        let rem = c[0] + r * q0;
        (Self::new(q0, q1, q2, 0.0), rem)
    }
}

impl Add for CubicPolynomial {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut c = self.coeffs;
        for (a, b) in c.iter_mut().zip(o.coeffs) {
            *a += b;
        }
        Self { coeffs: c }
    }
}

impl Sub for CubicPolynomial {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut c = self.coeffs;
        for (a, b) in c.iter_mut().zip(o.coeffs) {
            *a -= b;
        }
        Self { coeffs: c }
    }
}

impl Neg for CubicPolynomial {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul<f64> for CubicPolynomial {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.scale(k)
    }
}

/// A real root and how many times it occurs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: f64,
    pub multiplicity: u8,
}

/// Real roots in strictly increasing order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RootList {
    pub roots: Vec<Root>,
}

impl RootList {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.roots.iter().map(|r| r.value)
    }

    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity as usize).sum()
    }

    /// Index of a root within `eps_root·(1+|x|)` of `x`.
    pub fn find(&self, x: f64, eps_root: f64) -> Option<usize> {
        self.roots
            .iter()
            .position(|r| (r.value - x).abs() <= eps_root * (1.0 + x.abs().max(r.value.abs())))
    }
}

/// Real roots with the default clustering tolerance.
pub fn real_roots(p: &CubicPolynomial) -> Result<RootList, PolyError> {
    real_roots_with(p, EPS_ROOT)
}

/// Real roots of `p` by effective degree: closed form, guarded Newton polish,
/// then merging of roots closer than `eps_root·(1+|λ|)`.
pub fn real_roots_with(p: &CubicPolynomial, eps_root: f64) -> Result<RootList, PolyError> {
    let degree = p.effective_degree().ok_or(PolyError::ZeroPolynomial)?;
    let p = p.truncated();
    let c = &p.coeffs;
    let lead = c[degree];
    let mut raw: Vec<(f64, u8)> = match degree {
        0 => Vec::new(),
        1 => vec![(-c[0] / c[1], 1)],
        2 => monic_quadratic_roots(c[1] / lead, c[0] / lead),
        _ => monic_cubic_roots(c[2] / lead, c[1] / lead, c[0] / lead),
    };
    raw.retain(|(x, _)| x.is_finite());
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    polish(&p, &mut raw);
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(merge_clusters(raw, eps_root))
}

fn monic_quadratic_roots(b: f64, c: f64) -> Vec<(f64, u8)> {
    // x² + b x + c, rescaled so the coefficients are O(1).
    let s = b.abs().max(c.abs().sqrt());
    if s == 0.0 {
        return vec![(0.0, 2)];
    }
    let (b, c) = (b / s, c / (s * s));
    let disc = b * b - 4.0 * c;
    let tol = EPS_DISCRIMINANT * (b * b + 4.0 * c.abs());
    if disc.abs() <= tol {
        return vec![(-0.5 * b * s, 2)];
    }
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum_nonzero() * disc.sqrt());
    vec![(q * s, 1), (c / q * s, 1)]
}

fn monic_cubic_roots(a: f64, b: f64, c: f64) -> Vec<(f64, u8)> {
    // x³ + a x² + b x + c, rescaled so the coefficients are O(1).
    let s = a.abs().max(b.abs().sqrt()).max(c.abs().cbrt());
    if s == 0.0 {
        return vec![(0.0, 3)];
    }
    let (a, b, c) = (a / s, b / (s * s), c / (s * s * s));
    let shift = -a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let unscale = |t: f64| (t + shift) * s;

    if p.abs() <= EPS_DISCRIMINANT && q.abs() <= EPS_DISCRIMINANT {
        return vec![(unscale(0.0), 3)];
    }
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let delta = half_q * half_q + third_p * third_p * third_p;
    let delta_scale = half_q * half_q + third_p.abs().powi(3);

    if delta.abs() <= EPS_DISCRIMINANT * delta_scale {
        // One simple and one double root.
        let simple = 3.0 * q / p;
        let double = -1.5 * q / p;
        return vec![(unscale(simple), 1), (unscale(double), 2)];
    }
    if delta > 0.0 {
        let u3 = -(half_q.abs() + delta.sqrt()) * half_q.signum_nonzero();
        let u = u3.cbrt();
        let t = if u == 0.0 { 0.0 } else { u - third_p / u };
        return vec![(unscale(t), 1)];
    }
    let m = 2.0 * (-third_p).sqrt();
    let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    (0..3)
        .map(|k| {
            let t = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            (unscale(t), 1)
        })
        .collect()
}

trait SignumNonzero {
    fn signum_nonzero(self) -> f64;
}

impl SignumNonzero for f64 {
    fn signum_nonzero(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Newton steps on simple roots, each accepted only if it lowers |p| and stays
/// between the neighbouring roots.
fn polish(p: &CubicPolynomial, roots: &mut [(f64, u8)]) {
    let dp = p.derivative();
    let values: Vec<f64> = roots.iter().map(|r| r.0).collect();
    for (i, root) in roots.iter_mut().enumerate() {
        if root.1 != 1 {
            continue;
        }
        let lo = if i > 0 {
            0.5 * (values[i - 1] + values[i])
        } else {
            f64::NEG_INFINITY
        };
        let hi = if i + 1 < values.len() {
            0.5 * (values[i] + values[i + 1])
        } else {
            f64::INFINITY
        };
        let mut x = root.0;
        let mut fx = p.eval(x);
        for _ in 0..NEWTON_STEPS {
            let d = dp.eval(x);
            if fx == 0.0 || d == 0.0 || !d.is_finite() {
                break;
            }
            let next = x - fx / d;
            let fnext = p.eval(next);
            if !(next > lo && next < hi) || fnext.abs() > fx.abs() {
                break;
            }
            x = next;
            fx = fnext;
        }
        root.0 = x;
    }
}

fn merge_clusters(sorted: Vec<(f64, u8)>, eps_root: f64) -> RootList {
    let mut roots: Vec<Root> = Vec::with_capacity(sorted.len());
    for (x, m) in sorted {
        if let Some(last) = roots.last_mut() {
            if (x - last.value).abs() <= eps_root * (1.0 + x.abs().max(last.value.abs())) {
                let total = last.multiplicity + m;
                last.value = (last.value * last.multiplicity as f64 + x * m as f64) / total as f64;
                last.multiplicity = total.min(3);
                continue;
            }
        }
        roots.push(Root {
            value: x,
            multiplicity: m,
        });
    }
    RootList { roots }
}

/// Cancels roots shared by `p` and `q` with the default tolerance.
pub fn deflate_common_roots(
    p: &CubicPolynomial,
    q: &CubicPolynomial,
) -> (CubicPolynomial, CubicPolynomial, RootList) {
    deflate_common_roots_with(p, q, EPS_ROOT)
}

/// Divides both polynomials by `(λ - r)` for every root `r` they share (within
/// `eps_root`, relative) as often as the smaller multiplicity allows. Returns the
/// reduced pair and the shared roots. Zero inputs are returned unchanged.
pub fn deflate_common_roots_with(
    p: &CubicPolynomial,
    q: &CubicPolynomial,
    eps_root: f64,
) -> (CubicPolynomial, CubicPolynomial, RootList) {
    let (Ok(rp), Ok(rq)) = (real_roots_with(p, eps_root), real_roots_with(q, eps_root)) else {
        return (*p, *q, RootList::default());
    };
    deflate_with_roots(p, &rp, q, &rq, eps_root)
}

/// As [`deflate_common_roots_with`], reusing already computed root lists.
pub fn deflate_with_roots(
    p: &CubicPolynomial,
    p_roots: &RootList,
    q: &CubicPolynomial,
    q_roots: &RootList,
    eps_root: f64,
) -> (CubicPolynomial, CubicPolynomial, RootList) {
    let mut p_out = *p;
    let mut q_out = *q;
    let mut shared = Vec::new();
    for rq in q_roots.iter() {
        let Some(ip) = p_roots.find(rq.value, eps_root) else {
            continue;
        };
        let count = rq.multiplicity.min(p_roots.roots[ip].multiplicity);
        for _ in 0..count {
            p_out = p_out.divide_linear(rq.value).0;
            q_out = q_out.divide_linear(rq.value).0;
        }
        shared.push(Root {
            value: rq.value,
            multiplicity: count,
        });
    }
    (p_out, q_out, RootList { roots: shared })
}
