//! Solution sets of rational inequalities on the projective line ℝ ∪ {∞}.
//!
//! A set is stored as sorted, disjoint spans over ℝ plus a flag for the single
//! point at infinity. The circular view, where a span ending at `+∞` and one
//! starting at `-∞` are joined through ∞, is produced by
//! [`LambdaIntervalSet::intervals`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensystem::{Degeneracy, TetPolynomials};
use crate::extended::ExtendedReal;
use crate::polynomial::{deflate_with_roots, real_roots_with, CubicPolynomial, RootList, EPS_ROOT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("cell is degenerate ({0:?})")]
    Degenerate(Degeneracy),
}

/// A connected piece of ℝ. Infinite ends are always open.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealSpan {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl RealSpan {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        RealSpan {
            lo,
            hi,
            lo_closed: lo_closed && lo.is_finite(),
            hi_closed: hi_closed && hi.is_finite(),
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, true)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = x > self.lo || (x == self.lo && self.lo_closed);
        let below = x < self.hi || (x == self.hi && self.hi_closed);
        above && below
    }

    fn intersect(&self, other: &RealSpan) -> RealSpan {
        let (lo, lo_closed) = match self.lo.total_cmp(&other.lo) {
            std::cmp::Ordering::Greater => (self.lo, self.lo_closed),
            std::cmp::Ordering::Less => (other.lo, other.lo_closed),
            std::cmp::Ordering::Equal => (self.lo, self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.total_cmp(&other.hi) {
            std::cmp::Ordering::Less => (self.hi, self.hi_closed),
            std::cmp::Ordering::Greater => (other.hi, other.hi_closed),
            std::cmp::Ordering::Equal => (self.hi, self.hi_closed && other.hi_closed),
        };
        RealSpan {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }
}

/// One connected arc of the circle ℝ ∪ {∞}, traversed from `lo` to `hi` in
/// increasing direction (passing through ∞ when `contains_infinity` is set and
/// the arc is not the isolated point ∞).
///
/// The full circle is `lo = hi = ∞`, both ends open, `contains_infinity`; the
/// real line without ∞ is the same with `contains_infinity` unset; the
/// isolated point is `lo = hi = ∞` with both ends closed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaInterval {
    pub lo: ExtendedReal,
    pub hi: ExtendedReal,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub contains_infinity: bool,
}

impl LambdaInterval {
    pub fn is_full_circle(&self) -> bool {
        self.lo.is_infinite() && self.hi.is_infinite() && !self.lo_closed && self.contains_infinity
    }

    pub fn is_infinity_point(&self) -> bool {
        self.lo.is_infinite() && self.hi.is_infinite() && self.lo_closed
    }

    /// The interval as spans over ℝ (one, or two for an arc through ∞).
    pub fn real_spans(&self) -> Vec<RealSpan> {
        use ExtendedReal::*;
        if self.is_infinity_point() {
            return Vec::new();
        }
        match (self.lo, self.hi) {
            (Infinity, Infinity) => vec![RealSpan::new(f64::NEG_INFINITY, f64::INFINITY, false, false)],
            (Infinity, Finite(b)) => vec![RealSpan::new(f64::NEG_INFINITY, b, false, self.hi_closed)],
            (Finite(a), Infinity) => vec![RealSpan::new(a, f64::INFINITY, self.lo_closed, false)],
            (Finite(a), Finite(b)) if self.contains_infinity => vec![
                RealSpan::new(f64::NEG_INFINITY, b, false, self.hi_closed),
                RealSpan::new(a, f64::INFINITY, self.lo_closed, false),
            ],
            (Finite(a), Finite(b)) => vec![RealSpan::new(a, b, self.lo_closed, self.hi_closed)],
        }
    }

    pub fn contains(&self, x: ExtendedReal) -> bool {
        match x {
            ExtendedReal::Infinity => self.contains_infinity,
            ExtendedReal::Finite(v) => self.real_spans().iter().any(|s| s.contains(v)),
        }
    }

    /// Finite endpoints with their closedness.
    pub fn finite_endpoints(&self) -> Vec<(f64, bool)> {
        let mut out = Vec::new();
        if let ExtendedReal::Finite(a) = self.lo {
            out.push((a, self.lo_closed));
        }
        if let ExtendedReal::Finite(b) = self.hi {
            if self.lo != self.hi {
                out.push((b, self.hi_closed));
            }
        }
        out
    }
}

/// A subset of ℝ ∪ {∞}.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LambdaIntervalSet {
    spans: Vec<RealSpan>,
    infinity: bool,
}

impl LambdaIntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        LambdaIntervalSet {
            spans: vec![RealSpan::new(f64::NEG_INFINITY, f64::INFINITY, false, false)],
            infinity: true,
        }
    }

    /// Builds a canonical set from arbitrary spans.
    pub fn from_spans(spans: impl IntoIterator<Item = RealSpan>, infinity: bool) -> Self {
        let mut spans: Vec<RealSpan> = spans
            .into_iter()
            .map(|s| RealSpan::new(s.lo, s.hi, s.lo_closed, s.hi_closed))
            .filter(|s| !s.is_empty())
            .collect();
        spans.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        let mut merged: Vec<RealSpan> = Vec::with_capacity(spans.len());
        for s in spans {
            if let Some(last) = merged.last_mut() {
                let touches = s.lo < last.hi || (s.lo == last.hi && (s.lo_closed || last.hi_closed));
                if touches {
                    match s.hi.total_cmp(&last.hi) {
                        std::cmp::Ordering::Greater => {
                            last.hi = s.hi;
                            last.hi_closed = s.hi_closed;
                        }
                        std::cmp::Ordering::Equal => last.hi_closed |= s.hi_closed,
                        std::cmp::Ordering::Less => {}
                    }
                    continue;
                }
            }
            merged.push(s);
        }
        LambdaIntervalSet {
            spans: merged,
            infinity,
        }
    }

    pub fn spans(&self) -> &[RealSpan] {
        &self.spans
    }

    pub fn contains_infinity(&self) -> bool {
        self.infinity
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty() && !self.infinity
    }

    pub fn contains(&self, x: ExtendedReal) -> bool {
        match x {
            ExtendedReal::Infinity => self.infinity,
            ExtendedReal::Finite(v) => self.spans.iter().any(|s| s.contains(v)),
        }
    }

    pub fn intersect(&self, other: &LambdaIntervalSet) -> LambdaIntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.spans.len() && j < other.spans.len() {
            let (a, b) = (&self.spans[i], &other.spans[j]);
            let s = a.intersect(b);
            if !s.is_empty() {
                out.push(s);
            }
            let a_ends_first = a.hi < b.hi || (a.hi == b.hi && !a.hi_closed);
            if a_ends_first {
                i += 1;
            } else {
                j += 1;
            }
        }
        LambdaIntervalSet::from_spans(out, self.infinity && other.infinity)
    }

    /// Connected components on the circle, in increasing order of their first
    /// finite point; an arc through ∞ comes last.
    pub fn intervals(&self) -> Vec<LambdaInterval> {
        let n = self.spans.len();
        let starts_unbounded = n > 0 && self.spans[0].lo == f64::NEG_INFINITY;
        let ends_unbounded = n > 0 && self.spans[n - 1].hi == f64::INFINITY;
        let to_interval = |s: &RealSpan, contains_infinity: bool| LambdaInterval {
            lo: ExtendedReal::from_f64(s.lo),
            hi: ExtendedReal::from_f64(s.hi),
            lo_closed: s.lo_closed || (contains_infinity && s.lo.is_infinite()),
            hi_closed: s.hi_closed || (contains_infinity && s.hi.is_infinite()),
            contains_infinity,
        };
        if !self.infinity {
            return self.spans.iter().map(|s| to_interval(s, false)).collect();
        }
        if n == 0 {
            return vec![LambdaInterval {
                lo: ExtendedReal::Infinity,
                hi: ExtendedReal::Infinity,
                lo_closed: true,
                hi_closed: true,
                contains_infinity: true,
            }];
        }
        if n == 1 && starts_unbounded && ends_unbounded {
            return vec![LambdaInterval {
                lo: ExtendedReal::Infinity,
                hi: ExtendedReal::Infinity,
                lo_closed: false,
                hi_closed: false,
                contains_infinity: true,
            }];
        }
        let mut out = Vec::new();
        let first_inner = usize::from(starts_unbounded);
        let last_inner = if ends_unbounded { n - 1 } else { n };
        for s in &self.spans[first_inner..last_inner] {
            out.push(to_interval(s, false));
        }
        let through = match (starts_unbounded, ends_unbounded) {
            (true, true) => {
                let (first, last) = (&self.spans[0], &self.spans[n - 1]);
                LambdaInterval {
                    lo: ExtendedReal::Finite(last.lo),
                    hi: ExtendedReal::Finite(first.hi),
                    lo_closed: last.lo_closed,
                    hi_closed: first.hi_closed,
                    contains_infinity: true,
                }
            }
            (true, false) => to_interval(&self.spans[0], true),
            (false, true) => to_interval(&self.spans[n - 1], true),
            (false, false) => LambdaInterval {
                lo: ExtendedReal::Infinity,
                hi: ExtendedReal::Infinity,
                lo_closed: true,
                hi_closed: true,
                contains_infinity: true,
            },
        };
        out.push(through);
        out
    }

    pub fn component_count(&self) -> usize {
        self.intervals().len()
    }
}

/// Membership of ∞ in `{P/Q ≥ 0}` from the behaviour of both polynomials at ∞.
///
/// Homogenized, ∞ is a root of `P` of multiplicity `3 - deg P` and likewise for
/// `Q`. After cancelling the common part, a remaining pole excludes ∞, a
/// remaining zero includes it, and otherwise the sign of the limit decides.
fn infinity_included(p: &CubicPolynomial, q: &CubicPolynomial) -> bool {
    let (Some(dp), Some(dq)) = (p.effective_degree(), q.effective_degree()) else {
        return true;
    };
    match dp.cmp(&dq) {
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Equal => p.leading() / q.leading() > 0.0,
    }
}

/// Solution of `P(λ)/Q(λ) ≥ 0` over ℝ ∪ {∞}.
///
/// Roots of `Q` are excluded, roots of `P` alone are included, and each open
/// piece between consecutive roots is decided by the sign of `P·Q` at an
/// interior probe. A zero `P` gives the whole circle.
pub fn solve_inequality(p: &CubicPolynomial, q: &CubicPolynomial) -> Result<LambdaIntervalSet, IntervalError> {
    solve_inequality_with(p, q, EPS_ROOT)
}

pub fn solve_inequality_with(
    p: &CubicPolynomial,
    q: &CubicPolynomial,
    eps_root: f64,
) -> Result<LambdaIntervalSet, IntervalError> {
    let q_roots = real_roots_with(q, eps_root).map_err(|_| IntervalError::ZeroDenominator)?;
    let Ok(p_roots) = real_roots_with(p, eps_root) else {
        return Ok(LambdaIntervalSet::full());
    };
    Ok(sign_table(p, &p_roots, q, &q_roots, eps_root))
}

fn sign_table(
    p: &CubicPolynomial,
    p_roots: &RootList,
    q: &CubicPolynomial,
    q_roots: &RootList,
    eps_root: f64,
) -> LambdaIntervalSet {
    let p_eff = p.truncated();
    let q_eff = q.truncated();
    // (value, included)
    let mut breaks: Vec<(f64, bool)> = q_roots.values().map(|r| (r, false)).collect();
    for r in p_roots.values() {
        if q_roots.find(r, eps_root).is_none() {
            breaks.push((r, true));
        }
    }
    breaks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let positive = |x: f64| p_eff.eval(x) * q_eff.eval(x) > 0.0;
    let far = 1.0 + 2.0 * breaks.iter().map(|b| b.0.abs()).fold(0.0, f64::max);
    let mut spans = Vec::new();
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(breaks.iter().map(|b| b.0));
    edges.push(f64::INFINITY);
    for k in 0..edges.len() - 1 {
        let (a, b) = (edges[k], edges[k + 1]);
        let probe = match (a.is_finite(), b.is_finite()) {
            (true, true) => 0.5 * (a + b),
            (false, true) => -far,
            (true, false) => far,
            (false, false) => 0.0,
        };
        if a < b && positive(probe) {
            spans.push(RealSpan::new(a, b, false, false));
        }
    }
    for &(r, included) in &breaks {
        if included {
            spans.push(RealSpan::closed(r, r));
        }
    }
    LambdaIntervalSet::from_spans(spans, infinity_included(&p_eff, &q_eff))
}

/// Intersection of any number of sets; the empty list gives the whole circle.
pub fn intersect(sets: &[LambdaIntervalSet]) -> LambdaIntervalSet {
    sets.iter()
        .fold(LambdaIntervalSet::full(), |acc, s| acc.intersect(s))
}

/// `P_i/Q` and `(Q - P_i)/Q` after cancelling their common roots, for one `i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeflatedPair {
    pub lower: (CubicPolynomial, CubicPolynomial),
    pub upper: (CubicPolynomial, CubicPolynomial),
}

/// λ for which all barycentric weights `μ_i = P_i/Q` lie in `[0, 1]`:
/// the intersection of `P_i/Q ≥ 0` and `(Q - P_i)/Q ≥ 0` over the four vertices.
pub fn feasible_regions(tp: &TetPolynomials) -> Result<LambdaIntervalSet, IntervalError> {
    feasible_regions_with(tp, EPS_ROOT)
}

pub fn feasible_regions_with(tp: &TetPolynomials, eps_root: f64) -> Result<LambdaIntervalSet, IntervalError> {
    if tp.degeneracy != Degeneracy::None {
        return Err(IntervalError::Degenerate(tp.degeneracy));
    }
    let q_roots = real_roots_with(&tp.q, eps_root).map_err(|_| IntervalError::ZeroDenominator)?;
    let mut acc = LambdaIntervalSet::full();
    for p in &tp.p {
        for num in [*p, tp.q - *p] {
            let set = match real_roots_with(&num, eps_root) {
                Err(_) => LambdaIntervalSet::full(),
                Ok(num_roots) => {
                    let (pd, qd, shared) = deflate_with_roots(&num, &num_roots, &tp.q, &q_roots, eps_root);
                    if shared.is_empty() {
                        sign_table(&num, &num_roots, &tp.q, &q_roots, eps_root)
                    } else {
                        solve_inequality_with(&pd, &qd, eps_root)?
                    }
                }
            };
            acc = acc.intersect(&set);
            if acc.is_empty() {
                return Ok(acc);
            }
        }
    }
    Ok(acc)
}
