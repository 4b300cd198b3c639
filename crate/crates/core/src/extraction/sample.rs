use super::{CurveSegment, PVCurve, PieceRef, PolylinePoint};
use crate::eigensystem::Vec3;
use crate::extended::ExtendedReal;

const MAX_DEPTH: u32 = 30;
// Samples near ∞ stop at |λ| = LAMBDA_CAP * (1 + median |finite endpoint|).
const LAMBDA_CAP: f64 = 1e6;

/// Parameter range of one part of a segment over ℝ, increasing; ends may be
/// `±∞`.
pub fn piece_range(seg: &CurveSegment, part: u8) -> (f64, f64) {
    let spans = seg.interval.real_spans();
    match spans.len() {
        // Arc through ∞: part 0 runs from `lo` up to +∞, part 1 from -∞ up to `hi`.
        2 if part == 0 => (spans[1].lo, spans[1].hi),
        2 => (spans[0].lo, spans[0].hi),
        1 => (spans[0].lo, spans[0].hi),
        _ => (f64::INFINITY, f64::INFINITY),
    }
}

pub fn part_count(seg: &CurveSegment) -> u8 {
    if seg.interval.real_spans().len() == 2 {
        2
    } else {
        1
    }
}

fn lambda_cap(seg: &CurveSegment) -> f64 {
    let mut ends: Vec<f64> = seg
        .interval
        .finite_endpoints()
        .iter()
        .map(|(e, _)| e.abs())
        .collect();
    ends.sort_by(f64::total_cmp);
    let median = match ends.len() {
        0 => 0.0,
        1 => ends[0],
        _ => 0.5 * (ends[0] + ends[1]),
    };
    LAMBDA_CAP * (1.0 + median)
}

fn position_at(seg: &CurveSegment, lambda: ExtendedReal) -> Vec3 {
    if lambda.is_infinite() {
        return super::limit_point(seg).1;
    }
    let l = lambda.to_f64();
    (0..4)
        .map(|i| {
            let (p, q) = &seg.rationals[i];
            Vec3::from(seg.vertices[i]) * (p.eval(l) / q.eval(l))
        })
        .sum()
}

/// Positions at the start and end of a part, in increasing λ.
pub fn piece_end_positions(seg: &CurveSegment, part: u8) -> (Vec3, Vec3) {
    let (a, b) = piece_range(seg, part);
    (
        position_at(seg, ExtendedReal::from_f64(a)),
        position_at(seg, ExtendedReal::from_f64(b)),
    )
}

fn chord_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

struct Sampler<'a> {
    seg: &'a CurveSegment,
    tol: f64,
    cap: f64,
    out: Vec<PolylinePoint>,
}

impl Sampler<'_> {
    fn at(&self, theta: f64) -> Vec3 {
        position_at(self.seg, ExtendedReal::Finite(theta.tan()))
    }

    fn push(&mut self, pos: Vec3, lambda: ExtendedReal) {
        self.out.push(PolylinePoint {
            position: pos.into(),
            lambda,
            tet_id: self.seg.tet_id,
        });
    }

    /// Appends samples in `(t0, t1]` where `λ = tan t`; `l1` is the exact λ at `t1`.
    fn refine(&mut self, t0: f64, p0: Vec3, t1: f64, p1: Vec3, l1: ExtendedReal, depth: u32) {
        let tm = 0.5 * (t0 + t1);
        let quarter = [0.5 * (t0 + tm), tm, 0.5 * (tm + t1)];
        if quarter.iter().any(|t| t.tan().abs() > self.cap) {
            self.push(p1, l1);
            return;
        }
        let pts = quarter.map(|t| self.at(t));
        let dev = pts.iter().map(|p| chord_distance(p, &p0, &p1)).fold(0.0, f64::max);
        if dev > self.tol && depth < MAX_DEPTH {
            self.refine(t0, p0, tm, pts[1], ExtendedReal::Finite(tm.tan()), depth + 1);
            self.refine(tm, pts[1], t1, p1, l1, depth + 1);
        } else {
            self.push(p1, l1);
        }
    }
}

/// Polyline of one part in increasing λ, refined until every chord stays
/// within `max_chord_error` of the curve. An end at ∞ is the exact limit
/// point; interior samples never exceed the λ cap.
pub fn sample_piece(seg: &CurveSegment, part: u8, max_chord_error: f64) -> Vec<PolylinePoint> {
    let (a, b) = piece_range(seg, part);
    let end = |x: f64| {
        let l = ExtendedReal::from_f64(x);
        (x.atan(), position_at(seg, l), l)
    };
    let (ta, pa, la) = end(a);
    let (tb, pb, lb) = end(b);
    let mut s = Sampler {
        seg,
        tol: max_chord_error,
        cap: lambda_cap(seg),
        out: Vec::new(),
    };
    s.push(pa, la);
    if tb > ta {
        s.refine(ta, pa, tb, pb, lb, 0);
    }
    s.out
}

fn sample_ref(piece: &PieceRef, segments: &[CurveSegment], max_chord_error: f64) -> Vec<PolylinePoint> {
    let mut pts = sample_piece(&segments[piece.segment], piece.part, max_chord_error);
    if piece.reversed {
        pts.reverse();
    }
    pts
}

/// Joined polyline of a curve; the shared point between consecutive pieces
/// appears once.
pub fn sample_polyline(curve: &PVCurve, segments: &[CurveSegment], max_chord_error: f64) -> Vec<PolylinePoint> {
    let mut out: Vec<PolylinePoint> = Vec::new();
    for piece in &curve.pieces {
        let pts = sample_ref(piece, segments, max_chord_error);
        let skip = usize::from(!out.is_empty());
        out.extend(pts.into_iter().skip(skip));
    }
    out
}
