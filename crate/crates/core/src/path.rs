//! Piecewise parametric paths in the κ-plane.
//!
//! A path is a chain of segments. The global parameter `t ∈ [0, 1]` is split
//! between segments in proportion to their weights: swept angle for arcs,
//! length for lines and sample polylines.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, C64};

/// Maximum endpoint gap between consecutive segments.
pub const CHAIN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Segment {
    /// `center + radius·e^{iφ}` for φ from `start` to `end` (radians).
    CircleArc { center: [f64; 2], radius: f64, start: f64, end: f64 },
    /// `center + e^{iθ}(a cos φ + i b sin φ)` with tilt θ.
    EllipseArc { center: [f64; 2], a: f64, b: f64, tilt: f64, start: f64, end: f64 },
    Line { from: [f64; 2], to: [f64; 2] },
    /// Polyline through the given points, parametrized by arc length.
    Samples { points: Vec<[f64; 2]> },
}

fn z(p: [f64; 2]) -> C64 {
    c(p[0], p[1])
}

fn arr(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn cumulative_lengths(points: &[[f64; 2]]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in points.windows(2) {
        let last = *acc.last().unwrap();
        acc.push(last + (z(w[1]) - z(w[0])).norm());
    }
    acc
}

impl Segment {
    pub fn circle_arc(center: C64, radius: f64, start: f64, end: f64) -> Self {
        Segment::CircleArc { center: arr(center), radius, start, end }
    }

    pub fn ellipse_arc(center: C64, a: f64, b: f64, tilt: f64, start: f64, end: f64) -> Self {
        Segment::EllipseArc { center: arr(center), a, b, tilt, start, end }
    }

    pub fn line(from: C64, to: C64) -> Self {
        Segment::Line { from: arr(from), to: arr(to) }
    }

    pub fn samples(points: &[C64]) -> Self {
        Segment::Samples { points: points.iter().map(|&p| arr(p)).collect() }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Segment::CircleArc { center, radius, start, end } => {
                finite(center) && finite(&[*radius, *start, *end]) && *radius > 0.0
            }
            Segment::EllipseArc { center, a, b, tilt, start, end } => {
                finite(center) && finite(&[*a, *b, *tilt, *start, *end]) && *a > 0.0 && *b > 0.0
            }
            Segment::Line { from, to } => finite(from) && finite(to),
            Segment::Samples { points } => !points.is_empty() && points.iter().all(|p| finite(p)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("malformed path segment {self:?}")))
        }
    }

    /// Share of the path parameter this segment receives.
    pub fn weight(&self) -> f64 {
        match self {
            Segment::CircleArc { start, end, .. } | Segment::EllipseArc { start, end, .. } => (end - start).abs(),
            Segment::Line { from, to } => (z(*to) - z(*from)).norm(),
            Segment::Samples { points } => *cumulative_lengths(points).last().unwrap(),
        }
    }

    /// Point at local parameter `s ∈ [0, 1]`.
    pub fn point(&self, s: f64) -> C64 {
        match self {
            Segment::CircleArc { center, radius, start, end } => {
                let phi = start + s * (end - start);
                z(*center) + c(radius * phi.cos(), radius * phi.sin())
            }
            Segment::EllipseArc { center, a, b, tilt, start, end } => {
                let phi = start + s * (end - start);
                z(*center) + C64::from_polar(1.0, *tilt) * c(a * phi.cos(), b * phi.sin())
            }
            Segment::Line { from, to } => {
                if s >= 1.0 {
                    z(*to)
                } else {
                    z(*from) + s * (z(*to) - z(*from))
                }
            }
            Segment::Samples { points } => {
                let (i, u) = Self::locate_sample(points, s);
                if i + 1 >= points.len() {
                    z(points[points.len() - 1])
                } else {
                    z(points[i]) + u * (z(points[i + 1]) - z(points[i]))
                }
            }
        }
    }

    /// `dκ/ds` at local parameter `s`.
    pub fn derivative(&self, s: f64) -> C64 {
        match self {
            Segment::CircleArc { radius, start, end, .. } => {
                let phi = start + s * (end - start);
                (end - start) * c(-radius * phi.sin(), radius * phi.cos())
            }
            Segment::EllipseArc { a, b, tilt, start, end, .. } => {
                let phi = start + s * (end - start);
                (end - start) * C64::from_polar(1.0, *tilt) * c(-a * phi.sin(), b * phi.cos())
            }
            Segment::Line { from, to } => z(*to) - z(*from),
            Segment::Samples { points } => {
                if points.len() < 2 {
                    return c(0.0, 0.0);
                }
                let (i, _) = Self::locate_sample(points, s);
                let i = i.min(points.len() - 2);
                let d = z(points[i + 1]) - z(points[i]);
                let total = self.weight();
                if d.norm() == 0.0 || total == 0.0 {
                    c(0.0, 0.0)
                } else {
                    d / d.norm() * total
                }
            }
        }
    }

    /// Index of the polyline piece containing arc-length fraction `s`, and the
    /// fraction within that piece.
    fn locate_sample(points: &[[f64; 2]], s: f64) -> (usize, f64) {
        let acc = cumulative_lengths(points);
        let total = *acc.last().unwrap();
        if total == 0.0 || points.len() < 2 {
            return (0, 0.0);
        }
        let target = s.clamp(0.0, 1.0) * total;
        let i = match acc.binary_search_by(|v| v.total_cmp(&target)) {
            Ok(i) => i.min(points.len() - 2),
            Err(i) => i.saturating_sub(1).min(points.len() - 2),
        };
        let piece = acc[i + 1] - acc[i];
        let u = if piece > 0.0 { ((target - acc[i]) / piece).clamp(0.0, 1.0) } else { 0.0 };
        (i, u)
    }

    /// The piece of this segment between local parameters `s0` and `s1`
    /// (`s0 > s1` gives a reversed piece).
    pub fn sub(&self, s0: f64, s1: f64) -> Segment {
        match self {
            Segment::CircleArc { center, radius, start, end } => Segment::CircleArc {
                center: *center,
                radius: *radius,
                start: start + s0 * (end - start),
                end: start + s1 * (end - start),
            },
            Segment::EllipseArc { center, a, b, tilt, start, end } => Segment::EllipseArc {
                center: *center,
                a: *a,
                b: *b,
                tilt: *tilt,
                start: start + s0 * (end - start),
                end: start + s1 * (end - start),
            },
            Segment::Line { .. } => Segment::Line { from: arr(self.point(s0)), to: arr(self.point(s1)) },
            Segment::Samples { points } => {
                let (lo, hi, rev) = if s0 <= s1 { (s0, s1, false) } else { (s1, s0, true) };
                let acc = cumulative_lengths(points);
                let total = *acc.last().unwrap();
                let mut out = vec![arr(self.point(lo))];
                for (k, p) in points.iter().enumerate() {
                    let frac = if total > 0.0 { acc[k] / total } else { 0.0 };
                    if frac > lo && frac < hi {
                        out.push(*p);
                    }
                }
                out.push(arr(self.point(hi)));
                if rev {
                    out.reverse();
                }
                Segment::Samples { points: out }
            }
        }
    }

    pub fn reversed(&self) -> Segment {
        self.sub(1.0, 0.0)
    }

    /// Whether this segment can bend (needs more than its endpoints to draw).
    fn is_curved(&self) -> bool {
        matches!(self, Segment::CircleArc { .. } | Segment::EllipseArc { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Ccw,
    Cw,
    /// Zero enclosed signed area (open or degenerate paths).
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathSpec", into = "PathSpec")]
pub struct Path {
    segments: Vec<Segment>,
    /// Cumulative weight fractions; `bounds[k]..bounds[k+1]` belongs to segment `k`.
    bounds: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PathSpec {
    segments: Vec<Segment>,
}

impl TryFrom<PathSpec> for Path {
    type Error = Error;

    fn try_from(spec: PathSpec) -> Result<Self> {
        Path::new(spec.segments)
    }
}

impl From<Path> for PathSpec {
    fn from(p: Path) -> Self {
        PathSpec { segments: p.segments }
    }
}

impl Path {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("path has no segments".into()));
        }
        for s in &segments {
            s.validate()?;
        }
        for (k, w) in segments.windows(2).enumerate() {
            let gap = (w[0].point(1.0) - w[1].point(0.0)).norm();
            if gap > CHAIN_TOL * (1.0 + w[0].point(1.0).norm()) {
                return Err(Error::InvalidInput(format!("segments {k} and {} are {gap:e} apart", k + 1)));
            }
        }
        let weights: Vec<f64> = segments.iter().map(Segment::weight).collect();
        let total: f64 = weights.iter().sum();
        let n = segments.len();
        let mut bounds = Vec::with_capacity(n + 1);
        bounds.push(0.0);
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            bounds.push(if k + 1 == n {
                1.0
            } else if total > 0.0 {
                acc / total
            } else {
                (k + 1) as f64 / n as f64
            });
        }
        Ok(Self { segments, bounds })
    }

    /// Full circle starting at angle `start`.
    pub fn circle(center: C64, radius: f64, start: f64, ccw: bool) -> Result<Self> {
        let end = if ccw { start + 2.0 * PI } else { start - 2.0 * PI };
        Self::new(vec![Segment::circle_arc(center, radius, start, end)])
    }

    /// Closed polygon through the vertices, returning to the first.
    pub fn polygon(vertices: &[C64]) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput("polygon needs at least two vertices".into()));
        }
        let segments = (0..vertices.len())
            .map(|k| Segment::line(vertices[k], vertices[(k + 1) % vertices.len()]))
            .collect();
        Self::new(segments)
    }

    /// Open polyline through the vertices.
    pub fn polyline_through(vertices: &[C64]) -> Result<Self> {
        if vertices.len() < 2 {
            return Self::new(vec![Segment::line(vertices[0], vertices[0])]);
        }
        Self::new(vertices.windows(2).map(|w| Segment::line(w[0], w[1])).collect())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_weight(&self) -> f64 {
        self.segments.iter().map(Segment::weight).sum()
    }

    /// Segment index and local parameter for global `t`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let t = t.clamp(0.0, 1.0);
        let n = self.segments.len();
        let k = match self.bounds[1..].iter().position(|&b| t < b) {
            Some(k) => k,
            None => n - 1,
        };
        let (lo, hi) = (self.bounds[k], self.bounds[k + 1]);
        let s = if hi > lo { ((t - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
        (k, s)
    }

    pub fn point(&self, t: f64) -> C64 {
        let (k, s) = self.locate(t);
        self.segments[k].point(s)
    }

    /// `dκ/dt` with respect to the global parameter.
    pub fn velocity(&self, t: f64) -> C64 {
        let (k, s) = self.locate(t);
        let span = self.bounds[k + 1] - self.bounds[k];
        if span == 0.0 {
            return c(0.0, 0.0);
        }
        self.segments[k].derivative(s) / span
    }

    pub fn basepoint(&self) -> C64 {
        self.segments[0].point(0.0)
    }

    pub fn end_point(&self) -> C64 {
        self.segments[self.segments.len() - 1].point(1.0)
    }

    pub fn is_closed(&self) -> bool {
        (self.end_point() - self.basepoint()).norm() <= CHAIN_TOL * (1.0 + self.basepoint().norm())
    }

    /// Segment boundaries in global parameter.
    pub fn breakpoints(&self) -> &[f64] {
        &self.bounds
    }

    /// Same closed loop started at global parameter `t0`.
    pub fn rebased(&self, t0: f64) -> Result<Path> {
        if !self.is_closed() {
            return Err(Error::InvalidInput("only closed paths can be rebased".into()));
        }
        let (k, s) = self.locate(t0);
        let mut segs = Vec::with_capacity(self.segments.len() + 1);
        if s < 1.0 {
            segs.push(self.segments[k].sub(s, 1.0));
        }
        segs.extend(self.segments[k + 1..].iter().cloned());
        segs.extend(self.segments[..k].iter().cloned());
        if s > 0.0 {
            segs.push(self.segments[k].sub(0.0, s));
        }
        // Snap the closing point onto the new basepoint.
        let start = segs[0].point(0.0);
        if let Some(Segment::Line { to, .. }) = segs.last_mut() {
            *to = arr(start);
        }
        Path::new(segs)
    }

    /// Same loop with its base moved to the point nearest `target`.
    pub fn rebased_near(&self, target: C64) -> Result<Path> {
        let t = self.closest_parameter(target);
        self.rebased(t)
    }

    /// Parameter of the path point closest to `target` (dense search, then golden refinement).
    pub fn closest_parameter(&self, target: C64) -> f64 {
        let n = 4096;
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let d = (self.point(t) - target).norm();
            if d < best.1 {
                best = (t, d);
            }
        }
        let (mut lo, mut hi) = ((best.0 - 1.0 / n as f64).max(0.0), (best.0 + 1.0 / n as f64).min(1.0));
        for _ in 0..100 {
            let m1 = lo + (hi - lo) * 0.381966;
            let m2 = hi - (hi - lo) * 0.381966;
            if (self.point(m1) - target).norm() <= (self.point(m2) - target).norm() {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn reversed(&self) -> Path {
        let segs = self.segments.iter().rev().map(Segment::reversed).collect();
        Path::new(segs).expect("reversing preserves the chain")
    }

    /// This path followed by `other`.
    pub fn concat(&self, other: &Path) -> Result<Path> {
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().cloned());
        Path::new(segs)
    }

    /// Points along the path including every segment boundary; `n` sets the
    /// overall density.
    pub fn polyline(&self, n: usize) -> Vec<(f64, C64)> {
        let mut out = vec![(0.0, self.basepoint())];
        for (k, seg) in self.segments.iter().enumerate() {
            let (lo, hi) = (self.bounds[k], self.bounds[k + 1]);
            let mut pieces = ((hi - lo) * n as f64).ceil() as usize;
            if seg.is_curved() {
                pieces = pieces.max(16);
            }
            if let Segment::Samples { points } = seg {
                pieces = pieces.max(points.len().saturating_sub(1));
            }
            let pieces = pieces.max(1);
            for j in 1..=pieces {
                let s = j as f64 / pieces as f64;
                out.push((lo + s * (hi - lo), seg.point(s)));
            }
        }
        out
    }

    /// Shoelace area of the sampled loop; positive for counterclockwise.
    pub fn signed_area(&self) -> f64 {
        let pts = self.polyline(4096);
        0.5 * pts.windows(2).map(|w| w[0].1.re * w[1].1.im - w[1].1.re * w[0].1.im).sum::<f64>()
    }

    pub fn orientation(&self) -> Orientation {
        let a = self.signed_area();
        if a > 1e-14 {
            Orientation::Ccw
        } else if a < -1e-14 {
            Orientation::Cw
        } else {
            Orientation::Flat
        }
    }

    /// Minimum distance from the sampled path to `z`.
    pub fn distance_to(&self, z: C64) -> f64 {
        let pts = self.polyline(4096);
        pts.windows(2).map(|w| point_segment_distance(z, w[0].1, w[1].1)).fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn point_segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let u = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + u * d)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square() -> Path {
        Path::polygon(&[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn weights_split_the_parameter() {
        let p = square();
        assert_eq!(p.point(0.0), c(0.0, 0.0));
        assert!((p.point(0.25) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((p.point(0.6) - c(0.6, 1.0)).norm() < 1e-12);
        assert_eq!(p.point(1.0), c(0.0, 0.0));
        assert!(p.is_closed());
        assert_eq!(p.orientation(), Orientation::Ccw);
        assert_abs_diff_eq!(p.signed_area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn arcs_and_velocity() {
        let p = Path::circle(c(1.0, 0.0), 0.5, 0.0, true).unwrap();
        assert!((p.point(0.25) - c(1.0, 0.5)).norm() < 1e-15);
        let v = p.velocity(0.0);
        assert!((v - c(0.0, PI)).norm() < 1e-12);
        assert_abs_diff_eq!(p.signed_area(), PI * 0.25, epsilon = 1e-5);
        assert_eq!(p.reversed().orientation(), Orientation::Cw);
    }

    #[test]
    fn ellipse_arc_points() {
        let s = Segment::ellipse_arc(c(0.0, 0.0), 2.0, 1.0, PI / 2.0, 0.0, 2.0 * PI);
        assert!((s.point(0.0) - c(0.0, 2.0)).norm() < 1e-15);
        assert!((s.point(0.25) - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn discontinuous_chain_is_rejected() {
        let err = Path::new(vec![Segment::line(c(0.0, 0.0), c(1.0, 0.0)), Segment::line(c(1.0, 1e-9), c(2.0, 0.0))]);
        assert!(err.is_err());
        assert!(Path::new(vec![Segment::circle_arc(c(0.0, 0.0), -1.0, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn rebasing_keeps_the_loop() {
        let p = square();
        let q = p.rebased(0.375).unwrap();
        assert!((q.basepoint() - c(1.0, 0.5)).norm() < 1e-15);
        assert!(q.is_closed());
        assert_abs_diff_eq!(q.total_weight(), p.total_weight(), epsilon = 1e-12);
        assert!((q.point(0.125) - c(1.0, 1.0)).norm() < 1e-12);
        let r = Path::circle(c(0.0, 0.0), 1.0, 0.0, true).unwrap().rebased(0.25).unwrap();
        assert!((r.basepoint() - c(0.0, 1.0)).norm() < 1e-15);
        assert!(r.is_closed());
    }

    #[test]
    fn reversal_retraces() {
        let p = square();
        let r = p.reversed();
        for t in [0.1, 0.3, 0.77] {
            assert!((r.point(t) - p.point(1.0 - t)).norm() < 1e-12);
        }
    }

    #[test]
    fn samples_segment() {
        let p = Path::new(vec![Segment::samples(&[c(0.0, 0.0), c(3.0, 0.0), c(3.0, 1.0)])]).unwrap();
        assert!((p.point(0.5) - c(2.0, 0.0)).norm() < 1e-12);
        assert!((p.point(1.0) - c(3.0, 1.0)).norm() < 1e-12);
        let back = p.reversed();
        assert!((back.point(0.5) - c(2.0, 0.0)).norm() < 1e-12);
        assert!((p.velocity(0.9) - c(0.0, 4.0)).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let p = Path::new(vec![
            Segment::line(c(0.0, 0.0), c(1.0, 0.0)),
            Segment::circle_arc(c(0.0, 0.0), 1.0, 0.0, PI),
            Segment::line(c(-1.0, 0.0), c(0.0, 0.0)),
        ])
        .unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"type\":\"circle_arc\""));
        let q: Path = serde_json::from_str(&text).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<Path>(r#"{"segments":[]}"#).is_err());
    }

    #[test]
    fn polyline_hits_corners() {
        let pts = square().polyline(8);
        for corner in [c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)] {
            assert!(pts.iter().any(|(_, p)| (p - corner).norm() < 1e-15));
        }
        assert_abs_diff_eq!(square().distance_to(c(0.5, 0.5)), 0.5, epsilon = 1e-12);
    }
}
