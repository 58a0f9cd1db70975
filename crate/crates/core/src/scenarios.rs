//! The reference loops and basepoints for the four-site model.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{c, C64};
use crate::path::{Path, Segment};

/// Common basepoint of loops ①–④.
pub const KAPPA0: [f64; 2] = [0.4, -0.15];

pub fn kappa0() -> C64 {
    c(KAPPA0[0], KAPPA0[1])
}

/// Semicircle chain centres and radii.
pub const C1: f64 = 0.7;
pub const C2: f64 = 0.4;
pub const C3: f64 = 1.0;
pub const R1: f64 = 0.45;
pub const R2: f64 = 0.15;

/// Tilted ellipse: semi-major axis, focal distance and tilt.
pub const ELLIPSE_A: f64 = 0.3782;

pub fn ellipse_focal() -> f64 {
    ELLIPSE_A - 0.002
}

pub fn ellipse_tilt() -> f64 {
    0.25f64.atan()
}

pub fn ellipse_b() -> f64 {
    (ELLIPSE_A * ELLIPSE_A - ellipse_focal().powi(2)).sqrt()
}

pub fn ellipse_center() -> C64 {
    kappa0() + C64::from_polar(ELLIPSE_A, ellipse_tilt())
}

/// Where the line from κ₀ through κ = 1 leaves the large semicircle.
pub fn kappa0_prime() -> C64 {
    let k0 = kappa0();
    let d = c(1.0, 0.0) - k0;
    // |k0 + s d - C1|² = R1², larger root
    let w = k0 - c(C1, 0.0);
    let a = d.norm_sqr();
    let b = 2.0 * (w.conj() * d).re;
    let cc = w.norm_sqr() - R1 * R1;
    let s = (-b + (b * b - 4.0 * a * cc).sqrt()) / (2.0 * a);
    k0 + s * d
}

/// Far vertex of the tilted ellipse.
pub fn ellipse_vertex() -> C64 {
    ellipse_center() + C64::from_polar(ELLIPSE_A, ellipse_tilt())
}

/// Loop ④: large semicircle, then three small ones, counterclockwise,
/// starting at angle 0 of the large one. Every arc sweeps π.
pub fn semicircle_chain() -> Path {
    Path::new(vec![
        Segment::circle_arc(c(C1, 0.0), R1, 0.0, PI),
        Segment::circle_arc(c(C2, 0.0), R2, PI, 2.0 * PI),
        Segment::circle_arc(c(C1, 0.0), R2, PI, 0.0),
        Segment::circle_arc(c(C3, 0.0), R2, PI, 2.0 * PI),
    ])
    .expect("semicircle chain is continuous")
}

/// Loop ④ based at κ₀ (bottom of the second semicircle).
pub fn loop4_at_kappa0() -> Path {
    semicircle_chain().rebased(1.5 * PI / (4.0 * PI)).expect("closed")
}

/// Loop ④ based at κ₀′ on the large semicircle.
pub fn loop4_at_kappa0_prime() -> Path {
    let phi = (kappa0_prime() - c(C1, 0.0)).arg();
    semicircle_chain().rebased(phi / (4.0 * PI)).expect("closed")
}

/// Loop ③ based at κ₀, which is the near vertex of the ellipse.
pub fn loop3_at_kappa0() -> Path {
    Path::new(vec![Segment::ellipse_arc(ellipse_center(), ELLIPSE_A, ellipse_b(), ellipse_tilt(), PI, 3.0 * PI)])
        .expect("ellipse is closed")
}

/// Loop ③ based at κ₀′: a short spur from κ₀′ to the far vertex, the ellipse,
/// and back.
pub fn loop3_at_kappa0_prime() -> Path {
    let v = ellipse_vertex();
    let kp = kappa0_prime();
    Path::new(vec![
        Segment::line(kp, v),
        Segment::ellipse_arc(ellipse_center(), ELLIPSE_A, ellipse_b(), ellipse_tilt(), 0.0, 2.0 * PI),
        Segment::line(v, kp),
    ])
    .expect("spur and ellipse chain")
}

/// Circle around κ = 1 and κ ≈ 0.681 used for the stroboscopic example.
pub const BLUE_CENTER: f64 = 0.84;
pub const BLUE_RADIUS: f64 = 0.45;

/// Stroboscopic loop from its top point.
pub fn blue_loop_top() -> Path {
    Path::circle(c(BLUE_CENTER, 0.0), BLUE_RADIUS, 0.5 * PI, true).expect("circle")
}

/// Stroboscopic loop from its bottom point.
pub fn blue_loop_bottom() -> Path {
    Path::circle(c(BLUE_CENTER, 0.0), BLUE_RADIUS, 1.5 * PI, true).expect("circle")
}

/// Loop ①: rectangle around the four real-axis EPs.
pub fn loop1() -> Path {
    Path::polygon(&[kappa0(), c(1.3, -0.15), c(1.3, 0.5), c(-1.3, 0.5), c(-1.3, -0.15)]).expect("polygon")
}

/// Loop ②: like loop ① but also enclosing both imaginary-axis EPs.
pub fn loop2() -> Path {
    Path::polygon(&[kappa0(), c(1.3, -0.15), c(1.3, 2.8), c(-1.3, 2.8), c(-1.3, -2.8), c(0.4, -2.8)])
        .expect("polygon")
}

/// Named loops available by default.
pub fn builtin_loops() -> BTreeMap<String, Path> {
    BTreeMap::from([
        ("blue".to_string(), blue_loop_top()),
        ("blue_prime".to_string(), blue_loop_bottom()),
        ("loop1".to_string(), loop1()),
        ("loop2".to_string(), loop2()),
        ("loop3".to_string(), loop3_at_kappa0()),
        ("loop3_prime".to_string(), loop3_at_kappa0_prime()),
        ("loop4".to_string(), loop4_at_kappa0()),
        ("loop4_prime".to_string(), loop4_at_kappa0_prime()),
    ])
}

pub fn builtin_loop(name: &str) -> Result<Path> {
    builtin_loops().remove(name).ok_or_else(|| Error::Config(format!("unknown loop `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Orientation;

    #[test]
    fn basepoints() {
        let kp = kappa0_prime();
        assert!((kp.re - 1.148).abs() < 1e-3 && (kp.im - 0.03711).abs() < 1e-4, "{kp}");
        assert!(((kp - c(C1, 0.0)).norm() - R1).abs() < 1e-14);
        // κ₀′ lies on the line through κ₀ and κ = 1
        let d = (kp - kappa0()) / (c(1.0, 0.0) - kappa0());
        assert!(d.im.abs() < 1e-14);
        for p in [loop1(), loop2(), loop3_at_kappa0(), loop4_at_kappa0()] {
            assert!((p.basepoint() - kappa0()).norm() < 1e-14, "{}", p.basepoint());
            assert!(p.is_closed());
        }
        for p in [loop3_at_kappa0_prime(), loop4_at_kappa0_prime()] {
            assert!((p.basepoint() - kp).norm() < 1e-14);
            assert!(p.is_closed());
        }
    }

    #[test]
    fn loops_are_counterclockwise() {
        for (name, p) in builtin_loops() {
            assert_eq!(p.orientation(), Orientation::Ccw, "{name}");
        }
    }

    #[test]
    fn semicircle_chain_shape() {
        let p = semicircle_chain();
        assert!((p.point(0.0) - c(1.15, 0.0)).norm() < 1e-15);
        assert!((p.point(0.25) - c(0.25, 0.0)).norm() < 1e-14);
        assert!((p.point(0.5) - c(0.55, 0.0)).norm() < 1e-14);
        assert!((p.point(0.625) - c(0.7, 0.15)).norm() < 1e-14);
        assert!((p.point(0.75) - c(0.85, 0.0)).norm() < 1e-14);
        assert!((p.point(0.875) - c(1.0, -0.15)).norm() < 1e-14);
    }

    #[test]
    fn ellipse_passes_through_kappa0() {
        let p = loop3_at_kappa0();
        assert!((p.point(0.5) - ellipse_vertex()).norm() < 1e-14);
        assert!((ellipse_vertex() - kappa0_prime()).norm() < 0.02);
    }
}
