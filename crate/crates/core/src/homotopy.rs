//! Winding numbers and free-group words of loops in the plane punctured at
//! the exceptional points, and the based/free equivalence tests built on them.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::linalg::C64;
use crate::path::Path;
use crate::perm::PermMatrix;
use crate::singular::Atlas;
use crate::tracker::{trace_path, TrackOptions};
use crate::word::{are_conjugate, reduce_word, Letter, Word};

/// Basepoints closer than this are the same point.
pub const BASEPOINT_TOL: f64 = 1e-9;
/// Rays keep at least this distance from every other puncture.
pub const RAY_CLEARANCE: f64 = 1e-3;
const MAX_RAY_TRIES: usize = 63;
const MAX_SAMPLES: usize = 1 << 20;

/// Winding numbers of a closed polyline around each point. Fails if some
/// step turns by `max_jump` or more as seen from a point.
pub fn winding_from_samples(points: &[(f64, C64)], eps: &[C64], max_jump: f64) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(eps.len());
    for &e in eps {
        let mut total = 0.0;
        for w in points.windows(2) {
            let (a, b) = (w[0].1 - e, w[1].1 - e);
            if a.norm() == 0.0 || b.norm() == 0.0 {
                return Err(Error::InvalidInput(format!("path passes through {e}")));
            }
            let jump = (b / a).arg();
            if jump.abs() >= max_jump {
                return Err(Error::CoarseSampling { t: w[0].0, jump });
            }
            total += jump;
        }
        out.push((total / (2.0 * PI)).round() as i64);
    }
    Ok(out)
}

/// Polyline of `p` in which no step turns by `max_jump` or more around any point of `eps`.
pub fn sample_around(p: &Path, eps: &[C64], max_jump: f64) -> Result<Vec<(f64, C64)>> {
    let mut n = 256;
    loop {
        let pts = p.polyline(n);
        match winding_from_samples(&pts, eps, max_jump) {
            Ok(_) => return Ok(pts),
            Err(Error::CoarseSampling { .. }) if n < MAX_SAMPLES => n *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// Signed winding number of the closed path `p` around each point.
pub fn winding_numbers(p: &Path, eps: &[C64]) -> Result<Vec<i64>> {
    require_closed(p)?;
    winding_from_samples(&sample_around(p, eps, 0.5 * PI)?, eps, PI)
}

fn require_closed(p: &Path) -> Result<()> {
    if p.is_closed() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("path from {} ends at {}, not closed", p.basepoint(), p.end_point())))
    }
}

/// Half-line from a puncture out to infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: C64,
    /// Unit direction.
    pub direction: C64,
}

impl Ray {
    /// Side of the line through the ray: `true` on the left or on the line.
    fn left_of(&self, z: C64) -> bool {
        (self.direction.conj() * (z - self.origin)).im >= 0.0
    }

    /// Whether the segment `[a, b]` meets the ray.
    fn hits_segment(&self, a: C64, b: C64) -> bool {
        // a + u d = origin + s direction
        let d = b - a;
        let denom = cross(d, self.direction);
        if denom == 0.0 {
            return false;
        }
        let w = self.origin - a;
        let u = cross(w, self.direction) / denom;
        let s = cross(w, d) / denom;
        (0.0..=1.0).contains(&u) && s >= 0.0
    }

    fn distance_to(&self, z: C64) -> f64 {
        let s = ((z - self.origin) * self.direction.conj()).re;
        if s <= 0.0 {
            (z - self.origin).norm()
        } else {
            (z - self.origin - s * self.direction).norm()
        }
    }

    fn intersects(&self, other: &Ray) -> bool {
        // origin + s direction = other.origin + t other.direction
        let w = other.origin - self.origin;
        let denom = cross(self.direction, other.direction);
        if denom.abs() < 1e-15 {
            let collinear = cross(self.direction, w).abs() < 1e-12;
            let same_way = (self.direction.conj() * other.direction).re > 0.0;
            let ahead = (self.direction.conj() * w).re >= 0.0;
            return collinear && (same_way || ahead);
        }
        let s = cross(w, other.direction) / denom;
        let t = cross(w, self.direction) / denom;
        s >= 0.0 && t >= 0.0
    }
}

/// `Im(conj(a)·b)`.
fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// One ray per puncture pointing away from their centroid, rotated in steps of
/// 0.1 rad where needed so that rays are pairwise disjoint and keep clear of
/// the other punctures.
pub fn default_rays(eps: &[C64]) -> Result<Vec<Ray>> {
    if eps.is_empty() {
        return Ok(Vec::new());
    }
    let centroid = eps.iter().sum::<C64>() / eps.len() as f64;
    let mut rays: Vec<Ray> = Vec::with_capacity(eps.len());
    for (k, &e) in eps.iter().enumerate() {
        let away = e - centroid;
        let base = if away.norm() < 1e-9 { 0.0 } else { away.arg() };
        let mut chosen = None;
        for attempt in 0..=MAX_RAY_TRIES {
            let step = ((attempt + 1) / 2) as f64 * 0.1;
            let angle = if attempt % 2 == 1 { base + step } else { base - step };
            let ray = Ray { origin: e, direction: C64::from_polar(1.0, angle) };
            let clear = eps.iter().enumerate().all(|(j, &o)| j == k || ray.distance_to(o) > RAY_CLEARANCE)
                && rays.iter().all(|r| !r.intersects(&ray));
            if clear {
                chosen = Some(ray);
                break;
            }
        }
        rays.push(chosen.ok_or(Error::RayConstruction(MAX_RAY_TRIES))?);
    }
    Ok(rays)
}

/// Ordered signed ray crossings of `p`; generator `k` belongs to `rays[k-1]`.
/// Crossing a ray counterclockwise about its puncture contributes `g_k`.
pub fn homotopy_word(p: &Path, eps: &[C64], rays: &[Ray]) -> Result<Word> {
    require_closed(p)?;
    if rays.len() != eps.len() {
        return Err(Error::InvalidInput("need one ray per puncture".into()));
    }
    let mut pts = sample_around(p, eps, PI / 8.0)?;
    // close exactly so that a basepoint on a ray is classified consistently
    let first = pts[0].1;
    pts.last_mut().unwrap().1 = first;
    let mut word = Word::empty();
    for w in pts.windows(2) {
        let (a, b) = (w[0].1, w[1].1);
        let mut here: Vec<(f64, Letter)> = Vec::new();
        for (k, ray) in rays.iter().enumerate() {
            let (la, lb) = (ray.left_of(a), ray.left_of(b));
            if la == lb || !ray.hits_segment(a, b) {
                continue;
            }
            // position along the step, for ordering several crossings
            let d = b - a;
            let u = (ray.direction.conj() * (ray.origin - a)).im / (ray.direction.conj() * d).im;
            here.push((u, Letter::new(k as u32 + 1, if lb { 1 } else { -1 })));
        }
        here.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (_, l) in here {
            word.push(l);
        }
    }
    Ok(word)
}

/// Outcome of comparing two loops with a common basepoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasedVerdict {
    Homotopic,
    /// Not homotopic, yet the net matrices agree.
    Accidental,
    Inequivalent,
}

impl fmt::Display for BasedVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasedVerdict::Homotopic => "homotopic",
            BasedVerdict::Accidental => "accidental",
            BasedVerdict::Inequivalent => "inequivalent",
        })
    }
}

/// Reduced word and net matrix of a loop relative to an atlas.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopClass {
    pub word: Word,
    pub net: PermMatrix,
}

pub fn loop_class(f: &MatrixFamily, p: &Path, atlas: &Atlas) -> Result<LoopClass> {
    let eps = atlas.ep_locations();
    let rays = default_rays(&eps)?;
    let word = reduce_word(&homotopy_word(p, &eps, &rays)?);
    let net = trace_path(f, p, atlas.key, &TrackOptions::default())?.net_matrix();
    Ok(LoopClass { word, net })
}

/// Based comparison of two loops with the same basepoint.
pub fn based_equivalent(f: &MatrixFamily, p1: &Path, p2: &Path, atlas: &Atlas) -> Result<BasedVerdict> {
    if (p1.basepoint() - p2.basepoint()).norm() > BASEPOINT_TOL {
        return Err(Error::BasepointMismatch(p1.basepoint(), p2.basepoint()));
    }
    let (a, b) = (loop_class(f, p1, atlas)?, loop_class(f, p2, atlas)?);
    verdict(&a, &b)
}

/// Verdict for two loop classes; equal words with different matrices is an error.
pub fn verdict(a: &LoopClass, b: &LoopClass) -> Result<BasedVerdict> {
    if a.word == b.word {
        if a.net != b.net {
            return Err(Error::HomotopyViolation(format!("word {} gives {:?} and {:?}", a.word, a.net, b.net)));
        }
        Ok(BasedVerdict::Homotopic)
    } else if a.net == b.net {
        Ok(BasedVerdict::Accidental)
    } else {
        Ok(BasedVerdict::Inequivalent)
    }
}

/// Free homotopy: the loops' words are conjugate.
pub fn freely_conjugate(p1: &Path, p2: &Path, atlas: &Atlas) -> Result<bool> {
    let eps = atlas.ep_locations();
    let rays = default_rays(&eps)?;
    Ok(are_conjugate(&homotopy_word(p1, &eps, &rays)?, &homotopy_word(p2, &eps, &rays)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::path::Segment;

    fn model_eps() -> Vec<C64> {
        let a = (2.0 * 3f64.sqrt() - 3.0).sqrt();
        let b = (2.0 * 3f64.sqrt() + 3.0).sqrt();
        vec![c(-1.0, 0.0), c(-a, 0.0), c(0.0, -b), c(0.0, b), c(a, 0.0), c(1.0, 0.0)]
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn rays_are_disjoint() {
        let eps = model_eps();
        let rays = default_rays(&eps).unwrap();
        for i in 0..rays.len() {
            for j in 0..rays.len() {
                if i != j {
                    assert!(!rays[i].intersects(&rays[j]), "{i} {j}");
                    assert!(rays[i].distance_to(eps[j]) > RAY_CLEARANCE);
                }
            }
        }
    }

    #[test]
    fn small_circle_gives_single_generator() {
        let eps = model_eps();
        let rays = default_rays(&eps).unwrap();
        let p = Path::circle(c(1.0, 0.0), 0.1, 0.3, true).unwrap();
        assert_eq!(reduce_word(&homotopy_word(&p, &eps, &rays).unwrap()), w("g6"));
        assert_eq!(winding_numbers(&p, &eps).unwrap(), vec![0, 0, 0, 0, 0, 1]);
        assert_eq!(reduce_word(&homotopy_word(&p.reversed(), &eps, &rays).unwrap()), w("g6^-1"));
    }

    #[test]
    fn figure_eight() {
        let eps = model_eps();
        let rays = default_rays(&eps).unwrap();
        let a = (2.0 * 3f64.sqrt() - 3.0).sqrt();
        // basepoint between the two punctures; CCW around 1, then CW around a
        let mid = c(0.5 * (1.0 + a), 0.0);
        let r1 = 1.0 - mid.re;
        let r2 = mid.re - a;
        let p = Path::new(vec![
            Segment::circle_arc(c(1.0, 0.0), r1, PI, 3.0 * PI),
            Segment::circle_arc(c(a, 0.0), r2, 0.0, -2.0 * PI),
        ])
        .unwrap();
        assert_eq!(reduce_word(&homotopy_word(&p, &eps, &rays).unwrap()), w("g6 g5^-1"));
        assert_eq!(winding_numbers(&p, &eps).unwrap(), vec![0, 0, 0, 0, -1, 1]);
    }

    #[test]
    fn contractible_loop_has_trivial_invariants() {
        let eps = model_eps();
        let rays = default_rays(&eps).unwrap();
        let p = Path::circle(c(2.0, 2.0), 0.5, 0.0, true).unwrap();
        assert!(reduce_word(&homotopy_word(&p, &eps, &rays).unwrap()).is_empty());
        assert!(winding_numbers(&p, &eps).unwrap().iter().all(|&n| n == 0));
    }

    #[test]
    fn coarse_samples_are_rejected() {
        let sq = [(0.0, c(1.0, 0.0)), (0.5, c(-1.0, 0.0)), (1.0, c(1.0, 0.0))];
        assert!(matches!(winding_from_samples(&sq, &[c(0.0, 0.0)], PI), Err(Error::CoarseSampling { .. })));
    }

    #[test]
    fn exponent_sums_match_winding() {
        let eps = model_eps();
        let rays = default_rays(&eps).unwrap();
        let p = Path::polygon(&[c(0.4, -0.15), c(1.3, -0.15), c(1.3, 2.8), c(-1.3, 2.8), c(-1.3, -2.8), c(0.4, -2.8)]).unwrap();
        let word = homotopy_word(&p, &eps, &rays).unwrap();
        let wn = winding_numbers(&p, &eps).unwrap();
        for (k, n) in wn.iter().enumerate() {
            assert_eq!(word.exponent_sum(k as u32 + 1), *n);
        }
    }

    #[test]
    fn conjugate_words_are_freely_equivalent() {
        let eps = model_eps();
        let rays = default_rays(&eps).unwrap();
        let p = Path::circle(c(1.0, 0.0), 0.2, 0.0, true).unwrap();
        let q = p.rebased(0.37).unwrap();
        let (a, b) = (homotopy_word(&p, &eps, &rays).unwrap(), homotopy_word(&q, &eps, &rays).unwrap());
        assert!(are_conjugate(&a, &b), "{a} vs {b}");
    }

    #[test]
    fn reference_loop_verdicts() {
        use crate::branches::SortKey;
        use crate::family::builtin_paper4;
        use crate::scenarios::builtin_loop;
        use crate::singular::{map_cuts, Region};
        let f = builtin_paper4();
        let atlas = map_cuts(&f, &Region::square(3.0), 200, SortKey::ReAsc).unwrap();
        let l = |n: &str| builtin_loop(n).unwrap();
        let based = |a: &str, b: &str| based_equivalent(&f, &l(a), &l(b), &atlas).unwrap();
        assert_eq!(based("loop1", "loop2"), BasedVerdict::Inequivalent);
        assert_eq!(based("loop3", "loop4"), BasedVerdict::Inequivalent);
        assert_eq!(based("loop3_prime", "loop4_prime"), BasedVerdict::Homotopic);
        assert!(matches!(
            based_equivalent(&f, &l("loop3"), &l("loop4_prime"), &atlas),
            Err(Error::BasepointMismatch(..))
        ));
        assert!(freely_conjugate(&l("loop3"), &l("loop4"), &atlas).unwrap());
        assert!(freely_conjugate(&l("loop3"), &l("loop4_prime"), &atlas).unwrap());
        assert!(!freely_conjugate(&l("loop1"), &l("loop2"), &atlas).unwrap());
        assert!(freely_conjugate(&l("loop4"), &l("loop4_prime"), &atlas).unwrap());
    }
}
