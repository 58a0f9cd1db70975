//! Exceptional points, their classification, and the branch-cut atlas.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::branches::SortKey;
use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::linalg::{c, char_poly, eig, CMatrix, CPoly, C64, TOL_EIG};
use crate::path::{point_segment_distance, Path, Segment};
use crate::perm::{crossing_matrix_of, Perm, PermMatrix};
use crate::tracker::{crossing_permutation, quick_branch_step, trace_path, TrackOptions, Trajectory};

/// Refined exceptional points satisfy `|disc| ≤ DISC_TOL`.
pub const DISC_TOL: f64 = 1e-12;
/// Refined points closer than this are the same point.
pub const DEDUP_TOL: f64 = 1e-6;
/// Largest classification-circle radius.
pub const R_CLS_MAX: f64 = 0.05;
/// Crossings farther than this from every cut are not attributed to any cut.
pub const MATCH_RADIUS: f64 = 1e-2;

/// Axis-aligned rectangle in the κ-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

impl Default for Region {
    fn default() -> Self {
        Self::square(3.0)
    }
}

impl Region {
    pub fn new(re: [f64; 2], im: [f64; 2]) -> Result<Self> {
        let r = Self { re, im };
        r.validate()?;
        Ok(r)
    }

    /// `[-half, half]²`.
    pub fn square(half: f64) -> Self {
        Self { re: [-half, half], im: [-half, half] }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.re.iter().chain(&self.im).all(|v| v.is_finite()) && self.re[0] < self.re[1] && self.im[0] < self.im[1];
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad region re={:?} im={:?}", self.re, self.im)))
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re[0] && z.re <= self.re[1] && z.im >= self.im[0] && z.im <= self.im[1]
    }

    /// Cell-centred sample coordinates, `n` per axis.
    pub fn cell_centers(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let axis = |[lo, hi]: [f64; 2]| {
            let h = (hi - lo) / n as f64;
            (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect::<Vec<_>>()
        };
        (axis(self.re), axis(self.im))
    }

    /// Larger of the two grid spacings for `n` cells per axis.
    pub fn spacing(&self, n: usize) -> f64 {
        ((self.re[1] - self.re[0]) / n as f64).max((self.im[1] - self.im[0]) / n as f64)
    }

    pub fn distance_to_boundary(&self, z: C64) -> f64 {
        (z.re - self.re[0]).abs().min((self.re[1] - z.re).abs()).min((z.im - self.im[0]).abs()).min((self.im[1] - z.im).abs())
    }

    /// Where the ray `from + s·dir`, `s ≥ 0`, leaves the rectangle.
    fn exit_point(&self, from: C64, dir: C64) -> C64 {
        let mut s = f64::INFINITY;
        for (d, p, [lo, hi]) in [(dir.re, from.re, self.re), (dir.im, from.im, self.im)] {
            if d > 0.0 {
                s = s.min((hi - p) / d);
            } else if d < 0.0 {
                s = s.min((lo - p) / d);
            }
        }
        from + s.max(0.0) * dir
    }
}

/// Sylvester matrix of `p` and `p'`.
fn sylvester(p: &CPoly) -> CMatrix {
    let n = p.degree();
    let dp = p.derivative();
    let m = n - 1;
    let size = n + m;
    let mut s = CMatrix::zeros(size);
    // coefficients highest degree first
    let a: Vec<C64> = p.coeffs().iter().rev().copied().collect();
    let b: Vec<C64> = dp.coeffs().iter().rev().copied().collect();
    for r in 0..m {
        for (k, &v) in a.iter().enumerate() {
            s[(r, r + k)] = v;
        }
    }
    for r in 0..n {
        for (k, &v) in b.iter().enumerate() {
            s[(m + r, r + k)] = v;
        }
    }
    s
}

/// Discriminant of `p`, `(-1)^{n(n-1)/2} Res(p, p') / a_n`.
pub fn discriminant(p: &CPoly) -> C64 {
    let n = p.degree();
    if n == 0 {
        return c(1.0, 0.0);
    }
    let lead = *p.coeffs().last().unwrap();
    let res = sylvester(p).determinant();
    let sign = if (n * (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    sign * res / lead
}

/// Discriminant of the characteristic polynomial of `f(κ)`.
pub fn discriminant_at(f: &MatrixFamily, kappa: C64) -> Result<C64> {
    Ok(discriminant(&char_poly(&f.eval(kappa)?)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExceptionalPoint {
    pub location: C64,
    pub order: usize,
    /// Net branch permutation for a small counterclockwise circle.
    pub cycle: Perm,
    /// `|disc|` at `location`.
    pub residual: f64,
}

impl ExceptionalPoint {
    /// Branches (one-based) joined at this point.
    pub fn connected_branches(&self) -> Vec<Vec<usize>> {
        self.cycle.cycles()
    }
}

/// A discriminant minimum that did not become an exceptional point.
#[derive(Clone, Debug, PartialEq)]
pub struct DroppedSeed {
    pub seed: C64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpSearch {
    pub eps: Vec<ExceptionalPoint>,
    pub dropped: Vec<DroppedSeed>,
}

/// Exceptional points inside `region`, classified under ascending-real-part sorting.
pub fn find_eps(f: &MatrixFamily, region: &Region, grid_n: usize) -> Result<Vec<ExceptionalPoint>> {
    Ok(search_eps(f, region, grid_n, SortKey::default())?.eps)
}

/// Full search: grid minima of `|disc|`, Newton refinement, deduplication and
/// classification. Seeds that fail any stage are reported in `dropped`.
pub fn search_eps(f: &MatrixFamily, region: &Region, grid_n: usize, key: SortKey) -> Result<EpSearch> {
    region.validate()?;
    if grid_n < 16 {
        return Err(Error::InvalidInput(format!("grid_n must be at least 16, got {grid_n}")));
    }
    let (xs, ys) = region.cell_centers(grid_n);
    let n = grid_n;
    let mags: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| discriminant_at(f, c(xs[k % n], ys[k / n])).map(|d| d.norm()))
        .collect::<Result<_>>()?;
    let mut seeds = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let v = mags[j * n + i];
            // ties allowed (mirror-symmetric grids), plateaus rejected
            let (mut is_min, mut rises) = (true, false);
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                        continue;
                    }
                    let w = mags[jj as usize * n + ii as usize];
                    is_min &= w >= v;
                    rises |= w > v;
                }
            }
            if is_min && rises {
                seeds.push(c(xs[i], ys[j]));
            }
        }
    }

    let h = region.spacing(n);
    let refined: Vec<(C64, std::result::Result<(C64, f64), String>)> =
        seeds.par_iter().map(|&s| (s, refine_ep(f, s, h).map_err(|e| e.to_string()))).collect();
    let mut dropped = Vec::new();
    let mut found: Vec<(C64, f64)> = Vec::new();
    for (seed, r) in refined {
        match r {
            Err(reason) => dropped.push(DroppedSeed { seed, reason }),
            Ok((z, _)) if !region.contains(z) => {
                dropped.push(DroppedSeed { seed, reason: format!("converged outside the region to {z}") })
            }
            Ok((z, res)) => {
                if let Some(k) = found.iter().position(|(w, _)| (w - z).norm() < DEDUP_TOL) {
                    if res < found[k].1 {
                        found[k] = (z, res);
                    }
                } else {
                    found.push((z, res));
                }
            }
        }
    }
    found.sort_by(|a, b| location_order(a.0, b.0));

    let locations: Vec<C64> = found.iter().map(|p| p.0).collect();
    let classified: Vec<Result<ExceptionalPoint>> = found
        .par_iter()
        .map(|&(z, res)| {
            let r = classification_radius(z, &locations);
            classify_with_radius(f, z, key, r).map(|ep| ExceptionalPoint { residual: res, ..ep })
        })
        .collect();
    let mut eps = Vec::new();
    for (r, (z, _)) in classified.into_iter().zip(found) {
        match r {
            Ok(ep) => eps.push(ep),
            Err(e) => dropped.push(DroppedSeed { seed: z, reason: e.to_string() }),
        }
    }
    Ok(EpSearch { eps, dropped })
}

/// Orders points by real part (ignoring differences below 1e-9), then imaginary part.
fn location_order(a: C64, b: C64) -> std::cmp::Ordering {
    if (a.re - b.re).abs() > 1e-9 {
        a.re.total_cmp(&b.re)
    } else {
        a.im.total_cmp(&b.im)
    }
}

/// Half the distance to the nearest other point, capped at [`R_CLS_MAX`].
pub fn classification_radius(z: C64, others: &[C64]) -> f64 {
    others
        .iter()
        .map(|w| (w - z).norm())
        .filter(|d| *d > DEDUP_TOL)
        .fold(2.0 * R_CLS_MAX, f64::min)
        * 0.5
}

/// Newton refinement of a discriminant zero: first on `D/D'`, which has only
/// simple zeros, then jointly in `(κ, λ)` on `p = ∂λ p = 0`.
fn refine_ep(f: &MatrixFamily, seed: C64, h: f64) -> Result<(C64, f64)> {
    let disc = |z: C64| discriminant_at(f, z);
    let ratio = |z: C64| -> Result<C64> {
        let d = 1e-5 * z.norm().max(1.0);
        let dz = (disc(z + d)? - disc(z - d)?) / (2.0 * d);
        let v = disc(z)?;
        Ok(if dz.norm() == 0.0 { c(0.0, 0.0) } else { v / dz })
    };
    let mut z = seed;
    let mut last_step = f64::INFINITY;
    for _ in 0..60 {
        let u = ratio(z)?;
        if u.norm() == 0.0 {
            break;
        }
        let d = (1e-3 * u.norm()).clamp(1e-9, 1e-4) * z.norm().max(1.0);
        let du = (ratio(z + d)? - ratio(z - d)?) / (2.0 * d);
        let step = if du.norm() > 1e-12 { u / du } else { u };
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        if step.norm() > 10.0 * h.max(last_step.min(1.0)) && last_step.is_finite() {
            return Err(Error::Convergence { iterations: 0, residual: disc(z)?.norm(), best: vec![z] });
        }
        z -= step;
        if step.norm() < 1e-9 * z.norm().max(1.0) || step.norm() >= last_step {
            break;
        }
        last_step = step.norm();
    }
    let polished = polish(f, z).unwrap_or(z);
    let (rz, rp) = (disc(z)?.norm(), disc(polished)?.norm());
    let (best, res) = if rp <= rz { (polished, rp) } else { (z, rz) };
    if !(res <= DISC_TOL) {
        return Err(Error::Convergence { iterations: 60, residual: res, best: vec![best] });
    }
    Ok((best, res))
}

/// Joint Newton on `p(κ,λ) = 0`, `∂λ p(κ,λ) = 0` from the closest eigenvalue pair at `z`.
fn polish(f: &MatrixFamily, z: C64) -> Result<C64> {
    let values = eig(&f.eval(z)?, TOL_EIG)?.eigenvalues;
    let mut pair = (f64::INFINITY, c(0.0, 0.0));
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let d = (values[i] - values[j]).norm();
            if d < pair.0 {
                pair = (d, 0.5 * (values[i] + values[j]));
            }
        }
    }
    let (mut k, mut l) = (z, pair.1);
    for _ in 0..30 {
        let p0 = char_poly(&f.eval(k)?)?;
        let hk = 1e-6 * k.norm().max(1.0);
        let pp = char_poly(&f.eval(k + hk)?)?;
        let pm = char_poly(&f.eval(k - hk)?)?;
        let dp = p0.derivative();
        let (f1, f2) = (p0.eval(l), dp.eval(l));
        let a11 = (pp.eval(l) - pm.eval(l)) / (2.0 * hk);
        let a12 = f2;
        let a21 = (pp.derivative().eval(l) - pm.derivative().eval(l)) / (2.0 * hk);
        let a22 = dp.derivative().eval(l);
        let det = a11 * a22 - a12 * a21;
        if det.norm() == 0.0 {
            break;
        }
        let dk = (a22 * f1 - a12 * f2) / det;
        let dl = (a11 * f2 - a21 * f1) / det;
        if !dk.re.is_finite() || !dk.im.is_finite() || dk.norm() > 1e-2 {
            return Err(Error::Convergence { iterations: 0, residual: f1.norm(), best: vec![k] });
        }
        k -= dk;
        l -= dl;
        if dk.norm() < 1e-15 * k.norm().max(1.0) {
            break;
        }
    }
    Ok(k)
}

/// Classifies the discriminant zero `ep` by encircling it.
pub fn classify_ep(f: &MatrixFamily, ep: C64, key: SortKey) -> Result<ExceptionalPoint> {
    classify_with_radius(f, ep, key, R_CLS_MAX)
}

/// Classification with an explicit circle radius.
pub fn classify_with_radius(f: &MatrixFamily, ep: C64, key: SortKey, radius: f64) -> Result<ExceptionalPoint> {
    let fail = |reason: String| Error::Classification { at: ep, reason };
    let circle = Path::circle(ep, radius, 0.5, true)?;
    let traj = trace_path(f, &circle, key, &TrackOptions::default()).map_err(|e| fail(e.to_string()))?;
    let cycle = traj.net_perm();
    if cycle.is_identity() {
        return Err(fail("encircling leaves every branch in place (no exceptional point)".into()));
    }
    Ok(ExceptionalPoint { location: ep, order: cycle.longest_cycle(), cycle, residual: discriminant_at(f, ep)?.norm() })
}

/// Classification of one point under each sort key.
pub fn classify_all_keys(f: &MatrixFamily, ep: C64, radius: f64) -> Vec<(SortKey, Result<Perm>)> {
    [SortKey::ReAsc, SortKey::ReDesc, SortKey::ImAsc, SortKey::ImDesc]
        .into_iter()
        .map(|k| (k, classify_with_radius(f, ep, k, radius).map(|e| e.cycle)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchCut {
    pub id: u32,
    /// Branch permutation for a crossing from the right of the polyline to its left.
    pub perm: Perm,
    /// `crossing_matrix_of(perm)`.
    pub matrix: PermMatrix,
    /// Ordered polyline.
    pub points: Vec<C64>,
}

impl BranchCut {
    /// Distance from `z` to the polyline and the unit direction of the nearest piece.
    pub fn nearest(&self, z: C64) -> (f64, C64) {
        if self.points.len() == 1 {
            return ((z - self.points[0]).norm(), c(1.0, 0.0));
        }
        let mut best = (f64::INFINITY, c(1.0, 0.0));
        for w in self.points.windows(2) {
            let d = point_segment_distance(z, w[0], w[1]);
            if d < best.0 && w[1] != w[0] {
                let t = w[1] - w[0];
                best = (d, t / t.norm());
            }
        }
        best
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// A point away from every EP where cuts meet.
#[derive(Clone, Debug, PartialEq)]
pub struct Junction {
    pub location: C64,
    pub cuts: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atlas {
    pub region: Region,
    pub grid_n: usize,
    pub key: SortKey,
    pub eps: Vec<ExceptionalPoint>,
    pub cuts: Vec<BranchCut>,
    pub junctions: Vec<Junction>,
    /// Grid edges that could not be tracked (they pass too close to an EP).
    pub skipped_edges: usize,
}

/// Result of checking that two cuts meeting away from EPs commute.
#[derive(Clone, Debug, PartialEq)]
pub struct CommutationCheck {
    pub at: C64,
    pub cuts: (u32, u32),
    pub commutes: bool,
}

impl Atlas {
    pub fn cut(&self, id: u32) -> Option<&BranchCut> {
        self.cuts.iter().find(|c| c.id == id)
    }

    /// Generator assignment for [`crate::perm::ordered_product`].
    pub fn assignment(&self) -> BTreeMap<u32, PermMatrix> {
        self.cuts.iter().map(|c| (c.id, c.matrix.clone())).collect()
    }

    pub fn ep_locations(&self) -> Vec<C64> {
        self.eps.iter().map(|e| e.location).collect()
    }

    /// Attaches a cut id and crossing sign to every event of `traj`.
    pub fn label(&self, traj: &mut Trajectory) -> Result<()> {
        for e in traj.events.iter_mut() {
            let mut candidates: Vec<(f64, C64, &BranchCut)> = self
                .cuts
                .iter()
                .map(|cut| {
                    let (d, t) = cut.nearest(e.kappa);
                    (d, t, cut)
                })
                .filter(|(d, _, _)| *d <= MATCH_RADIUS)
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
            if candidates.is_empty() {
                return Err(Error::AtlasInconsistency(format!("crossing at κ={} is not near any cut", e.kappa)));
            }
            let mut labelled = false;
            for (_, tangent, cut) in &candidates {
                let side = (tangent.conj() * e.velocity).im;
                if side == 0.0 {
                    continue;
                }
                let sign: i8 = if side > 0.0 { 1 } else { -1 };
                let expected = if sign > 0 { cut.perm.clone() } else { cut.perm.inverse() };
                if expected == e.perm {
                    e.cut_id = Some(cut.id);
                    e.sign = sign;
                    labelled = true;
                    break;
                }
            }
            if !labelled {
                return Err(Error::AtlasInconsistency(format!(
                    "crossing at κ={} with permutation {} matches no nearby cut",
                    e.kappa, e.perm
                )));
            }
        }
        Ok(())
    }

    /// Commutation of every pair of cuts meeting at a junction.
    pub fn commutation_checks(&self) -> Vec<CommutationCheck> {
        let mut out = Vec::new();
        for j in &self.junctions {
            for (a, &x) in j.cuts.iter().enumerate() {
                for &y in &j.cuts[a + 1..] {
                    if let (Some(cx), Some(cy)) = (self.cut(x), self.cut(y)) {
                        out.push(CommutationCheck { at: j.location, cuts: (x, y), commutes: cx.matrix.commutes_with(&cy.matrix) });
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "key": self.key.as_str(),
            "region": {"re": self.region.re, "im": self.region.im},
            "grid_n": self.grid_n,
            "eps": self.eps.iter().map(|e| json!({
                "re": e.location.re,
                "im": e.location.im,
                "order": e.order,
                "cycle": e.cycle.to_string(),
                "residual": e.residual,
            })).collect::<Vec<_>>(),
            "cuts": self.cuts.iter().map(|cut| json!({
                "id": cut.id,
                "perm": cut.perm.to_string(),
                "images": cut.perm.images().iter().map(|i| i + 1).collect::<Vec<_>>(),
                "matrix": cut.matrix.to_dense(),
                "points": cut.points.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "junctions": self.junctions.iter().map(|j| json!({
                "re": j.location.re,
                "im": j.location.im,
                "cuts": j.cuts,
            })).collect::<Vec<_>>(),
        })
    }
}

#[derive(Clone, Debug)]
struct Hit {
    edge: usize,
    z: C64,
    perm: Perm,
}

/// Finds the exceptional points, then maps the cuts.
pub fn map_cuts(f: &MatrixFamily, region: &Region, grid_n: usize, key: SortKey) -> Result<Atlas> {
    let eps = search_eps(f, region, grid_n, key)?.eps;
    map_cuts_with(f, region, grid_n, key, eps)
}

/// Maps the cuts of `f` in `region` given its exceptional points.
pub fn map_cuts_with(
    f: &MatrixFamily,
    region: &Region,
    grid_n: usize,
    key: SortKey,
    eps: Vec<ExceptionalPoint>,
) -> Result<Atlas> {
    region.validate()?;
    if grid_n < 16 {
        return Err(Error::InvalidInput(format!("grid_n must be at least 16, got {grid_n}")));
    }
    let n = grid_n;
    let h = region.spacing(n);
    let (xs, ys) = region.cell_centers(n);
    let at = |k: usize| c(xs[k % n], ys[k / n]);
    let raws: Vec<Vec<C64>> =
        (0..n * n).into_par_iter().map(|k| Ok(eig(&f.eval(at(k))?, TOL_EIG)?.eigenvalues)).collect::<Result<_>>()?;

    // edges in scan order: row by row, each node's right then upper neighbour
    let mut edges = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            if i + 1 < n {
                edges.push((k, k + 1));
            }
            if j + 1 < n {
                edges.push((k, k + n));
            }
        }
    }
    let edge_opts = TrackOptions { initial_samples: 1, locate_tol: 1e-9, ..TrackOptions::default() };
    let scanned: Vec<Option<Vec<Hit>>> = edges
        .par_iter()
        .enumerate()
        .map(|(idx, &(a, b))| {
            if let Some(pi) = quick_branch_step(&raws[a], &raws[b], key) {
                if pi.is_identity() {
                    return Some(Vec::new());
                }
            }
            let line = Path::new(vec![Segment::line(at(a), at(b))]).ok()?;
            let traj = trace_path(f, &line, key, &edge_opts).ok()?;
            Some(traj.events.into_iter().map(|e| Hit { edge: idx, z: e.kappa, perm: e.perm }).collect())
        })
        .collect();
    let skipped_edges = scanned.iter().filter(|s| s.is_none()).count();
    let hits: Vec<Hit> = scanned.into_iter().flatten().flatten().collect();

    let mut groups: BTreeMap<Vec<usize>, Vec<Hit>> = BTreeMap::new();
    for hit in hits {
        let inv = hit.perm.inverse();
        let canon = hit.perm.images().to_vec().min(inv.images().to_vec());
        groups.entry(canon).or_default().push(hit);
    }

    let ep_locs: Vec<C64> = eps.iter().map(|e| e.location).collect();
    let mut raw_cuts: Vec<RawCut> = Vec::new();
    let mut junction_sites: Vec<C64> = Vec::new();
    for hits in groups.values() {
        for cluster in components(hits.iter().map(|h| h.z).collect::<Vec<_>>().as_slice(), 2.0 * h) {
            let members: Vec<&Hit> = cluster.iter().map(|&i| &hits[i]).collect();
            split_cluster(&members, h, &ep_locs, &mut raw_cuts, &mut junction_sites);
        }
    }
    raw_cuts.sort_by_key(|r| r.first_edge);

    let probe_opts = TrackOptions::default();
    let mut cuts = Vec::new();
    for (k, raw) in raw_cuts.into_iter().enumerate() {
        let points = finish_polyline(raw.points, h, region, &ep_locs);
        let perm = probe_cut(f, &points, key, &ep_locs, &junction_sites, &probe_opts)?;
        if perm.is_identity() {
            return Err(Error::AtlasInconsistency(format!("cut near {} does not permute branches", points[points.len() / 2])));
        }
        let matrix = crossing_matrix_of(&perm);
        cuts.push(BranchCut { id: k as u32 + 1, perm, matrix, points });
    }

    let mut junctions = Vec::new();
    for &site in &junction_sites {
        let ids: Vec<u32> = cuts.iter().filter(|c| c.nearest(site).0 <= 2.0 * h).map(|c| c.id).collect();
        if ids.len() >= 2 {
            junctions.push(Junction { location: site, cuts: ids });
        }
    }
    // crossings of cuts with different permutations away from EPs
    for a in 0..cuts.len() {
        for b in a + 1..cuts.len() {
            if cuts[a].perm == cuts[b].perm || cuts[a].perm == cuts[b].perm.inverse() {
                continue;
            }
            if let Some(site) = meeting_point(&cuts[a], &cuts[b], h) {
                if ep_locs.iter().all(|e| (e - site).norm() > 3.0 * h)
                    && junctions.iter().all(|j: &Junction| (j.location - site).norm() > 3.0 * h)
                {
                    junctions.push(Junction { location: site, cuts: vec![cuts[a].id, cuts[b].id] });
                }
            }
        }
    }
    Ok(Atlas { region: *region, grid_n, key, eps, cuts, junctions, skipped_edges })
}

struct RawCut {
    first_edge: usize,
    points: Vec<C64>,
}

/// Connected components under single linkage with radius `r`, each sorted by index.
fn components(points: &[C64], r: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() <= r {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        by_root.entry(root).or_default().push(i);
    }
    by_root.into_values().collect()
}

/// Ratio of the small to the large principal variance of `pts`.
fn spread_ratio(pts: &[C64]) -> f64 {
    let m = pts.iter().sum::<C64>() / pts.len() as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let d = p - m;
        sxx += d.re * d.re;
        syy += d.im * d.im;
        sxy += d.re * d.im;
    }
    let tr = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let (hi, lo) = (tr + disc, tr - disc);
    if hi <= 0.0 {
        0.0
    } else {
        lo.max(0.0) / hi
    }
}

/// Splits a same-permutation cluster at junctions into separate cuts,
/// joining arms that continue straight through a junction away from EPs.
fn split_cluster(members: &[&Hit], h: f64, eps: &[C64], out: &mut Vec<RawCut>, sites: &mut Vec<C64>) {
    let pts: Vec<C64> = members.iter().map(|m| m.z).collect();
    let candidates: Vec<C64> = pts
        .iter()
        .filter(|&&p| {
            let near: Vec<C64> = pts.iter().copied().filter(|q| (q - p).norm() <= 2.5 * h).collect();
            near.len() >= 5 && spread_ratio(&near) > 0.2
        })
        .copied()
        .collect();
    let centres: Vec<C64> = components(&candidates, 3.0 * h)
        .into_iter()
        .map(|g| g.iter().map(|&i| candidates[i]).sum::<C64>() / g.len() as f64)
        .collect();
    if centres.is_empty() {
        out.push(RawCut { first_edge: members.iter().map(|m| m.edge).min().unwrap(), points: pts });
        return;
    }

    let keep: Vec<usize> = (0..pts.len()).filter(|&i| centres.iter().all(|c| (pts[i] - c).norm() > 3.0 * h)).collect();
    let kept: Vec<C64> = keep.iter().map(|&i| pts[i]).collect();
    let arms: Vec<Vec<usize>> =
        components(&kept, 2.0 * h).into_iter().map(|g| g.into_iter().map(|i| keep[i]).collect()).collect();

    // arms pair up through a junction when they leave it in opposite directions
    let mut link: Vec<usize> = (0..arms.len()).collect();
    let mut extra: Vec<Vec<C64>> = vec![Vec::new(); arms.len()];
    for &centre in &centres {
        let at_ep = eps.iter().any(|e| (e - centre).norm() <= 3.0 * h);
        if !at_ep {
            sites.push(centre);
        }
        let mut touching: Vec<(usize, C64)> = Vec::new();
        for (a, arm) in arms.iter().enumerate() {
            let near: Vec<C64> = arm.iter().map(|&i| pts[i]).filter(|p| (p - centre).norm() <= 6.0 * h).collect();
            if near.is_empty() {
                continue;
            }
            let d = near.iter().sum::<C64>() / near.len() as f64 - centre;
            touching.push((a, d / d.norm().max(f64::MIN_POSITIVE)));
        }
        for &(a, _) in &touching {
            extra[a].push(if at_ep { *eps.iter().min_by(|x, y| (*x - centre).norm().total_cmp(&(*y - centre).norm())).unwrap() } else { centre });
        }
        if at_ep {
            continue;
        }
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for x in 0..touching.len() {
            for y in x + 1..touching.len() {
                let dot = (touching[x].1.conj() * touching[y].1).re;
                pairs.push((dot, touching[x].0, touching[y].0));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut used = vec![false; arms.len()];
        for (dot, a, b) in pairs {
            if dot < -0.5 && !used[a] && !used[b] {
                used[a] = true;
                used[b] = true;
                let (ra, rb) = (root(&mut link, a), root(&mut link, b));
                link[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut merged: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for a in 0..arms.len() {
        let r = root(&mut link, a);
        merged.entry(r).or_default().push(a);
    }
    for group in merged.into_values() {
        let mut points: Vec<C64> = Vec::new();
        let mut first_edge = usize::MAX;
        for &a in &group {
            for &i in &arms[a] {
                points.push(pts[i]);
                first_edge = first_edge.min(members[i].edge);
            }
            for &e in &extra[a] {
                if points.iter().all(|p| (p - e).norm() > 1e-12) {
                    points.push(e);
                }
            }
        }
        out.push(RawCut { first_edge, points });
    }
}

fn root(link: &mut [usize], mut i: usize) -> usize {
    while link[i] != i {
        i = link[i];
    }
    i
}

/// Orders an unordered point cloud along the curve it samples, extends the
/// ends to a nearby EP or the region boundary, and fixes the orientation.
fn finish_polyline(mut cloud: Vec<C64>, h: f64, region: &Region, eps: &[C64]) -> Vec<C64> {
    let centroid = cloud.iter().sum::<C64>() / cloud.len() as f64;
    cloud.sort_by(|a, b| location_order(*a, *b));
    cloud.dedup_by(|a, b| (*a - *b).norm() < 1e-9);
    let start = (0..cloud.len())
        .max_by(|&a, &b| (cloud[a] - centroid).norm().total_cmp(&(cloud[b] - centroid).norm()))
        .unwrap();
    let mut line = vec![cloud.swap_remove(start)];
    while !cloud.is_empty() {
        let last = *line.last().unwrap();
        let k = (0..cloud.len()).min_by(|&a, &b| (cloud[a] - last).norm().total_cmp(&(cloud[b] - last).norm())).unwrap();
        line.push(cloud.swap_remove(k));
    }
    let near_ep = |z: C64| eps.iter().copied().find(|e| (e - z).norm() <= 2.0 * h && (e - z).norm() > 0.0);
    let extend = |line: &mut Vec<C64>| {
        let end = *line.last().unwrap();
        if eps.iter().any(|e| (e - end).norm() == 0.0) {
            return;
        }
        if let Some(e) = near_ep(end) {
            line.push(e);
        } else if line.len() >= 2 && region.distance_to_boundary(end) <= 2.0 * h {
            let d = end - line[line.len() - 2];
            if d.norm() > 0.0 {
                let exit = region.exit_point(end, d / d.norm());
                if (exit - end).norm() <= 2.0 * h && (exit - end).norm() > 0.0 {
                    line.push(exit);
                }
            }
        }
    };
    extend(&mut line);
    line.reverse();
    extend(&mut line);
    let is_ep = |z: C64| eps.iter().any(|e| (e - z).norm() == 0.0);
    let (first, last) = (line[0], *line.last().unwrap());
    let flip = match (is_ep(first), is_ep(last)) {
        (false, true) => true,
        (true, false) => false,
        _ => location_order(first, last) == std::cmp::Ordering::Greater,
    };
    if flip {
        line.reverse();
    }
    line
}

/// Crossing permutation at the point of the cut farthest from EPs and
/// junctions, cross-checked at a second well-separated point.
fn probe_cut(f: &MatrixFamily, points: &[C64], key: SortKey, eps: &[C64], sites: &[C64], opts: &TrackOptions) -> Result<Perm> {
    let clearance = |z: C64, extra: &[C64]| eps.iter().chain(sites).chain(extra).map(|e| (e - z).norm()).fold(f64::INFINITY, f64::min);
    let tangent = |k: usize| {
        let last = points.len() - 1;
        for reach in 1..=last.max(1) {
            let d = points[(k + reach).min(last)] - points[k.saturating_sub(reach)];
            if d.norm() > 0.0 {
                return d;
            }
        }
        c(1.0, 0.0)
    };
    let best = |extra: &[C64]| {
        (0..points.len()).max_by(|&a, &b| clearance(points[a], extra).total_cmp(&clearance(points[b], extra))).unwrap()
    };
    let k1 = best(&[]);
    let normal = c(0.0, 1.0) * tangent(k1);
    let perm = crossing_permutation(f, points[k1], normal, key, opts)?;
    if points.len() >= 6 {
        let k2 = best(&[points[k1]]);
        if clearance(points[k2], &[points[k1]]) > 1e-3 {
            let second = crossing_permutation(f, points[k2], c(0.0, 1.0) * tangent(k2), key, opts)?;
            if second != perm {
                return Err(Error::AtlasInconsistency(format!(
                    "cut through {} permutes {} at one point and {} at {}",
                    points[k1], perm, second, points[k2]
                )));
            }
        }
    }
    Ok(perm)
}

/// A point where two cuts come within `h` of each other, if any.
fn meeting_point(a: &BranchCut, b: &BranchCut, h: f64) -> Option<C64> {
    let mut best: Option<(f64, C64)> = None;
    for &p in &a.points {
        let (d, _) = b.nearest(p);
        if d <= h && best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, p));
        }
    }
    best.map(|(_, p)| p)
}


#[cfg(test)]
mod labelling {
    use super::*;
    use crate::family::builtin_paper4;
    use crate::perm::{exchange_relation, ordered_product};
    use crate::scenarios::builtin_loops;

    #[test]
    fn words_reproduce_net_matrices() {
        let f = builtin_paper4();
        let atlas = map_cuts(&f, &Region::square(3.0), 200, SortKey::ReAsc).unwrap();
        for (name, p) in builtin_loops() {
            let mut t = trace_path(&f, &p, SortKey::ReAsc, &TrackOptions::default()).unwrap();
            atlas.label(&mut t).unwrap();
            let w = t.crossing_word().unwrap();
            let prod = ordered_product(&w, &atlas.assignment(), 4).unwrap();
            assert_eq!(prod, t.net_matrix(), "{name}");
            let expected = match name.as_str() {
                "blue" => "s1->s3, s2->s1, s3->s4, s4->s2",
                "blue_prime" => "s1->s2, s2->s4, s3->s1, s4->s3",
                "loop1" => "s1->s4, s2->s3, s3->s2, s4->s1",
                "loop4" => "s1->s4, s2->s2, s3->s3, s4->s1",
                "loop2" => "s1->s1, s2->s2, s3->s3, s4->s4",
                _ => "s1->s1, s2->s3, s3->s2, s4->s4",
            };
            assert_eq!(exchange_relation(&prod).to_string(), expected, "{name}");
        }
    }
}
