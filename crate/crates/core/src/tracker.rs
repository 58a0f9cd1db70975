//! Eigenvalue continuation along paths and detection of branch-cut crossings.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::branches::{min_gap, sort_values, SortKey};
use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::linalg::{eig, C64, TOL_EIG};
use crate::path::{Path, Segment};
use crate::perm::{crossing_matrix_of, Perm, PermMatrix};
use crate::word::{Letter, Word};

/// Two assignments closer than this in cost are indistinguishable.
pub const AMBIGUITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackOptions {
    /// Uniform samples seeded before refinement.
    pub initial_samples: usize,
    pub max_samples: usize,
    /// Refinement gives up once consecutive samples are this close in κ.
    pub min_step: f64,
    /// Crossings are localized to this κ distance.
    pub locate_tol: f64,
    pub tol_eig: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self { initial_samples: 64, max_samples: 1_000_000, min_step: 1e-9, locate_tol: 1e-10, tol_eig: TOL_EIG }
    }
}

/// A path point with its eigenvalues in solver order.
#[derive(Clone, Debug)]
struct Node {
    t: f64,
    kappa: C64,
    raw: Vec<C64>,
}

fn node(f: &MatrixFamily, p: &Path, t: f64, tol: f64) -> Result<Node> {
    let kappa = p.point(t);
    let spec = eig(&f.eval(kappa)?, tol)?;
    Ok(Node { t, kappa, raw: spec.eigenvalues })
}

fn assignment_cost(prev: &[C64], next: &[C64], images: &[usize]) -> f64 {
    prev.iter().zip(images).map(|(a, &j)| (a - next[j]).norm_sqr()).sum()
}

/// Best and second-best assignment by exhaustive search (Heap's algorithm).
fn exhaustive(prev: &[C64], next: &[C64]) -> (Vec<usize>, f64, f64) {
    let n = prev.len();
    let mut a: Vec<usize> = (0..n).collect();
    let mut best = (a.clone(), assignment_cost(prev, next, &a));
    let mut second = f64::INFINITY;
    let consider = |a: &[usize], best: &mut (Vec<usize>, f64), second: &mut f64| {
        let cost = assignment_cost(prev, next, a);
        if cost < best.1 {
            *second = best.1;
            *best = (a.to_vec(), cost);
        } else if cost < *second {
            *second = cost;
        }
    };
    let mut cnt = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if cnt[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(cnt[i], i);
            }
            consider(&a, &mut best, &mut second);
            cnt[i] += 1;
            i = 0;
        } else {
            cnt[i] = 0;
            i += 1;
        }
    }
    (best.0, best.1, second)
}

/// Minimum-cost assignment (rows to columns) for a square cost matrix.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            if j1 == 0 {
                // every remaining column is forbidden
                break;
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![usize::MAX; n];
    for j in 1..=n {
        if p[j] > 0 {
            rows[p[j] - 1] = j - 1;
        }
    }
    rows
}

fn hungarian_with_runner_up(prev: &[C64], next: &[C64]) -> (Vec<usize>, f64, f64) {
    let n = prev.len();
    let big = 1e300;
    let cost: Vec<Vec<f64>> = prev.iter().map(|a| next.iter().map(|b| (a - b).norm_sqr()).collect()).collect();
    let best = hungarian(&cost);
    let best_cost = assignment_cost(prev, next, &best);
    let mut second = f64::INFINITY;
    for i in 0..n {
        let mut c2 = cost.clone();
        c2[i][best[i]] = big;
        let alt = hungarian(&c2);
        if alt.iter().any(|&j| j == usize::MAX) {
            continue;
        }
        let alt_cost: f64 = (0..n).map(|r| c2[r][alt[r]]).sum();
        if alt_cost < big {
            second = second.min(alt_cost);
        }
    }
    (best, best_cost, second)
}

/// Assignment of `next` eigenvalues to `prev` ones minimizing `Σ|Δλ|²`.
/// `images[i]` is the index in `next` continuing `prev[i]`.
pub fn match_continuation(prev: &[C64], next: &[C64]) -> Result<Perm> {
    if prev.len() != next.len() {
        return Err(Error::InvalidInput("spectra differ in size".into()));
    }
    let n = prev.len();
    if n <= 1 {
        return Perm::from_images((0..n).collect());
    }
    let (images, best, second) = if n <= 6 { exhaustive(prev, next) } else { hungarian_with_runner_up(prev, next) };
    if second - best <= AMBIGUITY_TOL {
        return Err(Error::Ambiguous { best, second });
    }
    Perm::from_images(images)
}

/// Continuation between two nodes if the step is fine enough: every
/// eigenvalue moves less than half the smaller of the two minimum gaps.
fn fine_step(a: &Node, b: &Node) -> Option<Perm> {
    fine_match(&a.raw, &b.raw)
}

pub(crate) fn fine_match(a: &[C64], b: &[C64]) -> Option<Perm> {
    let m = match_continuation(a, b).ok()?;
    let moved = (0..a.len()).map(|i| (b[m.apply(i)] - a[i]).norm()).fold(0.0, f64::max);
    let gap = min_gap(a).min(min_gap(b));
    (moved < 0.5 * gap).then_some(m)
}

/// Branch permutation across a step between two raw spectra, when the step is
/// fine enough to trust without refinement.
pub(crate) fn quick_branch_step(a: &[C64], b: &[C64], key: SortKey) -> Option<Perm> {
    fine_match(a, b).map(|m| branch_step(a, b, &m, key))
}

/// Adaptively refined nodes with the continuation from each node to the next.
fn refine(f: &MatrixFamily, p: &Path, opts: &TrackOptions) -> Result<(Vec<Node>, Vec<Perm>)> {
    let first = node(f, p, 0.0, opts.tol_eig)?;
    let last_kappa = p.point(1.0);
    let constant = (0..=8).all(|k| p.point(k as f64 / 8.0) == first.kappa) && last_kappa == first.kappa;
    let seeds = if constant { 1 } else { opts.initial_samples.max(1) };
    // Seed at uniform t plus every segment boundary.
    let mut ts: Vec<f64> = (1..=seeds).map(|k| k as f64 / seeds as f64).collect();
    if !constant {
        ts.extend(p.breakpoints().iter().copied().filter(|&b| b > 0.0 && b < 1.0));
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut stack: Vec<Node> =
        ts.iter().rev().map(|&t| node(f, p, t, opts.tol_eig)).collect::<Result<_>>()?;
    let mut out = vec![first];
    let mut links = Vec::new();
    while let Some(next) = stack.pop() {
        let prev = out.last().unwrap();
        if let Some(m) = fine_step(prev, &next) {
            links.push(m);
            out.push(next);
            continue;
        }
        let (t0, t1) = (prev.t, next.t);
        if (next.kappa - prev.kappa).norm() < opts.min_step || t1 - t0 < 1e-15 {
            return Err(Error::Refinement {
                t0,
                t1,
                reason: format!("spectrum nearly degenerate near κ={:.9}", prev.kappa),
            });
        }
        if out.len() + stack.len() + 2 > opts.max_samples {
            return Err(Error::Refinement { t0, t1, reason: format!("more than {} samples", opts.max_samples) });
        }
        let mid = node(f, p, 0.5 * (t0 + t1), opts.tol_eig)?;
        stack.push(next);
        stack.push(mid);
    }
    Ok((out, links))
}

/// Parameter values and points of an adaptive sampling of `p` fine enough for
/// unambiguous continuation.
pub fn sample_adaptive(f: &MatrixFamily, p: &Path, opts: &TrackOptions) -> Result<Vec<(f64, C64)>> {
    Ok(refine(f, p, opts)?.0.into_iter().map(|n| (n.t, n.kappa)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub t: f64,
    pub kappa: C64,
    /// Direction of travel `dκ/dt` at the crossing.
    pub velocity: C64,
    /// Branch permutation: the content of branch `b` moves to branch `perm(b)`.
    pub perm: Perm,
    /// Atlas cut crossed, once labelled.
    pub cut_id: Option<u32>,
    /// Crossing direction relative to the cut; 0 until labelled.
    pub sign: i8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub kappa: C64,
    /// Eigenvalues in branch order.
    pub branch_values: Vec<C64>,
    /// Zero-based branch currently holding state `j`.
    pub state_branch: Vec<usize>,
}

impl TrajectorySample {
    /// Eigenvalue carried by state `j` (zero-based).
    pub fn state_value(&self, j: usize) -> C64 {
        self.branch_values[self.state_branch[j]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub key: SortKey,
    pub samples: Vec<TrajectorySample>,
    pub events: Vec<CrossingEvent>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.samples[0].state_branch.len()
    }

    /// Branch permutation accumulated over the path: state `j`, starting on
    /// branch `j`, ends on branch `net(j)`.
    pub fn net_perm(&self) -> Perm {
        Perm::from_images(self.samples.last().unwrap().state_branch.clone()).expect("labels form a permutation")
    }

    /// Net crossing matrix `M_{σ(m)}⋯M_{σ(1)}`.
    pub fn net_matrix(&self) -> PermMatrix {
        crossing_matrix_of(&self.net_perm())
    }

    /// Product of the per-event matrices in crossing order.
    pub fn event_product(&self) -> PermMatrix {
        self.events
            .iter()
            .fold(PermMatrix::identity(self.dim()), |acc, e| crossing_matrix_of(&e.perm).mul(&acc))
    }

    /// Signed cut-id word of the labelled events.
    pub fn crossing_word(&self) -> Result<Word> {
        let mut w = Word::empty();
        for e in &self.events {
            let id = e.cut_id.ok_or_else(|| Error::InvalidInput(format!("event at t={} is unlabelled", e.t)))?;
            w.push(Letter::new(id, if e.sign < 0 { -1 } else { 1 }));
        }
        Ok(w)
    }

    /// CSV with `t, re_kappa, im_kappa` then `re_lambda_i, im_lambda_i, branch_i` per state.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.dim();
        let mut header = vec!["t".to_string(), "re_kappa".into(), "im_kappa".into()];
        for i in 1..=n {
            header.push(format!("re_lambda_{i}"));
            header.push(format!("im_lambda_{i}"));
            header.push(format!("branch_{i}"));
        }
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![fmt_f(s.t), fmt_f(s.kappa.re), fmt_f(s.kappa.im)];
            for j in 0..n {
                let v = s.state_value(j);
                row.push(fmt_f(v.re));
                row.push(fmt_f(v.im));
                row.push((s.state_branch[j] + 1).to_string());
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn events_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.events
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "t": e.t,
                        "re": e.kappa.re,
                        "im": e.kappa.im,
                        "cut_id": e.cut_id,
                        "sign": e.sign,
                        "perm": e.perm.images().iter().map(|i| i + 1).collect::<Vec<_>>(),
                        "cycles": e.perm.to_string(),
                    })
                })
                .collect(),
        )
    }
}

pub(crate) fn fmt_f(x: f64) -> String {
    format!("{x:.12e}")
}

/// Branch permutation across a step: `π(branch of a) = branch of continued value at b`.
fn branch_step(a: &[C64], b: &[C64], m: &Perm, key: SortKey) -> Perm {
    let sa = sort_values(a, key);
    let sb = sort_values(b, key);
    let n = a.len();
    let mut images = vec![0; n];
    for i in 0..n {
        images[sa.branch_of_raw(i)] = sb.branch_of_raw(m.apply(i));
    }
    Perm::from_images(images).expect("composition of bijections")
}

/// Narrows a step whose branch order changes down to individual crossings.
fn localize(
    f: &MatrixFamily,
    p: &Path,
    key: SortKey,
    opts: &TrackOptions,
    a: &Node,
    b: &Node,
    out: &mut Vec<CrossingEvent>,
) -> Result<()> {
    let m = match fine_step(a, b) {
        Some(m) => m,
        None => match_continuation(&a.raw, &b.raw)?,
    };
    let pi = branch_step(&a.raw, &b.raw, &m, key);
    if pi.is_identity() {
        return Ok(());
    }
    if (b.kappa - a.kappa).norm() <= opts.locate_tol || b.t - a.t < 1e-15 {
        let t = 0.5 * (a.t + b.t);
        out.push(CrossingEvent { t, kappa: p.point(t), velocity: p.velocity(t), perm: pi, cut_id: None, sign: 0 });
        return Ok(());
    }
    let mid = node(f, p, 0.5 * (a.t + b.t), opts.tol_eig)?;
    localize(f, p, key, opts, a, &mid, out)?;
    localize(f, p, key, opts, &mid, b, out)
}

/// Follows every eigenvalue along `p`, recording which branch holds each
/// state and where the branch order is permuted.
pub fn trace_path(f: &MatrixFamily, p: &Path, key: SortKey, opts: &TrackOptions) -> Result<Trajectory> {
    let (nodes, links) = refine(f, p, opts)?;
    let n = f.dim();
    let first = sort_values(&nodes[0].raw, key);
    // raw index currently carrying state j
    let mut carrier: Vec<usize> = first.sort_perm.clone();
    let mut samples = vec![TrajectorySample {
        t: nodes[0].t,
        kappa: nodes[0].kappa,
        branch_values: first.values.clone(),
        state_branch: (0..n).collect(),
    }];
    let mut events = Vec::new();
    for (k, m) in links.iter().enumerate() {
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        if !branch_step(&a.raw, &b.raw, m, key).is_identity() {
            localize(f, p, key, opts, a, b, &mut events)?;
        }
        for c in carrier.iter_mut() {
            *c = m.apply(*c);
        }
        let sb = sort_values(&b.raw, key);
        samples.push(TrajectorySample {
            t: b.t,
            kappa: b.kappa,
            branch_values: sb.values.clone(),
            state_branch: carrier.iter().map(|&r| sb.branch_of_raw(r)).collect(),
        });
    }
    Ok(Trajectory { key, samples, events: merge_coincident(events, 4.0 * opts.locate_tol) })
}

/// Combines consecutive events localized to the same point. A sample lying
/// exactly on a cut splits one crossing into partial swaps on either side.
fn merge_coincident(events: Vec<CrossingEvent>, radius: f64) -> Vec<CrossingEvent> {
    let mut out: Vec<CrossingEvent> = Vec::with_capacity(events.len());
    for e in events {
        match out.last_mut() {
            Some(prev) if (prev.kappa - e.kappa).norm() <= radius => {
                prev.perm = e.perm.compose(&prev.perm);
                if prev.perm.is_identity() {
                    out.pop();
                }
            }
            _ => out.push(e),
        }
    }
    out
}

/// Branch permutation seen when crossing a cut at `cut_point` along
/// `normal_dir`; the probe is shortened until halving it no longer changes
/// the result.
pub fn crossing_permutation(
    f: &MatrixFamily,
    cut_point: C64,
    normal_dir: C64,
    key: SortKey,
    opts: &TrackOptions,
) -> Result<Perm> {
    crossing_permutation_from(f, cut_point, normal_dir, key, opts, 1e-3)
}

pub(crate) fn crossing_permutation_from(
    f: &MatrixFamily,
    cut_point: C64,
    normal_dir: C64,
    key: SortKey,
    opts: &TrackOptions,
    initial_half_length: f64,
) -> Result<Perm> {
    if normal_dir.norm() == 0.0 {
        return Err(Error::InvalidInput("probe direction is zero".into()));
    }
    let nd = normal_dir / normal_dir.norm();
    let probe_opts = TrackOptions { initial_samples: 4, ..opts.clone() };
    let probe = |delta: f64| -> Result<Perm> {
        let line = Path::new(vec![Segment::line(cut_point - delta * nd, cut_point + delta * nd)])?;
        Ok(trace_path(f, &line, key, &probe_opts)?.net_perm())
    };
    let mut delta = initial_half_length;
    let mut previous = probe(delta)?;
    for _ in 0..20 {
        delta *= 0.5;
        let current = probe(delta)?;
        if current == previous {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::Probe { at: cut_point, reason: "permutation keeps changing as the probe shrinks".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin_paper4;
    use crate::linalg::c;
    use crate::perm::model_matrices;
    use proptest::prelude::*;

    fn opts() -> TrackOptions {
        TrackOptions::default()
    }

    #[test]
    fn identical_spectra_match_identity() {
        let v = [c(1.0, 0.0), c(-1.0, 0.5), c(0.2, 3.0)];
        assert!(match_continuation(&v, &v).unwrap().is_identity());
    }

    #[test]
    fn swapped_spectra_match_transposition() {
        let a = [c(1.0, 0.0), c(-1.0, 0.5), c(0.2, 3.0)];
        let b = [a[1], a[0], a[2]];
        assert_eq!(match_continuation(&a, &b).unwrap().images(), &[1, 0, 2]);
    }

    #[test]
    fn symmetric_configuration_is_ambiguous() {
        let a = [c(0.0, 1.0), c(0.0, -1.0)];
        let b = [c(1.0, 0.0), c(-1.0, 0.0)];
        assert!(matches!(match_continuation(&a, &b), Err(Error::Ambiguous { .. })));
    }

    #[test]
    fn hungarian_agrees_with_exhaustive() {
        let a: Vec<C64> = (0..6).map(|k| c(k as f64 * 0.7, (k * k) as f64 * 0.13)).collect();
        let b: Vec<C64> = [3, 0, 5, 1, 4, 2].iter().map(|&k| a[k] + c(0.01 * k as f64, -0.02)).collect();
        let (e, ec, es) = exhaustive(&a, &b);
        let (h, hc, hs) = hungarian_with_runner_up(&a, &b);
        assert_eq!(e, h);
        assert!((ec - hc).abs() < 1e-12 && (es - hs).abs() < 1e-9);
    }

    #[test]
    fn constant_path_has_two_identical_samples() {
        let f = builtin_paper4();
        let p = Path::new(vec![Segment::line(c(0.3, 0.2), c(0.3, 0.2))]).unwrap();
        let s = sample_adaptive(&f, &p, &opts()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].1, s[1].1);
    }

    #[test]
    fn small_circle_steps_satisfy_half_gap() {
        let f = builtin_paper4();
        let p = Path::circle(c(0.4, -0.15), 0.05, 0.0, true).unwrap();
        let (nodes, links) = refine(&f, &p, &opts()).unwrap();
        for (k, m) in links.iter().enumerate() {
            let (a, b) = (&nodes[k], &nodes[k + 1]);
            let moved = (0..4).map(|i| (b.raw[m.apply(i)] - a.raw[i]).norm()).fold(0.0, f64::max);
            assert!(moved < 0.5 * min_gap(&a.raw).min(min_gap(&b.raw)));
        }
        let tr = trace_path(&f, &p, SortKey::ReAsc, &opts()).unwrap();
        assert!(tr.events.is_empty());
        assert!(tr.net_perm().is_identity());
    }

    #[test]
    fn circle_through_ep_fails_refinement() {
        let f = builtin_paper4();
        let p = Path::circle(c(0.9, 0.0), 0.1, 0.0, true).unwrap();
        assert!(matches!(trace_path(&f, &p, SortKey::ReAsc, &opts()), Err(Error::Refinement { .. })));
    }

    #[test]
    fn probes_reproduce_model_matrices() {
        let f = builtin_paper4();
        let [m1, m2, m3] = model_matrices();
        let up = c(0.0, 1.0);
        let probe = |z: C64, d: C64| crossing_matrix_of(&crossing_permutation(&f, z, d, SortKey::ReAsc, &opts()).unwrap());
        assert_eq!(probe(c(1.5, 0.0), up), m1);
        assert_eq!(probe(c(0.3, 0.0), up), m2);
        assert_eq!(probe(c(0.0, 2.8), c(1.0, 0.0)), m3);
        assert!(probe(c(0.85, 0.0), up).is_identity());
    }

    #[test]
    fn fine_step_across_the_real_axis_beyond_ep1() {
        let f = builtin_paper4();
        let a = eig(&f.eval(c(1.2, 1e-6)).unwrap(), TOL_EIG).unwrap().eigenvalues;
        let b = eig(&f.eval(c(1.2, -1e-6)).unwrap(), TOL_EIG).unwrap().eigenvalues;
        let m = match_continuation(&a, &b).unwrap();
        let pi = branch_step(&a, &b, &m, SortKey::ReAsc);
        assert_eq!(pi, Perm::from_cycles(4, &[&[2, 3]]).unwrap());
    }

    #[test]
    fn events_reproduce_sorted_order() {
        let f = builtin_paper4();
        let p = Path::circle(c(0.84, 0.0), 0.45, 0.5, true).unwrap();
        let tr = trace_path(&f, &p, SortKey::ReAsc, &opts()).unwrap();
        assert_eq!(tr.events.len(), 2);
        assert_eq!(tr.event_product(), tr.net_matrix());
        for w in tr.events.windows(2) {
            assert!(w[0].t < w[1].t);
        }
        let back = trace_path(&f, &p.reversed(), SortKey::ReAsc, &opts()).unwrap();
        assert_eq!(back.net_perm(), tr.net_perm().inverse());
        let mut csv = Vec::new();
        tr.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,re_kappa,im_kappa,re_lambda_1,im_lambda_1,branch_1"));
        assert_eq!(text.lines().count(), tr.samples.len() + 1);
    }

    #[test]
    fn doubling_density_keeps_events() {
        let f = builtin_paper4();
        let p = Path::circle(c(0.84, 0.0), 0.45, 0.5, true).unwrap();
        let a = trace_path(&f, &p, SortKey::ReAsc, &opts()).unwrap();
        let b = trace_path(&f, &p, SortKey::ReAsc, &TrackOptions { initial_samples: 256, ..opts() }).unwrap();
        let perms = |t: &Trajectory| t.events.iter().map(|e| e.perm.clone()).collect::<Vec<_>>();
        assert_eq!(perms(&a), perms(&b));
        for (x, y) in a.events.iter().zip(&b.events) {
            assert!((x.kappa - y.kappa).norm() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn match_of_shuffled_spectrum_inverts_the_shuffle(
            vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..9),
            seed in 0usize..1000,
        ) {
            let a: Vec<C64> = vals.iter().map(|&(x, y)| c(x, y)).collect();
            prop_assume!(min_gap(&a) > 1e-3);
            let n = a.len();
            let mut order: Vec<usize> = (0..n).collect();
            for i in 0..n {
                order.swap(i, (seed * 7 + i * 13) % n);
            }
            let b: Vec<C64> = order.iter().map(|&k| a[k]).collect();
            let m = match_continuation(&a, &b).unwrap();
            for i in 0..n {
                prop_assert_eq!(b[m.apply(i)], a[i]);
            }
        }
    }
}
