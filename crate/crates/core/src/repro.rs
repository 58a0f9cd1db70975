//! Regression suite for the four-site model: every reference value is
//! recomputed and compared, and the supporting artifacts are written out.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path as FsPath;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::branches::SortKey;
use crate::dynamics::{evolve_loop, EvolutionConfig, EvolutionResult};
use crate::error::Result;
use crate::family::{builtin_paper4, MatrixFamily};
use crate::homotopy::{default_rays, freely_conjugate, homotopy_word, verdict, winding_numbers, BasedVerdict};
use crate::linalg::{c, CMatrix, C64};
use crate::output::{write_atomic, write_json};
use crate::path::Path;
use crate::perm::{crossing_matrix_of, exchange_relation, model_matrices, ordered_product, power_exchange, Perm, PermMatrix};
use crate::scenarios::{builtin_loops, kappa0, kappa0_prime};
use crate::singular::{discriminant_at, map_cuts, Atlas, Region};
use crate::svg::{render, Plot};
use crate::tracker::{crossing_permutation, trace_path, TrackOptions, Trajectory};
use crate::word::{reduce_word, Letter, Word};

pub const GRID_N: usize = 200;
/// Required `|c_dom| / |c_next|` for a dynamic outcome to count.
pub const MIN_MARGIN: f64 = 10.0;
const EP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub claim: String,
    pub expected: String,
    pub computed: String,
    pub pass: bool,
}

/// One dynamic run of the reference set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicsRow {
    #[serde(rename = "loop")]
    pub loop_name: String,
    pub start: usize,
    pub expected: usize,
    pub dominant: Option<usize>,
    pub margin: f64,
    pub magnitudes: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReproReport {
    pub checks: Vec<Check>,
    pub dynamics: Vec<DynamicsRow>,
}

impl ReproReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:<8} {:<58} {:<40} computed", "id", "status", "claim", "expected");
        for ch in &self.checks {
            let status = if ch.pass { "PASS" } else { "MISMATCH" };
            let _ = writeln!(s, "{:<6} {:<8} {:<58} {:<40} {}", ch.id, status, ch.claim, ch.expected, ch.computed);
        }
        let failed = self.failures().count();
        let _ = writeln!(s, "{} checks, {} passed, {} mismatched", self.checks.len(), self.checks.len() - failed, failed);
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn push(&mut self, id: &str, claim: &str, expected: impl ToString, computed: impl ToString, pass: bool) {
        self.checks.push(Check {
            id: id.into(),
            claim: claim.into(),
            expected: expected.to_string(),
            computed: computed.to_string(),
            pass,
        });
    }

    /// Records an equality check.
    fn eq<T: PartialEq + ToString>(&mut self, id: &str, claim: &str, expected: T, computed: T) {
        let pass = expected == computed;
        self.push(id, claim, expected.to_string(), computed.to_string(), pass);
    }

    /// Records a failed computation as a mismatch instead of aborting the suite.
    fn attempt<T>(&mut self, id: &str, claim: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(id, claim, "a result", format!("error: {e}"), false);
                None
            }
        }
    }
}

fn targets(net: &PermMatrix) -> String {
    let t: Vec<String> = exchange_relation(net).targets().iter().map(|i| format!("s{i}")).collect();
    format!("{{{}}}", t.join(","))
}

fn closed_form_eps() -> Vec<C64> {
    let a = (2.0 * 3f64.sqrt() - 3.0).sqrt();
    let b = (2.0 * 3f64.sqrt() + 3.0).sqrt();
    vec![c(-1.0, 0.0), c(-a, 0.0), c(0.0, -b), c(0.0, b), c(a, 0.0), c(1.0, 0.0)]
}

fn ep_index(atlas: &Atlas, z: C64) -> Option<usize> {
    atlas.eps.iter().position(|e| (e.location - z).norm() < 1e-6)
}

fn family_checks(s: &mut Suite, f: &MatrixFamily) {
    let i = c(0.0, 1.0);
    let (o, z) = (c(1.0, 0.0), c(0.0, 0.0));
    let at0 = CMatrix::from_rows(vec![vec![i, o, z, z], vec![o, z, z, z], vec![z, z, z, o], vec![z, z, o, -i]]).unwrap();
    let got = f.eval(z).map(|m| m == at0).unwrap_or(false);
    s.push("F1", "H(0) = [[i,1,0,0],[1,0,0,0],[0,0,0,1],[0,0,1,-i]]", true, got, got);
    let at1 = CMatrix::from_rows(vec![vec![i, o, z, z], vec![o, z, o, z], vec![z, o, z, o], vec![z, z, o, -i]]).unwrap();
    let got = f.eval(o).map(|m| m == at1).unwrap_or(false);
    s.push("F2", "H(1) couplings 1 and diagonal (i,0,0,-i)", true, got, got);
    s.eq(
        "F3",
        "dimension and entry sources",
        "4, i*gamma, kappa".to_string(),
        format!("{}, {}, {}", f.dim(), f.entry_source(0, 0), f.entry_source(1, 2)),
    );
}

fn ep_checks(s: &mut Suite, f: &MatrixFamily, atlas: &Atlas) {
    let expected = closed_form_eps();
    let found: Vec<C64> = atlas.ep_locations();
    let worst = if found.len() == expected.len() {
        found.iter().zip(&expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    s.push(
        "E1",
        "six EPs at +-1, +-0.68125004, +-2.54245972i",
        format!("6 within {EP_TOL:e}"),
        format!("{} (max dev {worst:.1e})", found.len()),
        found.len() == 6 && worst <= EP_TOL,
    );
    let max_res = atlas.eps.iter().map(|e| e.residual).fold(0.0, f64::max);
    s.push("E2", "EP residual |disc| <= 1e-12", "<= 1e-12", format!("{max_res:.1e}"), max_res <= 1e-12);
    if let Some(d) = s.attempt("E3", "discriminant vanishes at kappa = 1", discriminant_at(f, c(1.0, 0.0))) {
        s.push("E3", "discriminant vanishes at kappa = 1", "<= 1e-10", format!("{:.1e}", d.norm()), d.norm() <= 1e-10);
    }
    let classes: [(&str, &str, C64, &str); 3] = [
        ("E4", "EP1, EP1' order 2, connect branches 2 and 3", c(1.0, 0.0), "(2 3)"),
        ("E5", "EP2, EP2' connect branches 1,2 and 3,4", expected[4], "(1 2)(3 4)"),
        ("E6", "EP3, EP3' connect branches 1,3 and 2,4", expected[3], "(1 3)(2 4)"),
    ];
    for (id, claim, z, cycle) in classes {
        let got: Vec<String> = [z, -z]
            .iter()
            .map(|w| match ep_index(atlas, *w) {
                Some(k) => format!("order {} {}", atlas.eps[k].order, atlas.eps[k].cycle),
                None => "missing".into(),
            })
            .collect();
        let want = format!("order 2 {cycle}");
        s.push(id, claim, &want, got.join("; "), got.iter().all(|g| *g == want));
    }
}

fn algebra_checks(s: &mut Suite, atlas: &Atlas) {
    let [m1, m2, m3] = model_matrices();
    let t23 = Perm::from_cycles(4, &[&[2, 3]]).unwrap();
    let d12 = Perm::from_cycles(4, &[&[1, 2], &[3, 4]]).unwrap();
    let d14 = Perm::from_cycles(4, &[&[1, 4], &[2, 3]]).unwrap();
    s.push(
        "A1",
        "matrices of (2 3), (1 2)(3 4), (1 4)(2 3) are M1, M2, M3",
        true,
        crossing_matrix_of(&t23) == m1 && crossing_matrix_of(&d12) == m2 && crossing_matrix_of(&d14) == m3,
        crossing_matrix_of(&t23) == m1 && crossing_matrix_of(&d12) == m2 && crossing_matrix_of(&d14) == m3,
    );
    let squares = [&m1, &m2, &m3].iter().all(|m| m.mul(m).is_identity());
    s.push("A2", "M_k^2 = I", true, squares, squares);
    let comm = (m1.commutes_with(&m3), m2.commutes_with(&m3), m1.commutes_with(&m2));
    s.push("A3", "[M1,M3] = [M2,M3] = 0, [M1,M2] != 0", "(true, true, false)", format!("{comm:?}"), comm == (true, true, false));
    let assign = BTreeMap::from([(1, m1.clone()), (2, m2.clone()), (3, m3.clone())]);
    let w = Word::new(vec![Letter::new(3, 1), Letter::new(1, 1), Letter::new(2, 1)]);
    let prod = ordered_product(&w, &assign, 4).map(|p| p == m2.mul(&m1).mul(&m3)).unwrap_or(false);
    s.push("A4", "sigma = (3,1,2) orders the product as M2 M1 M3", true, prod, prod);
    s.eq("A5", "M1 M2 gives {s1..s4} -> {s3,s1,s4,s2}", "{s3,s1,s4,s2}".to_string(), targets(&m1.mul(&m2)));
    s.eq("A6", "M2 M1 gives {s1..s4} -> {s2,s4,s1,s3}", "{s2,s4,s1,s3}".to_string(), targets(&m2.mul(&m1)));
    let m12 = m1.mul(&m2);
    let literal: Vec<usize> = (2..=4).map(|k| power_exchange(&m12, k).target(1)).collect();
    s.push(
        "A7",
        "s1 -> s3, s4, s2 after 2, 3, 4 loops (literal)",
        "[3, 4, 2]",
        format!("{literal:?}"),
        literal == [3, 4, 2],
    );
    let orbit: Vec<usize> = (1..=4).map(|k| power_exchange(&m12, k).target(1)).collect();
    s.push("A8", "s1 visits s3, s4, s2 before returning", "[3, 4, 2, 1]", format!("{orbit:?}"), orbit == [3, 4, 2, 1]);

    let counts = [&m1, &m2, &m3].map(|m| atlas.cuts.iter().filter(|c| c.matrix == *m).count());
    s.push(
        "C1",
        "six branch cuts with matrices {M1,M1,M2,M2,M3,M3}",
        "6 cuts, [2, 2, 2]",
        format!("{} cuts, {counts:?}", atlas.cuts.len()),
        atlas.cuts.len() == 6 && counts == [2, 2, 2],
    );
    let ok = atlas.commutation_checks().iter().all(|c| c.commutes);
    s.push("C2", "cuts meeting away from EPs commute", true, ok, ok);
}

fn probe_checks(s: &mut Suite, f: &MatrixFamily) {
    let opts = TrackOptions::default();
    let probes: [(&str, &str, C64, C64, Perm); 3] = [
        ("C3", "real-axis cut beyond EP1 carries M1", c(1.5, 0.0), c(0.0, 1.0), Perm::from_cycles(4, &[&[2, 3]]).unwrap()),
        (
            "C4",
            "cut from EP2 toward 0 carries M2",
            c(0.3, 0.0),
            c(0.0, 1.0),
            Perm::from_cycles(4, &[&[1, 2], &[3, 4]]).unwrap(),
        ),
        (
            "C5",
            "imaginary-axis cut beyond EP3 carries M3",
            c(0.0, 2.8),
            c(1.0, 0.0),
            Perm::from_cycles(4, &[&[1, 4], &[2, 3]]).unwrap(),
        ),
    ];
    for (id, claim, at, dir, want) in probes {
        if let Some(p) = s.attempt(id, claim, crossing_permutation(f, at, dir, SortKey::ReAsc, &opts)) {
            // either crossing direction sees the same involution
            s.eq(id, claim, want.to_string(), p.to_string());
        }
    }
}

/// Traced and labelled loop with its homotopy word.
struct LoopRecord {
    name: String,
    path: Path,
    traj: Trajectory,
    word: Word,
    reduced: Word,
}

fn loop_records(f: &MatrixFamily, atlas: &Atlas) -> Result<Vec<LoopRecord>> {
    let eps = atlas.ep_locations();
    let rays = default_rays(&eps)?;
    builtin_loops()
        .into_iter()
        .map(|(name, path)| {
            let mut traj = trace_path(f, &path, atlas.key, &TrackOptions::default())?;
            atlas.label(&mut traj)?;
            let hw = homotopy_word(&path, &eps, &rays)?;
            Ok(LoopRecord { name, path, traj, reduced: reduce_word(&hw), word: hw })
        })
        .collect()
}

fn loop_checks(s: &mut Suite, atlas: &Atlas, loops: &[LoopRecord]) {
    let [m1, m2, m3] = model_matrices();
    let get = |name: &str| loops.iter().find(|l| l.name == name).expect("builtin loop");
    let cut_seq = |l: &LoopRecord| -> String {
        let names: Vec<String> = l
            .traj
            .events
            .iter()
            .map(|e| {
                let m = crossing_matrix_of(&e.perm);
                match [&m1, &m2, &m3].iter().position(|x| **x == m) {
                    Some(k) => format!("M{}", k + 1),
                    None => format!("{}", e.perm),
                }
            })
            .collect();
        names.join(" then ")
    };

    let blue = get("blue");
    let eps = atlas.ep_locations();
    match winding_numbers(&blue.path, &eps) {
        Ok(w) => {
            let want: Vec<i64> = eps.iter().map(|z| i64::from((z - c(0.84, 0.0)).norm() < 0.45)).collect();
            let ok = w == want && want.iter().sum::<i64>() == 2 && ep_index(atlas, c(1.0, 0.0)).map(|k| w[k]) == Some(1);
            s.push("S1", "blue loop winds once around EP1 and EP2 only", format!("{want:?}"), format!("{w:?}"), ok);
        }
        Err(e) => s.push("S1", "blue loop winds once around EP1 and EP2 only", "winding numbers", format!("error: {e}"), false),
    }
    s.eq("S2", "blue loop from kappa0 crosses M2 first", "M2 then M1".to_string(), cut_seq(blue));
    s.eq("S3", "blue loop from kappa0 exchange", "{s3,s1,s4,s2}".to_string(), targets(&blue.traj.net_matrix()));
    let bp = get("blue_prime");
    s.eq("S4", "blue loop from kappa0' crosses M1 first", "M1 then M2".to_string(), cut_seq(bp));
    s.eq("S5", "blue loop from kappa0' exchange", "{s2,s4,s1,s3}".to_string(), targets(&bp.traj.net_matrix()));

    let (l1, l2) = (get("loop1"), get("loop2"));
    let m1212 = m1.mul(&m2).mul(&m1).mul(&m2);
    s.push(
        "L1",
        "loop 1 net matrix M1 M2 M1 M2",
        "M1M2M1M2 {s4,s3,s2,s1}",
        targets(&l1.traj.net_matrix()),
        l1.traj.net_matrix() == m1212 && targets(&m1212) == "{s4,s3,s2,s1}",
    );
    let id = PermMatrix::identity(4);
    s.push(
        "L2",
        "loop 2 net matrix M1 M3 M1 M3 = I",
        "I",
        targets(&l2.traj.net_matrix()),
        l2.traj.net_matrix() == id && m1.mul(&m3).mul(&m1).mul(&m3) == id,
    );

    let (l3, l4) = (get("loop3"), get("loop4"));
    s.push(
        "L3",
        "loop 3 from kappa0 gives M1",
        "{s1,s3,s2,s4}",
        targets(&l3.traj.net_matrix()),
        l3.traj.net_matrix() == m1,
    );
    let m212 = m2.mul(&m1).mul(&m2);
    s.push(
        "L4",
        "loop 4 from kappa0 gives M2 M1 M2",
        "{s4,s2,s3,s1}",
        targets(&l4.traj.net_matrix()),
        l4.traj.net_matrix() == m212 && targets(&m212) == "{s4,s2,s3,s1}",
    );
    let (l3p, l4p) = (get("loop3_prime"), get("loop4_prime"));
    s.push(
        "L5",
        "loops 3 and 4 from kappa0' both give M1",
        "M1, M1",
        format!("{}, {}", targets(&l3p.traj.net_matrix()), targets(&l4p.traj.net_matrix())),
        l3p.traj.net_matrix() == m1 && l4p.traj.net_matrix() == m1,
    );
    s.eq(
        "L6",
        "loops 3 and 4 from kappa0' have equal reduced words",
        l3p.reduced.to_string(),
        l4p.reduced.to_string(),
    );

    let class = |l: &LoopRecord| crate::homotopy::LoopClass { word: l.reduced.clone(), net: l.traj.net_matrix() };
    let verdicts: [(&str, &str, &LoopRecord, &LoopRecord, BasedVerdict); 3] = [
        ("H1", "loops 1 and 2 from kappa0 are inequivalent", l1, l2, BasedVerdict::Inequivalent),
        ("H2", "loops 3 and 4 from kappa0 are inequivalent", l3, l4, BasedVerdict::Inequivalent),
        ("H3", "loops 3 and 4 from kappa0' are homotopic", l3p, l4p, BasedVerdict::Homotopic),
    ];
    for (id, claim, a, b, want) in verdicts {
        let same_base = (a.path.basepoint() - b.path.basepoint()).norm() < 1e-9;
        match verdict(&class(a), &class(b)) {
            Ok(v) => s.push(id, claim, want, v, v == want && same_base),
            Err(e) => s.push(id, claim, want, format!("error: {e}"), false),
        }
    }
    let free34 = freely_conjugate(&l3.path, &l4.path, atlas).unwrap_or(false);
    let free12 = freely_conjugate(&l1.path, &l2.path, atlas).unwrap_or(true);
    s.push(
        "H4",
        "loops 3, 4 freely homotopic; loops 1, 2 not",
        "(true, false)",
        format!("({free34}, {free12})"),
        free34 && !free12,
    );

    let kp = kappa0_prime();
    // the reference digits are truncated, not rounded
    let ok = (0.0..1e-3).contains(&(kp.re - 1.148)) && (0.0..1e-5).contains(&(kp.im - 0.03711));
    s.push("P1", "kappa0' ~ (1.148, 0.03711)", "(1.148, 0.03711)", format!("({:.6}, {:.6})", kp.re, kp.im), ok);
    let bases = [l1, l2, l3, l4].iter().all(|l| (l.path.basepoint() - kappa0()).norm() < 1e-12)
        && [l3p, l4p].iter().all(|l| (l.path.basepoint() - kp).norm() < 1e-12);
    s.push("P2", "loops based at kappa0 = (0.4, -0.15) and kappa0'", true, bases, bases);
}

fn plot_checks(s: &mut Suite, atlas_svg: &str, blue_svg: &str) {
    let marks = atlas_svg.matches(r#"<g class="ep""#).count();
    let clouds = atlas_svg.matches(r#"<g class="cut""#).count();
    s.push("G1", "atlas plot shows 6 EP marks and 6 cut clouds", "(6, 6)", format!("({marks}, {clouds})"), marks == 6 && clouds == 6);
    let curves = blue_svg.matches(r#"<g class="state""#).count();
    let joints = blue_svg.matches(r#"class="joint""#).count();
    s.push(
        "G2",
        "blue loop trajectories: 4 curves with colour joints",
        "4 curves, joints > 0",
        format!("{curves} curves, {joints} joints"),
        curves == 4 && joints > 0,
    );
}

/// Loops and basepoints of the dynamic experiment with the expected end state.
pub fn dynamics_cases() -> Vec<(&'static str, usize)> {
    vec![("loop3", 3), ("loop4", 1), ("loop3_prime", 2), ("loop4_prime", 2)]
}

pub fn reference_evolution() -> EvolutionConfig {
    EvolutionConfig { omega: 1e-4, rtol: 1e-8, atol: 1e-10, ..EvolutionConfig::default() }
}

/// All sixteen reference runs, in case order then start order.
pub fn run_dynamics(f: &MatrixFamily, cfg: &EvolutionConfig) -> Result<Vec<(String, usize, EvolutionResult)>> {
    let loops = builtin_loops();
    let jobs: Vec<(&str, usize)> = dynamics_cases().iter().flat_map(|(name, _)| (1..=4).map(move |s| (*name, s))).collect();
    jobs.par_iter()
        .map(|(name, start)| Ok((name.to_string(), *start, evolve_loop(f, &loops[*name], *start, cfg)?)))
        .collect()
}

fn dynamics_rows(runs: &[(String, usize, EvolutionResult)]) -> Vec<DynamicsRow> {
    let expected: BTreeMap<&str, usize> = dynamics_cases().into_iter().collect();
    runs.iter()
        .map(|(name, start, r)| {
            let want = expected[name.as_str()];
            let dominant = r.dominant().ok();
            let margin = r.margin();
            DynamicsRow {
                loop_name: name.clone(),
                start: *start,
                expected: want,
                dominant,
                margin,
                magnitudes: r.normalized_magnitudes(),
                pass: dominant == Some(want) && margin >= MIN_MARGIN,
            }
        })
        .collect()
}

fn dynamics_checks(s: &mut Suite, rows: &[DynamicsRow]) {
    for (k, (name, want)) in dynamics_cases().into_iter().enumerate() {
        let mine: Vec<&DynamicsRow> = rows.iter().filter(|r| r.loop_name == name).collect();
        let got: Vec<String> = mine
            .iter()
            .map(|r| format!("s{}:{}(x{:.2})", r.start, r.dominant.map_or("tie".into(), |d| format!("s{d}")), r.margin))
            .collect();
        let claim = format!("{name}: every start ends dominant at s{want}, margin >= {MIN_MARGIN}");
        s.push(&format!("D{}", k + 1), &claim, format!("s{want}"), got.join(" "), mine.iter().all(|r| r.pass));
    }
}

fn loops_json(loops: &[LoopRecord], atlas: &Atlas) -> serde_json::Value {
    let assign = atlas.assignment();
    serde_json::Value::Array(
        loops
            .iter()
            .map(|l| {
                let crossing = l.traj.crossing_word().map(|w| w.to_string()).unwrap_or_default();
                let product = l.traj.crossing_word().and_then(|w| ordered_product(&w, &assign, 4)).map(|m| m.to_dense()).ok();
                json!({
                    "name": l.name,
                    "basepoint": [l.path.basepoint().re, l.path.basepoint().im],
                    "crossing_word": crossing,
                    "homotopy_word": l.word.to_string(),
                    "reduced_word": l.reduced.to_string(),
                    "net_matrix": l.traj.net_matrix().to_dense(),
                    "ordered_product": product,
                    "exchange": exchange_relation(&l.traj.net_matrix()).to_string(),
                })
            })
            .collect(),
    )
}

pub fn eps_json(atlas: &Atlas) -> serde_json::Value {
    serde_json::Value::Array(
        atlas
            .eps
            .iter()
            .map(|e| {
                json!({
                    "re": e.location.re,
                    "im": e.location.im,
                    "order": e.order,
                    "cycle": e.cycle.to_string(),
                    "residual": e.residual,
                })
            })
            .collect(),
    )
}

/// Runs the full suite. With `out`, writes the artifacts there.
pub fn paper_repro(out: Option<&FsPath>) -> Result<ReproReport> {
    let f = builtin_paper4();
    let atlas = map_cuts(&f, &Region::square(3.0), GRID_N, SortKey::ReAsc)?;
    let runs = run_dynamics(&f, &reference_evolution())?;
    repro_with(&f, &atlas, &runs, out)
}

/// The suite on a precomputed atlas and set of dynamic runs.
pub fn repro_with(
    f: &MatrixFamily,
    atlas: &Atlas,
    runs: &[(String, usize, EvolutionResult)],
    out: Option<&FsPath>,
) -> Result<ReproReport> {
    let mut s = Suite { checks: Vec::new() };
    family_checks(&mut s, f);
    ep_checks(&mut s, f, atlas);
    algebra_checks(&mut s, atlas);
    probe_checks(&mut s, f);
    let loops = loop_records(f, atlas)?;
    loop_checks(&mut s, atlas, &loops);

    let loop_lines: Vec<(String, Vec<C64>)> = loops
        .iter()
        .filter(|l| l.name == "blue" || l.name.starts_with("loop"))
        .map(|l| (l.name.clone(), l.path.polyline(400).into_iter().map(|(_, z)| z).collect()))
        .collect();
    let atlas_svg = render(&Plot::Atlas { atlas, loops: &loop_lines });
    let blue = loops.iter().find(|l| l.name == "blue").expect("builtin loop");
    let blue_svg = render(&Plot::Trajectory(&blue.traj));
    plot_checks(&mut s, &atlas_svg, &blue_svg);

    let rows = dynamics_rows(runs);
    dynamics_checks(&mut s, &rows);
    let report = ReproReport { checks: s.checks, dynamics: rows };

    if let Some(dir) = out {
        write_json(&dir.join("eps.json"), &eps_json(atlas))?;
        write_json(&dir.join("atlas.json"), &atlas.to_json())?;
        write_json(&dir.join("loops.json"), &loops_json(&loops, atlas))?;
        write_atomic(&dir.join("atlas.svg"), atlas_svg.as_bytes())?;
        write_atomic(&dir.join("blue_trajectory.svg"), blue_svg.as_bytes())?;
        for l in &loops {
            let mut csv = Vec::new();
            l.traj.write_csv(&mut csv)?;
            write_atomic(&dir.join("trajectories").join(format!("{}.csv", l.name)), &csv)?;
            write_json(&dir.join("trajectories").join(format!("{}.events.json", l.name)), &l.traj.events_json())?;
        }
        let mut summaries = Vec::new();
        for (name, start, r) in runs {
            let mut csv = Vec::new();
            r.write_csv(&mut csv)?;
            write_atomic(&dir.join("evolution").join(format!("{name}_s{start}.csv")), &csv)?;
            let mut summary = match r.summary_json(name) {
                Ok(v) => v,
                Err(_) => json!({"loop": name, "basepoint": [r.basepoint.re, r.basepoint.im], "start": start, "dominant": null}),
            };
            summary["margin"] = json!(r.margin());
            summaries.push(summary);
        }
        write_json(&dir.join("evolution").join("summary.json"), &serde_json::Value::Array(summaries))?;
        write_json(&dir.join("repro.json"), &report.to_json())?;
        write_atomic(&dir.join("repro.txt"), report.table().as_bytes())?;
    }
    Ok(report)
}
