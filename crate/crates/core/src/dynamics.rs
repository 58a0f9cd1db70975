//! Time evolution `dψ/dt = -i H(κ(t)) ψ` along a slowly traversed loop and
//! projection onto the instantaneous eigenbasis.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::branches::{sort_spectrum, SortKey, SortedSpectrum};
use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::linalg::{eig_full, CMatrix, C64, TOL_EIG};
use crate::ode::{integrate, OdeOptions};
use crate::path::Path;
use crate::tracker::fmt_f;

/// Relative closeness of the two largest coefficients that counts as a tie.
pub const TIE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `c_i = (w_iᴴψ)/(w_iᴴv_i)` with left eigenvectors `w_i`.
    #[default]
    Biorthogonal,
    /// `c_i = v_iᴴψ`.
    Plain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    /// Angular speed; the loop takes `T = 4π/|ω|` and negative values run it backwards.
    pub omega: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Renormalize after every step and keep the log of the norm separately.
    pub renorm: bool,
    pub projection: Projection,
    /// Number of equal time intervals at which coefficients are recorded.
    pub samples: usize,
    pub key: SortKey,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            omega: 1e-4,
            rtol: 1e-8,
            atol: 1e-10,
            renorm: true,
            projection: Projection::Biorthogonal,
            samples: 200,
            key: SortKey::ReAsc,
        }
    }
}

impl EvolutionConfig {
    pub fn period(&self) -> f64 {
        4.0 * PI / self.omega.abs()
    }

    fn validate(&self) -> Result<()> {
        if self.omega == 0.0 || !self.omega.is_finite() {
            return Err(Error::InvalidInput("omega must be finite and nonzero".into()));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidInput("rtol and atol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionResult {
    pub basepoint: C64,
    /// One-based.
    pub start_state: usize,
    pub times: Vec<f64>,
    /// Coefficients on the instantaneous branches (branch order) at each time.
    pub overlap_series: Vec<Vec<C64>>,
    /// Accumulated `ln‖ψ‖` at each time.
    pub log_norms: Vec<f64>,
    pub final_state: Vec<C64>,
    pub final_coefficients: Vec<C64>,
    pub log_norm: f64,
    pub steps: usize,
    /// Eigenbasis at the end point was close to defective.
    pub near_defective: bool,
}

impl EvolutionResult {
    pub fn dominant(&self) -> Result<usize> {
        dominant_index(&self.final_coefficients)
    }

    /// `|c_dom| / |c_next|`.
    pub fn margin(&self) -> f64 {
        let mut mags: Vec<f64> = self.final_coefficients.iter().map(|c| c.norm()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        if mags.len() < 2 || mags[1] == 0.0 {
            f64::INFINITY
        } else {
            mags[0] / mags[1]
        }
    }

    /// `|c_i|` scaled so the largest is 1.
    pub fn normalized_magnitudes(&self) -> Vec<f64> {
        let mags: Vec<f64> = self.final_coefficients.iter().map(|c| c.norm()).collect();
        let top = mags.iter().copied().fold(0.0, f64::max);
        mags.iter().map(|m| if top > 0.0 { m / top } else { 0.0 }).collect()
    }

    /// CSV of `t, |c_1|..|c_n|, log_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.final_coefficients.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("abs_c{i}")));
        header.push("log_norm".into());
        writeln!(out, "{}", header.join(","))?;
        for ((t, cs), ln) in self.times.iter().zip(&self.overlap_series).zip(&self.log_norms) {
            let mut row = vec![fmt_f(*t)];
            row.extend(cs.iter().map(|c| fmt_f(c.norm())));
            row.push(fmt_f(*ln));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn summary_json(&self, loop_name: &str) -> Result<serde_json::Value> {
        Ok(serde_json::json!({
            "loop": loop_name,
            "basepoint": [self.basepoint.re, self.basepoint.im],
            "start": self.start_state,
            "dominant": self.dominant()?,
        }))
    }
}

/// Biorthogonal (or plain) expansion coefficients of `psi` in the branch-ordered eigenbasis.
pub fn project_state(psi: &[C64], ss: &SortedSpectrum, projection: Projection) -> Result<Vec<C64>> {
    let right = ss.right.as_ref().ok_or_else(|| Error::InvalidInput("spectrum has no eigenvectors".into()))?;
    let left = ss.left.as_ref().ok_or_else(|| Error::InvalidInput("spectrum has no eigenvectors".into()))?;
    if ss.degenerate {
        return Err(Error::InvalidInput("cannot project onto a degenerate spectrum".into()));
    }
    let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>();
    Ok((0..ss.len())
        .map(|i| match projection {
            Projection::Biorthogonal => dot(&left[i], psi) / dot(&left[i], &right[i]),
            Projection::Plain => dot(&right[i], psi),
        })
        .collect())
}

/// Whether any branch eigenpair at this spectrum is close to defective.
fn near_defective(ss: &SortedSpectrum) -> bool {
    let (Some(r), Some(l)) = (&ss.right, &ss.left) else { return false };
    r.iter().zip(l).any(|(v, w)| {
        v.iter().zip(w).map(|(x, y)| y.conj() * x).sum::<C64>().norm() < crate::linalg::NEAR_DEFECTIVE_OVERLAP
    })
}

/// One-based index of the largest `|c_i|`.
pub fn dominant_index(coefficients: &[C64]) -> Result<usize> {
    let mut order: Vec<usize> = (0..coefficients.len()).collect();
    order.sort_by(|&a, &b| coefficients[b].norm().total_cmp(&coefficients[a].norm()));
    let top = order[0];
    if let Some(&second) = order.get(1) {
        let (x, y) = (coefficients[top].norm(), coefficients[second].norm());
        if x - y <= TIE_TOL * x {
            return Err(Error::Tie(x, top.min(second) + 1, top.max(second) + 1));
        }
    }
    Ok(top + 1)
}

pub fn dominant_state(r: &EvolutionResult) -> Result<usize> {
    r.dominant()
}

fn sorted_basis(f: &MatrixFamily, kappa: C64, key: SortKey) -> Result<SortedSpectrum> {
    Ok(sort_spectrum(&eig_full(&f.eval(kappa)?, TOL_EIG)?, key))
}

/// Evolves the eigenstate on branch `start_state` at the loop's basepoint
/// once around `p` and projects the result on the final eigenbasis.
pub fn evolve_loop(f: &MatrixFamily, p: &Path, start_state: usize, cfg: &EvolutionConfig) -> Result<EvolutionResult> {
    cfg.validate()?;
    let n = f.dim();
    if start_state == 0 || start_state > n {
        return Err(Error::InvalidInput(format!("start state {start_state} outside 1..={n}")));
    }
    if !p.is_closed() {
        return Err(Error::InvalidInput("evolution requires a closed path".into()));
    }
    let period = cfg.period();
    let forward = cfg.omega > 0.0;
    let kappa_at = |t: f64| {
        let s = (t / period).clamp(0.0, 1.0);
        p.point(if forward { s } else { 1.0 - s })
    };
    let base = kappa_at(0.0);
    let start = sorted_basis(f, base, cfg.key)?;
    let mut psi = start.right.as_ref().expect("eig_full provides vectors")[start_state - 1].clone();

    let minus_i = C64::new(0.0, -1.0);
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let h: CMatrix = f.eval(kappa_at(t)).expect("family evaluated at the basepoint already");
        h.mul_vec_into(y, dy);
        for v in dy.iter_mut() {
            *v *= minus_i;
        }
    };

    let samples = cfg.samples.max(1);
    let mut times = vec![0.0];
    let mut series = vec![project_state(&psi, &start, cfg.projection)?];
    let mut log_norms = vec![0.0];
    let mut log_norm = 0.0;
    let mut steps = 0;
    let mut opts = OdeOptions { rtol: cfg.rtol, atol: cfg.atol, ..Default::default() };
    let mut end_basis = start.clone();
    for k in 0..samples {
        let (t0, t1) = (period * k as f64 / samples as f64, period * (k + 1) as f64 / samples as f64);
        let stats = integrate(rhs, t0, t1, &mut psi, &opts, |_, y| {
            if cfg.renorm {
                let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if norm > 0.0 && norm.is_finite() {
                    log_norm += norm.ln();
                    return Some(1.0 / norm);
                }
            }
            None
        })?;
        steps += stats.accepted;
        opts.h_init = Some(stats.next_h);
        if psi.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Integration { t: t1, reason: "state overflowed".into() });
        }
        let basis = if k + 1 == samples { start.clone() } else { sorted_basis(f, kappa_at(t1), cfg.key)? };
        times.push(t1);
        series.push(project_state(&psi, &basis, cfg.projection)?);
        log_norms.push(log_norm);
        end_basis = basis;
    }
    let final_coefficients = series.last().unwrap().clone();
    Ok(EvolutionResult {
        basepoint: base,
        start_state,
        times,
        overlap_series: series,
        log_norms,
        final_state: psi,
        final_coefficients,
        log_norm,
        steps,
        near_defective: near_defective(&end_basis),
    })
}
