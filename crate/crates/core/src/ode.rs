//! Dormand–Prince 5(4) integrator for complex vector ODEs with PI step control.

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; estimated from the initial slope when absent.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, h_init: None, max_steps: 50_000_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Step size proposed for continuing past the end point.
    pub next_h: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..y.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (w, k) in terms {
            acc += *w * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn rms_norm(v: &[C64], scale: &[f64]) -> f64 {
    (v.iter().zip(scale).map(|(x, s)| (x.norm() / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`, updating `y` in place.
///
/// After every accepted step `on_step(t, y)` may return a factor by which
/// `y` is rescaled. Rescaling assumes `f` is linear in `y`.
pub fn integrate<F, O>(mut f: F, t0: f64, t1: f64, y: &mut [C64], opts: &OdeOptions, mut on_step: O) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(f64, &[C64]) -> Option<f64>,
{
    let n = y.len();
    let mut stats = OdeStats::default();
    if t1 == t0 {
        stats.next_h = opts.h_init.unwrap_or(0.0);
        return Ok(stats);
    }
    if opts.rtol <= 0.0 || opts.atol <= 0.0 {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let zero = C64::new(0.0, 0.0);
    let mut k: Vec<Vec<C64>> = vec![vec![zero; n]; 7];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut err = vec![zero; n];
    let mut scale = vec![0.0; n];

    let mut t = t0;
    f(t, y, &mut k[0]);
    stats.evaluations += 1;

    let mut h = match opts.h_init {
        Some(h) if h > 0.0 => h.min(span),
        _ => {
            for i in 0..n {
                scale[i] = opts.atol + opts.rtol * y[i].norm();
            }
            let d0 = rms_norm(y, &scale);
            let d1 = rms_norm(&k[0], &scale);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(span)
        }
    };
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        let last = h >= remaining;
        let h_step = if last { remaining } else { h };
        if h_step < 1e-14 * t.abs().max(span) {
            return Err(Error::Integration { t, reason: format!("step size underflow (h={h_step:e})") });
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration { t, reason: format!("more than {} steps", opts.max_steps) });
        }
        let hs = dir * h_step;
        {
            let (k0, rest) = k.split_at_mut(1);
            combine(&mut stage, y, hs, &[(A21, &k0[0])]);
            f(t + C2 * hs, &stage, &mut rest[0]);
        }
        combine(&mut stage, y, hs, &[(A31, &k[0]), (A32, &k[1])]);
        f(t + C3 * hs, &stage, &mut k[2]);
        combine(&mut stage, y, hs, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
        f(t + C4 * hs, &stage, &mut k[3]);
        combine(&mut stage, y, hs, &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])]);
        f(t + C5 * hs, &stage, &mut k[4]);
        combine(&mut stage, y, hs, &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])]);
        f(t + hs, &stage, &mut k[5]);
        combine(&mut y_new, y, hs, &[(A71, &k[0]), (A73, &k[2]), (A74, &k[3]), (A75, &k[4]), (A76, &k[5])]);
        f(t + hs, &y_new, &mut k[6]);
        stats.evaluations += 6;

        for i in 0..n {
            err[i] = hs
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            scale[i] = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
        }
        let e = rms_norm(&err, &scale);
        if !e.is_finite() {
            return Err(Error::Integration { t, reason: "non-finite error estimate".into() });
        }

        let fac11 = e.powf(0.2 - BETA * 0.75);
        if e <= 1.0 {
            let fac = (fac11 / err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h_step / fac;
            if last_rejected {
                h_new = h_new.min(h_step);
            }
            err_old = e.max(1e-4);
            t = if last { t1 } else { t + hs };
            y.copy_from_slice(&y_new);
            let (head, tail) = k.split_at_mut(6);
            head[0].copy_from_slice(&tail[0]);
            if let Some(s) = on_step(t, y) {
                for v in y.iter_mut() {
                    *v *= s;
                }
                for v in k[0].iter_mut() {
                    *v *= s;
                }
            }
            stats.accepted += 1;
            last_rejected = false;
            h = h_new;
            if last {
                stats.next_h = h_new;
                break;
            }
        } else {
            let fac = (fac11 / SAFETY).min(1.0 / FAC_MIN);
            h = h_step / fac;
            stats.rejected += 1;
            last_rejected = true;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn exponential_decay() {
        let mut y = vec![c(1.0, 0.0)];
        integrate(|_, y, d| d[0] = -y[0], 0.0, 2.0, &mut y, &OdeOptions::default(), |_, _| None).unwrap();
        assert!((y[0].re - (-2f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn rotation_keeps_modulus() {
        let mut y = vec![c(1.0, 0.0)];
        let opts = OdeOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() };
        let stats =
            integrate(|_, y, d| d[0] = c(0.0, -1.0) * y[0], 0.0, 100.0, &mut y, &opts, |_, _| None).unwrap();
        assert!((y[0] - C64::from_polar(1.0, -100.0)).norm() < 1e-7);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn backwards_and_empty_intervals() {
        let mut y = vec![c(1.0, 0.0)];
        integrate(|_, y, d| d[0] = y[0], 1.0, 0.0, &mut y, &OdeOptions::default(), |_, _| None).unwrap();
        assert!((y[0].re - (-1f64).exp()).abs() < 1e-8);
        let before = y.clone();
        integrate(|_, y, d| d[0] = y[0], 1.0, 1.0, &mut y, &OdeOptions::default(), |_, _| None).unwrap();
        assert_eq!(y, before);
    }

    #[test]
    fn rescaling_observer_tracks_growth() {
        let mut y = vec![c(1.0, 0.0), c(0.5, 0.0)];
        let mut log = 0.0;
        integrate(
            |_, y, d| {
                d[0] = 3.0 * y[0];
                d[1] = 3.0 * y[1];
            },
            0.0,
            50.0,
            &mut y,
            &OdeOptions::default(),
            |_, y| {
                let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                log += norm.ln();
                Some(1.0 / norm)
            },
        )
        .unwrap();
        let start_norm = 1.25f64.sqrt();
        assert!((log - (150.0 + start_norm.ln())).abs() < 1e-6, "{log}");
        assert!((y[1] / y[0] - c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stiff_blowup_reports_integration_error() {
        let mut y = vec![c(1.0, 0.0)];
        let r = integrate(|t, y, d| d[0] = y[0] / (1.0 - t).powi(3), 0.0, 2.0, &mut y, &OdeOptions::default(), |_, _| None);
        assert!(matches!(r, Err(Error::Integration { .. })));
    }
}
