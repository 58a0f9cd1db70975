//! Small dense complex linear algebra.
//!
//! Eigenvalues come from the characteristic polynomial (Faddeev–LeVerrier)
//! followed by Aberth–Ehrlich simultaneous iteration, eigenvectors from
//! inverse iteration. This is adequate for the 2 ≤ n ≤ 12 matrices the rest
//! of the crate works with and keeps every step deterministic.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_DIM: usize = 12;
/// Default relative residual bound for eigenvalues.
pub const TOL_EIG: f64 = 1e-10;
pub const MAX_ABERTH_ITERATIONS: usize = 200;
/// Roots closer than this are reported as one near-degenerate cluster.
pub const CLUSTER_TOL: f64 = 1e-7;
/// Unit left/right eigenvectors with overlap below this are flagged near-defective.
pub const NEAR_DEFECTIVE_OVERLAP: f64 = 1e-4;

const TRACE_TOL: f64 = 1e-8;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.n, self.n)?;
        for r in 0..self.n {
            write!(f, "  ")?;
            for col in 0..self.n {
                write!(f, "{:>22} ", format!("{:.6}", self[(r, col)]))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, col): (usize, usize)) -> &C64 {
        &self.data[r * self.n + col]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, col): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.n + col]
    }
}

impl CMatrix {
    pub fn new(n: usize, data: Vec<C64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix is not square".into()));
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for col in 0..n {
                    out.data[r * n + col] += a * other.data[k * n + col];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n)
            .map(|r| (0..n).map(|k| self.data[r * n + k] * v[k]).sum())
            .collect()
    }

    /// Writes `self * v` into `out` without allocating.
    pub fn mul_vec_into(&self, v: &[C64], out: &mut [C64]) {
        let n = self.n;
        for (r, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.data[r * n..(r + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for r in 0..n {
            for col in 0..n {
                out[(col, r)] = self[(r, col)].conj();
            }
        }
        out
    }

    /// `self - shift * I`
    pub fn shifted(&self, shift: C64) -> CMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            out[(i, i)] -= shift;
        }
        out
    }

    pub fn determinant(&self) -> C64 {
        let lu = Lu::factor(self);
        lu.determinant()
    }

    /// Solves `self * x = b`. Exactly singular pivots are nudged, which is what
    /// inverse iteration wants.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        Lu::factor(self).solve(b)
    }
}

/// LU factorization with partial pivoting.
struct Lu {
    n: usize,
    a: Vec<C64>,
    piv: Vec<usize>,
    swaps: usize,
    singular: bool,
}

impl Lu {
    fn factor(m: &CMatrix) -> Self {
        let n = m.n;
        let mut a = m.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut singular = false;
        let floor = f64::EPSILON * m.norm().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, _) = (k..n)
                .map(|r| (r, a[r * n + k].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if p != k {
                for col in 0..n {
                    a.swap(k * n + col, p * n + col);
                }
                piv.swap(k, p);
                swaps += 1;
            }
            if a[k * n + k].norm() == 0.0 {
                singular = true;
                a[k * n + k] = C64::new(floor, 0.0);
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let factor = a[r * n + k] / pivot;
                a[r * n + k] = factor;
                if factor == C64::new(0.0, 0.0) {
                    continue;
                }
                for col in k + 1..n {
                    let t = a[k * n + col];
                    a[r * n + col] -= factor * t;
                }
            }
        }
        Self { n, a, piv, swaps, singular }
    }

    fn determinant(&self) -> C64 {
        if self.singular {
            return C64::new(0.0, 0.0);
        }
        let mut det: C64 = (0..self.n).map(|i| self.a[i * self.n + i]).product();
        if self.swaps % 2 == 1 {
            det = -det;
        }
        det
    }

    fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x: Vec<C64> = self.piv.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            for k in 0..r {
                let t = self.a[r * n + k] * x[k];
                x[r] -= t;
            }
        }
        for r in (0..n).rev() {
            for k in r + 1..n {
                let t = self.a[r * n + k] * x[k];
                x[r] -= t;
            }
            x[r] /= self.a[r * n + r];
        }
        x
    }
}

/// Polynomial with complex coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CPoly {
    coeffs: Vec<C64>,
}

impl CPoly {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        match coeffs.last() {
            None => Err(Error::InvalidInput("polynomial needs at least one coefficient".into())),
            Some(lead) if *lead == C64::new(0.0, 0.0) => {
                Err(Error::InvalidInput("leading coefficient is zero".into()))
            }
            Some(_) => Ok(Self { coeffs }),
        }
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut coeffs = vec![C64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![C64::new(0.0, 0.0); coeffs.len() + 1];
            for (i, &a) in coeffs.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * r;
            }
            coeffs = next;
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a)
    }

    /// `(p(z), p'(z))` by Horner.
    pub fn eval_with_derivative(&self, z: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &a in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> CPoly {
        if self.coeffs.len() == 1 {
            return CPoly { coeffs: vec![C64::new(0.0, 0.0)] };
        }
        CPoly {
            coeffs: self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &a)| a * (i + 1) as f64)
                .collect(),
        }
    }

    pub fn monic(&self) -> CPoly {
        let lead = *self.coeffs.last().unwrap();
        CPoly { coeffs: self.coeffs.iter().map(|&a| a / lead).collect() }
    }

    /// `Σ |c_i| max(1,|z|)^i`, the magnitude against which residuals are judged.
    pub fn scale_at(&self, z: C64) -> f64 {
        let r = z.norm().max(1.0);
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * r + a.norm())
    }

    fn backward_bound(&self, z: C64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * r + a.norm())
    }
}

/// Characteristic polynomial `det(λI - m)` via Faddeev–LeVerrier.
pub fn char_poly(m: &CMatrix) -> Result<CPoly> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
    coeffs[n] = C64::new(1.0, 0.0);
    // M_k = A M_{k-1} + c_{n-k+1} I, c_{n-k} = -tr(A M_k) / k
    let mut mk = CMatrix::zeros(n);
    for k in 1..=n {
        let mut next = m.matmul(&mk);
        let shift = coeffs[n - k + 1];
        for i in 0..n {
            next[(i, i)] += shift;
        }
        mk = next;
        let am = m.matmul(&mk);
        coeffs[n - k] = -am.trace() / k as f64;
    }
    CPoly::new(coeffs)
}

/// All roots of `p` with multiplicity (Aberth–Ehrlich).
pub fn poly_roots(p: &CPoly, tol: f64) -> Result<Vec<C64>> {
    let n = p.degree();
    if n == 0 {
        return Err(Error::InvalidInput("constant polynomial has no roots".into()));
    }
    let p = p.monic();
    let coeffs = p.coeffs();
    if n == 1 {
        return Ok(vec![-coeffs[0]]);
    }
    // zero roots split off exactly
    let zeros = coeffs.iter().take_while(|a| **a == C64::new(0.0, 0.0)).count();
    if zeros > 0 {
        let mut roots = vec![C64::new(0.0, 0.0); zeros];
        if zeros < n {
            let reduced = CPoly { coeffs: coeffs[zeros..].to_vec() };
            roots.extend(poly_roots(&reduced, tol)?);
        }
        return Ok(roots);
    }

    let center = -coeffs[n - 1] / n as f64;
    // Fujiwara bound on the root moduli
    let radius = (1..=n)
        .map(|k| {
            let a = coeffs[n - k].norm();
            if k == n {
                (a / 2.0).powf(1.0 / k as f64)
            } else {
                a.powf(1.0 / k as f64)
            }
        })
        .fold(0.0, f64::max)
        * 2.0;
    let spread = (radius - center.norm()).abs().max(radius * 0.5).max(1e-3);
    let mut z: Vec<C64> = (0..n)
        .map(|j| center + C64::from_polar(spread, 2.0 * PI * j as f64 / n as f64 + 0.4))
        .collect();
    let mut converged = vec![false; n];

    let mut iterations = 0;
    while iterations < MAX_ABERTH_ITERATIONS && converged.iter().any(|c| !c) {
        iterations += 1;
        for k in 0..n {
            if converged[k] {
                continue;
            }
            let (pv, dpv) = p.eval_with_derivative(z[k]);
            if pv.norm() <= 4.0 * f64::EPSILON * p.backward_bound(z[k]) {
                converged[k] = true;
                continue;
            }
            let ratio = if dpv == C64::new(0.0, 0.0) {
                pv / C64::new(f64::EPSILON, 0.0)
            } else {
                pv / dpv
            };
            let repulsion: C64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d == C64::new(0.0, 0.0) {
                        C64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = C64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom == C64::new(0.0, 0.0) { ratio } else { ratio / denom };
            z[k] -= step;
            if step.norm() <= f64::EPSILON * z[k].norm() {
                converged[k] = true;
            }
        }
    }

    let worst = z
        .iter()
        .map(|&r| p.eval(r).norm() / p.scale_at(r))
        .fold(0.0, f64::max);
    if !worst.is_finite() || worst > tol {
        return Err(Error::Convergence { iterations, residual: worst, best: z });
    }
    Ok(z)
}

/// Groups of indices whose roots lie within `tol` of each other (single linkage).
pub fn clusters(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (label[i], label[j]);
                for l in label.iter_mut() {
                    if *l == b {
                        *l = a;
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match groups.iter_mut().find(|g| label[g[0]] == label[i]) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups.retain(|g| g.len() > 1);
    groups
}

/// Eigenvalues (raw solver order) with optional eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<C64>,
    /// `right[i]` belongs to `eigenvalues[i]`.
    pub right: Option<Vec<Vec<C64>>>,
    pub left: Option<Vec<Vec<C64>>>,
    /// `|p(λ_i)| / scale`
    pub residuals: Vec<f64>,
    pub near_degenerate: Vec<Vec<usize>>,
}

impl Spectrum {
    pub fn from_values(eigenvalues: Vec<C64>) -> Self {
        let n = eigenvalues.len();
        let near_degenerate = clusters(&eigenvalues, CLUSTER_TOL);
        Self { eigenvalues, right: None, left: None, residuals: vec![0.0; n], near_degenerate }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Checks `Σλ = tr m` and `Σλ² = tr m²`.
    pub fn check_traces(&self, m: &CMatrix) -> Result<()> {
        let scale = m.norm().max(1.0);
        let s1: C64 = self.eigenvalues.iter().sum();
        let s2: C64 = self.eigenvalues.iter().map(|z| z * z).sum();
        let d1 = (s1 - m.trace()).norm();
        if d1 > TRACE_TOL * scale {
            return Err(Error::SpectrumInvariant(format!("|Σλ - tr m| = {d1:e}")));
        }
        let d2 = (s2 - m.matmul(m).trace()).norm();
        if d2 > TRACE_TOL * scale * scale {
            return Err(Error::SpectrumInvariant(format!("|Σλ² - tr m²| = {d2:e}")));
        }
        Ok(())
    }
}

/// Eigenvalues of `m`; fails if the residual or trace identities do not hold.
pub fn eig(m: &CMatrix, tol: f64) -> Result<Spectrum> {
    if m.dim() > MAX_DIM {
        return Err(Error::InvalidInput(format!("dimension {} exceeds {MAX_DIM}", m.dim())));
    }
    let p = char_poly(m)?;
    let values = poly_roots(&p, tol)?;
    let residuals = values.iter().map(|&z| p.eval(z).norm() / p.scale_at(z)).collect();
    let mut spec = Spectrum::from_values(values);
    spec.residuals = residuals;
    spec.check_traces(m)?;
    Ok(spec)
}

/// Eigenvalues plus left and right eigenvectors for each.
pub fn eig_full(m: &CMatrix, tol: f64) -> Result<Spectrum> {
    let mut spec = eig(m, tol)?;
    let mut right = Vec::with_capacity(spec.len());
    let mut left = Vec::with_capacity(spec.len());
    for &lambda in &spec.eigenvalues {
        let pair = eig_vectors(m, lambda);
        right.push(pair.right);
        left.push(pair.left);
    }
    spec.right = Some(right);
    spec.left = Some(left);
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub right: Vec<C64>,
    pub left: Vec<C64>,
    pub right_residual: f64,
    pub left_residual: f64,
    /// `|wᴴv|` for the unit vectors; small values mean a nearly defective eigenvalue.
    pub overlap: f64,
    pub near_defective: bool,
}

fn normalize_phase(v: &mut [C64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .copied()
        .fold(C64::new(0.0, 0.0), |best, z| if z.norm() > best.norm() * (1.0 + 1e-12) { z } else { best });
    let phase = pivot.conj() / pivot.norm();
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
}

fn inverse_iteration(shifted: &CMatrix) -> Vec<C64> {
    let n = shifted.dim();
    let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0, 0.31 * i as f64 + 0.1)).collect();
    normalize_phase(&mut v);
    for _ in 0..4 {
        let mut x = shifted.solve(&v);
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            break;
        }
        normalize_phase(&mut x);
        v = x;
    }
    v
}

/// Unit right/left eigenvectors for an eigenvalue of `m` (inverse iteration).
/// Phases are fixed so the largest component is real and positive.
pub fn eig_vectors(m: &CMatrix, lambda: C64) -> EigenPair {
    let shifted = m.shifted(lambda);
    let right = inverse_iteration(&shifted);
    let left = inverse_iteration(&shifted.adjoint());
    let r = shifted.mul_vec(&right);
    let right_residual = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    // wᴴ(m - λI) = ((m - λI)ᴴ w)ᴴ
    let l = shifted.adjoint().mul_vec(&left);
    let left_residual = l.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let overlap = left.iter().zip(&right).map(|(w, v)| w.conj() * v).sum::<C64>().norm();
    EigenPair {
        right,
        left,
        right_residual,
        left_residual,
        overlap,
        near_defective: overlap < NEAR_DEFECTIVE_OVERLAP
            || right_residual.max(left_residual) > 1e-6 * m.norm().max(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn paper4(kappa: C64) -> CMatrix {
        let o = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        CMatrix::from_rows(vec![
            vec![c(0.0, 1.0), one, o, o],
            vec![one, o, kappa, o],
            vec![o, kappa, o, one],
            vec![o, o, one, c(0.0, -1.0)],
        ])
        .unwrap()
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn char_poly_one_by_one() {
        let m = CMatrix::from_rows(vec![vec![c(2.5, -1.0)]]).unwrap();
        let p = char_poly(&m).unwrap();
        assert_eq!(p.coeffs(), &[c(-2.5, 1.0), c(1.0, 0.0)]);
    }

    #[test]
    fn char_poly_pauli_x() {
        let m = CMatrix::from_rows(vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]])
            .unwrap();
        let p = char_poly(&m).unwrap();
        assert_eq!(p.coeffs(), &[c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn char_poly_model_matches_cofactor_expansion() {
        // det(λI - H) = λ⁴ - (1+κ²)λ² + (1-κ²) for J = γ = 1
        for kappa in [c(0.0, 0.0), c(0.3, -0.2), c(1.7, 0.9), c(-2.0, 2.5)] {
            let p = char_poly(&paper4(kappa)).unwrap();
            let k2 = kappa * kappa;
            let want = [c(1.0, 0.0) - k2, c(0.0, 0.0), -(c(1.0, 0.0) + k2), c(0.0, 0.0), c(1.0, 0.0)];
            for (got, want) in p.coeffs().iter().zip(want) {
                assert!((got - want).norm() < 1e-13, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn char_poly_rejects_empty() {
        assert!(CMatrix::new(0, vec![]).is_err());
        assert!(CMatrix::from_rows(vec![vec![c(1.0, 0.0), c(0.0, 0.0)]]).is_err());
    }

    #[test]
    fn roots_simple_and_double() {
        let p = CPoly::new(vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let r = sorted(poly_roots(&p, TOL_EIG).unwrap());
        assert_abs_diff_eq!(r[0].re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[1].re, 1.0, epsilon = 1e-14);

        let p = CPoly::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(poly_roots(&p, TOL_EIG).unwrap(), vec![c(0.0, 0.0); 2]);

        // (λ - 0.5)² shifted away from the origin
        let p = CPoly::from_roots(&[c(0.5, 0.2), c(0.5, 0.2)]);
        for r in poly_roots(&p, TOL_EIG).unwrap() {
            assert!((r - c(0.5, 0.2)).norm() < 1e-7);
        }
    }

    #[test]
    fn roots_of_model_at_zero() {
        // blocks give λ² - iλ - 1 = 0 and λ² + iλ - 1 = 0
        let p = char_poly(&paper4(c(0.0, 0.0))).unwrap();
        let got = sorted(poly_roots(&p, TOL_EIG).unwrap());
        let h = 3f64.sqrt() / 2.0;
        let want = [c(-h, -0.5), c(-h, 0.5), c(h, -0.5), c(h, 0.5)];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() < 1e-13, "{g} vs {w}");
        }
    }

    #[test]
    fn roots_are_deterministic() {
        let p = CPoly::from_roots(&[c(1.0, 2.0), c(-0.3, 0.1), c(0.7, -1.1), c(2.0, 0.0)]);
        assert_eq!(poly_roots(&p, TOL_EIG).unwrap(), poly_roots(&p, TOL_EIG).unwrap());
    }

    #[test]
    fn eig_diagonal_and_ep() {
        let d = [c(1.0, 0.0), c(-2.0, 0.5), c(0.25, -3.0)];
        let s = eig(&CMatrix::diagonal(&d), TOL_EIG).unwrap();
        for (g, w) in sorted(s.eigenvalues).into_iter().zip(sorted(d.to_vec())) {
            assert!((g - w).norm() < 1e-12, "{g} vs {w}");
        }

        // κ = 1: p = λ⁴ - 2λ²
        let s = eig(&paper4(c(1.0, 0.0)), TOL_EIG).unwrap();
        let v = sorted(s.eigenvalues.clone());
        assert!((v[0] - c(-2f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!(v[1].norm() < 1e-7 && v[2].norm() < 1e-7);
        assert!((v[3] - c(2f64.sqrt(), 0.0)).norm() < 1e-12);
        assert_eq!(s.near_degenerate.len(), 1);
    }

    #[test]
    fn eigenvectors_of_identity_and_pauli() {
        let pair = eig_vectors(&CMatrix::identity(3), c(1.0, 0.0));
        assert_eq!(pair.right_residual, 0.0);
        assert!(!pair.near_defective);

        let m = CMatrix::from_rows(vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]])
            .unwrap();
        let pair = eig_vectors(&m, c(1.0, 0.0));
        let s = 1.0 / 2f64.sqrt();
        assert!((pair.right[0] - c(s, 0.0)).norm() < 1e-12);
        assert!((pair.right[1] - c(s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eigenvector_residuals_model() {
        let m = paper4(c(0.5, 0.0));
        let s = eig(&m, TOL_EIG).unwrap();
        for &lambda in &s.eigenvalues {
            let pair = eig_vectors(&m, lambda);
            assert!(pair.right_residual <= 1e-10, "{}", pair.right_residual);
            assert!(pair.left_residual <= 1e-10, "{}", pair.left_residual);
            assert!(!pair.near_defective);
        }
    }

    #[test]
    fn eigenvectors_flag_defective_point() {
        // Jordan block
        let m = CMatrix::from_rows(vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]])
            .unwrap();
        let pair = eig_vectors(&m, c(0.0, 0.0));
        assert!(pair.near_defective, "{pair:?}");
        assert!(pair.right_residual < 1e-12);
    }

    #[test]
    fn determinant_small() {
        let m = CMatrix::from_rows(vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(3.0, 0.0), c(4.0, 0.0)]])
            .unwrap();
        assert!((m.determinant() - c(-2.0, 0.0)).norm() < 1e-14);
        let z = CMatrix::zeros(3);
        assert_eq!(z.determinant(), c(0.0, 0.0));
    }

    #[test]
    fn clusters_group_close_roots() {
        let v = [c(0.0, 0.0), c(1e-9, 0.0), c(1.0, 0.0)];
        assert_eq!(clusters(&v, CLUSTER_TOL), vec![vec![0, 1]]);
    }
}
