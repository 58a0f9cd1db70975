//! Sorting eigenvalues into branches.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Spectrum, C64};

/// Primary sort order; ties are broken by the other part, ascending.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortKey {
    #[default]
    ReAsc,
    ReDesc,
    ImAsc,
    ImDesc,
}

impl SortKey {
    pub fn as_str(self) -> &'static str {
        match self {
            SortKey::ReAsc => "re_asc",
            SortKey::ReDesc => "re_desc",
            SortKey::ImAsc => "im_asc",
            SortKey::ImDesc => "im_desc",
        }
    }

    pub fn compare(self, a: C64, b: C64) -> Ordering {
        let (pa, pb, ta, tb) = match self {
            SortKey::ReAsc => (a.re, b.re, a.im, b.im),
            SortKey::ReDesc => (b.re, a.re, a.im, b.im),
            SortKey::ImAsc => (a.im, b.im, a.re, b.re),
            SortKey::ImDesc => (b.im, a.im, a.re, b.re),
        };
        pa.total_cmp(&pb).then(ta.total_cmp(&tb))
    }
}

impl fmt::Display for SortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SortKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "re_asc" => Ok(SortKey::ReAsc),
            "re_desc" => Ok(SortKey::ReDesc),
            "im_asc" => Ok(SortKey::ImAsc),
            "im_desc" => Ok(SortKey::ImDesc),
            other => Err(Error::InvalidInput(format!("unknown sort key `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SortedSpectrum {
    /// `values[b]` sits on branch `b + 1`.
    pub values: Vec<C64>,
    /// `values[b] = raw[sort_perm[b]]`.
    pub sort_perm: Vec<usize>,
    pub key: SortKey,
    /// Two eigenvalues compare equal in both parts.
    pub degenerate: bool,
    /// Eigenvectors in branch order, when the input spectrum carried them.
    pub right: Option<Vec<Vec<C64>>>,
    pub left: Option<Vec<Vec<C64>>>,
}

impl SortedSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Branch index (zero-based) of raw eigenvalue `i`.
    pub fn branch_of_raw(&self, i: usize) -> usize {
        self.sort_perm.iter().position(|&r| r == i).expect("sort_perm is a permutation")
    }
}

pub fn sort_values(values: &[C64], key: SortKey) -> SortedSpectrum {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| key.compare(values[i], values[j]));
    let sorted: Vec<C64> = order.iter().map(|&i| values[i]).collect();
    let degenerate = sorted.windows(2).any(|w| w[0] == w[1]);
    SortedSpectrum { values: sorted, sort_perm: order, key, degenerate, right: None, left: None }
}

pub fn sort_spectrum(s: &Spectrum, key: SortKey) -> SortedSpectrum {
    let mut out = sort_values(&s.eigenvalues, key);
    let pick = |vs: &Option<Vec<Vec<C64>>>| vs.as_ref().map(|vs| out.sort_perm.iter().map(|&i| vs[i].clone()).collect());
    let right = pick(&s.right);
    let left = pick(&s.left);
    out.right = right;
    out.left = left;
    out
}

/// Smallest pairwise eigenvalue distance; infinite for fewer than two values.
pub fn min_gap(values: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            best = best.min((values[i] - values[j]).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin_paper4;
    use crate::linalg::{c, eig, TOL_EIG};
    use proptest::prelude::*;

    #[test]
    fn paper4_at_zero_sorted_by_real_part() {
        let m = builtin_paper4().eval(c(0.0, 0.0)).unwrap();
        let ss = sort_spectrum(&eig(&m, TOL_EIG).unwrap(), SortKey::ReAsc);
        let h = 3f64.sqrt() / 2.0;
        let want = [c(-h, -0.5), c(-h, 0.5), c(h, -0.5), c(h, 0.5)];
        for (g, w) in ss.values.iter().zip(want) {
            assert!((g - w).norm() < 1e-10, "{g} vs {w}");
        }
        assert!((min_gap(&ss.values) - 1.0).abs() < 1e-10);
        assert!(!ss.degenerate);
    }

    #[test]
    fn sorted_input_gives_identity() {
        let v = [c(-1.0, 0.0), c(0.0, 2.0), c(3.0, -1.0)];
        assert_eq!(sort_values(&v, SortKey::ReAsc).sort_perm, vec![0, 1, 2]);
    }

    #[test]
    fn tiebreak_on_imaginary_part() {
        let v = [c(1.0, 2.0), c(1.0, -3.0), c(0.0, 5.0)];
        let ss = sort_values(&v, SortKey::ReAsc);
        assert_eq!(ss.values, vec![c(0.0, 5.0), c(1.0, -3.0), c(1.0, 2.0)]);
        assert_eq!(ss.sort_perm, vec![2, 1, 0]);
        assert_eq!(ss.branch_of_raw(0), 2);
        assert!(sort_values(&[c(1.0, 1.0), c(1.0, 1.0)], SortKey::ReAsc).degenerate);
    }

    #[test]
    fn other_keys() {
        let v = [c(1.0, 2.0), c(-1.0, -3.0), c(0.0, 5.0)];
        assert_eq!(sort_values(&v, SortKey::ReDesc).sort_perm, vec![0, 2, 1]);
        assert_eq!(sort_values(&v, SortKey::ImAsc).sort_perm, vec![1, 0, 2]);
        assert_eq!(sort_values(&v, SortKey::ImDesc).sort_perm, vec![2, 0, 1]);
        for k in ["re_asc", "re_desc", "im_asc", "im_desc"] {
            assert_eq!(k.parse::<SortKey>().unwrap().as_str(), k);
        }
        assert!("re".parse::<SortKey>().is_err());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(min_gap(&[c(0.0, 0.0), c(3.0, 0.0), c(7.0, 0.0)]), 3.0);
        assert_eq!(min_gap(&[c(1.0, 1.0), c(1.0, 1.0)]), 0.0);
    }

    proptest! {
        #[test]
        fn sorting_ignores_input_order(mut v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..10), seed in 0u64..100) {
            let vals: Vec<C64> = v.iter().map(|&(a, b)| c(a, b)).collect();
            let ss = sort_values(&vals, SortKey::ReAsc);
            // deterministic shuffle
            let n = v.len();
            for i in 0..n {
                let j = (seed as usize * 31 + i * 17) % n;
                v.swap(i, j);
            }
            let shuffled: Vec<C64> = v.iter().map(|&(a, b)| c(a, b)).collect();
            prop_assert_eq!(&sort_values(&shuffled, SortKey::ReAsc).values, &ss.values);
            prop_assert_eq!(&sort_values(&ss.values, SortKey::ReAsc).values, &ss.values);
        }
    }
}
