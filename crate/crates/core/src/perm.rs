//! Permutations of branch labels, their 0/1 matrix representation, ordered
//! crossing products and the state exchange relations they imply.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::Word;

/// Bijection on `0..n`; `images[i]` is the image of `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Perm {
    images: Vec<usize>,
}

impl Perm {
    pub fn identity(n: usize) -> Self {
        Self { images: (0..n).collect() }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(Error::InvalidInput(format!("{images:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    /// From one-based cycles, e.g. `&[&[2, 3]]` for the transposition (2 3).
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut touched = vec![false; n];
        for cycle in cycles {
            for (k, &a) in cycle.iter().enumerate() {
                let b = cycle[(k + 1) % cycle.len()];
                if a == 0 || a > n || b == 0 || b > n || touched[a - 1] {
                    return Err(Error::InvalidInput(format!("bad cycle {cycle:?} for n={n}")));
                }
                touched[a - 1] = true;
                images[a - 1] = b - 1;
            }
        }
        Self::from_images(images)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Perm) -> Perm {
        assert_eq!(self.len(), other.len(), "permutation sizes differ");
        Perm { images: other.images.iter().map(|&j| self.images[j]).collect() }
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        Perm { images: inv }
    }

    pub fn pow(&self, k: usize) -> Perm {
        (0..k).fold(Perm::identity(self.len()), |acc, _| self.compose(&acc))
    }

    /// Non-trivial cycles, one-based, each starting at its smallest element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle.push(i + 1);
                i = self.images[i];
            }
            if cycle.len() > 1 {
                out.push(cycle);
            }
        }
        out
    }

    /// Length of the longest cycle (1 for the identity).
    pub fn longest_cycle(&self) -> usize {
        self.cycles().iter().map(Vec::len).max().unwrap_or(1)
    }

    pub fn order(&self) -> usize {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        self.cycles().iter().map(Vec::len).fold(1, |acc, l| acc / gcd(acc, l) * l)
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return f.write_str("()");
        }
        for cycle in cycles {
            let parts: Vec<String> = cycle.iter().map(usize::to_string).collect();
            write!(f, "({})", parts.join(" "))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Perm{self}")
    }
}

/// Permutation matrix stored by the column of the single 1 in each row.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PermMatrix {
    cols: Vec<usize>,
}

impl PermMatrix {
    pub fn identity(n: usize) -> Self {
        Self { cols: (0..n).collect() }
    }

    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut cols = Vec::with_capacity(n);
        for row in rows {
            if row.len() != n || row.iter().any(|&v| v > 1) || row.iter().filter(|&&v| v == 1).count() != 1 {
                return Err(Error::InvalidInput("not a permutation matrix".into()));
            }
            cols.push(row.iter().position(|&v| v == 1).unwrap());
        }
        Perm::from_images(cols.clone())?;
        Ok(Self { cols })
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        u8::from(self.cols[row] == col)
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.dim()).map(|r| (0..self.dim()).map(|c| self.get(r, c)).collect()).collect()
    }

    pub fn mul(&self, other: &PermMatrix) -> PermMatrix {
        assert_eq!(self.dim(), other.dim(), "matrix sizes differ");
        PermMatrix { cols: self.cols.iter().map(|&k| other.cols[k]).collect() }
    }

    pub fn transpose(&self) -> PermMatrix {
        let mut cols = vec![0; self.dim()];
        for (r, &c) in self.cols.iter().enumerate() {
            cols[c] = r;
        }
        PermMatrix { cols }
    }

    pub fn inverse(&self) -> PermMatrix {
        self.transpose()
    }

    pub fn pow(&self, k: usize) -> PermMatrix {
        (0..k).fold(PermMatrix::identity(self.dim()), |acc, _| acc.mul(self))
    }

    pub fn is_identity(&self) -> bool {
        self.cols.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `AB - BA` as an integer matrix.
    pub fn commutator(&self, other: &PermMatrix) -> Vec<Vec<i8>> {
        let ab = self.mul(other);
        let ba = other.mul(self);
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| ab.get(r, c) as i8 - ba.get(r, c) as i8).collect())
            .collect()
    }

    pub fn commutes_with(&self, other: &PermMatrix) -> bool {
        self.mul(other) == other.mul(self)
    }

    /// Row `r` of `self · (s_1..s_n)ᵀ` reads `s_{q(r)}`; returns `q`.
    pub fn row_sources(&self) -> Perm {
        Perm { images: self.cols.clone() }
    }
}

impl fmt::Debug for PermMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .to_dense()
            .iter()
            .map(|r| r.iter().map(u8::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        write!(f, "[{}]", rows.join("; "))
    }
}

/// `P_π` with `P(m, l) = 1` iff `b_l = π(b_m)`.
pub fn perm_matrix_of(pi: &Perm) -> PermMatrix {
    PermMatrix { cols: pi.images.clone() }
}

/// `M = P_π⁻¹`, the matrix that acts on the branch-ordered state vector.
pub fn crossing_matrix_of(pi: &Perm) -> PermMatrix {
    perm_matrix_of(pi).inverse()
}

/// `M_{σ(m)} ⋯ M_{σ(1)}` for a crossing word `σ`; inverse letters use `M⁻¹`.
pub fn ordered_product(word: &Word, assign: &BTreeMap<u32, PermMatrix>, n: usize) -> Result<PermMatrix> {
    let mut acc = PermMatrix::identity(n);
    for letter in word.letters() {
        let m = assign.get(&letter.generator).ok_or(Error::UnassignedGenerator(letter.generator))?;
        if m.dim() != n {
            return Err(Error::InvalidInput(format!("generator g{} has dimension {}", letter.generator, m.dim())));
        }
        let m = if letter.sign > 0 { m.clone() } else { m.inverse() };
        acc = m.mul(&acc);
    }
    Ok(acc)
}

/// Where each state ends up: `s_i → s_{e(i)}`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExchangeRelation {
    mapping: Perm,
}

impl ExchangeRelation {
    pub fn new(mapping: Perm) -> Self {
        Self { mapping }
    }

    pub fn mapping(&self) -> &Perm {
        &self.mapping
    }

    /// One-based target of one-based state `i`.
    pub fn target(&self, i: usize) -> usize {
        self.mapping.apply(i - 1) + 1
    }

    /// Reads as `{s_1,…,s_n} → {s_{e(1)},…,s_{e(n)}}`; returns the one-based list.
    pub fn targets(&self) -> Vec<usize> {
        (1..=self.mapping.len()).map(|i| self.target(i)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.is_identity()
    }
}

impl fmt::Display for ExchangeRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (1..=self.mapping.len()).map(|i| format!("s{i}->s{}", self.target(i))).collect();
        f.write_str(&parts.join(", "))
    }
}

impl fmt::Debug for ExchangeRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExchangeRelation({self})")
    }
}

impl FromStr for ExchangeRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse exchange relation `{s}`"));
        let mut pairs = Vec::new();
        for part in s.split(',') {
            let (a, b) = part.trim().split_once("->").ok_or_else(bad)?;
            let a: usize = a.trim().strip_prefix('s').ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let b: usize = b.trim().strip_prefix('s').ok_or_else(bad)?.parse().map_err(|_| bad())?;
            pairs.push((a, b));
        }
        let n = pairs.len();
        let mut images = vec![usize::MAX; n];
        for (a, b) in pairs {
            if a == 0 || a > n || b == 0 || b > n {
                return Err(bad());
            }
            images[a - 1] = b - 1;
        }
        Ok(Self { mapping: Perm::from_images(images)? })
    }
}

/// Exchange implied by a net crossing matrix. With `net·(s_1..s_n)ᵀ =
/// (s_{q(1)},…,s_{q(n)})ᵀ`, state `s_i` ends as `s_{q⁻¹(i)}`.
pub fn exchange_relation(net: &PermMatrix) -> ExchangeRelation {
    ExchangeRelation { mapping: net.row_sources().inverse() }
}

pub fn power_exchange(net: &PermMatrix, k: usize) -> ExchangeRelation {
    exchange_relation(&net.pow(k))
}

/// The three crossing matrices of the four-site model, in order M₁, M₂, M₃.
pub fn model_matrices() -> [PermMatrix; 3] {
    let m1 = PermMatrix::from_dense(&[vec![1, 0, 0, 0], vec![0, 0, 1, 0], vec![0, 1, 0, 0], vec![0, 0, 0, 1]]);
    let m2 = PermMatrix::from_dense(&[vec![0, 1, 0, 0], vec![1, 0, 0, 0], vec![0, 0, 0, 1], vec![0, 0, 1, 0]]);
    let m3 = PermMatrix::from_dense(&[vec![0, 0, 0, 1], vec![0, 0, 1, 0], vec![0, 1, 0, 0], vec![1, 0, 0, 0]]);
    [m1.unwrap(), m2.unwrap(), m3.unwrap()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::Letter;
    use proptest::prelude::*;

    fn x(s: &str) -> ExchangeRelation {
        s.parse().unwrap()
    }

    #[test]
    fn matrix_of_identity_and_model_generators() {
        assert!(perm_matrix_of(&Perm::identity(4)).is_identity());
        let [m1, m2, m3] = model_matrices();
        assert_eq!(perm_matrix_of(&Perm::from_cycles(4, &[&[2, 3]]).unwrap()), m1);
        assert_eq!(perm_matrix_of(&Perm::from_cycles(4, &[&[1, 2], &[3, 4]]).unwrap()), m2);
        assert_eq!(perm_matrix_of(&Perm::from_cycles(4, &[&[1, 4], &[2, 3]]).unwrap()), m3);
        assert_eq!(crossing_matrix_of(&Perm::from_cycles(4, &[&[2, 3]]).unwrap()), m1);
    }

    #[test]
    fn model_algebra() {
        let [m1, m2, m3] = model_matrices();
        for m in [&m1, &m2, &m3] {
            assert!(m.mul(m).is_identity());
        }
        assert!(m1.commutes_with(&m3));
        assert!(m2.commutes_with(&m3));
        assert!(!m1.commutes_with(&m2));
        assert!(m1.commutator(&m2).iter().flatten().any(|&v| v != 0));
    }

    #[test]
    fn product_order_is_right_to_left() {
        let [m1, m2, m3] = model_matrices();
        let assign = BTreeMap::from([(1, m1.clone()), (2, m2.clone()), (3, m3.clone())]);
        let sigma: Word = "g3 g1 g2".parse().unwrap();
        assert_eq!(ordered_product(&sigma, &assign, 4).unwrap(), m2.mul(&m1).mul(&m3));
        assert!(ordered_product(&Word::empty(), &assign, 4).unwrap().is_identity());
        let there_and_back = Word::new(vec![Letter::new(1, 1), Letter::new(1, -1)]);
        assert!(ordered_product(&there_and_back, &assign, 4).unwrap().is_identity());
        let missing: Word = "g7".parse().unwrap();
        assert!(matches!(ordered_product(&missing, &assign, 4), Err(Error::UnassignedGenerator(7))));
    }

    #[test]
    fn exchange_relations_of_stroboscopic_loop() {
        let [m1, m2, _] = model_matrices();
        assert_eq!(exchange_relation(&m1.mul(&m2)), x("s1->s3, s2->s1, s3->s4, s4->s2"));
        assert_eq!(exchange_relation(&m2.mul(&m1)), x("s1->s2, s2->s4, s3->s1, s4->s3"));
        assert!(exchange_relation(&PermMatrix::identity(4)).is_identity());
        // the product vector itself
        assert_eq!(m1.mul(&m2).row_sources().images(), &[1, 3, 0, 2]);
    }

    #[test]
    fn repeated_encircling() {
        let [m1, m2, _] = model_matrices();
        let net = m1.mul(&m2);
        let orbit: Vec<usize> = (1..=4).map(|k| power_exchange(&net, k).target(1)).collect();
        assert_eq!(orbit, vec![3, 4, 2, 1]);
        let order = net.row_sources().order();
        assert!(power_exchange(&net, order).is_identity());
    }

    #[test]
    fn exchange_display_round_trip() {
        let e = x("s1->s4, s2->s3, s3->s2, s4->s1");
        assert_eq!(e.to_string(), "s1->s4, s2->s3, s3->s2, s4->s1");
        assert!("s1->s3, s2->s3".parse::<ExchangeRelation>().is_err());
    }

    #[test]
    fn cycles_and_display() {
        let p = Perm::from_cycles(5, &[&[1, 3, 5]]).unwrap();
        assert_eq!(p.to_string(), "(1 3 5)");
        assert_eq!(p.order(), 3);
        assert_eq!(p.longest_cycle(), 3);
        assert_eq!(Perm::identity(3).to_string(), "()");
        assert!(Perm::from_images(vec![0, 0]).is_err());
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Perm> {
        Just((0..n).collect::<Vec<_>>()).prop_shuffle().prop_map(|v| Perm::from_images(v).unwrap())
    }

    proptest! {
        #[test]
        fn representation_reverses_composition((a, b) in (2usize..=8).prop_flat_map(|n| (arb_perm(n), arb_perm(n)))) {
            // P_{π₂∘π₁} = P_{π₁} P_{π₂}
            prop_assert_eq!(perm_matrix_of(&b.compose(&a)), perm_matrix_of(&a).mul(&perm_matrix_of(&b)));
            prop_assert_eq!(perm_matrix_of(&a.inverse()), perm_matrix_of(&a).inverse());
            let p = perm_matrix_of(&a);
            prop_assert!(p.mul(&p.transpose()).is_identity());
        }

        #[test]
        fn exchange_composes_over_concatenation((a, b) in (2usize..=8).prop_flat_map(|n| (arb_perm(n), arb_perm(n)))) {
            // loop A then loop B has net M_B M_A
            let ma = crossing_matrix_of(&a);
            let mb = crossing_matrix_of(&b);
            let ea = exchange_relation(&ma);
            let eb = exchange_relation(&mb);
            let eab = exchange_relation(&mb.mul(&ma));
            for i in 1..=a.len() {
                prop_assert_eq!(eab.target(i), eb.target(ea.target(i)));
            }
        }
    }
}
