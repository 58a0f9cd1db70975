//! Words in a free group: signed generator sequences, free and cyclic
//! reduction, and the conjugacy test used for free homotopy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    pub generator: u32,
    /// +1 or -1.
    pub sign: i8,
}

impl Letter {
    pub fn new(generator: u32, sign: i8) -> Self {
        assert!(sign == 1 || sign == -1, "letter sign must be ±1");
        Self { generator, sign }
    }

    pub fn inverse(self) -> Self {
        Self { generator: self.generator, sign: -self.sign }
    }

    fn cancels(self, other: Letter) -> bool {
        self.generator == other.generator && self.sign == -other.sign
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign > 0 {
            write!(f, "g{}", self.generator)
        } else {
            write!(f, "g{}^-1", self.generator)
        }
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Ordered list of signed letters. Serialized as text, e.g. `"g1 g3 g1^-1"`;
/// the empty word is the empty string.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Self { letters }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn push(&mut self, letter: Letter) {
        self.letters.push(letter);
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }

    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    /// Sum of signs per generator (the abelianized word).
    pub fn exponent_sum(&self, generator: u32) -> i64 {
        self.letters.iter().filter(|l| l.generator == generator).map(|l| i64::from(l.sign)).sum()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.letters.iter().map(Letter::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word[{self}]")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for token in s.split_whitespace() {
            let bad = || Error::InvalidInput(format!("bad word letter `{token}`"));
            let body = token.strip_prefix('g').ok_or_else(bad)?;
            let (num, sign) = match body.split_once('^') {
                None => (body, 1),
                Some((num, "-1")) => (num, -1),
                Some((num, "1")) => (num, 1),
                Some(_) => return Err(bad()),
            };
            letters.push(Letter::new(num.parse().map_err(|_| bad())?, sign));
        }
        Ok(Word { letters })
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Free reduction: cancels adjacent `g g⁻¹` pairs until none remain.
pub fn reduce_word(w: &Word) -> Word {
    let mut out: Vec<Letter> = Vec::with_capacity(w.len());
    for &l in &w.letters {
        match out.last() {
            Some(&top) if top.cancels(l) => {
                out.pop();
            }
            _ => out.push(l),
        }
    }
    Word { letters: out }
}

/// Free reduction followed by stripping inverse pairs from the two ends.
pub fn cyclic_reduce(w: &Word) -> Word {
    let r = reduce_word(w);
    let l = &r.letters;
    let mut i = 0;
    let mut j = l.len();
    while j - i >= 2 && l[i].cancels(l[j - 1]) {
        i += 1;
        j -= 1;
    }
    Word { letters: l[i..j].to_vec() }
}

/// Whether `a` and `b` are conjugate in the free group.
pub fn are_conjugate(a: &Word, b: &Word) -> bool {
    let a = cyclic_reduce(a);
    let b = cyclic_reduce(b);
    if a.len() != b.len() {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    let doubled: Vec<Letter> = a.letters.iter().chain(&a.letters).copied().collect();
    doubled.windows(b.len()).any(|w| w == b.letters.as_slice())
}
