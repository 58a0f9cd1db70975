//! Matrix families `H(κ)`: entries are expressions in one complex variable
//! plus named constants.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{apply_binary, parse_expr, BinOp, Expr, Func};
use crate::linalg::CMatrix;

/// Entry tree with parameters folded to constants and the variable resolved.
#[derive(Clone, Debug)]
enum Compiled {
    Const(Complex64),
    Var,
    Neg(Box<Compiled>),
    Binary(BinOp, Box<Compiled>, Box<Compiled>),
    Call(Func, Box<Compiled>),
}

impl Compiled {
    fn build(e: &Expr, variable: &str, params: &BTreeMap<String, Complex64>) -> Result<Compiled> {
        Ok(match e {
            Expr::Real(v) => Compiled::Const(Complex64::new(*v, 0.0)),
            Expr::Imag(v) => Compiled::Const(Complex64::new(0.0, *v)),
            Expr::Ident(name) if name == variable => Compiled::Var,
            Expr::Ident(name) => {
                Compiled::Const(*params.get(name).ok_or_else(|| Error::Unbound(name.clone()))?)
            }
            Expr::Neg(inner) => match Compiled::build(inner, variable, params)? {
                Compiled::Const(v) => Compiled::Const(Complex64::new(0.0, 0.0) - v),
                other => Compiled::Neg(Box::new(other)),
            },
            Expr::Call(func, inner) => Compiled::Call(*func, Box::new(Compiled::build(inner, variable, params)?)),
            Expr::Binary(op, a, b) => Compiled::Binary(
                *op,
                Box::new(Compiled::build(a, variable, params)?),
                Box::new(Compiled::build(b, variable, params)?),
            ),
        })
    }

    fn eval(&self, kappa: Complex64) -> Result<Complex64> {
        match self {
            Compiled::Const(v) => Ok(*v),
            Compiled::Var => Ok(kappa),
            Compiled::Neg(e) => Ok(Complex64::new(0.0, 0.0) - e.eval(kappa)?),
            Compiled::Call(f, e) => Ok(f.apply(e.eval(kappa)?)),
            Compiled::Binary(op, a, b) => apply_binary(*op, a.eval(kappa)?, b.eval(kappa)?),
        }
    }
}

/// An `n×n` matrix-valued function of one complex variable.
#[derive(Clone, Debug)]
pub struct MatrixFamily {
    name: String,
    n: usize,
    variable: String,
    params: BTreeMap<String, Complex64>,
    sources: Vec<String>,
    entries: Vec<Expr>,
    compiled: Vec<Compiled>,
}

/// On-disk family description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyFile {
    pub n: usize,
    #[serde(default = "default_variable")]
    pub variable: String,
    #[serde(default)]
    pub params: BTreeMap<String, [f64; 2]>,
    pub entries: Vec<Vec<String>>,
}

fn default_variable() -> String {
    "kappa".to_string()
}

impl MatrixFamily {
    pub fn new(
        name: impl Into<String>,
        variable: impl Into<String>,
        entries: Vec<Vec<String>>,
        params: BTreeMap<String, Complex64>,
    ) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput("family entries must form a non-empty square array".into()));
        }
        let variable = variable.into();
        let sources: Vec<String> = entries.into_iter().flatten().collect();
        let parsed = sources.iter().map(|s| parse_expr(s)).collect::<Result<Vec<_>>>()?;
        let mut family = Self {
            name: name.into(),
            n,
            variable,
            params,
            sources,
            entries: parsed,
            compiled: Vec::new(),
        };
        family.recompile()?;
        Ok(family)
    }

    fn recompile(&mut self) -> Result<()> {
        self.compiled = self
            .entries
            .iter()
            .map(|e| Compiled::build(e, &self.variable, &self.params))
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn from_file_spec(name: impl Into<String>, spec: FamilyFile) -> Result<Self> {
        if spec.entries.len() != spec.n {
            return Err(Error::InvalidInput(format!(
                "family declares n={} but has {} rows",
                spec.n,
                spec.entries.len()
            )));
        }
        let params = spec.params.into_iter().map(|(k, [re, im])| (k, Complex64::new(re, im))).collect();
        Self::new(name, spec.variable, spec.entries, params)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: FamilyFile = serde_json::from_str(&text)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("family").to_string();
        Self::from_file_spec(name, spec)
    }

    /// Resolves a built-in name (`paper4`) or a JSON file path.
    pub fn resolve(reference: &str) -> Result<Self> {
        match reference {
            "paper4" => Ok(builtin_paper4()),
            path => Self::load(FsPath::new(path)),
        }
    }

    pub fn to_file_spec(&self) -> FamilyFile {
        FamilyFile {
            n: self.n,
            variable: self.variable.clone(),
            params: self.params.iter().map(|(k, v)| (k.clone(), [v.re, v.im])).collect(),
            entries: self.sources.chunks(self.n).map(|row| row.to_vec()).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn variable(&self) -> &str {
        &self.variable
    }

    pub fn params(&self) -> &BTreeMap<String, Complex64> {
        &self.params
    }

    /// Source text of entry `(row, col)`, zero-based.
    pub fn entry_source(&self, row: usize, col: usize) -> &str {
        &self.sources[row * self.n + col]
    }

    pub fn entry(&self, row: usize, col: usize) -> &Expr {
        &self.entries[row * self.n + col]
    }

    /// Copy with one parameter replaced.
    pub fn with_param(&self, name: &str, value: Complex64) -> Result<Self> {
        let mut out = self.clone();
        out.params.insert(name.to_string(), value);
        out.recompile()?;
        Ok(out)
    }

    pub fn eval(&self, kappa: Complex64) -> Result<CMatrix> {
        let data = self.compiled.iter().map(|e| e.eval(kappa)).collect::<Result<Vec<_>>>()?;
        CMatrix::new(self.n, data)
    }
}

pub fn eval_family(f: &MatrixFamily, kappa: Complex64) -> Result<CMatrix> {
    f.eval(kappa)
}

/// The four-site chain with gain `iγ` and loss `-iγ` at the ends and a
/// tunable central coupling κ. Defaults `J = γ = 1`.
pub fn builtin_paper4() -> MatrixFamily {
    let rows = [
        ["i*gamma", "J", "0", "0"],
        ["J", "0", "kappa", "0"],
        ["0", "kappa", "0", "J"],
        ["0", "0", "J", "-i*gamma"],
    ];
    let entries = rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
    let params = BTreeMap::from([
        ("J".to_string(), Complex64::new(1.0, 0.0)),
        ("gamma".to_string(), Complex64::new(1.0, 0.0)),
    ]);
    MatrixFamily::new("paper4", "kappa", entries, params).expect("built-in family is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{char_poly, c};
    use rand::{Rng, SeedableRng};

    #[test]
    fn model_at_zero_and_one() {
        let f = builtin_paper4();
        let o = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let want = CMatrix::from_rows(vec![
            vec![c(0.0, 1.0), one, o, o],
            vec![one, o, o, o],
            vec![o, o, o, one],
            vec![o, o, one, c(0.0, -1.0)],
        ])
        .unwrap();
        assert_eq!(f.eval(o).unwrap(), want);

        let m = f.eval(one).unwrap();
        for (r, col) in [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)] {
            assert_eq!(m[(r, col)], one);
        }
        assert_eq!(m[(0, 0)], c(0.0, 1.0));
        assert_eq!(m[(3, 3)], c(0.0, -1.0));
    }

    #[test]
    fn model_metadata() {
        let f = builtin_paper4();
        assert_eq!(f.dim(), 4);
        assert_eq!(f.entry_source(0, 0), "i*gamma");
        assert_eq!(f.entry_source(1, 2), "kappa");
    }

    #[test]
    fn evaluation_is_bitwise_deterministic() {
        let f = builtin_paper4();
        let k = c(0.123456789, -0.987654321);
        assert_eq!(f.eval(k).unwrap(), f.eval(k).unwrap());
    }

    #[test]
    fn model_trace_and_char_poly_for_random_kappa() {
        let f = builtin_paper4();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let k = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let m = f.eval(k).unwrap();
            assert_eq!(m.trace(), c(0.0, 0.0));
            let p = char_poly(&m).unwrap();
            let k2 = k * k;
            let want = [c(1.0, 0.0) - k2, c(0.0, 0.0), -(c(1.0, 0.0) + k2), c(0.0, 0.0), c(1.0, 0.0)];
            for (g, w) in p.coeffs().iter().zip(want) {
                assert!((g - w).norm() <= 1e-10 * w.norm().max(1.0));
            }
        }
    }

    #[test]
    fn parameters_can_be_overridden() {
        let f = builtin_paper4().with_param("gamma", c(0.0, 0.0)).unwrap();
        let m = f.eval(c(0.5, 0.0)).unwrap();
        assert_eq!(m[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn unbound_identifier_is_rejected() {
        let err = MatrixFamily::new(
            "bad",
            "kappa",
            vec![vec!["kappa".into(), "beta".into()], vec!["1".into(), "0".into()]],
            BTreeMap::new(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unbound(name) if name == "beta"));
    }

    #[test]
    fn file_spec_round_trip() {
        let f = builtin_paper4();
        let text = serde_json::to_string(&f.to_file_spec()).unwrap();
        let spec: FamilyFile = serde_json::from_str(&text).unwrap();
        let g = MatrixFamily::from_file_spec("copy", spec).unwrap();
        let k = c(0.3, 0.7);
        assert_eq!(f.eval(k).unwrap(), g.eval(k).unwrap());
    }
}
