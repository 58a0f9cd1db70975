use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Root iteration stopped without meeting the residual bound; `best` holds the last iterate.
    #[error("root finder did not converge after {iterations} iterations (worst residual {residual:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        best: Vec<Complex64>,
    },

    #[error("spectrum invariant violated: {0}")]
    SpectrumInvariant(String),

    #[error("syntax error at byte {offset}: expected one of {expected:?}")]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
    },

    #[error("unbound identifier `{0}`")]
    Unbound(String),

    #[error("division by exact zero")]
    DivisionByZero,

    #[error("non-finite value while evaluating `{0}`")]
    NonFinite(String),

    #[error("path refinement failed on t in [{t0}, {t1}]: {reason}")]
    Refinement { t0: f64, t1: f64, reason: String },

    #[error("ambiguous continuation: best assignment costs {best:e}, runner-up {second:e}")]
    Ambiguous { best: f64, second: f64 },

    #[error("crossing probe unstable at {at}: {reason}")]
    Probe { at: Complex64, reason: String },

    #[error("atlas inconsistency: {0}")]
    AtlasInconsistency(String),

    #[error("classification of point {at} failed: {reason}")]
    Classification { at: Complex64, reason: String },

    #[error("basepoints differ: {0} vs {1}")]
    BasepointMismatch(Complex64, Complex64),

    #[error("could not build disjoint rays after {0} perturbations")]
    RayConstruction(usize),

    #[error("sampling too coarse: argument jump {jump:.3} rad near t={t}")]
    CoarseSampling { t: f64, jump: f64 },

    #[error("unassigned generator g{0}")]
    UnassignedGenerator(u32),

    #[error("homotopic loops with different net matrices: {0}")]
    HomotopyViolation(String),

    #[error("integration failed at t={t:e}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("dominant state is not unique: |c|={0:e} shared by states {1} and {2}")]
    Tie(f64, usize, usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::SpectrumInvariant(_)
                | Error::Refinement { .. }
                | Error::Ambiguous { .. }
                | Error::Probe { .. }
                | Error::AtlasInconsistency(_)
                | Error::Classification { .. }
                | Error::RayConstruction(_)
                | Error::CoarseSampling { .. }
                | Error::HomotopyViolation(_)
                | Error::Integration { .. }
                | Error::Tie(..)
                | Error::NonFinite(_)
                | Error::DivisionByZero
        )
    }
}
