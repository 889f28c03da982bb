use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("symmetric eigensolver did not converge (matrix norm {norm:.3e}, {iterations} sweeps)")]
    EigenNoConvergence { norm: f64, iterations: usize },

    #[error("ground-state solver did not converge: residual {residual:.3e} > {tolerance:.3e}")]
    GroundStateNoConvergence { residual: f64, tolerance: f64 },

    #[error("cluster of {sites} sites exceeds the configured maximum of {max}")]
    DimensionOverflow { sites: usize, max: usize },

    #[error("atoms {0} and {1} coincide")]
    CoincidentAtoms(usize, usize),

    #[error("time step underflow at tau = {tau:.6} us (dt = {dt:.3e})")]
    StepUnderflow { tau: f64, dt: f64 },

    #[error("state invariant violated at tau = {tau:.6} us: {detail}")]
    InvariantViolation { tau: f64, detail: String },

    #[error("no target couplings: every J_ij is zero")]
    NoTargetCouplings,

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
