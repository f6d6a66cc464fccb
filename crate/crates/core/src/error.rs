use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ker(Q) is not contained in ker(P): residual {residual:.3e} (the quadratic program is unbounded)")]
    KernelViolation { residual: f64 },

    #[error("{which} is not positive semi-definite (smallest eigenvalue {min_eig:.3e})")]
    NotPsd { which: &'static str, min_eig: f64 },

    #[error("the pencil has no regular part: det is identically zero")]
    DegeneratePencil,

    #[error("determinant method needs as many outputs as inputs (got {outputs} outputs, {inputs} inputs)")]
    NonSquare { inputs: usize, outputs: usize },

    #[error("input matrix must have full column rank (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("Riccati iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} is not Schur stable (spectral radius {radius:.6})")]
    UnstableSystem { what: &'static str, radius: f64 },

    #[error("channel index {index} out of range for {total} channels")]
    IndexOutOfRange { index: usize, total: usize },

    #[error("attack resources invalid: {0}")]
    InvalidResources(String),

    #[error("no real transmission zero is available")]
    NoRealZero,

    #[error("replay window too short: replay needs {needed} recorded samples, {recorded} recorded")]
    WindowTooShort { needed: usize, recorded: usize },

    #[error("invalid replay schedule: need k0 < kr < kf (got k0={k0}, kr={kr}, kf={kf})")]
    ReplaySchedule { k0: usize, kr: usize, kf: usize },

    #[error("direction vector is zero")]
    ZeroDirection,

    #[error("operating point is on the boundary of the level range")]
    BoundaryOperatingPoint,

    #[error("state norm exceeded guard at step {step} (norm {norm:.3e})")]
    NumericalBlowup { step: usize, norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config invalid: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for a failed run: 70 for a numerical blowup, 74 for
    /// I/O, 64 for anything that makes the configuration unrealizable.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalBlowup { .. } => 70,
            Error::Io(_) => 74,
            _ => 64,
        }
    }
}
