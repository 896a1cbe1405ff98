use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic: expected \"ITL1\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("non-finite sample at flat index {0}")]
    NonFinite(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("CFL violation: {0}")]
    Cfl(String),

    #[error("input is not divergence-free: |div v|_L2 = {0:e}")]
    NotDivergenceFree(f64),

    #[error("stencil collapse: neighbouring trajectories closer than {0:e}")]
    StencilCollapse(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad input
    /// or I/O): degenerate fits, CFL and resolution violations.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateFit(_)
                | Error::Cfl(_)
                | Error::UnderResolved(_)
                | Error::StencilCollapse(_)
                | Error::NotDivergenceFree(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
