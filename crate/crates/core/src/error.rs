use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.6e} (index {index})")]
    NotPositiveSemidefinite { eigenvalue: f64, index: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: last two estimates {previous:.17e}, {last:.17e}")]
    QuadratureNotConverged { previous: f64, last: f64 },

    #[error(
        "oracle dimension {dimension} exceeds cap {cap} \
         (sites={n_sites}, modes={n_modes}, fock levels={fock_levels})"
    )]
    DimensionCap {
        dimension: u128,
        cap: usize,
        n_sites: usize,
        n_modes: usize,
        fock_levels: usize,
    },

    #[error("eigendecomposition failed at dimension {dimension}: {reason}")]
    Eigendecomposition { dimension: usize, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
