use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coincident atoms: atoms {first} and {second} occupy the same position")]
    CoincidentAtoms { first: usize, second: usize },

    #[error("coincident atoms: zero displacement passed to the Green tensor")]
    ZeroDisplacement,

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("diagonal coupling ({0}, {0}) is fixed by convention and cannot be evaluated")]
    DiagonalCoupling(usize),

    #[error("atom index {index} out of range for {n_atoms} atoms")]
    IndexOutOfRange { index: usize, n_atoms: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coupling matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("non-unique steady state: null space of dimension {dimension}")]
    NonUniqueSteadyState { dimension: usize },

    #[error("steady-state residual {0:e} exceeds tolerance")]
    SteadyStateResidual(f64),

    #[error(
        "defective block: eigendecomposition residual {residual:e}; \
         use spectrum_via_integration instead"
    )]
    DefectiveBlock { residual: f64 },

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("integration not converged: correlation {tail:e} at t_max")]
    IntegrationNotConverged { tail: f64 },

    #[error("dark spectrum: total emission rate is zero")]
    DarkSpectrum,

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("sweep point W = {w}: {source}")]
    SweepPoint {
        w: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("zero pump absorption rate")]
    ZeroAbsorption,
}

impl Error {
    /// Strips any [`Error::SweepPoint`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::SweepPoint { source, .. } => source.root(),
            other => other,
        }
    }
}
