use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("site {site} is outside the graph ({n_sites} sites)")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("regions overlap but must be disjoint")]
    Overlap,

    #[error("spectral gap {gap:.3e} is below the required minimum {min_gap:.3e}")]
    GapTooSmall { gap: f64, min_gap: f64 },

    #[error("split rule selects no eigenvalues")]
    EmptyPatch,

    #[error("split rule selects the whole spectrum")]
    EverythingSelected,

    #[error("inconsistent split: cross-patch frequency {frequency:.3e} is below half the gap {gap:.3e}")]
    InconsistentSplit { frequency: f64, gap: f64 },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("filter has no tail bound; cannot choose a truncation time")]
    NoTailBound,

    #[error("integrator drift: unitarity defect {defect:.3e} exceeds {tolerance:.3e}")]
    IntegratorDrift { defect: f64, tolerance: f64 },

    #[error("polar decomposition is degenerate (smallest singular value {smallest:.3e})")]
    DegeneratePolar { smallest: f64 },

    #[error("state is not in the range of the patch projector (residual {residual:.3e})")]
    NotInRange { residual: f64 },

    #[error("model is not charge conserving (commutator norm {defect:.3e})")]
    NotChargeConserving { defect: f64 },

    #[error("fit needs at least 3 points above the floor, found {0}")]
    TooFewPoints(usize),

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("linear algebra backend returned an inaccurate result: {0}")]
    Backend(String),

    #[error("bound violated: {0}")]
    BoundViolated(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
