use crate::structures::GenericityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure in {0}")]
    NumericalFailure(String),

    #[error("degenerate form: {context} (offending value {value:.3e})")]
    DegenerateForm { context: String, value: f64 },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("spectral inconsistency: {0}")]
    SpectralInconsistency(String),

    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    #[error("instance is not generic: {}", report.summary())]
    NotGeneric { report: Box<GenericityReport> },

    #[error("uniqueness violation: seed-to-seed K distance {distance:.3e} exceeds {limit:.3e}")]
    UniquenessViolation { distance: f64, limit: f64 },

    #[error("structure projection failure: residual {residual:.3e} of projected structure on the good block")]
    StructureProjectionFailure { residual: f64 },

    #[error("generation failure after {attempts} attempts (best genericity margin {best_margin:.3e})")]
    GenerationFailure { attempts: usize, best_margin: f64 },
}
