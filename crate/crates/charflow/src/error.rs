use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("gauge derivatives are undefined at the origin")]
    OriginEvaluation,

    #[error("point is not on the surface: |j(y) - 1| = {defect:.3e} exceeds {tol:.3e}")]
    OffSurface { defect: f64, tol: f64 },

    #[error("star-shapedness violated at sampled point (support distance {support:.3e})")]
    StarShapedness { witness: Vec<f64>, support: f64 },

    #[error("gauge perturbation too large: min(1 + eps*p) = {margin:.3e} on the sphere")]
    PerturbationTooLarge { margin: f64 },

    #[error("integration failed: {reason}")]
    Integration { reason: String },

    #[error("symplecticity defect {defect:.3e} exceeds bound {bound:.3e}")]
    SymplecticityDefect { defect: f64, bound: f64 },

    #[error("multiplier spectrum violates symplectic symmetry (defect {defect:.3e})")]
    SpectrumSymmetry { defect: f64 },

    #[error("eigenvalue multiplicity is ambiguous at the tolerance boundary (gap {gap:.3e})")]
    ToleranceBoundary { gap: f64, context: String },

    #[error("Newton iteration diverged after {iterations} steps (last residual {last:.3e})")]
    NewtonDivergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("Poincare section nearly tangent to the flow (cosine {cosine:.3e})")]
    SectionTangency { cosine: f64 },

    #[error("operation requires half-dimension n = {expected}, surface has n = {actual}")]
    UnsupportedDimension { expected: usize, actual: usize },

    #[error("operation not applicable to case tag {got}")]
    CaseMismatch { got: String },

    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),

    #[error("critical type number table rejected: {clause}")]
    TypeNumberTable { clause: String },

    #[error("dossier incomplete: missing {missing}")]
    IncompleteDossier { missing: String },

    #[error("mean index must be positive, got {value}")]
    NonpositiveMeanIndex { value: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("degenerate contributing iterate m = {m} (nullity {nullity})")]
    DegenerateIterate { m: usize, nullity: usize },

    #[error("database does not match surface (expected hash {expected}, found {found})")]
    StaleDatabase { expected: String, found: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
