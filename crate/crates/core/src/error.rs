use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value looks rational: partial quotient {quotient} at depth {depth}")]
    RationalDetected { depth: usize, quotient: String },
    #[error("requested depth {requested} exceeds the precision-supported depth {supported}")]
    DepthExceeded { requested: usize, supported: usize },
    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),

    #[error("matrix is not unimodular: det = {det}")]
    NotUnimodular { det: f64 },
    #[error("Frobenius norm {frobenius_sq} < 2: determinant invariant violated")]
    DegenerateNorm { frobenius_sq: f64 },
    #[error("matrix norm {norm} is within the rotation threshold of 1")]
    NearRotation { norm: f64 },

    #[error("potential is not of cos type: {critical_points} critical points; {detail}")]
    NotCosType { critical_points: usize, detail: String },
    #[error("rescaled gain {gain} does not exceed the coupling {lambda}")]
    GainBoundViolated { gain: f64, lambda: f64 },
    #[error("operation requires the {0} cocycle form")]
    WrongForm(&'static str),

    #[error("avalanche precondition ({condition}) failed at index {index}")]
    PreconditionFailed { condition: ApCondition, index: usize },
    #[error("extrapolation did not converge up to n = {max_n} (last difference {last_diff:e})")]
    NoConvergence { max_n: usize, last_diff: f64 },
    #[error("complexified exponent is not affine in ε: slope defect {slope_defect:e}")]
    NotAffine { slope_defect: f64 },

    #[error("minimum of |g_{level}| is not isolated on interval {interval}")]
    UnresolvedMinimum { level: usize, interval: usize },
    #[error("no return within {cap} steps")]
    CapExceeded { cap: u64 },
    #[error("angle {theta} is a singular point of tan or cot")]
    AngleSingularity { theta: f64 },

    #[error("bracket [{lo}, {hi}] is inconsistent: {reason}")]
    InconsistentBracket { lo: f64, hi: f64, reason: String },
    #[error("no resonance with |k| <= {k_max}")]
    NoResonanceWithinHorizon { k_max: u64 },

    #[error("insufficient data: {usable} usable points, need {needed}")]
    InsufficientData { usable: usize, needed: usize },
    #[error("adaptive quadrature failed on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// The two hypotheses of the avalanche principle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApCondition {
    /// Every factor has norm at least `μ`, and `μ ≥ n`.
    NormFloor,
    /// Consecutive pairs lose less than `½ log μ` to cancellation.
    AngleGap,
}

impl std::fmt::Display for ApCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ApCondition::NormFloor => "norm floor",
            ApCondition::AngleGap => "angle gap",
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
