use alloc::string::String;

/// Errors raised by the kernel.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parameter {t} lies outside the arc domain [{a}, {b}]")]
    OutsideDomain { t: f64, a: f64, b: f64 },
    #[error("curve is not unit speed (max | |γ'| - 1 | = {deviation:e})")]
    NotUnitSpeed { deviation: f64 },
    #[error("curve is not an immersion: |γ'| vanishes near t = {t}")]
    NotImmersion { t: f64 },
    #[error("grid size {n} is below the minimum {min}")]
    GridTooCoarse { n: usize, min: usize },
    #[error(
        "curve is not nowhere elliptic: | |γ'_c| - 1/2 | or | |γ'_a| - 1/2 | reaches {deviation:e}"
    )]
    NotNowhereElliptic { deviation: f64 },
    #[error("seed curve is not certified (c_hat = {c_hat})")]
    NotCertified { c_hat: f64 },
    #[error("branch {branch} out of range: {count} preimages available")]
    BranchOutOfRange { branch: usize, count: usize },
    #[error("phase of Ψ̂ is not strictly monotone")]
    NonMonotonePhase,
    #[error("loop integral of the entropy derivative is nonzero ({magnitude:e}); apply zero_average_correct first")]
    LoopIntegralNonzero { magnitude: f64 },
    #[error("no well-conditioned correction pair outside the protected arc")]
    NoWellConditionedPair,
    #[error("arc endpoint does not map to ±ξ (deviation {deviation:e})")]
    EndpointMismatch { deviation: f64 },
    #[error("no transversal direction t0 found")]
    NoTransversalDirection,
    #[error("eikonal profile violates tangency (deviation {deviation:e})")]
    TangencyViolation { deviation: f64 },
    #[error("odd winding requires an even eikonal profile (deviation {deviation:e})")]
    ParityViolation { deviation: f64 },
    #[error("construction needs |k_int| = {required}, factorization has k_int = {actual:?}")]
    WindingMismatch { required: i64, actual: Option<i64> },
    #[error("construction needs a closed loop, curve domain is an arc")]
    ArcDomain,
    #[error("characteristic lines cross inside the domain at cell ({i}, {j})")]
    CharacteristicsCross { i: usize, j: usize },
    #[error("no characteristic line passes through cell ({i}, {j})")]
    Uncovered { i: usize, j: usize },
    #[error("radius {radius} exceeds the available margin {margin}")]
    MarginTooSmall { radius: f64, margin: f64 },
    #[error("test function support leaves the domain")]
    SupportOutsideDomain,
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
}

/// Result alias for the kernel.
pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: &str) -> Error {
    Error::InvalidParameter(String::from(msg))
}
