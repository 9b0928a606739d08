use thiserror::Error;

/// Errors raised anywhere in the solver stack.
///
/// Frequencies are carried as preformatted strings so the error stays cheap
/// to clone and can be written verbatim into run reports.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("eigenvalue {re:+.3e}{im:+.3e}i is within the imaginary-axis tolerance")]
    EigenvalueOnAxis { re: f64, im: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not hermitian (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite (smallest eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("spectrum not in the open right half-plane (min Re = {0:.3e})")]
    SpectrumNotStable(f64),
    #[error("column set is rank deficient")]
    RankDeficient,
    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("zero frequency")]
    ZeroFrequency,
    #[error("non-real eigenvalue (Im = {im:.3e}) at sample {sample}")]
    NonRealEigenvalue { sample: String, im: f64 },
    #[error("eigenvalue multiplicities change at sample {sample}: {found:?} vs {expected:?}")]
    MultiplicityJump {
        sample: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("eigenvalue at sample {sample} is not semi-simple")]
    NotSemiSimple { sample: String },
    #[error("boundary is characteristic (|det A_d| = {0:.3e})")]
    CharacteristicBoundary(f64),
    #[error("boundary matrix has rank {rank}, expected {p}")]
    GammaRankDeficient { rank: usize, p: usize },
    #[error("boundary rank p = {p} differs from dim E_-(A) = {dim}")]
    BoundaryCountMismatch { p: usize, dim: usize },
    #[error("continuation to gamma = 0 did not converge at {zeta} (last step {distance:.3e})")]
    ExtensionDiverged { zeta: String, distance: f64 },
    #[error("uniform Lopatinski condition violated at {zeta} (det = {det:.3e})")]
    UlcViolated { zeta: String, det: f64 },
    #[error("input has mass {0:.3e} at negative times")]
    NonCausalInput(f64),

    #[error("symmetrizer gain exceeded {0}")]
    GainExhausted(f64),
    #[error("not a Kreiss symmetrizer: {0}")]
    NotASymmetrizer(String),
    #[error("boundary kernel lost transversality in the normalized frame (cond = {0:.3e})")]
    TransversalityLost(f64),
    #[error("aleph has norm {0:.6} >= 1")]
    AlephTooLarge(f64),
    #[error("Rauch matrix invariant failed: {0}")]
    RauchInvariant(String),
    #[error("conjugated system check {0} failed")]
    ConjugationFailed(usize),

    #[error("half-line problem has {free} free modes but {rows} boundary rows")]
    IllPosedBoundaryCount { free: usize, rows: usize },
    #[error("ODE matrix has no spectral gap (|Re lambda| = {0:.3e})")]
    NoGap(f64),
    #[error("interface matching system is ill-conditioned (cond = {0:.3e})")]
    MatchingSingular(f64),

    #[error("CFL number {0} exceeds 1")]
    CflViolation(f64),
    #[error("layer under-resolved: dx = {dx:.3e} > {limit:.3e}")]
    LayerUnderresolved { dx: f64, limit: f64 },
    #[error("boundary-layer fit degenerate (amplitude {0:.3e})")]
    FitDegenerate(f64),

    #[error("rate fit needs at least 4 points, got {0}")]
    InsufficientPoints(usize),
    #[error("rate fit got a non-positive value {0}")]
    NonPositiveValue(f64),

    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("system validation failed: {0}")]
    ValidationFailed(Box<Error>),
}

impl Error {
    /// Process exit code for the CLI: 2 for usage/config problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Io(_) | Error::Config(_) | Error::ValidationFailed(_) => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
