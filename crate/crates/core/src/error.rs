use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {x} lies outside the window [{lo}, {hi}]")]
    OutsideWindow { x: f64, lo: f64, hi: f64 },

    #[error("Bessel kernel is only defined for x > 0, got {0}")]
    BesselDomain(f64),

    #[error("first intensity {intensity:e} at {at} is at or below the floor {floor:e}")]
    DegenerateIntensity { at: f64, intensity: f64, floor: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("symmetric eigensolver did not converge for a {0}x{0} matrix")]
    EigenSolver(usize),

    #[error("discretized kernel is not a contraction: eigenvalue {0} outside [-1e-6, 1 + 1e-6]")]
    NotAContraction(f64),

    #[error("normalizer estimate is degenerate: {0}")]
    DegenerateNormalizer(String),

    #[error("particles collided: gap {gap:e} below floor {floor:e} after {halvings} halvings")]
    Collision { gap: f64, floor: f64, halvings: u32 },

    #[error("G-space condition violated: {0}")]
    GSpace(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
