use thiserror::Error;

/// Errors raised by the geometric and gauge-theoretic routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A point or parameter lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The metric kind does not support the requested causal query.
    #[error("capability error: {0}")]
    Capability(String),

    /// A numerical procedure could not produce a trustworthy value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Matrix ranks or vector lengths disagree.
    #[error("shape error: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    /// A value that must be unitary or skew-Hermitian is not.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A broken-ray query violates one of its admissibility conditions.
    #[error("inadmissible query: {0}")]
    Admissibility(Admissibility),

    /// The interaction geometry could not be constructed.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The κ linear system is singular (θ too close to 0 or π).
    #[error("degenerate angle: {0}")]
    DegenerateAngle(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

/// The admissibility condition a broken-ray query violated.
#[derive(Debug, Clone, PartialEq)]
pub enum Admissibility {
    NotLightlike { leg: &'static str, residual: f64 },
    WrongOrientation { leg: &'static str },
    Colinear,
    NonPositiveParameter { leg: &'static str },
    PastCutTime { leg: &'static str, parameter: f64, cut_time: f64 },
    EndpointOutsideObservationSet { leg: &'static str },
    Truncated { leg: &'static str },
}

impl std::fmt::Display for Admissibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Admissibility::NotLightlike { leg, residual } => {
                write!(f, "{leg} direction is not lightlike (|g(v,v)| = {residual:.3e})")
            }
            Admissibility::WrongOrientation { leg } => {
                write!(f, "{leg} direction has the wrong time orientation")
            }
            Admissibility::Colinear => write!(f, "incoming and outgoing directions are colinear"),
            Admissibility::NonPositiveParameter { leg } => {
                write!(f, "{leg} parameter must be positive")
            }
            Admissibility::PastCutTime { leg, parameter, cut_time } => write!(
                f,
                "{leg} parameter {parameter} is not before the null cut time {cut_time}"
            ),
            Admissibility::EndpointOutsideObservationSet { leg } => {
                write!(f, "{leg} endpoint lies outside the observation set")
            }
            Admissibility::Truncated { leg } => write!(f, "{leg} geodesic left the chart"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
