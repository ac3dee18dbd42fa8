use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Which grid adequacy check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridCheck {
    /// Point count is not a power of two or is below the minimum.
    PointCount,
    /// The EIT window is sampled by too few detuning points.
    Resolution,
    /// The amplitude has not decayed enough at the edge of the detuning span.
    Span,
}

impl fmt::Display for GridCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GridCheck::PointCount => "point count",
            GridCheck::Resolution => "EIT-window resolution",
            GridCheck::Span => "detuning span",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("grid inadequate ({check}): measured {measured:.3e}, required {required:.3e}")]
    GridInadequate {
        check: GridCheck,
        measured: f64,
        required: f64,
    },
    #[error("no peak: input is flat or below baseline")]
    NoPeak,
    #[error("peak touches the edge of the grid, half-maximum crossing not found")]
    EdgePeak,
    #[error("delay density has zero integral")]
    ZeroDensity,
    #[error("time-tag records are not sorted by (trial, time) at index {0}")]
    Unsorted(usize),
    #[error("division by zero in {0}")]
    ZeroDenominator(&'static str),
    #[error("moving-average window {window} exceeds series length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("fit parameter `{0}`: invalid bounds or start value outside them")]
    BoundViolation(&'static str),
}

/// Shorthand for parameter validation failures.
pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(name, reason))
    }
}
