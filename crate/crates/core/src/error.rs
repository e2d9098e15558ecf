use core::fmt;

/// Errors raised by the core operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scalar parameter is outside its valid domain.
    InvalidParameter { name: &'static str, reason: &'static str },
    /// Two grids that must agree in size do not.
    ShapeMismatch {
        index: usize,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A grid is too small for the requested number of pooling levels.
    LevelDepth { levels: usize, width: usize, height: usize },
    /// Input data violates a type invariant (the index names the element).
    Validation { index: usize, reason: &'static str },
    /// A crop rectangle extends past the frame.
    OutOfBounds { x: usize, y: usize, w: usize, h: usize },
    /// More clusters were requested than there are distinct points.
    InfeasibleK { requested: usize, distinct: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{}`: {}", name, reason)
            }
            Error::ShapeMismatch { index, left, right } => write!(
                f,
                "shape mismatch at pair {}: {}x{} vs {}x{}",
                index, left.0, left.1, right.0, right.1
            ),
            Error::LevelDepth { levels, width, height } => write!(
                f,
                "{}x{} map is too small for {} pooling levels",
                width, height, levels
            ),
            Error::Validation { index, reason } => {
                write!(f, "validation failed at index {}: {}", index, reason)
            }
            Error::OutOfBounds { x, y, w, h } => {
                write!(f, "rect ({}, {}, {}, {}) lies outside the frame", x, y, w, h)
            }
            Error::InfeasibleK { requested, distinct } => write!(
                f,
                "cannot place {} centers on {} distinct points",
                requested, distinct
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
