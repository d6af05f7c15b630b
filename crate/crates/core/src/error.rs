use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Field order not in {2, 4, 16, 256}.
    UnsupportedField(u32),
    /// Element outside the field.
    InvalidElement(u8),
    /// Inversion (or division) by zero.
    ZeroInverse,
    /// Operand shapes do not fit together.
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    /// A linear system that needs full row rank does not have it.
    RankDeficient { rank: usize, required: usize },
    /// The right-hand side is not in the row space of the system.
    Inconsistent,
    /// A probability vector is malformed (negative entry, bad sum, wrong length).
    InvalidDistribution(String),
    /// A scalar parameter is outside its domain.
    InvalidParameter(String),
    /// An operation that needs at least one sample/element received none.
    Empty(&'static str),
    /// The network description does not fit the requested scheme.
    Topology(String),
    /// Malformed serialized data.
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnsupportedField(q) => write!(f, "unsupported field size {q} (expected 2, 4, 16 or 256)"),
            Error::InvalidElement(a) => write!(f, "value {a} is not a field element"),
            Error::ZeroInverse => f.write_str("zero has no multiplicative inverse"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {}x{}, found {}x{}", expected.0, expected.1, found.0, found.1)
            }
            Error::RankDeficient { rank, required } => {
                write!(f, "matrix has rank {rank}, full rank {required} required")
            }
            Error::Inconsistent => f.write_str("linear system is inconsistent"),
            Error::InvalidDistribution(msg) => write!(f, "invalid distribution: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Empty(what) => write!(f, "{what} is empty"),
            Error::Topology(msg) => write!(f, "topology error: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
