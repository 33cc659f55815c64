use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input violates an operation precondition (point outside the domain, bad parameter, ...).
    #[error("rejected input: {0}")]
    Rejected(String),

    /// A cross ratio whose denominator vanishes while the numerator does not.
    #[error("infinite cross ratio")]
    InfiniteCrossRatio,

    #[error("window does not meet domain at this resolution (h = {h})")]
    EmptyGrid { h: f64 },

    #[error("not connected at resolution h = {h}")]
    NotConnected { h: f64 },

    #[error("segment leaves the domain at parameter t = {t}")]
    SegmentExits { t: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A computed quantity contradicts an inequality that holds for every domain.
    #[error("numerical fault: {0}")]
    NumericalFault(String),

    #[error("field `{field}`: {message}")]
    Parse { field: String, message: String },

    /// An error raised while evaluating one item of a batch.
    #[error("{item}: {source}")]
    At { item: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn rejected(msg: impl Into<String>) -> Self {
        Error::Rejected(msg.into())
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at(self, item: impl Into<String>) -> Self {
        Error::At { item: item.into(), source: Box::new(self) }
    }

    /// Usage and parse errors map to exit code 2, numerical faults to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Rejected(_) | Error::Unsupported(_) => 2,
            Error::At { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
