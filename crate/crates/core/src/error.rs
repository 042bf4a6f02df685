use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its validity domain.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Two points closer than the configured minimum link distance.
    #[error("link distance {distance:e} is below the singularity floor {floor:e}")]
    Singularity { distance: f64, floor: f64 },

    #[error("no base stations in the realization")]
    NoBaseStations,

    #[error("only {found} of {requested} D2D pairs satisfy the distance threshold")]
    PairShortfall { requested: usize, found: usize },

    /// Per-slot success probability is zero, or so small that no
    /// representable slot count reaches the target.
    #[error("success probability is too small; target {eta} can never be reached")]
    Unreachable { eta: f64 },

    #[error("no samples to estimate from")]
    EmptySamples,

    #[error("all {total} sessions were censored at the slot cap {cap}")]
    AllCensored { total: usize, cap: u64 },

    /// Malformed or out-of-domain experiment file.
    #[error("{message}")]
    Config {
        key: Option<String>,
        line: Option<usize>,
        message: String,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
