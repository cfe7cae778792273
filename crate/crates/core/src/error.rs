use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid move: candidate parent {candidate} must be larger than child {child}")]
    InvalidMove { child: usize, candidate: usize },

    #[error("invalid DAG: {0}")]
    InvalidDag(String),

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("improper DAG-Wishart prior at vertex {vertex}: alpha - nu = {gap} must exceed 2")]
    ImproperPrior { vertex: usize, gap: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidHyperparameter { name: &'static str, reason: String },

    #[error("enumeration refused: p = {p} exceeds the limit of {limit}")]
    EnumerationLimit { p: usize, limit: usize },

    #[error("{component}: {source}")]
    Component {
        component: &'static str,
        source: Box<Error>,
    },

    #[error("cached score {cached} diverged from full recomputation {fresh} at sweep {sweep}")]
    CacheDivergence {
        sweep: usize,
        cached: f64,
        fresh: f64,
    },

    #[error("initial state has non-finite log score {0}")]
    Initialization(f64),

    #[error("invalid chain control: {0}")]
    InvalidControl(String),

    #[error("least-squares refit is rank deficient")]
    RankDeficient,

    #[error("AUC is undefined when the truth has no positives or no negatives")]
    UndefinedAuc,

    #[error("unknown setting {setting} for scenario {scenario}")]
    InvalidSetting { scenario: u8, setting: u8 },
}

impl Error {
    pub(crate) fn in_component(self, component: &'static str) -> Self {
        Error::Component {
            component,
            source: Box::new(self),
        }
    }
}
