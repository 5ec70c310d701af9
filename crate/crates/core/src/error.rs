use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} out of domain: {reason}")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid partition (index {index:?}): {reason}")]
    Partition {
        index: Option<usize>,
        reason: &'static str,
    },

    #[error("component {component} is a delta at alpha_bar = 1 and has no density")]
    DegenerateDensity { component: usize },

    #[error("partition posterior undefined: both class groups have zero posterior mass")]
    UndefinedPosterior,

    #[error(
        "quadrature grid [{lo}, {hi}] does not cover the required range [{required_lo}, {required_hi}]"
    )]
    QuadratureDomain {
        lo: f64,
        hi: f64,
        required_lo: f64,
        required_hi: f64,
    },

    #[error("score model returned non-finite output {value} at x = {x}, t = {t}, label = {label}")]
    ModelEvaluation {
        x: f64,
        t: usize,
        label: String,
        value: f64,
    },

    #[error("at step t = {t}: {source}")]
    AtStep {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("branch {branch}, trajectory {index}, step {t}: {source}")]
    Trajectory {
        branch: &'static str,
        index: usize,
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_step(self, t: usize) -> Self {
        Error::AtStep {
            t,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical routines, as opposed to bad input
    /// or I/O problems.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateDensity { .. }
            | Error::UndefinedPosterior
            | Error::QuadratureDomain { .. }
            | Error::ModelEvaluation { .. } => true,
            Error::AtStep { source, .. } | Error::Trajectory { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
