use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("isometry: {0}")]
    Isometry(String),

    #[error("clifford: {0}")]
    Clifford(String),

    #[error("operator: {0}")]
    Operator(String),

    #[error("spectral: {0}")]
    Spectral(String),

    #[error("exhaustion: {0}")]
    Exhaustion(String),

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error("site count {got} exceeds the configured budget {budget}")]
    SiteBudget { got: usize, budget: usize },

    #[error("dimension {got} exceeds the dense eigensolver budget {budget}")]
    EigBudget { got: usize, budget: usize },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Wrap an error with the scenario id it surfaced in.
    pub fn in_scenario(self, scenario: &str) -> Error {
        Error::Scenario {
            scenario: scenario.to_string(),
            source: Box::new(self),
        }
    }
}
