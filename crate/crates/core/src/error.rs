use hydro_lp::{LpError, Status};
use thiserror::Error;

/// Problems found while reading or validating a scenario tree.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("malformed tree document: {0}")]
    Malformed(String),
    #[error("probabilities sum to {sum}, expected 1")]
    BadProbabilities { sum: f64 },
    #[error("scenario {scenario} has non-positive or non-finite probability {prob}")]
    BadProbability { scenario: String, prob: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown scenario id `{0}`")]
    UnknownScenario(String),
    #[error("duplicate scenario id `{0}`")]
    DuplicateScenario(String),
    #[error("{filtration} filtration at stage {stage} is not a partition: {detail}")]
    NotPartition {
        filtration: String,
        stage: usize,
        detail: String,
    },
    #[error("{filtration} filtration: atom {atom} at stage {stage} is not inside a single atom of stage {}", stage - 1)]
    NotRefining {
        filtration: String,
        stage: usize,
        atom: usize,
    },
    #[error("{process} is not adapted at stage {stage}: full atom {atom} has differing values for dam {dam}")]
    NotAdapted {
        process: String,
        stage: usize,
        atom: usize,
        dam: usize,
    },
    #[error("manager filtration is not a subfiltration of the full filtration: full atom {atom} at stage {stage} straddles manager atoms")]
    NotSubfiltration { stage: usize, atom: usize },
    #[error("{filtration} filtration does not separate every scenario at the terminal stage")]
    TerminalNotSeparating { filtration: String },
    #[error("filtrations are defined over different scenario sets or horizons")]
    MismatchedScenarioSets,
    #[error("atom {atom} at stage {stage} has zero probability")]
    ZeroProbabilityAtom { stage: usize, atom: usize },
}

#[derive(Debug, Error)]
pub enum HydroError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid dam system: {0}")]
    InvalidSystem(String),
    #[error("{context}: solver returned {status:?}")]
    NotOptimal { context: String, status: Status },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HydroError> = std::result::Result<T, E>;
