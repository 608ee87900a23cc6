use crate::scene::AgentId;

/// Errors raised by the library. Variants carry enough context to be
/// reported per-item by batch drivers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("agent {0} has no valid state at t = 0")]
    MissingCurrentState(AgentId),

    #[error("agent {0} is not present")]
    MissingAgent(AgentId),

    #[error("agent {agent} has no valid ground-truth state at t = {t}")]
    MissingGroundTruth { agent: AgentId, t: i64 },

    #[error("fewer than two overlapping valid future samples ({found})")]
    InsufficientOverlap { found: usize },

    #[error("ambiguous crossing at t* = {t_star:.6}: |dy| = {dy:.3e} below threshold")]
    AmbiguousCrossing { t_star: f64, dy: f64 },

    #[error("braid words have different strand counts ({0} vs {1})")]
    StrandCountMismatch(usize, usize),

    #[error("generator index {index} out of range for {n_strands} strands")]
    GeneratorOutOfRange { index: usize, n_strands: usize },

    #[error("width mismatch: expected {expected}, got {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("prediction horizon mismatch: expected {expected} points, got {found}")]
    HorizonMismatch { expected: usize, found: usize },

    #[error("requested K = {requested} but only {available} modes are available")]
    TooManyModes { requested: usize, available: usize },

    #[error("interaction graph has no edges")]
    EmptyGraph,

    #[error("no prediction set matches scene {0}")]
    UnmatchedScene(String),

    #[error("infeasible template parameters: {0}")]
    InfeasibleParameters(String),

    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("malformed JSON: {0}")]
    Json(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// Stable short code, used in CLI summaries.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingCurrentState(_) => "missing_current_state",
            Error::MissingAgent(_) => "missing_agent",
            Error::MissingGroundTruth { .. } => "missing_ground_truth",
            Error::InsufficientOverlap { .. } => "insufficient_overlap",
            Error::AmbiguousCrossing { .. } => "ambiguous_crossing",
            Error::StrandCountMismatch(..) => "strand_count_mismatch",
            Error::GeneratorOutOfRange { .. } => "generator_out_of_range",
            Error::WidthMismatch { .. } => "width_mismatch",
            Error::HorizonMismatch { .. } => "horizon_mismatch",
            Error::TooManyModes { .. } => "too_many_modes",
            Error::EmptyGraph => "empty_graph",
            Error::UnmatchedScene(_) => "unmatched_scene",
            Error::InfeasibleParameters(_) => "infeasible_parameters",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Invalid { .. } => "invalid",
            Error::Json(_) => "json",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
