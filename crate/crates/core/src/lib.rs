//! Comparative A/B tuning of robot-to-human handovers.
//!
//! The crate bundles the tuning engine (the Optometrist's Algorithm), a
//! deterministic handover simulator, interaction-fluency analytics, the
//! blinded evaluation game, programmatic users, and the session state machine
//! that ties them into the practice → tuning → practice → evaluation protocol.

pub mod engine;
pub mod evaluation;
pub mod fluency;
pub mod param;
pub mod plan;
pub mod session;
pub mod sim;
pub mod stats;
pub mod store;
pub mod synthetic;

pub use engine::{
    init_tuner, replay, replay_timed, ChoiceRecord, ComparisonPair, ConvergedVia, EngineError, EngineOptions, Input,
    Outcome, Phase, Replay, StepResult, TunerState,
};
pub use evaluation::{make_trials, score, BlindedTrial, EvaluationError, EvaluationScore, EvaluationTrial, Side};
pub use fluency::{compute_fluency, success_rate, FluencyError, FluencyReport, Metric, PhaseComparison};
pub use param::{
    default_specs, near_average_defaults, HandoverParams, ParamError, ParamKey, ParameterSpec, ParameterValue, Unit,
};
pub use plan::{PlanError, PlanStep, SessionPlan};
pub use session::{
    Action, FailureReport, PracticeOutcome, Session, SessionConfig, SessionDocument, SessionError, SessionInput,
    SessionPhase, SessionReport,
};
pub use stats::{wilcoxon_signed_rank, SignedRankTest};
pub use store::{SessionStore, StoreError};
pub use synthetic::{simulate_cohort, CohortConfig, CohortResults, IdealPointUser, TieBreak};
