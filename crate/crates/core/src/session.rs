//! One participant's full protocol: practice at near-average parameters,
//! five-parameter tuning, practice at the tuned parameters, then the
//! identification game.
//!
//! A session only moves forward through its inputs. Every input is logged with
//! its timestamp, so a session can be rebuilt from its config and input log and
//! compared byte for byte with the original.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ChoiceRecord, ComparisonPair, ConvergedVia, EngineError, EngineOptions, StepResult, TunerState};
use crate::evaluation::{
    make_trials_with, score, BlindedTrial, EvaluationError, EvaluationScore, EvaluationTrial, Side, DEFAULT_SCHEDULE,
};
use crate::fluency::{phase_fluency, success_rate, FluencyReport};
use crate::param::{default_specs, midpoint_params, HandoverParams, ParamKey, ParameterSpec, ParameterValue};
use crate::plan::{PlanError, PlanStep, SessionPlan};
use crate::sim::{execute_handover, FailureConfig, FailureMode, HandoverRecord, Simulator};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("`{action}` is not allowed during {phase:?}")]
    WrongPhase { action: &'static str, phase: SessionPhase },
    #[error("pair `{0}` is not the pending pair")]
    StalePair(String),
    #[error("trial `{0}` is not the pending trial")]
    StaleTrial(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Practice1,
    Tuning,
    Practice2,
    Evaluation,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub specs: Vec<ParameterSpec>,
    pub engine: EngineOptions,
    pub simulator: Simulator,
    pub seed: u64,
    pub practice_handovers: usize,
    pub evaluation_schedule: Vec<ParamKey>,
    /// Pause between consecutive handovers on the session clock.
    pub handover_gap_ms: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            specs: default_specs(),
            engine: EngineOptions::default(),
            simulator: Simulator::default(),
            seed: 0,
            practice_handovers: 5,
            evaluation_schedule: DEFAULT_SCHEDULE.to_vec(),
            handover_gap_ms: 1000,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        let invalid = |e: &dyn std::fmt::Display| SessionError::InvalidConfig(e.to_string());
        SessionPlan::new(self.specs.clone(), self.engine).map_err(|e| invalid(&e))?;
        self.simulator.human.validate().map_err(|e| invalid(&e))?;
        if self.practice_handovers == 0 {
            return Err(invalid(&"practice_handovers must be positive"));
        }
        if self.evaluation_schedule.is_empty() {
            return Err(invalid(&"evaluation_schedule is empty"));
        }
        Ok(())
    }
}

/// Outcome of a practice handover as reported by an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PracticeOutcome {
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_mode: Option<FailureMode>,
}

/// Which handover of a pair failed, and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<FailureMode>,
}

/// Every state-changing input a session accepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "input", rename_all = "snake_case")]
pub enum SessionInput {
    PracticeDone {
        outcome: Option<PracticeOutcome>,
    },
    Choice {
        pair_id: String,
        side: Side,
    },
    Failure {
        pair_id: String,
        report: Option<FailureReport>,
    },
    EvalGuess {
        trial_id: String,
        side: Side,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedInput {
    pub at_ms: u64,
    #[serde(flatten)]
    pub input: SessionInput,
}

/// What the operator has to do next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    RunPractice {
        round: u8,
        index: usize,
        of: usize,
        params: HandoverParams,
    },
    PresentPair {
        pair_id: String,
        parameter: String,
        first: HandoverParams,
        second: HandoverParams,
    },
    PresentEvalTrial {
        trial_id: String,
        index: usize,
        of: usize,
        first: HandoverParams,
        second: HandoverParams,
    },
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "during", rename_all = "snake_case")]
pub enum HandoverContext {
    Practice { round: u8, index: usize },
    Pair { pair_id: String, side: Side },
    Trial { trial_id: String, side: Side },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedHandover {
    pub index: usize,
    pub started_ms: u64,
    pub context: HandoverContext,
    pub record: HandoverRecord,
}

#[derive(Debug, Clone, Copy)]
enum Forcing {
    Natural,
    Succeed,
    Fail(FailureMode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    session_id: String,
    config: SessionConfig,
    phase: SessionPhase,
    plan: SessionPlan,
    handovers: Vec<LoggedHandover>,
    trials: Vec<EvaluationTrial>,
    inputs: Vec<LoggedInput>,
    clock_ms: u64,
}

/// Final or partial outcome of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub complete: bool,
    pub phase: SessionPhase,
    pub tuned: Option<HandoverParams>,
    pub parameters: Vec<ParameterSummary>,
    pub total_comparisons: u32,
    pub repeated_pairs: u32,
    pub handovers: usize,
    pub failed_handovers: usize,
    pub success_rate: Option<f64>,
    pub fluency_practice1: Option<FluencyReport>,
    pub fluency_practice2: Option<FluencyReport>,
    pub evaluation: Option<EvaluationScore>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub value: Option<ParameterValue>,
    pub comparisons: u32,
    pub repeated_pairs: u32,
    pub converged_via: Option<ConvergedVia>,
}

/// Everything a replay has to reproduce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transcript<'a> {
    pub session_id: &'a str,
    pub choices: Vec<&'a ChoiceRecord>,
    pub handovers: &'a [LoggedHandover],
    pub trials: &'a [EvaluationTrial],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayCheck {
    pub transcript_identical: bool,
    pub report_identical: bool,
}

impl ReplayCheck {
    pub fn identical(&self) -> bool {
        self.transcript_identical && self.report_identical
    }
}

/// SplitMix64 finaliser, used to derive independent per-handover seeds.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const EVALUATION_STREAM: u64 = 0x6576_616c;

impl Session {
    pub fn new(session_id: impl Into<String>, config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let (plan, _) = SessionPlan::new(config.specs.clone(), config.engine)?;
        Ok(Self {
            session_id: session_id.into(),
            config,
            phase: SessionPhase::Practice1,
            plan,
            handovers: Vec::new(),
            trials: Vec::new(),
            inputs: Vec::new(),
            clock_ms: 0,
        })
    }

    pub fn id(&self) -> &str {
        &self.session_id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn plan(&self) -> &SessionPlan {
        &self.plan
    }

    pub fn handovers(&self) -> &[LoggedHandover] {
        &self.handovers
    }

    pub fn trials(&self) -> &[EvaluationTrial] {
        &self.trials
    }

    pub fn inputs(&self) -> &[LoggedInput] {
        &self.inputs
    }

    /// Milliseconds since the session started.
    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn is_complete(&self) -> bool {
        self.phase == SessionPhase::Complete
    }

    /// Parameters used in the practice rounds: the range midpoints before
    /// tuning, the tuned vector after.
    pub fn practice_params(&self, round: u8) -> HandoverParams {
        match (round, self.plan.final_params()) {
            (2, Some(tuned)) => tuned,
            _ => midpoint_params(&self.config.specs).expect("validated specs"),
        }
    }

    fn practice_round(&self) -> Option<u8> {
        match self.phase {
            SessionPhase::Practice1 => Some(1),
            SessionPhase::Practice2 => Some(2),
            _ => None,
        }
    }

    fn practice_done_count(&self, round: u8) -> usize {
        self.handovers
            .iter()
            .filter(|h| matches!(h.context, HandoverContext::Practice { round: r, .. } if r == round))
            .count()
    }

    fn pending_pair(&self) -> Option<&ComparisonPair> {
        self.plan.tuner().and_then(TunerState::pending)
    }

    fn pending_trial(&self) -> Option<(usize, &EvaluationTrial)> {
        self.trials.iter().enumerate().find(|(_, t)| t.guess.is_none())
    }

    /// The pending action. Pure: repeated calls return the same action until
    /// an input resolves it.
    pub fn next_action(&self) -> Action {
        match self.phase {
            SessionPhase::Practice1 | SessionPhase::Practice2 => {
                let round = self.practice_round().expect("practice phase");
                Action::RunPractice {
                    round,
                    index: self.practice_done_count(round),
                    of: self.config.practice_handovers,
                    params: self.practice_params(round),
                }
            }
            SessionPhase::Tuning => {
                let pair = self.pending_pair().expect("tuning always has a pending pair");
                Action::PresentPair {
                    pair_id: pair.pair_id.clone(),
                    parameter: pair.parameter.clone(),
                    first: self.plan.presentation(pair.first).expect("active tuner"),
                    second: self.plan.presentation(pair.second).expect("active tuner"),
                }
            }
            SessionPhase::Evaluation => {
                let (index, trial) = self.pending_trial().expect("evaluation always has a pending trial");
                let BlindedTrial {
                    trial_id,
                    first,
                    second,
                } = trial.blinded();
                Action::PresentEvalTrial {
                    trial_id,
                    index,
                    of: self.trials.len(),
                    first,
                    second,
                }
            }
            SessionPhase::Complete => Action::Done,
        }
    }

    fn handover_seed(&self, index: usize) -> u64 {
        mix_seed(self.config.seed ^ mix_seed(index as u64))
    }

    fn simulate(&self, params: &HandoverParams, index: usize, forcing: Forcing) -> HandoverRecord {
        let sim = &self.config.simulator;
        let failures = match forcing {
            Forcing::Natural => sim.failures,
            Forcing::Succeed => FailureConfig::none(),
            Forcing::Fail(mode) => FailureConfig::forced(mode),
        };
        execute_handover(params, &sim.human, &failures, &sim.robot, self.handover_seed(index))
    }

    fn action_params(&self) -> Vec<HandoverParams> {
        match self.next_action() {
            Action::RunPractice { params, .. } => vec![params],
            Action::PresentPair { first, second, .. } | Action::PresentEvalTrial { first, second, .. } => {
                vec![first, second]
            }
            Action::Done => Vec::new(),
        }
    }

    /// What the handovers of the pending action produce under the configured
    /// failure injection. Does not change the session.
    pub fn pending_handovers(&self) -> Vec<HandoverRecord> {
        let base = self.handovers.len();
        self.action_params()
            .iter()
            .enumerate()
            .map(|(i, p)| self.simulate(p, base + i, Forcing::Natural))
            .collect()
    }

    fn log_handover(&mut self, context: HandoverContext, record: HandoverRecord) {
        let started_ms = self.clock_ms;
        self.clock_ms += record.end_ms() + self.config.handover_gap_ms;
        self.handovers.push(LoggedHandover {
            index: self.handovers.len(),
            started_ms,
            context,
            record,
        });
    }

    fn log_input(&mut self, input: SessionInput) {
        self.inputs.push(LoggedInput {
            at_ms: self.clock_ms,
            input,
        });
    }

    fn require(&self, phase: SessionPhase, action: &'static str) -> Result<(), SessionError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(SessionError::WrongPhase {
                action,
                phase: self.phase,
            })
        }
    }

    /// Runs one practice handover. Without an operator report the simulator
    /// decides the outcome; failed practice handovers still count.
    pub fn practice_done(&mut self, outcome: Option<PracticeOutcome>) -> Result<Action, SessionError> {
        let round = self.practice_round().ok_or(SessionError::WrongPhase {
            action: "practice-done",
            phase: self.phase,
        })?;
        let forcing = match outcome {
            None => Forcing::Natural,
            Some(PracticeOutcome { success: true, .. }) => Forcing::Succeed,
            Some(PracticeOutcome { failure_mode, .. }) => {
                Forcing::Fail(failure_mode.unwrap_or(FailureMode::FalseTrigger))
            }
        };
        let index = self.practice_done_count(round);
        let record = self.simulate(&self.practice_params(round), self.handovers.len(), forcing);
        self.log_handover(HandoverContext::Practice { round, index }, record);
        self.log_input(SessionInput::PracticeDone { outcome });
        if index + 1 == self.config.practice_handovers {
            if round == 1 {
                self.phase = SessionPhase::Tuning;
            } else {
                self.start_evaluation()?;
            }
        }
        Ok(self.next_action())
    }

    fn check_pair(&self, pair_id: &str, action: &'static str) -> Result<ComparisonPair, SessionError> {
        self.require(SessionPhase::Tuning, action)?;
        match self.pending_pair() {
            Some(p) if p.pair_id == pair_id => Ok(p.clone()),
            _ => Err(SessionError::StalePair(pair_id.to_string())),
        }
    }

    fn log_pair(&mut self, pair: &ComparisonPair, records: [HandoverRecord; 2]) {
        for (side, record) in [Side::First, Side::Second].into_iter().zip(records) {
            let context = HandoverContext::Pair {
                pair_id: pair.pair_id.clone(),
                side,
            };
            self.log_handover(context, record);
        }
    }

    /// Both handovers of the pair were carried out and `side` was preferred.
    pub fn post_choice(&mut self, pair_id: &str, side: Side) -> Result<Action, SessionError> {
        let pair = self.check_pair(pair_id, "choice")?;
        let base = self.handovers.len();
        let records = self.action_params();
        let records = [0, 1].map(|i| self.simulate(&records[i], base + i, Forcing::Succeed));
        self.log_pair(&pair, records);
        self.log_input(SessionInput::Choice {
            pair_id: pair_id.to_string(),
            side,
        });

        let chosen = match side {
            Side::First => pair.first,
            Side::Second => pair.second,
        };
        let at_ms = self.clock_ms;
        let tuner = self.plan.tuner_mut().expect("tuning phase has an active tuner");
        if let StepResult::Converged(..) = tuner.submit_choice(chosen, at_ms)? {
            if let PlanStep::Complete(_) = self.plan.advance()? {
                self.phase = SessionPhase::Practice2;
            }
        }
        Ok(self.next_action())
    }

    /// A handover of the pending pair failed; the pair is presented again.
    ///
    /// Without a report, a failure drawn by the simulator is used if there is
    /// one; otherwise the named side (default second) is forced to fail with
    /// the given mode (default false trigger).
    pub fn post_failure(&mut self, pair_id: &str, report: Option<FailureReport>) -> Result<Action, SessionError> {
        let pair = self.check_pair(pair_id, "failure")?;
        let base = self.handovers.len();
        let params = self.action_params();
        let natural: Vec<HandoverRecord> = self.pending_handovers();
        let records: [HandoverRecord; 2] = if report.is_none() && natural.iter().any(|r| !r.success) {
            [natural[0].clone(), natural[1].clone()]
        } else {
            let report = report.unwrap_or_default();
            let failing = report.side.unwrap_or(Side::Second);
            let mode = report.mode.unwrap_or(FailureMode::FalseTrigger);
            [Side::First, Side::Second].map(|side| {
                let i = usize::from(side == Side::Second);
                let forcing = if side == failing {
                    Forcing::Fail(mode)
                } else {
                    Forcing::Succeed
                };
                self.simulate(&params[i], base + i, forcing)
            })
        };
        self.log_pair(&pair, records);
        self.log_input(SessionInput::Failure {
            pair_id: pair_id.to_string(),
            report,
        });
        let at_ms = self.clock_ms;
        self.plan
            .tuner_mut()
            .expect("tuning phase has an active tuner")
            .report_failure(at_ms)?;
        Ok(self.next_action())
    }

    fn start_evaluation(&mut self) -> Result<(), SessionError> {
        let tuned = self.plan.final_params().expect("tuning finished before practice 2");
        self.trials = make_trials_with(
            &tuned,
            &self.config.specs,
            &self.config.evaluation_schedule,
            mix_seed(self.config.seed ^ EVALUATION_STREAM),
        )?;
        self.phase = SessionPhase::Evaluation;
        Ok(())
    }

    /// Runs both handovers of the pending trial and records the guess.
    /// Evaluation trials are not repeated on failure.
    pub fn eval_guess(&mut self, trial_id: &str, side: Side) -> Result<Action, SessionError> {
        self.require(SessionPhase::Evaluation, "eval-guess")?;
        let index = match self.pending_trial() {
            Some((i, t)) if t.trial_id == trial_id => i,
            _ => return Err(SessionError::StaleTrial(trial_id.to_string())),
        };
        for (offset, record) in self.pending_handovers().into_iter().enumerate() {
            let side = if offset == 0 { Side::First } else { Side::Second };
            self.log_handover(
                HandoverContext::Trial {
                    trial_id: trial_id.to_string(),
                    side,
                },
                record,
            );
        }
        self.log_input(SessionInput::EvalGuess {
            trial_id: trial_id.to_string(),
            side,
        });
        self.trials[index].record_guess(side)?;
        if self.pending_trial().is_none() {
            self.phase = SessionPhase::Complete;
        }
        Ok(self.next_action())
    }

    pub fn apply(&mut self, input: &SessionInput) -> Result<Action, SessionError> {
        match input {
            SessionInput::PracticeDone { outcome } => self.practice_done(*outcome),
            SessionInput::Choice { pair_id, side } => self.post_choice(pair_id, *side),
            SessionInput::Failure { pair_id, report } => self.post_failure(pair_id, *report),
            SessionInput::EvalGuess { trial_id, side } => self.eval_guess(trial_id, *side),
        }
    }

    fn phase_records(&self, round: u8) -> Vec<HandoverRecord> {
        self.handovers
            .iter()
            .filter(|h| matches!(h.context, HandoverContext::Practice { round: r, .. } if r == round))
            .map(|h| h.record.clone())
            .collect()
    }

    pub fn practice_records(&self, round: u8) -> Vec<HandoverRecord> {
        self.phase_records(round)
    }

    pub fn total_comparisons(&self) -> u32 {
        self.plan.tuners().map(TunerState::comparisons_made).sum()
    }

    pub fn repeated_pairs(&self) -> u32 {
        self.plan.tuners().map(TunerState::repeated_pairs).sum()
    }

    pub fn report(&self) -> SessionReport {
        let tuned: BTreeMap<&str, ParameterValue> = self.plan.tuned().iter().map(|(n, v)| (n.as_str(), *v)).collect();
        let tuners: BTreeMap<&str, &TunerState> = self.plan.tuners().map(|t| (t.spec().name(), t)).collect();
        let parameters = self
            .config
            .specs
            .iter()
            .map(|spec| {
                let tuner = tuners.get(spec.name());
                ParameterSummary {
                    name: spec.name().to_string(),
                    value: tuned.get(spec.name()).copied(),
                    comparisons: tuner.map_or(0, |t| t.comparisons_made()),
                    repeated_pairs: tuner.map_or(0, |t| t.repeated_pairs()),
                    converged_via: tuner.and_then(|t| t.converged_via()),
                }
            })
            .collect();
        let failed = self.handovers.iter().filter(|h| !h.record.success).count();
        SessionReport {
            session_id: self.session_id.clone(),
            complete: self.is_complete(),
            phase: self.phase,
            tuned: self.plan.final_params(),
            parameters,
            total_comparisons: self.total_comparisons(),
            repeated_pairs: self.repeated_pairs(),
            handovers: self.handovers.len(),
            failed_handovers: failed,
            success_rate: success_rate(failed, self.handovers.len()).ok(),
            fluency_practice1: phase_fluency(&self.phase_records(1)),
            fluency_practice2: phase_fluency(&self.phase_records(2)),
            evaluation: score(&self.trials).ok().filter(|_| !self.trials.is_empty()),
            duration_ms: self.clock_ms,
        }
    }

    pub fn transcript(&self) -> Transcript<'_> {
        Transcript {
            session_id: &self.session_id,
            choices: self.plan.tuners().flat_map(|t| t.history()).collect(),
            handovers: &self.handovers,
            trials: &self.trials,
        }
    }

    pub fn transcript_json(&self) -> String {
        serde_json::to_string(&self.transcript()).expect("transcript serializes")
    }

    pub fn report_json(&self) -> String {
        serde_json::to_string(&self.report()).expect("report serializes")
    }

    /// Rebuilds the session from its config and input log.
    pub fn replay(&self) -> Result<Session, SessionError> {
        let mut fresh = Session::new(self.session_id.clone(), self.config.clone())?;
        for logged in &self.inputs {
            fresh.apply(&logged.input)?;
        }
        Ok(fresh)
    }

    pub fn verify_replay(&self) -> Result<ReplayCheck, SessionError> {
        let again = self.replay()?;
        Ok(ReplayCheck {
            transcript_identical: again.transcript_json() == self.transcript_json(),
            report_identical: again.report_json() == self.report_json(),
        })
    }
}

/// On-disk form of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub schema_version: u32,
    pub session: Session,
}

impl SessionDocument {
    pub fn new(session: Session) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            session,
        }
    }
}
