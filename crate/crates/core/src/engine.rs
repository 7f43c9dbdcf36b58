//! The Optometrist's Algorithm for a single parameter, as an incremental
//! state machine.
//!
//! The tuner first shows the two range ends. The chosen end becomes the
//! incumbent and the range midpoint the challenger. After that:
//!
//! * incumbent wins: the bound on the challenger's side moves one step
//!   inward and becomes the new challenger;
//! * challenger wins: it becomes the incumbent, and the new challenger is one
//!   step from the old incumbent toward it.
//!
//! Before each presentation the challenger is clamped into the current bounds.
//! Tuning stops when the two options are at most one step apart, when the
//! incumbent has been chosen four times in a row, or at the comparison cap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::param::{ParameterSpec, ParameterValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("{value} is not one of the presented options ({first}, {second})")]
    InvalidChoice {
        value: ParameterValue,
        first: ParameterValue,
        second: ParameterValue,
    },
    #[error("tuning of `{0}` has already converged")]
    AlreadyConverged(String),
    #[error("input #{index} is inconsistent with the presented pair: {reason}")]
    InconsistentChoice { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    /// Stop once the incumbent has been chosen four times in a row.
    pub four_in_a_row: bool,
    /// Count the choice that installed the incumbent as its first win.
    pub count_installing_choice: bool,
    /// Stop at ⌈4·(max − min)/step⌉ comparisons.
    pub enforce_cap: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            four_in_a_row: true,
            count_installing_choice: true,
            enforce_cap: true,
        }
    }
}

impl EngineOptions {
    /// Only the step-threshold loop guard, as in the bare pseudocode.
    pub fn pseudocode() -> Self {
        Self {
            four_in_a_row: false,
            count_installing_choice: true,
            enforce_cap: false,
        }
    }
}

const FOUR_IN_A_ROW: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingInitialChoice,
    AwaitingChoice,
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergedVia {
    StepThreshold,
    FourInARow,
    Cap,
}

/// Two variants of one parameter shown to the user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonPair {
    pub pair_id: String,
    pub parameter: String,
    pub first: ParameterValue,
    pub second: ParameterValue,
}

impl ComparisonPair {
    pub fn values(&self) -> (ParameterValue, ParameterValue) {
        (self.first, self.second)
    }

    pub fn contains(&self, v: ParameterValue) -> bool {
        v == self.first || v == self.second
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Chosen(ParameterValue),
    Failure,
}

/// Tuner state right after an input was applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub low: ParameterValue,
    pub high: ParameterValue,
    pub incumbent: Option<ParameterValue>,
    pub challenger: Option<ParameterValue>,
    pub consecutive_wins: u32,
    pub comparisons_made: u32,
    pub phase: Phase,
    pub converged_via: Option<ConvergedVia>,
}

/// One transcript line: the pair shown and what happened to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub pair_id: String,
    pub parameter: String,
    pub first: ParameterValue,
    pub second: ParameterValue,
    pub outcome: Outcome,
    pub state_after: Snapshot,
    pub at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    NextPair(ComparisonPair),
    Converged(ParameterValue, ConvergedVia),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TunerState {
    spec: ParameterSpec,
    options: EngineOptions,
    low: ParameterValue,
    high: ParameterValue,
    incumbent: Option<ParameterValue>,
    challenger: Option<ParameterValue>,
    consecutive_wins: u32,
    comparisons_made: u32,
    phase: Phase,
    converged_via: Option<ConvergedVia>,
    pending: Option<ComparisonPair>,
    pairs_issued: u32,
    history: Vec<ChoiceRecord>,
}

impl TunerState {
    /// Starts tuning `spec`; the first pair is always (min, max).
    pub fn new(spec: ParameterSpec, options: EngineOptions) -> (Self, ComparisonPair) {
        let mut state = Self {
            low: spec.min(),
            high: spec.max(),
            spec,
            options,
            incumbent: None,
            challenger: None,
            consecutive_wins: 0,
            comparisons_made: 0,
            phase: Phase::AwaitingInitialChoice,
            converged_via: None,
            pending: None,
            pairs_issued: 0,
            history: Vec::new(),
        };
        let pair = state.issue(state.low, state.high);
        (state, pair)
    }

    pub fn spec(&self) -> &ParameterSpec {
        &self.spec
    }

    pub fn options(&self) -> EngineOptions {
        self.options
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn bounds(&self) -> (ParameterValue, ParameterValue) {
        (self.low, self.high)
    }

    pub fn incumbent(&self) -> Option<ParameterValue> {
        self.incumbent
    }

    pub fn challenger(&self) -> Option<ParameterValue> {
        self.challenger
    }

    pub fn consecutive_wins(&self) -> u32 {
        self.consecutive_wins
    }

    pub fn comparisons_made(&self) -> u32 {
        self.comparisons_made
    }

    pub fn converged_via(&self) -> Option<ConvergedVia> {
        self.converged_via
    }

    pub fn pending(&self) -> Option<&ComparisonPair> {
        self.pending.as_ref()
    }

    pub fn history(&self) -> &[ChoiceRecord] {
        &self.history
    }

    /// Pairs that were shown again after a failed handover.
    pub fn repeated_pairs(&self) -> u32 {
        self.history.iter().filter(|r| r.outcome == Outcome::Failure).count() as u32
    }

    /// Final value once converged.
    pub fn result(&self) -> Option<ParameterValue> {
        match self.phase {
            Phase::Converged => self.incumbent,
            _ => None,
        }
    }

    pub fn is_converged(&self) -> bool {
        self.phase == Phase::Converged
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            low: self.low,
            high: self.high,
            incumbent: self.incumbent,
            challenger: self.challenger,
            consecutive_wins: self.consecutive_wins,
            comparisons_made: self.comparisons_made,
            phase: self.phase,
            converged_via: self.converged_via,
        }
    }

    fn issue(&mut self, first: ParameterValue, second: ParameterValue) -> ComparisonPair {
        let pair = ComparisonPair {
            pair_id: format!("{}-{}", self.spec.name(), self.pairs_issued),
            parameter: self.spec.name().to_string(),
            first,
            second,
        };
        self.pairs_issued += 1;
        self.pending = Some(pair.clone());
        pair
    }

    fn pending_or_converged(&self) -> Result<&ComparisonPair, EngineError> {
        self.pending
            .as_ref()
            .filter(|_| self.phase != Phase::Converged)
            .ok_or_else(|| EngineError::AlreadyConverged(self.spec.name().to_string()))
    }

    /// Applies the user's choice for the pending pair.
    pub fn submit_choice(&mut self, chosen: ParameterValue, at_ms: u64) -> Result<StepResult, EngineError> {
        let pair = self.pending_or_converged()?.clone();
        if !pair.contains(chosen) {
            return Err(EngineError::InvalidChoice {
                value: chosen,
                first: pair.first,
                second: pair.second,
            });
        }
        let step = self.spec.step().ticks();
        self.comparisons_made += 1;

        match (self.phase, self.incumbent, self.challenger) {
            (Phase::AwaitingInitialChoice, _, _) => {
                self.incumbent = Some(chosen);
                self.challenger = Some(self.spec.midpoint().value);
                self.consecutive_wins = u32::from(self.options.count_installing_choice);
            }
            (Phase::AwaitingChoice, Some(incumbent), Some(challenger)) => {
                if chosen == incumbent {
                    self.consecutive_wins += 1;
                    if incumbent > challenger {
                        self.high = self.high.offset(-step);
                        self.challenger = Some(self.high);
                    } else {
                        self.low = self.low.offset(step);
                        self.challenger = Some(self.low);
                    }
                } else {
                    let toward = if incumbent > challenger { -step } else { step };
                    self.challenger = Some(incumbent.offset(toward));
                    self.incumbent = Some(challenger);
                    self.consecutive_wins = u32::from(self.options.count_installing_choice);
                }
            }
            _ => unreachable!("a pending pair implies incumbent and challenger"),
        }

        let result = self.settle();
        self.history.push(ChoiceRecord {
            pair_id: pair.pair_id,
            parameter: pair.parameter,
            first: pair.first,
            second: pair.second,
            outcome: Outcome::Chosen(chosen),
            state_after: self.snapshot(),
            at_ms,
        });
        Ok(result)
    }

    /// Loop-entry checks: clamp, test the stopping rules, present or converge.
    fn settle(&mut self) -> StepResult {
        let incumbent = self.incumbent.expect("settle runs after a choice");
        let mut challenger = self.challenger.expect("settle runs after a choice");
        if self.low <= self.high {
            challenger = challenger.clamp(self.low, self.high);
            self.challenger = Some(challenger);
        }

        let via = if incumbent.distance(challenger) <= self.spec.step().ticks() {
            Some(ConvergedVia::StepThreshold)
        } else if self.options.four_in_a_row && self.consecutive_wins >= FOUR_IN_A_ROW {
            Some(ConvergedVia::FourInARow)
        } else if self.options.enforce_cap && self.comparisons_made >= self.spec.comparison_cap() {
            Some(ConvergedVia::Cap)
        } else {
            None
        };

        match via {
            Some(via) => {
                self.phase = Phase::Converged;
                self.converged_via = Some(via);
                self.pending = None;
                StepResult::Converged(incumbent, via)
            }
            None => {
                self.phase = Phase::AwaitingChoice;
                StepResult::NextPair(self.issue(incumbent, challenger))
            }
        }
    }

    /// Re-issues the pending pair after a failed handover.
    pub fn report_failure(&mut self, at_ms: u64) -> Result<ComparisonPair, EngineError> {
        let pair = self.pending_or_converged()?.clone();
        let repeated = self.issue(pair.first, pair.second);
        self.history.push(ChoiceRecord {
            pair_id: pair.pair_id,
            parameter: pair.parameter,
            first: pair.first,
            second: pair.second,
            outcome: Outcome::Failure,
            state_after: self.snapshot(),
            at_ms,
        });
        Ok(repeated)
    }
}

/// Convenience wrapper matching the engine's entry point.
pub fn init_tuner(spec: ParameterSpec) -> (TunerState, ComparisonPair) {
    TunerState::new(spec, EngineOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Input {
    Choose(ParameterValue),
    Failure,
}

impl From<ParameterValue> for Input {
    fn from(v: ParameterValue) -> Self {
        Input::Choose(v)
    }
}

/// Result of replaying a recorded input sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replay {
    /// Every pair presented, starting with (min, max).
    pub pairs: Vec<ComparisonPair>,
    pub transcript: Vec<ChoiceRecord>,
    pub result: Option<(ParameterValue, ConvergedVia)>,
}

/// Replays inputs from a fresh tuner. Pure: equal inputs give equal output.
pub fn replay(spec: &ParameterSpec, options: EngineOptions, inputs: &[Input]) -> Result<Replay, EngineError> {
    let timed: Vec<(Input, u64)> = inputs.iter().map(|&i| (i, 0)).collect();
    replay_timed(spec, options, &timed)
}

pub fn replay_timed(
    spec: &ParameterSpec,
    options: EngineOptions,
    inputs: &[(Input, u64)],
) -> Result<Replay, EngineError> {
    let (mut tuner, first) = TunerState::new(spec.clone(), options);
    let mut pairs = vec![first];
    for (index, &(input, at_ms)) in inputs.iter().enumerate() {
        let inconsistent = |reason: String| EngineError::InconsistentChoice { index, reason };
        if tuner.is_converged() {
            return Err(inconsistent("tuning already converged".into()));
        }
        match input {
            Input::Choose(v) => match tuner.submit_choice(v, at_ms).map_err(|e| inconsistent(e.to_string()))? {
                StepResult::NextPair(p) => pairs.push(p),
                StepResult::Converged(..) => {}
            },
            Input::Failure => {
                let p = tuner.report_failure(at_ms).map_err(|e| inconsistent(e.to_string()))?;
                pairs.push(p);
            }
        }
    }
    let result = tuner.result().zip(tuner.converged_via());
    Ok(Replay {
        pairs,
        transcript: tuner.history,
        result,
    })
}
