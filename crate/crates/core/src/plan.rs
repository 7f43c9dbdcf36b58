//! Sequential tuning of all parameters, one tuner at a time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ComparisonPair, EngineOptions, TunerState};
use crate::param::{midpoint_params, HandoverParams, ParamError, ParamKey, ParameterSpec, ParameterValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("invalid plan: {0}")]
    InvalidSpecs(String),
    #[error("the current parameter `{0}` has not converged yet")]
    NotConverged(String),
    #[error("every parameter has already been tuned")]
    PlanExhausted,
}

impl From<ParamError> for PlanError {
    fn from(e: ParamError) -> Self {
        PlanError::InvalidSpecs(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanStep {
    Next(ComparisonPair),
    Complete(HandoverParams),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    specs: Vec<ParameterSpec>,
    options: EngineOptions,
    base: HandoverParams,
    tuned: Vec<(String, ParameterValue)>,
    finished: Vec<TunerState>,
    current: Option<TunerState>,
}

impl SessionPlan {
    /// Needs exactly one spec per handover parameter, in any order.
    pub fn new(specs: Vec<ParameterSpec>, options: EngineOptions) -> Result<(Self, ComparisonPair), PlanError> {
        if specs.len() != ParamKey::ALL.len() {
            return Err(PlanError::InvalidSpecs(format!(
                "expected {} parameter specs, got {}",
                ParamKey::ALL.len(),
                specs.len()
            )));
        }
        let mut keys = specs.iter().map(|s| s.key()).collect::<Result<Vec<_>, _>>()?;
        for spec in &specs {
            let key = spec.key()?;
            if key.unit() != spec.unit() {
                return Err(PlanError::InvalidSpecs(format!(
                    "`{}` must be in {}",
                    spec.name(),
                    key.unit()
                )));
            }
        }
        keys.sort();
        keys.dedup();
        if keys.len() != specs.len() {
            return Err(PlanError::InvalidSpecs("duplicate parameter".into()));
        }
        let base = midpoint_params(&specs)?;
        let (tuner, pair) = TunerState::new(specs[0].clone(), options);
        Ok((
            Self {
                specs,
                options,
                base,
                tuned: Vec::new(),
                finished: Vec::new(),
                current: Some(tuner),
            },
            pair,
        ))
    }

    pub fn specs(&self) -> &[ParameterSpec] {
        &self.specs
    }

    pub fn current_index(&self) -> usize {
        self.tuned.len()
    }

    pub fn tuned(&self) -> &[(String, ParameterValue)] {
        &self.tuned
    }

    pub fn tuner(&self) -> Option<&TunerState> {
        self.current.as_ref()
    }

    pub fn tuner_mut(&mut self) -> Option<&mut TunerState> {
        self.current.as_mut()
    }

    /// Converged tuners followed by the one in progress, in tuning order.
    pub fn tuners(&self) -> impl Iterator<Item = &TunerState> {
        self.finished.iter().chain(self.current.as_ref())
    }

    pub fn is_complete(&self) -> bool {
        self.current.is_none()
    }

    /// Parameters already tuned take their tuned value, the rest the midpoint.
    pub fn working_params(&self) -> HandoverParams {
        self.tuned.iter().fold(self.base, |p, (name, v)| {
            p.with(name.parse().expect("plan specs are validated"), *v)
        })
    }

    /// Full vector for presenting `value` of the parameter being tuned.
    pub fn presentation(&self, value: ParameterValue) -> Option<HandoverParams> {
        let tuner = self.current.as_ref()?;
        let key: ParamKey = tuner.spec().key().ok()?;
        Some(self.working_params().with(key, value))
    }

    pub fn final_params(&self) -> Option<HandoverParams> {
        self.is_complete().then(|| self.working_params())
    }

    /// Records the converged value and starts the next parameter.
    pub fn advance(&mut self) -> Result<PlanStep, PlanError> {
        let tuner = self.current.as_ref().ok_or(PlanError::PlanExhausted)?;
        let value = tuner
            .result()
            .ok_or_else(|| PlanError::NotConverged(tuner.spec().name().to_string()))?;
        let done = self.current.take().expect("checked above");
        self.tuned.push((done.spec().name().to_string(), value));
        self.finished.push(done);
        match self.specs.get(self.tuned.len()) {
            Some(spec) => {
                let (tuner, pair) = TunerState::new(spec.clone(), self.options);
                self.current = Some(tuner);
                Ok(PlanStep::Next(pair))
            }
            None => Ok(PlanStep::Complete(self.working_params())),
        }
    }
}
