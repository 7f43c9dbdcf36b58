//! The identification game: the tuned handover is shown next to a twin that
//! differs in one parameter by one or two steps, and the user has to pick out
//! their own.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::param::{HandoverParams, ParamError, ParamKey, ParameterSpec};

/// Order in which the variations are shown.
pub const DEFAULT_SCHEDULE: [ParamKey; 5] = [ParamKey::VMax, ParamKey::FMin, ParamKey::X, ParamKey::Y, ParamKey::Z];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::First => "first",
            Side::Second => "second",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvaluationError {
    #[error("no in-range perturbation of {0}")]
    ImpossiblePerturbation(String),
    #[error("trial {0} has no guess")]
    MissingGuess(String),
    #[error("trial {0} was already answered")]
    AlreadyGuessed(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationTrial {
    pub trial_id: String,
    pub tuned: HandoverParams,
    pub perturbed: HandoverParams,
    pub varied_parameter: ParamKey,
    /// Signed perturbation in steps: ±1 or ±2.
    pub offset_steps: i8,
    /// Side on which the tuned handover is shown.
    pub tuned_side: Side,
    pub guess: Option<Side>,
    pub correct: Option<bool>,
}

/// What the participant may see of a trial before guessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindedTrial {
    pub trial_id: String,
    pub first: HandoverParams,
    pub second: HandoverParams,
}

impl EvaluationTrial {
    pub fn magnitude_steps(&self) -> u8 {
        self.offset_steps.unsigned_abs()
    }

    pub fn shown(&self, side: Side) -> HandoverParams {
        if side == self.tuned_side {
            self.tuned
        } else {
            self.perturbed
        }
    }

    pub fn blinded(&self) -> BlindedTrial {
        BlindedTrial {
            trial_id: self.trial_id.clone(),
            first: self.shown(Side::First),
            second: self.shown(Side::Second),
        }
    }

    /// Records the guess and returns whether it picked the tuned handover.
    pub fn record_guess(&mut self, side: Side) -> Result<bool, EvaluationError> {
        if self.guess.is_some() {
            return Err(EvaluationError::AlreadyGuessed(self.trial_id.clone()));
        }
        let correct = side == self.tuned_side;
        self.guess = Some(side);
        self.correct = Some(correct);
        Ok(correct)
    }

    /// Checks the perturbation invariant against `specs`.
    pub fn is_valid(&self, specs: &[ParameterSpec]) -> bool {
        let Some(spec) = specs.iter().find(|s| s.name() == self.varied_parameter.as_str()) else {
            return false;
        };
        let differing: Vec<ParamKey> = ParamKey::ALL
            .into_iter()
            .filter(|&k| self.tuned.get(k) != self.perturbed.get(k))
            .collect();
        let moved = self
            .perturbed
            .get(self.varied_parameter)
            .distance(self.tuned.get(self.varied_parameter));
        differing == [self.varied_parameter]
            && (moved == spec.step().ticks() || moved == 2 * spec.step().ticks())
            && spec.contains(self.perturbed.get(self.varied_parameter))
    }
}

fn spec_for(specs: &[ParameterSpec], key: ParamKey) -> Result<&ParameterSpec, EvaluationError> {
    specs
        .iter()
        .find(|s| s.name() == key.as_str())
        .ok_or_else(|| ParamError::UnknownParameter(key.to_string()).into())
}

/// One trial per entry of `schedule`, deterministic in `seed`.
///
/// Each trial draws a sign, a magnitude of one or two steps and a side. A move
/// that would leave the range is flipped; if both directions leave it at two
/// steps the magnitude drops to one.
pub fn make_trials_with(
    tuned: &HandoverParams,
    specs: &[ParameterSpec],
    schedule: &[ParamKey],
    seed: u64,
) -> Result<Vec<EvaluationTrial>, EvaluationError> {
    tuned.validate(specs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(schedule.len());
    for (i, &key) in schedule.iter().enumerate() {
        let spec = spec_for(specs, key)?;
        let upward = rng.random::<bool>();
        let magnitude: i64 = rng.random_range(1..=2);
        let tuned_side = if rng.random::<bool>() {
            Side::First
        } else {
            Side::Second
        };

        let base = tuned.get(key);
        let step = spec.step().ticks();
        let sign = if upward { 1 } else { -1 };
        let offset = [sign * magnitude, -sign * magnitude, sign, -sign]
            .into_iter()
            .filter(|&o| o.abs() <= magnitude)
            .find(|&o| spec.contains(base.offset(o * step)))
            .ok_or_else(|| EvaluationError::ImpossiblePerturbation(key.to_string()))?;

        trials.push(EvaluationTrial {
            trial_id: format!("trial-{}", i + 1),
            tuned: *tuned,
            perturbed: tuned.with(key, base.offset(offset * step)),
            varied_parameter: key,
            offset_steps: offset as i8,
            tuned_side,
            guess: None,
            correct: None,
        });
    }
    Ok(trials)
}

/// The default five-trial game.
pub fn make_trials(
    tuned: &HandoverParams,
    specs: &[ParameterSpec],
    seed: u64,
) -> Result<Vec<EvaluationTrial>, EvaluationError> {
    make_trials_with(tuned, specs, &DEFAULT_SCHEDULE, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationScore {
    pub total_correct: usize,
    /// Mean correctness per varied parameter.
    pub per_parameter: BTreeMap<ParamKey, f64>,
}

pub fn score(trials: &[EvaluationTrial]) -> Result<EvaluationScore, EvaluationError> {
    let mut tally: BTreeMap<ParamKey, (usize, usize)> = BTreeMap::new();
    let mut total_correct = 0;
    for t in trials {
        let guess = t
            .guess
            .ok_or_else(|| EvaluationError::MissingGuess(t.trial_id.clone()))?;
        let correct = guess == t.tuned_side;
        total_correct += usize::from(correct);
        let entry = tally.entry(t.varied_parameter).or_default();
        entry.0 += usize::from(correct);
        entry.1 += 1;
    }
    Ok(EvaluationScore {
        total_correct,
        per_parameter: tally.into_iter().map(|(k, (c, n))| (k, c as f64 / n as f64)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::{default_specs, near_average_defaults, ParameterValue, Unit};
    use proptest::prelude::*;

    fn pv(x: f64, unit: Unit) -> ParameterValue {
        ParameterValue::from_f64(x, unit).unwrap()
    }

    #[test]
    fn upper_bound_forces_downward() {
        let tuned = near_average_defaults().with(ParamKey::VMax, pv(0.8, Unit::MeterPerSecond));
        let allowed = [pv(0.7, Unit::MeterPerSecond), pv(0.6, Unit::MeterPerSecond)];
        for seed in 0..200 {
            let trials = make_trials(&tuned, &default_specs(), seed).unwrap();
            assert!(allowed.contains(&trials[0].perturbed.v_max));
            assert!(trials[0].offset_steps < 0);
        }
    }

    #[test]
    fn force_moves_by_whole_steps() {
        let tuned = near_average_defaults().with(ParamKey::FMin, pv(17.0, Unit::Newton));
        let mut seen_plus_two = false;
        for seed in 0..200 {
            let t = &make_trials(&tuned, &default_specs(), seed).unwrap()[1];
            assert_eq!(t.varied_parameter, ParamKey::FMin);
            let expected = 17.0 + 2.0 * t.offset_steps as f64;
            assert_eq!(t.perturbed, tuned.with(ParamKey::FMin, pv(expected, Unit::Newton)));
            if t.offset_steps == 2 {
                seen_plus_two = true;
                assert_eq!(t.perturbed.f_min, pv(21.0, Unit::Newton));
            }
        }
        assert!(seen_plus_two);
    }

    #[test]
    fn one_trial_per_parameter() {
        let trials = make_trials(&near_average_defaults(), &default_specs(), 9).unwrap();
        let keys: Vec<ParamKey> = trials.iter().map(|t| t.varied_parameter).collect();
        assert_eq!(keys, DEFAULT_SCHEDULE);
    }

    #[test]
    fn narrow_range_drops_to_one_step() {
        let spec = ParameterSpec::make("v_max", 0.1, 0.3, 0.1, Unit::MeterPerSecond).unwrap();
        let mut specs = default_specs();
        specs[0] = spec;
        let tuned = near_average_defaults().with(ParamKey::VMax, pv(0.2, Unit::MeterPerSecond));
        for seed in 0..50 {
            let t = &make_trials_with(&tuned, &specs, &[ParamKey::VMax], seed).unwrap()[0];
            assert_eq!(t.magnitude_steps(), 1);
            assert!(t.is_valid(&specs));
        }
    }

    #[test]
    fn blinding_hides_identity_and_scoring() {
        let mut trials = make_trials(&near_average_defaults(), &default_specs(), 3).unwrap();
        let view = serde_json::to_value(trials[0].blinded()).unwrap();
        assert!(view.get("tuned_side").is_none());
        assert!(matches!(score(&trials), Err(EvaluationError::MissingGuess(_))));

        for t in trials.iter_mut() {
            let side = if t.varied_parameter == ParamKey::VMax {
                t.tuned_side
            } else {
                t.tuned_side.other()
            };
            t.record_guess(side).unwrap();
        }
        assert!(trials[0].record_guess(Side::First).is_err());
        let s = score(&trials).unwrap();
        assert_eq!(s.total_correct, 1);
        assert_eq!(s.per_parameter[&ParamKey::VMax], 1.0);
        assert!(ParamKey::ALL[1..].iter().all(|k| s.per_parameter[k] == 0.0));
    }

    #[test]
    fn all_correct() {
        let mut trials = make_trials(&near_average_defaults(), &default_specs(), 4).unwrap();
        for t in trials.iter_mut() {
            let side = t.tuned_side;
            t.record_guess(side).unwrap();
        }
        let s = score(&trials).unwrap();
        assert_eq!(s.total_correct, 5);
        assert!(s.per_parameter.values().all(|&v| v == 1.0));
    }

    fn tuned_strategy() -> impl Strategy<Value = HandoverParams> {
        let specs = default_specs();
        let lattices: Vec<Vec<ParameterValue>> = specs.iter().map(|s| s.half_step_lattice()).collect();
        let pick = |i: usize| prop::sample::select(lattices[i].clone());
        (pick(0), pick(1), pick(2), pick(3), pick(4)).prop_map(|(v_max, x, y, z, f_min)| HandoverParams {
            v_max,
            x,
            y,
            z,
            f_min,
        })
    }

    proptest! {
        #[test]
        fn deterministic_and_valid(tuned in tuned_strategy(), seed in any::<u64>()) {
            let specs = default_specs();
            let a = make_trials(&tuned, &specs, seed).unwrap();
            prop_assert_eq!(&a, &make_trials(&tuned, &specs, seed).unwrap());
            for t in &a {
                prop_assert!(t.is_valid(&specs));
            }
        }

        #[test]
        fn scoring_ignores_order(seed in any::<u64>(), guesses in prop::collection::vec(any::<bool>(), 5), rotate in 0usize..5) {
            let mut trials = make_trials(&near_average_defaults(), &default_specs(), seed).unwrap();
            for (t, g) in trials.iter_mut().zip(guesses) {
                t.record_guess(if g { Side::First } else { Side::Second }).unwrap();
            }
            let s = score(&trials).unwrap();
            trials.rotate_left(rotate);
            prop_assert_eq!(s, score(&trials).unwrap());
        }
    }
}
