mod support;

use optotune::{
    default_specs, replay, ConvergedVia, EngineOptions, Input, Outcome, ParameterSpec, Phase, StepResult, TunerState,
};
use proptest::prelude::*;
use support::{algorithm1, nearer, spec_ticks, ticks_of};

/// Runs the engine, picking first/second from `tape` (cycled).
fn drive(spec: &ParameterSpec, options: EngineOptions, tape: &[bool]) -> (TunerState, Vec<(i64, i64)>) {
    let (mut tuner, first) = TunerState::new(spec.clone(), options);
    let mut pairs = vec![ticks_of(first.values())];
    let mut i = 0;
    loop {
        let pair = tuner.pending().unwrap().clone();
        let pick = if tape[i % tape.len()] { pair.second } else { pair.first };
        i += 1;
        match tuner.submit_choice(pick, 0).unwrap() {
            StepResult::NextPair(p) => pairs.push(ticks_of(p.values())),
            StepResult::Converged(..) => return (tuner, pairs),
        }
    }
}

fn spec_strategy() -> impl Strategy<Value = ParameterSpec> {
    (0usize..5).prop_map(|i| default_specs()[i].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matches_pseudocode_without_extra_stops(spec in spec_strategy(), tape in prop::collection::vec(any::<bool>(), 1..32)) {
        let (tuner, pairs) = drive(&spec, EngineOptions::pseudocode(), &tape);
        let (min, max, step) = spec_ticks(&spec);
        let mut i = 0;
        let oracle = algorithm1(min, max, step, |a, b| {
            let pick = if tape[i % tape.len()] { b } else { a };
            i += 1;
            pick
        });
        prop_assert_eq!(pairs, oracle.pairs);
        prop_assert_eq!(tuner.result().unwrap().ticks(), oracle.result);
    }

    #[test]
    fn invariants_hold_along_every_run(spec in spec_strategy(), tape in prop::collection::vec(any::<bool>(), 1..32), fail_every in 0usize..4) {
        let (mut tuner, first) = TunerState::new(spec.clone(), EngineOptions::default());
        let mut shown = vec![first.values()];
        let mut width = spec.max().ticks() - spec.min().ticks();
        let mut i = 0;
        loop {
            prop_assert!(tuner.comparisons_made() <= spec.comparison_cap());
            let pair = tuner.pending().unwrap().clone();
            prop_assert_ne!(pair.first, pair.second);
            if fail_every > 0 && i % (fail_every + 3) == fail_every {
                let again = tuner.report_failure(0).unwrap();
                prop_assert_eq!(again.values(), pair.values());
            }
            let pick = if tape[i % tape.len()] { pair.second } else { pair.first };
            i += 1;
            let was_incumbent = tuner.phase() == Phase::AwaitingChoice && Some(pick) == tuner.incumbent();
            let result = tuner.submit_choice(pick, 0).unwrap();
            let (low, high) = tuner.bounds();
            prop_assert!(low <= high);
            let new_width = high.ticks() - low.ticks();
            prop_assert!(new_width <= width);
            if was_incumbent {
                prop_assert_eq!(new_width, width - spec.step().ticks());
            }
            width = new_width;
            match result {
                StepResult::NextPair(p) => shown.push(p.values()),
                StepResult::Converged(v, _) => {
                    // result provenance
                    prop_assert_eq!(Some(v), tuner.incumbent());
                    prop_assert_eq!(v, pick);
                    break;
                }
            }
        }
        prop_assert!(tuner.comparisons_made() <= spec.comparison_cap());
        for (a, b) in shown {
            prop_assert!(spec.contains(a) && spec.contains(b));
        }
        prop_assert_ne!(tuner.converged_via(), Some(ConvergedVia::Cap));
    }

    #[test]
    fn replay_is_pure_and_matches_live_run(spec in spec_strategy(), tape in prop::collection::vec(any::<bool>(), 1..32)) {
        let (tuner, _) = drive(&spec, EngineOptions::default(), &tape);
        let inputs: Vec<Input> = tuner
            .history()
            .iter()
            .map(|r| match r.outcome {
                Outcome::Chosen(v) => Input::Choose(v),
                Outcome::Failure => Input::Failure,
            })
            .collect();
        let a = replay(&spec, EngineOptions::default(), &inputs).unwrap();
        let b = replay(&spec, EngineOptions::default(), &inputs).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert_eq!(&a.transcript, tuner.history());
        prop_assert_eq!(a.result, tuner.result().zip(tuner.converged_via()));
    }
}

#[test]
fn deterministic_chooser_is_transitive_on_each_axis() {
    // The ideal-point chooser never prefers a farther value, so along one axis
    // its preferences form a total order.
    for spec in default_specs() {
        let lattice = spec.half_step_lattice();
        for &ideal in &lattice {
            let ideal = ideal.ticks();
            for &a in &lattice {
                for &b in &lattice {
                    for &c in &lattice {
                        let (a, b, c) = (a.ticks(), b.ticks(), c.ticks());
                        if nearer(ideal, a, b, a) == a && nearer(ideal, b, c, b) == b {
                            assert!((a - ideal).abs() <= (c - ideal).abs());
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn termination_within_cap_for_exhaustive_short_tapes() {
    for spec in default_specs() {
        for bits in 0u32..(1 << 12) {
            let tape: Vec<bool> = (0..12).map(|i| bits >> i & 1 == 1).collect();
            let (tuner, _) = drive(&spec, EngineOptions::default(), &tape);
            assert!(tuner.is_converged());
            assert!(tuner.comparisons_made() <= spec.comparison_cap());
        }
    }
}
