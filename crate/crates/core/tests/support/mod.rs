//! Test-only helpers shared by the integration suites.
//!
//! `algorithm1` is a straight-line transcription of the published pseudocode
//! working on raw tick integers. It shares no code with the engine.

#![allow(dead_code)]

use optotune::{ParameterSpec, ParameterValue};

/// Presented pairs (as `(option1, option2)` tick values) and the final option1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleTrace {
    pub pairs: Vec<(i64, i64)>,
    pub result: i64,
}

pub fn algorithm1(min: i64, max: i64, step: i64, mut choose: impl FnMut(i64, i64) -> i64) -> OracleTrace {
    let mut l = min;
    let mut h = max;
    let m = (l + h).div_euclid(2);
    let s = step;
    let mut pairs = vec![(l, h)];
    let choice = choose(l, h);
    let (mut option1, mut option2) = if choice == l { (l, m) } else { (h, m) };
    let mut guard = 0;
    while (option1 - option2).abs() > s {
        guard += 1;
        assert!(guard < 10_000, "pseudocode failed to terminate");
        pairs.push((option1, option2));
        let choice = choose(option1, option2);
        if choice == option1 {
            if option1 > option2 {
                h -= s;
                option2 = h;
            } else {
                l += s;
                option2 = l;
            }
        } else {
            let temp = option2;
            if option1 > option2 {
                option2 = option1 - s;
            } else {
                option2 = option1 + s;
            }
            option1 = temp;
        }
    }
    OracleTrace { pairs, result: option1 }
}

pub fn spec_ticks(spec: &ParameterSpec) -> (i64, i64, i64) {
    (spec.min().ticks(), spec.max().ticks(), spec.step().ticks())
}

/// Picks the value nearer to `ideal`; ties go to `tie` (the incumbent).
pub fn nearer(ideal: i64, a: i64, b: i64, tie: i64) -> i64 {
    let (da, db) = ((a - ideal).abs(), (b - ideal).abs());
    match da.cmp(&db) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => tie,
    }
}

pub fn ticks_of(pair: (ParameterValue, ParameterValue)) -> (i64, i64) {
    (pair.0.ticks(), pair.1.ticks())
}
