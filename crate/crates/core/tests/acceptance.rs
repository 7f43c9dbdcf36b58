//! Exit criteria. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test -p optotune --test acceptance -- --nocapture` to see
//! the lines of passing criteria too.

mod support;

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use optotune::sim::ActivityInterval;
use optotune::sim::{Activity, Agent};
use optotune::synthetic::{cohort_fluency, CohortResults};
use optotune::{
    compute_fluency, default_specs, make_trials, simulate_cohort, success_rate, CohortConfig, ConvergedVia,
    EngineOptions, HandoverParams, Metric, ParamKey, ParameterValue, SessionStore, StepResult, TunerState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{algorithm1, nearer, spec_ticks, ticks_of};

fn verdict(criterion: u8, title: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion} [{status}] {title}: {detail}");
}

fn acceptance_cohort() -> &'static CohortResults {
    static COHORT: OnceLock<CohortResults> = OnceLock::new();
    COHORT.get_or_init(|| {
        let config = CohortConfig {
            temperature: 0.02,
            ..CohortConfig::default()
        };
        simulate_cohort(30, 42, &config).expect("cohort runs")
    })
}

#[test]
fn criterion_1_engine_matches_straight_line_transcription() {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut runs = 0;
    for (k, spec) in default_specs().iter().enumerate() {
        let (min, max, step) = spec_ticks(spec);
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 31 + k as u64);
            let tape: Vec<bool> = (0..64).map(|_| rng.random()).collect();

            let (mut tuner, first) = TunerState::new(spec.clone(), EngineOptions::pseudocode());
            let mut pairs = vec![ticks_of(first.values())];
            let mut i = 0;
            loop {
                let pair = tuner.pending().expect("pending").clone();
                let pick = if tape[i % tape.len()] { pair.second } else { pair.first };
                i += 1;
                match tuner.submit_choice(pick, 0).expect("valid choice") {
                    StepResult::NextPair(p) => pairs.push(ticks_of(p.values())),
                    StepResult::Converged(..) => break,
                }
            }

            let mut j = 0;
            let oracle = algorithm1(min, max, step, |a, b| {
                let pick = if tape[j % tape.len()] { b } else { a };
                j += 1;
                pick
            });
            runs += 1;
            if pairs != oracle.pairs || tuner.result().map(|v| v.ticks()) != Some(oracle.result) {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(5);
    verdict(
        1,
        "oracle equivalence",
        pass,
        format!("{runs} runs, {mismatches} mismatches, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_ideal_point_convergence() {
    let start = Instant::now();
    let mut far = Vec::new();
    let mut worst_comparisons = 0;
    let mut cap_fired = false;
    let mut points = 0;
    for spec in default_specs() {
        let step = spec.step().ticks();
        for ideal in spec.half_step_lattice() {
            let ideal = ideal.ticks();
            points += 1;
            let (mut tuner, _) = TunerState::new(spec.clone(), EngineOptions::default());
            let (value, via) = loop {
                let pair = tuner.pending().expect("pending").clone();
                let (a, b) = ticks_of(pair.values());
                // First choice has no incumbent; ties then go to the first option.
                let tie = tuner.incumbent().map_or(a, |v| v.ticks());
                let pick = if nearer(ideal, a, b, tie) == a {
                    pair.first
                } else {
                    pair.second
                };
                if let StepResult::Converged(v, via) = tuner.submit_choice(pick, 0).expect("valid choice") {
                    break (v, via);
                }
            };
            worst_comparisons = worst_comparisons.max(tuner.comparisons_made());
            cap_fired |= via == ConvergedVia::Cap;
            if (value.ticks() - ideal).abs() > step {
                far.push(format!("{}: ideal {} -> {}", spec.name(), spec.value(ideal), value));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = far.is_empty() && worst_comparisons <= 12 && !cap_fired && elapsed < Duration::from_secs(5);
    verdict(
        2,
        "ideal-point convergence",
        pass,
        format!(
            "{points} ideal points, {} farther than one step, max {worst_comparisons} comparisons, cap fired: {cap_fired}, {elapsed:.2?}",
            far.len()
        ),
    );
    for line in &far {
        eprintln!("    {line}");
    }
    assert!(pass, "{} ideal points end more than one step away", far.len());
}

#[test]
fn criterion_3_step_count_envelope() {
    let cohort = acceptance_cohort();
    let total = cohort.summary.total_comparisons.mean;
    let per: Vec<(String, f64)> = cohort
        .summary
        .comparisons_per_parameter
        .iter()
        .map(|(k, v)| (k.clone(), v.mean))
        .collect();
    let pass = (15.0..=25.0).contains(&total) && per.iter().all(|(_, m)| (2.5..=7.0).contains(m));
    let per_text: Vec<String> = per.iter().map(|(k, m)| format!("{k} {m:.2}")).collect();
    verdict(
        3,
        "step-count envelope",
        pass,
        format!("mean total {total:.2}; {}", per_text.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_4_handover_count_consistency() {
    let cohort = acceptance_cohort();
    let consistent = cohort.users.iter().all(|u| {
        let r = &u.report;
        r.handovers as u32 == 20 + 2 * (r.total_comparisons + r.repeated_pairs)
    });
    let mean = cohort.summary.handovers.mean;
    let repeats: u32 = cohort.users.iter().map(|u| u.report.repeated_pairs).sum();
    let pass = consistent && (50.0..=70.0).contains(&mean);
    verdict(
        4,
        "handover-count consistency",
        pass,
        format!("per-user formula holds: {consistent}, mean {mean:.2} handovers, {repeats} repeated pairs in cohort"),
    );
    assert!(pass);
}

#[test]
fn criterion_5_fluency_direction() {
    let cohort = acceptance_cohort();
    let comparison = cohort_fluency(&cohort.users).expect("paired fluency");
    let f_del = comparison.metric(Metric::FDel);
    let r_idle = comparison.metric(Metric::RIdle);
    let decreases = |m: &optotune::fluency::MetricComparison| m.after_mean < m.before_mean && m.p < 0.01;
    let pass = comparison.before.len() == 30 && decreases(f_del) && decreases(r_idle);
    verdict(
        5,
        "fluency direction",
        pass,
        format!(
            "F-DEL {:.4} -> {:.4} (p = {:.2e}), R-IDLE {:.4} -> {:.4} (p = {:.2e})",
            f_del.before_mean, f_del.after_mean, f_del.p, r_idle.before_mean, r_idle.after_mean, r_idle.p
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_fluency_fixtures() {
    let work = |agent, a: f64, b: f64| ActivityInterval::from_secs(agent, Activity::Work, a, b);
    let fixtures = [
        (
            vec![work(Agent::Robot, 0.0, 6.0), work(Agent::Human, 4.0, 10.0)],
            [0.4, 0.4, 0.2, 0.0],
        ),
        (
            vec![work(Agent::Robot, 0.0, 4.0), work(Agent::Human, 6.0, 10.0)],
            [0.6, 0.6, 0.0, 0.2],
        ),
        (
            vec![work(Agent::Robot, 0.0, 10.0), work(Agent::Human, 0.0, 10.0)],
            [0.0, 0.0, 1.0, 0.0],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (events, expected) in &fixtures {
        let r = compute_fluency(events).expect("valid log");
        for (got, want) in [r.r_idle, r.h_idle, r.c_act, r.f_del].iter().zip(expected) {
            worst = worst.max((got - want).abs());
        }
    }
    let pass = worst < 1e-9;
    verdict(6, "fluency fixtures", pass, format!("max abs error {worst:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_7_success_rate() {
    let cohort = simulate_cohort(30, 42, &CohortConfig::default()).expect("cohort runs");
    let rate = cohort.summary.success_rate;
    let single = success_rate(3, 58).expect("non-zero total");
    let pass = (0.985..=1.0).contains(&rate) && (single - 0.9483).abs() <= 1e-4;
    let failed: usize = cohort.users.iter().map(|u| u.report.failed_handovers).sum();
    verdict(
        7,
        "success rate",
        pass,
        format!("cohort {rate:.4} ({failed} failed handovers), success_rate(3, 58) = {single:.4}"),
    );
    assert!(pass);
}

#[test]
fn criterion_8_evaluation_trials_are_valid() {
    let specs = default_specs();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    let mut invalid = 0;
    while checked < 10_000 {
        let draw = |key: ParamKey, rng: &mut ChaCha8Rng| -> ParameterValue {
            let spec = specs.iter().find(|s| s.name() == key.as_str()).unwrap();
            let lattice = spec.half_step_lattice();
            lattice[rng.random_range(0..lattice.len())]
        };
        let tuned = HandoverParams {
            v_max: draw(ParamKey::VMax, &mut rng),
            x: draw(ParamKey::X, &mut rng),
            y: draw(ParamKey::Y, &mut rng),
            z: draw(ParamKey::Z, &mut rng),
            f_min: draw(ParamKey::FMin, &mut rng),
        };
        for trial in make_trials(&tuned, &specs, rng.random()).expect("trials") {
            checked += 1;
            let changed: Vec<ParamKey> = ParamKey::ALL
                .into_iter()
                .filter(|&k| trial.tuned.get(k) != trial.perturbed.get(k))
                .collect();
            let ok = match changed.as_slice() {
                [key] => {
                    let spec = specs.iter().find(|s| s.name() == key.as_str()).unwrap();
                    let (t, p) = (trial.tuned.get(*key).ticks(), trial.perturbed.get(*key).ticks());
                    let moved = (p - t).abs();
                    (moved == spec.step().ticks() || moved == 2 * spec.step().ticks())
                        && spec.min().ticks() <= p
                        && p <= spec.max().ticks()
                        && trial.tuned == tuned
                }
                _ => false,
            };
            invalid += usize::from(!ok);
        }
    }
    let pass = invalid == 0;
    verdict(
        8,
        "evaluation-game validity",
        pass,
        format!("{checked} trials, {invalid} invalid"),
    );
    assert!(pass);
}

#[test]
fn criterion_9_replay_determinism() {
    let dir = tempfile::tempdir().expect("temp dir");
    let store = SessionStore::open(dir.path()).expect("store");
    let cohort = simulate_cohort(100, 9, &CohortConfig::default()).expect("cohort runs");
    let mut differing = Vec::new();
    for session in &cohort.sessions {
        store.save(session).expect("save");
        let loaded = store.load(session.id()).expect("load");
        let replayed = loaded.replay().expect("replay");
        let same = loaded == *session
            && replayed.transcript_json() == session.transcript_json()
            && replayed.report_json() == session.report_json();
        if !same {
            differing.push(session.id().to_string());
        }
    }
    let pass = cohort.sessions.len() == 100 && differing.is_empty();
    verdict(
        9,
        "replay determinism",
        pass,
        format!(
            "{} sessions, {} differ {:?}",
            cohort.sessions.len(),
            differing.len(),
            differing
        ),
    );
    assert!(pass);
}
