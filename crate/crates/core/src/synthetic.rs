//! Programmatic participants with a preferred value for every parameter.
//!
//! Utility is separable: `U(v) = −|v − ideal| / (max − min)` per parameter,
//! so the choice temperature is expressed in fractions of the range and means
//! the same thing for metres, m/s and newtons.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evaluation::Side;
use crate::fluency::{compare_phases, FluencyError, FluencyReport, PhaseComparison};
use crate::param::{HandoverParams, ParamKey, ParameterSpec, ParameterValue};
use crate::session::{mix_seed, Action, Session, SessionConfig, SessionError, SessionReport};
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Incumbent,
    First,
}

/// Probability of picking the option with utility `u_a` over one with `u_b`.
pub fn preference_probability(u_a: f64, u_b: f64, temperature: f64) -> f64 {
    1.0 / (1.0 + (-(u_a - u_b) / temperature).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealPointUser {
    pub ideal: HandoverParams,
    /// Choice noise; zero means always the higher utility.
    pub temperature: f64,
    pub tie_break: TieBreak,
    /// Evaluation guesses are coin flips when the two options are closer than
    /// this many steps of the varied parameter in distance to the ideal.
    pub discrimination: f64,
}

impl IdealPointUser {
    pub fn deterministic(ideal: HandoverParams) -> Self {
        Self {
            ideal,
            temperature: 0.0,
            tie_break: TieBreak::Incumbent,
            discrimination: 0.5,
        }
    }

    fn key(spec: &ParameterSpec) -> ParamKey {
        spec.key().expect("session specs are validated")
    }

    pub fn utility(&self, spec: &ParameterSpec, value: ParameterValue) -> f64 {
        let width = (spec.max().ticks() - spec.min().ticks()) as f64;
        -(value.distance(self.ideal.get(Self::key(spec))) as f64) / width
    }

    /// Picks one of `(first, second)`. `incumbent` is the value already
    /// holding the lead, if any; it wins exact ties under `TieBreak::Incumbent`.
    pub fn choose(
        &self,
        spec: &ParameterSpec,
        first: ParameterValue,
        second: ParameterValue,
        incumbent: Option<ParameterValue>,
        rng: &mut impl Rng,
    ) -> ParameterValue {
        let (ua, ub) = (self.utility(spec, first), self.utility(spec, second));
        if self.temperature > 0.0 {
            return if rng.random::<f64>() < preference_probability(ua, ub, self.temperature) {
                first
            } else {
                second
            };
        }
        if ua > ub {
            first
        } else if ub > ua {
            second
        } else {
            match (self.tie_break, incumbent) {
                (TieBreak::Incumbent, Some(inc)) if inc == first || inc == second => inc,
                _ => first,
            }
        }
    }

    /// Identification guess between two full handovers.
    pub fn guess(
        &self,
        specs: &[ParameterSpec],
        first: &HandoverParams,
        second: &HandoverParams,
        rng: &mut impl Rng,
    ) -> Side {
        let Some(spec) = specs
            .iter()
            .find(|s| first.get(Self::key(s)) != second.get(Self::key(s)))
        else {
            return if rng.random::<bool>() {
                Side::First
            } else {
                Side::Second
            };
        };
        let key = Self::key(spec);
        let (a, b) = (first.get(key), second.get(key));
        let gap = (a.distance(self.ideal.get(key)) - b.distance(self.ideal.get(key))).abs() as f64
            / spec.step().ticks() as f64;
        if gap < self.discrimination {
            return if rng.random::<bool>() {
                Side::First
            } else {
                Side::Second
            };
        }
        if self.choose(spec, a, b, None, rng) == a {
            Side::First
        } else {
            Side::Second
        }
    }
}

/// Runs a whole session on behalf of `user`. Handovers that the simulator
/// makes fail are reported as failures; tuning pairs are then repeated.
pub fn drive_session(session: &mut Session, user: &IdealPointUser, rng: &mut impl Rng) -> Result<(), SessionError> {
    let specs = session.config().specs.clone();
    loop {
        match session.next_action() {
            Action::RunPractice { .. } => {
                session.practice_done(None)?;
            }
            Action::PresentPair { pair_id, parameter, .. } => {
                if session.pending_handovers().iter().any(|r| !r.success) {
                    session.post_failure(&pair_id, None)?;
                    continue;
                }
                let tuner = session.plan().tuner().expect("tuning has an active tuner");
                let pair = tuner.pending().expect("pending pair");
                let spec = specs
                    .iter()
                    .find(|s| s.name() == parameter)
                    .expect("pair of a known parameter");
                let chosen = user.choose(spec, pair.first, pair.second, tuner.incumbent(), rng);
                let side = if chosen == pair.first {
                    Side::First
                } else {
                    Side::Second
                };
                session.post_choice(&pair_id, side)?;
            }
            Action::PresentEvalTrial {
                trial_id,
                first,
                second,
                ..
            } => {
                let side = user.guess(&specs, &first, &second, rng);
                session.eval_guess(&trial_id, side)?;
            }
            Action::Done => return Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub session: SessionConfig,
    pub temperature: f64,
    pub tie_break: TieBreak,
    pub discrimination: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            temperature: 0.02,
            tie_break: TieBreak::Incumbent,
            discrimination: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    pub user_id: String,
    pub seed: u64,
    pub ideal: HandoverParams,
    pub report: SessionReport,
}

impl UserResult {
    pub fn comparisons(&self, name: &str) -> u32 {
        self.report
            .parameters
            .iter()
            .find(|p| p.name == name)
            .map_or(0, |p| p.comparisons)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            sd: std_dev(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub users: usize,
    pub total_comparisons: MeanSd,
    pub comparisons_per_parameter: BTreeMap<String, MeanSd>,
    pub handovers: MeanSd,
    pub success_rate: f64,
    pub evaluation_total: MeanSd,
    pub evaluation_per_parameter: BTreeMap<ParamKey, f64>,
    /// Tuned value (decimal) → number of users, per parameter.
    pub tuned_histograms: BTreeMap<String, BTreeMap<String, usize>>,
    pub fluency: Option<PhaseComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortResults {
    pub seed: u64,
    pub config: CohortConfig,
    pub users: Vec<UserResult>,
    pub summary: CohortSummary,
    #[serde(skip)]
    pub sessions: Vec<Session>,
}

/// Ideal points drawn uniformly from each spec's half-step lattice.
pub fn draw_ideal(specs: &[ParameterSpec], base: HandoverParams, rng: &mut impl Rng) -> HandoverParams {
    specs.iter().fold(base, |p, spec| {
        let lattice = spec.half_step_lattice();
        let v = lattice[rng.random_range(0..lattice.len())];
        p.with(spec.key().expect("validated specs"), v)
    })
}

fn user_seed(seed: u64, index: usize) -> u64 {
    mix_seed(seed ^ mix_seed(0x7573_6572 + index as u64))
}

/// One simulated participant, deterministic in `(seed, index, config)`.
pub fn simulate_user(seed: u64, index: usize, config: &CohortConfig) -> Result<(UserResult, Session), SessionError> {
    let seed = user_seed(seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = &config.session.specs;
    let base = crate::param::midpoint_params(specs).map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
    let ideal = draw_ideal(specs, base, &mut rng);
    let user = IdealPointUser {
        ideal,
        temperature: config.temperature,
        tie_break: config.tie_break,
        discrimination: config.discrimination,
    };
    let mut session_config = config.session.clone();
    session_config.seed = mix_seed(seed.wrapping_add(1));
    session_config.simulator.human.preferred_location = ideal.location();
    let user_id = format!("user-{:03}", index + 1);
    let mut session = Session::new(user_id.clone(), session_config)?;
    drive_session(&mut session, &user, &mut rng)?;
    let result = UserResult {
        user_id,
        seed,
        ideal,
        report: session.report(),
    };
    Ok((result, session))
}

pub fn simulate_cohort(n_users: usize, seed: u64, config: &CohortConfig) -> Result<CohortResults, SessionError> {
    config.session.validate()?;
    let mut users = Vec::with_capacity(n_users);
    let mut sessions = Vec::with_capacity(n_users);
    for i in 0..n_users {
        let (user, session) = simulate_user(seed, i, config)?;
        users.push(user);
        sessions.push(session);
    }
    let summary = summarize(&config.session.specs, &users);
    Ok(CohortResults {
        seed,
        config: config.clone(),
        users,
        summary,
        sessions,
    })
}

/// Paired Practice 1 vs Practice 2 fluency over users that have both.
pub fn cohort_fluency(users: &[UserResult]) -> Result<PhaseComparison, FluencyError> {
    let (before, after): (Vec<FluencyReport>, Vec<FluencyReport>) = users
        .iter()
        .filter_map(|u| u.report.fluency_practice1.zip(u.report.fluency_practice2))
        .unzip();
    compare_phases(&before, &after)
}

pub fn summarize(specs: &[ParameterSpec], users: &[UserResult]) -> CohortSummary {
    let collect = |f: &dyn Fn(&UserResult) -> f64| -> Vec<f64> { users.iter().map(f).collect() };
    let comparisons_per_parameter = specs
        .iter()
        .map(|s| {
            (
                s.name().to_string(),
                MeanSd::of(&collect(&|u| u.comparisons(s.name()) as f64)),
            )
        })
        .collect();

    let failed: usize = users.iter().map(|u| u.report.failed_handovers).sum();
    let total: usize = users.iter().map(|u| u.report.handovers).sum();

    let scores: Vec<_> = users.iter().filter_map(|u| u.report.evaluation.as_ref()).collect();
    let mut per_param: BTreeMap<ParamKey, Vec<f64>> = BTreeMap::new();
    for s in &scores {
        for (k, v) in &s.per_parameter {
            per_param.entry(*k).or_default().push(*v);
        }
    }

    let mut tuned_histograms: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for u in users {
        for p in &u.report.parameters {
            if let Some(v) = p.value {
                *tuned_histograms
                    .entry(p.name.clone())
                    .or_default()
                    .entry(v.decimal())
                    .or_default() += 1;
            }
        }
    }

    CohortSummary {
        users: users.len(),
        total_comparisons: MeanSd::of(&collect(&|u| u.report.total_comparisons as f64)),
        comparisons_per_parameter,
        handovers: MeanSd::of(&collect(&|u| u.report.handovers as f64)),
        success_rate: if total == 0 {
            f64::NAN
        } else {
            1.0 - failed as f64 / total as f64
        },
        evaluation_total: MeanSd::of(&scores.iter().map(|s| s.total_correct as f64).collect::<Vec<_>>()),
        evaluation_per_parameter: per_param.into_iter().map(|(k, v)| (k, mean(&v))).collect(),
        tuned_histograms,
        fluency: cohort_fluency(users).ok(),
    }
}

impl CohortSummary {
    /// Plain-text table of the headline numbers.
    pub fn table(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "users                 {}", self.users);
        let _ = writeln!(
            out,
            "comparisons (total)   {:.2} ± {:.2}",
            self.total_comparisons.mean, self.total_comparisons.sd
        );
        for (name, c) in &self.comparisons_per_parameter {
            let _ = writeln!(out, "  {name:<8}            {:.2} ± {:.2}", c.mean, c.sd);
        }
        let _ = writeln!(
            out,
            "handovers             {:.2} ± {:.2}",
            self.handovers.mean, self.handovers.sd
        );
        let _ = writeln!(out, "success rate          {:.4}", self.success_rate);
        let _ = writeln!(
            out,
            "evaluation score      {:.2} ± {:.2}",
            self.evaluation_total.mean, self.evaluation_total.sd
        );
        if let Some(f) = &self.fluency {
            out.push_str(&f.table());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::{default_specs, near_average_defaults, Unit};
    use crate::sim::FailureConfig;

    fn pv(x: f64, unit: Unit) -> ParameterValue {
        ParameterValue::from_f64(x, unit).unwrap()
    }

    #[test]
    fn nearer_value_wins() {
        let spec = &default_specs()[0];
        let user =
            IdealPointUser::deterministic(near_average_defaults().with(ParamKey::VMax, pv(0.6, Unit::MeterPerSecond)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = (pv(0.45, Unit::MeterPerSecond), pv(0.7, Unit::MeterPerSecond));
        assert_eq!(user.choose(spec, a, b, None, &mut rng), b);
    }

    #[test]
    fn ties_keep_the_incumbent() {
        let spec = &default_specs()[0];
        let user =
            IdealPointUser::deterministic(near_average_defaults().with(ParamKey::VMax, pv(0.5, Unit::MeterPerSecond)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = (pv(0.4, Unit::MeterPerSecond), pv(0.6, Unit::MeterPerSecond));
        assert_eq!(user.choose(spec, a, b, Some(b), &mut rng), b);
        assert_eq!(user.choose(spec, a, b, None, &mut rng), a);
        let first = IdealPointUser {
            tie_break: TieBreak::First,
            ..user
        };
        assert_eq!(first.choose(spec, a, b, Some(b), &mut rng), a);
    }

    #[test]
    fn logistic_choice_probability() {
        let p = preference_probability(0.1, 0.0, 0.1);
        assert!((p - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.7311).abs() < 1e-4);
        assert!((p + preference_probability(0.0, 0.1, 0.1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noisy_choices_follow_the_logistic() {
        let spec = &default_specs()[0];
        // With a range of 0.7 m/s, values 0.07 apart differ by 0.1 in utility.
        let user = IdealPointUser {
            temperature: 0.1,
            ..IdealPointUser::deterministic(near_average_defaults().with(ParamKey::VMax, pv(0.3, Unit::MeterPerSecond)))
        };
        let (a, b) = (pv(0.3, Unit::MeterPerSecond), pv(0.37, Unit::MeterPerSecond));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let wins = (0..n).filter(|_| user.choose(spec, a, b, None, &mut rng) == a).count();
        let rate = wins as f64 / n as f64;
        assert!((rate - 0.7311).abs() < 0.015, "{rate}");
    }

    #[test]
    fn deterministic_user_lands_near_ideal_v_max() {
        let config = CohortConfig {
            temperature: 0.0,
            ..CohortConfig::default()
        };
        let (user, _) = simulate_user(5, 0, &config).unwrap();
        let tuned = user.report.tuned.unwrap();
        let step = default_specs()[0].step().ticks();
        assert!(tuned.v_max.distance(user.ideal.v_max) <= step);
    }

    #[test]
    fn cohort_is_deterministic_and_consistent() {
        let mut config = CohortConfig::default();
        config.session.simulator.failures = FailureConfig::split(0.05);
        let a = simulate_cohort(6, 42, &config).unwrap();
        let b = simulate_cohort(6, 42, &config).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for u in &a.users {
            let r = &u.report;
            assert!(r.complete);
            assert_eq!(r.handovers as u32, 20 + 2 * (r.total_comparisons + r.repeated_pairs));
        }
        assert_eq!(a.summary.users, 6);
        assert!(a.summary.table().contains("comparisons"));
    }

    #[test]
    fn distinct_ideals_give_distinct_tunings() {
        let config = CohortConfig {
            temperature: 0.0,
            ..CohortConfig::default()
        };
        let cohort = simulate_cohort(30, 42, &config).unwrap();
        let mut ideals: Vec<String> = cohort
            .users
            .iter()
            .map(|u| serde_json::to_string(&u.ideal).unwrap())
            .collect();
        ideals.sort();
        ideals.dedup();
        let mut tuned: Vec<String> = cohort
            .users
            .iter()
            .map(|u| serde_json::to_string(&u.report.tuned).unwrap())
            .collect();
        tuned.sort();
        tuned.dedup();
        assert_eq!(ideals.len(), 30);
        // Several lattice points collapse onto the same reachable result, so
        // distinct ideals need not stay distinct; the histograms must not
        // collapse to one bin either way.
        assert!(tuned.len() > 1);
        assert!(cohort.summary.tuned_histograms.values().all(|h| h.len() > 1));
    }
}
