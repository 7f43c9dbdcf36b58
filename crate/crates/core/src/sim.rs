//! Deterministic stand-in for the robot: turns a parameter vector and a human
//! behaviour model into a timed two-agent event log.
//!
//! Robot phases: pick-up → move-to-start → reach → wait → transfer → retract.
//! Human phases: wait → reach-and-grasp → take-and-restore.
//! Every boundary is quantized to whole milliseconds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::param::HandoverParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("speed and acceleration must be positive (v_max = {v_max}, accel = {accel})")]
    NonPositiveSpeed { v_max: f64, accel: f64 },
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("invalid human model: {0}")]
    InvalidHuman(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    Robot,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    PickUp,
    MoveToStart,
    Reach,
    Wait,
    Transfer,
    Retract,
    ReachAndGrasp,
    TakeAndRestore,
    /// Generic busy interval for hand-built logs.
    Work,
}

impl Activity {
    /// Waiting is logged but is not an activity for fluency purposes.
    pub fn is_active(self) -> bool {
        self != Activity::Wait
    }
}

/// One timed interval of one agent. Times are whole milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActivityInterval {
    pub agent: Agent,
    pub activity: Activity,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl ActivityInterval {
    pub fn new(agent: Agent, activity: Activity, start_ms: u64, end_ms: u64) -> Self {
        debug_assert!(start_ms <= end_ms);
        Self {
            agent,
            activity,
            start_ms,
            end_ms,
        }
    }

    /// Builds an interval from times in seconds, rounded to milliseconds.
    pub fn from_secs(agent: Agent, activity: Activity, t_start: f64, t_end: f64) -> Self {
        Self::new(agent, activity, secs_to_ms(t_start), secs_to_ms(t_end))
    }

    pub fn t_start(&self) -> f64 {
        self.start_ms as f64 / 1000.0
    }

    pub fn t_end(&self) -> f64 {
        self.end_ms as f64 / 1000.0
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    /// Text form: `robot reach 2.000 4.450`.
    pub fn line(&self) -> String {
        format!(
            "{} {} {:.3} {:.3}",
            agent_name(self.agent),
            activity_name(self.activity),
            self.t_start(),
            self.t_end()
        )
    }
}

fn agent_name(a: Agent) -> &'static str {
    match a {
        Agent::Robot => "robot",
        Agent::Human => "human",
    }
}

fn activity_name(a: Activity) -> &'static str {
    match a {
        Activity::PickUp => "pick_up",
        Activity::MoveToStart => "move_to_start",
        Activity::Reach => "reach",
        Activity::Wait => "wait",
        Activity::Transfer => "transfer",
        Activity::Retract => "retract",
        Activity::ReachAndGrasp => "reach_and_grasp",
        Activity::TakeAndRestore => "take_and_restore",
        Activity::Work => "work",
    }
}

pub fn secs_to_ms(t: f64) -> u64 {
    (t.max(0.0) * 1000.0).round() as u64
}

#[derive(Serialize, Deserialize)]
struct IntervalRecord {
    agent: Agent,
    activity: Activity,
    t_start: f64,
    t_end: f64,
}

impl Serialize for ActivityInterval {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        IntervalRecord {
            agent: self.agent,
            activity: self.activity,
            t_start: self.t_start(),
            t_end: self.t_end(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ActivityInterval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = IntervalRecord::deserialize(deserializer)?;
        if !(r.t_start >= 0.0 && r.t_start <= r.t_end) {
            return Err(serde::de::Error::custom("interval must satisfy 0 <= t_start <= t_end"));
        }
        Ok(Self::from_secs(r.agent, r.activity, r.t_start, r.t_end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    PlanningFailure,
    FalseTrigger,
    Drop,
}

/// Per-handover failure probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailureConfig {
    pub planning_failure: f64,
    pub false_trigger: f64,
    pub drop: f64,
}

impl Default for FailureConfig {
    /// 0.5 % per handover, split 3:4:1 across the observed failure causes.
    fn default() -> Self {
        Self::split(0.005)
    }
}

impl FailureConfig {
    pub fn split(total: f64) -> Self {
        Self {
            planning_failure: total * 3.0 / 8.0,
            false_trigger: total * 4.0 / 8.0,
            drop: total / 8.0,
        }
    }

    pub fn none() -> Self {
        Self::split(0.0)
    }

    pub fn forced(mode: FailureMode) -> Self {
        let mut cfg = Self::none();
        match mode {
            FailureMode::PlanningFailure => cfg.planning_failure = 1.0,
            FailureMode::FalseTrigger => cfg.false_trigger = 1.0,
            FailureMode::Drop => cfg.drop = 1.0,
        }
        cfg
    }

    fn sample(&self, u: f64) -> Option<FailureMode> {
        let mut acc = self.planning_failure;
        if u < acc {
            return Some(FailureMode::PlanningFailure);
        }
        acc += self.false_trigger;
        if u < acc {
            return Some(FailureMode::FalseTrigger);
        }
        acc += self.drop;
        (u < acc).then_some(FailureMode::Drop)
    }
}

/// Timing model of the person receiving the object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanModel {
    /// Base reaction once the robot has stopped, seconds.
    pub reaction_base: f64,
    /// Extra reaction per metre between handover and preferred location, s/m.
    pub hesitation_gain: f64,
    /// Preferred handover location (x, y, z), metres.
    pub preferred_location: [f64; 3],
    /// Pulling force build-up, N/s.
    pub force_ramp_rate: f64,
    /// Time to bring the object back to the pick-up spot, seconds.
    pub restore_duration: f64,
    /// Standard deviation of reaction noise, seconds.
    pub reaction_noise_sd: f64,
}

impl Default for HumanModel {
    fn default() -> Self {
        Self {
            reaction_base: 0.8,
            hesitation_gain: 1.5,
            preferred_location: [0.9, 0.0, 0.25],
            force_ramp_rate: 40.0,
            restore_duration: 2.0,
            reaction_noise_sd: 0.05,
        }
    }
}

impl HumanModel {
    pub fn noiseless(self) -> Self {
        Self {
            reaction_noise_sd: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("reaction_base", self.reaction_base),
            ("force_ramp_rate", self.force_ramp_rate),
            ("restore_duration", self.restore_duration),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidHuman(format!("{name} must be positive")));
            }
        }
        if !(self.hesitation_gain >= 0.0 && self.reaction_noise_sd >= 0.0) {
            return Err(SimError::InvalidHuman("gain and noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Fixed robot poses and phase constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotConfig {
    pub start_pose: [f64; 3],
    pub pickup_pose: [f64; 3],
    /// Where the retract ends: above the pick-up location.
    pub retract_pose: [f64; 3],
    pub pickup_duration: f64,
    pub dwell: f64,
    pub transfer_duration: f64,
    /// Speed for the fixed (non-tuned) motions.
    pub transit_speed: f64,
    pub accel: f64,
    /// Lower bound on the noisy reaction time.
    pub min_reaction: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            start_pose: [0.45, 0.0, 0.5],
            pickup_pose: [0.5, -0.4, 0.05],
            retract_pose: [0.5, -0.4, 0.2],
            pickup_duration: 1.5,
            dwell: 0.5,
            transfer_duration: 0.3,
            transit_speed: 0.3,
            accel: 1.0,
            min_reaction: 0.05,
        }
    }
}

pub const DEFAULT_ACCEL: f64 = 1.0;

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Point-to-point motion time with a trapezoidal (or triangular) velocity profile.
pub fn reach_duration(distance: f64, v_max: f64, accel: f64) -> Result<f64, SimError> {
    if !(v_max > 0.0 && accel > 0.0) {
        return Err(SimError::NonPositiveSpeed { v_max, accel });
    }
    if distance < 0.0 {
        return Err(SimError::NegativeDistance(distance));
    }
    if distance >= v_max * v_max / accel {
        Ok(distance / v_max + v_max / accel)
    } else {
        Ok(2.0 * (distance / accel).sqrt())
    }
}

/// Distance covered after `t` seconds of a motion of length `distance`.
fn travelled(distance: f64, v_max: f64, accel: f64, t: f64) -> f64 {
    let total = reach_duration(distance, v_max, accel).unwrap_or(0.0);
    let t = t.clamp(0.0, total);
    let (peak_t, cruise_v) = if distance >= v_max * v_max / accel {
        (v_max / accel, v_max)
    } else {
        (total / 2.0, accel * total / 2.0)
    };
    let s = if t <= peak_t {
        0.5 * accel * t * t
    } else if t <= total - peak_t {
        0.5 * accel * peak_t * peak_t + cruise_v * (t - peak_t)
    } else {
        let rest = total - t;
        distance - 0.5 * accel * rest * rest
    };
    s.clamp(0.0, distance)
}

/// Reaction from the robot stopping to the human starting to pull.
pub fn reaction_time(human: &HumanModel, params: &HandoverParams, rng: &mut impl Rng, floor: f64) -> f64 {
    let normal = Normal::new(0.0, human.reaction_noise_sd).expect("validated noise sd");
    let noise = normal.sample(rng);
    let hesitation = human.hesitation_gain * dist(params.location(), human.preferred_location);
    (human.reaction_base + hesitation + noise).max(floor)
}

/// Time the robot waits at the handover location before the object is taken.
pub fn transfer_wait(human: &HumanModel, params: &HandoverParams, rng: &mut impl Rng) -> f64 {
    reaction_time(human, params, rng, RobotConfig::default().min_reaction)
        + params.f_min.to_f64() / human.force_ramp_rate
}

/// One executed handover.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverRecord {
    pub params: HandoverParams,
    pub seed: u64,
    pub events: Vec<ActivityInterval>,
    pub success: bool,
    pub failure_mode: Option<FailureMode>,
}

impl HandoverRecord {
    pub fn span_ms(&self) -> u64 {
        let start = self.events.iter().map(|e| e.start_ms).min().unwrap_or(0);
        let end = self.events.iter().map(|e| e.end_ms).max().unwrap_or(0);
        end - start
    }

    pub fn end_ms(&self) -> u64 {
        self.events.iter().map(|e| e.end_ms).max().unwrap_or(0)
    }

    pub fn has_transfer(&self) -> bool {
        self.events.iter().any(|e| e.activity == Activity::Transfer)
    }

    pub fn find(&self, agent: Agent, activity: Activity) -> Option<&ActivityInterval> {
        self.events.iter().find(|e| e.agent == agent && e.activity == activity)
    }

    /// Marks the record as failed with `mode`, keeping the log as executed.
    pub fn mark_failed(mut self, mode: FailureMode) -> Self {
        self.success = false;
        self.failure_mode = Some(mode);
        self
    }
}

/// Something that can carry out a handover and report its event log.
pub trait HandoverExecutor {
    fn execute(&self, params: &HandoverParams, seed: u64) -> HandoverRecord;
}

/// The simulated robot together with a simulated human.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Simulator {
    pub robot: RobotConfig,
    pub human: HumanModel,
    pub failures: FailureConfig,
}

impl HandoverExecutor for Simulator {
    fn execute(&self, params: &HandoverParams, seed: u64) -> HandoverRecord {
        execute_handover(params, &self.human, &self.failures, &self.robot, seed)
    }
}

struct Timeline {
    events: Vec<ActivityInterval>,
}

impl Timeline {
    fn push(&mut self, agent: Agent, activity: Activity, start: u64, end: u64) -> u64 {
        self.events.push(ActivityInterval::new(agent, activity, start, end));
        end
    }
}

fn ms(d: f64) -> u64 {
    secs_to_ms(d)
}

/// Runs one handover. Deterministic in `(params, human, failures, robot, seed)`.
pub fn execute_handover(
    params: &HandoverParams,
    human: &HumanModel,
    failures: &FailureConfig,
    robot: &RobotConfig,
    seed: u64,
) -> HandoverRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let failure = failures.sample(rng.random::<f64>());
    let reaction = reaction_time(human, params, &mut rng, robot.min_reaction);
    let grasp = params.f_min.to_f64() / human.force_ramp_rate;

    let location = params.location();
    let transit = |a, b| reach_duration(dist(a, b), robot.transit_speed, robot.accel).expect("positive transit speed");
    let reach = reach_duration(dist(robot.start_pose, location), params.v_max.to_f64(), robot.accel)
        .expect("v_max is positive within every spec");

    let mut log = Timeline {
        events: Vec::with_capacity(9),
    };
    let dwell = ms(robot.dwell);
    let mut t = log.push(Agent::Robot, Activity::PickUp, 0, ms(robot.pickup_duration));
    t += dwell;
    t = log.push(
        Agent::Robot,
        Activity::MoveToStart,
        t,
        t + ms(transit(robot.pickup_pose, robot.start_pose)),
    );

    let finish = |mut log: Timeline, human_wait_end: u64, mode: Option<FailureMode>| {
        log.events
            .push(ActivityInterval::new(Agent::Human, Activity::Wait, 0, human_wait_end));
        log.events
            .sort_by_key(|e| (e.start_ms, e.agent == Agent::Human, e.end_ms));
        HandoverRecord {
            params: *params,
            seed,
            success: mode.is_none(),
            failure_mode: mode,
            events: log.events,
        }
    };

    if failure == Some(FailureMode::PlanningFailure) {
        return finish(log, t, failure);
    }

    t += dwell;
    let stopped = log.push(Agent::Robot, Activity::Reach, t, t + ms(reach));
    let pull_start = stopped + ms(reaction);
    let released = pull_start + ms(grasp);

    if failure == Some(FailureMode::FalseTrigger) {
        let early = pull_start + ms(grasp / 2.0);
        log.push(Agent::Robot, Activity::Wait, stopped, early);
        log.push(Agent::Human, Activity::ReachAndGrasp, pull_start, early);
        return finish(log, pull_start, failure);
    }

    log.push(Agent::Robot, Activity::Wait, stopped, released);
    log.push(Agent::Human, Activity::ReachAndGrasp, pull_start, released);
    let transfer_end = log.push(
        Agent::Robot,
        Activity::Transfer,
        released,
        released + ms(robot.transfer_duration),
    );

    if failure == Some(FailureMode::Drop) {
        log.push(
            Agent::Human,
            Activity::TakeAndRestore,
            released,
            released + ms(human.restore_duration / 2.0),
        );
        return finish(log, pull_start, failure);
    }

    log.push(
        Agent::Human,
        Activity::TakeAndRestore,
        released,
        released + ms(human.restore_duration),
    );
    let retract_start = transfer_end + dwell;
    log.push(
        Agent::Robot,
        Activity::Retract,
        retract_start,
        retract_start + ms(transit(location, robot.retract_pose)),
    );
    finish(log, pull_start, None)
}

/// End-effector sample for animation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t_ms: u64,
    pub position: [f64; 3],
}

/// Samples the robot's end-effector position every `dt_ms` over the record.
pub fn sample_trajectory(record: &HandoverRecord, robot: &RobotConfig, dt_ms: u64) -> Vec<TrajectoryPoint> {
    let dt_ms = dt_ms.max(1);
    let location = record.params.location();
    let v_max = record.params.v_max.to_f64();
    let motion = |activity: Activity| -> Option<([f64; 3], [f64; 3], f64)> {
        match activity {
            Activity::MoveToStart => Some((robot.pickup_pose, robot.start_pose, robot.transit_speed)),
            Activity::Reach => Some((robot.start_pose, location, v_max)),
            Activity::Retract => Some((location, robot.retract_pose, robot.transit_speed)),
            _ => None,
        }
    };
    let robot_events: Vec<_> = record.events.iter().filter(|e| e.agent == Agent::Robot).collect();
    let end = record.end_ms();
    let mut out = Vec::new();
    let mut position = robot.pickup_pose;
    let mut t = 0;
    while t <= end {
        for e in &robot_events {
            if e.start_ms > t {
                break;
            }
            position = match motion(e.activity) {
                Some((from, to, speed)) => {
                    let d = dist(from, to);
                    let elapsed = (t.min(e.end_ms) - e.start_ms) as f64 / 1000.0;
                    let frac = if d > 0.0 {
                        travelled(d, speed, robot.accel, elapsed) / d
                    } else {
                        1.0
                    };
                    let frac = if t >= e.end_ms { 1.0 } else { frac };
                    [0, 1, 2].map(|i| from[i] + (to[i] - from[i]) * frac)
                }
                None => match e.activity {
                    Activity::PickUp => robot.pickup_pose,
                    _ => position,
                },
            };
        }
        out.push(TrajectoryPoint { t_ms: t, position });
        t += dt_ms;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::{near_average_defaults, ParamKey, ParameterValue, Unit};

    fn quiet_human() -> HumanModel {
        HumanModel {
            hesitation_gain: 0.0,
            ..HumanModel::default()
        }
        .noiseless()
    }

    fn with_force(newtons: f64) -> HandoverParams {
        near_average_defaults().with(ParamKey::FMin, ParameterValue::from_f64(newtons, Unit::Newton).unwrap())
    }

    #[test]
    fn reach_duration_branches() {
        assert!((reach_duration(0.9, 0.45, 1.0).unwrap() - 2.45).abs() < 1e-12);
        assert!((reach_duration(0.1, 0.8, 1.0).unwrap() - 0.632_455_532_033_675_9).abs() < 1e-12);
        assert_eq!(reach_duration(0.0, 0.3, 2.0).unwrap(), 0.0);
        assert!(matches!(
            reach_duration(1.0, 0.0, 1.0),
            Err(SimError::NonPositiveSpeed { .. })
        ));
        assert!(matches!(
            reach_duration(1.0, 0.5, -1.0),
            Err(SimError::NonPositiveSpeed { .. })
        ));
        assert!(matches!(
            reach_duration(-1.0, 0.5, 1.0),
            Err(SimError::NegativeDistance(_))
        ));
    }

    #[test]
    fn trapezoid_profile_covers_the_distance() {
        for (d, v) in [(0.9, 0.45), (0.1, 0.8), (0.5, 0.5)] {
            let total = reach_duration(d, v, 1.0).unwrap();
            assert!((travelled(d, v, 1.0, total) - d).abs() < 1e-9);
            assert_eq!(travelled(d, v, 1.0, 0.0), 0.0);
            let half = travelled(d, v, 1.0, total / 2.0);
            assert!((half - d / 2.0).abs() < 1e-9, "profile is symmetric");
        }
    }

    #[test]
    fn transfer_wait_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((transfer_wait(&quiet_human(), &with_force(13.0), &mut rng) - 1.125).abs() < 1e-12);
        assert!((transfer_wait(&quiet_human(), &with_force(23.0), &mut rng) - 1.375).abs() < 1e-12);
    }

    #[test]
    fn transfer_wait_monotone_in_force() {
        let human = HumanModel::default();
        for seed in 0..50 {
            let low = transfer_wait(&human, &with_force(13.0), &mut ChaCha8Rng::seed_from_u64(seed));
            let high = transfer_wait(&human, &with_force(23.0), &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(low < high);
        }
    }

    #[test]
    fn nominal_handover_log() {
        let human = quiet_human();
        let params = near_average_defaults();
        let rec = execute_handover(&params, &human, &FailureConfig::none(), &RobotConfig::default(), 7);
        assert!(rec.success);
        assert!(rec.failure_mode.is_none());
        let transfers = rec.events.iter().filter(|e| e.activity == Activity::Transfer).count();
        assert_eq!(transfers, 1);
        let wait = rec.find(Agent::Robot, Activity::Wait).unwrap();
        let expected = transfer_wait(&human, &params, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(wait.duration_ms(), secs_to_ms(expected));
        let order: Vec<_> = rec
            .events
            .iter()
            .filter(|e| e.agent == Agent::Robot)
            .map(|e| e.activity)
            .collect();
        assert_eq!(
            order,
            [
                Activity::PickUp,
                Activity::MoveToStart,
                Activity::Reach,
                Activity::Wait,
                Activity::Transfer,
                Activity::Retract
            ]
        );
        let human_order: Vec<_> = rec
            .events
            .iter()
            .filter(|e| e.agent == Agent::Human)
            .map(|e| e.activity)
            .collect();
        assert_eq!(
            human_order,
            [Activity::Wait, Activity::ReachAndGrasp, Activity::TakeAndRestore]
        );
    }

    #[test]
    fn forced_false_trigger() {
        let rec = execute_handover(
            &near_average_defaults(),
            &HumanModel::default(),
            &FailureConfig::forced(FailureMode::FalseTrigger),
            &RobotConfig::default(),
            3,
        );
        assert!(!rec.success);
        assert_eq!(rec.failure_mode, Some(FailureMode::FalseTrigger));
        assert!(!rec.has_transfer());
    }

    #[test]
    fn forced_planning_failure_and_drop() {
        let robot = RobotConfig::default();
        let plan = execute_handover(
            &near_average_defaults(),
            &HumanModel::default(),
            &FailureConfig::forced(FailureMode::PlanningFailure),
            &robot,
            3,
        );
        assert!(plan.find(Agent::Robot, Activity::Reach).is_none());
        assert!(!plan.success);
        let drop = execute_handover(
            &near_average_defaults(),
            &HumanModel::default(),
            &FailureConfig::forced(FailureMode::Drop),
            &robot,
            3,
        );
        assert!(drop.has_transfer());
        assert!(!drop.success);
        assert!(drop.find(Agent::Robot, Activity::Retract).is_none());
    }

    #[test]
    fn same_seed_same_log() {
        let sim = Simulator::default();
        let a = sim.execute(&near_average_defaults(), 99);
        let b = sim.execute(&near_average_defaults(), 99);
        assert_eq!(a, b);
        let c = sim.execute(&near_average_defaults(), 100);
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn interval_json_uses_seconds() {
        let e = ActivityInterval::new(Agent::Robot, Activity::Reach, 2000, 4450);
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(
            json,
            r#"{"agent":"robot","activity":"reach","t_start":2.0,"t_end":4.45}"#
        );
        assert_eq!(serde_json::from_str::<ActivityInterval>(&json).unwrap(), e);
        assert_eq!(e.line(), "robot reach 2.000 4.450");
        assert!(serde_json::from_str::<ActivityInterval>(
            r#"{"agent":"robot","activity":"reach","t_start":3.0,"t_end":1.0}"#
        )
        .is_err());
    }

    #[test]
    fn trajectory_ends_above_pickup() {
        let robot = RobotConfig::default();
        let rec = execute_handover(
            &near_average_defaults(),
            &quiet_human(),
            &FailureConfig::none(),
            &robot,
            1,
        );
        let samples = sample_trajectory(&rec, &robot, 50);
        assert_eq!(samples[0].position, robot.pickup_pose);
        let reach = rec.find(Agent::Robot, Activity::Reach).unwrap();
        let at_stop = samples.iter().find(|p| p.t_ms >= reach.end_ms).unwrap();
        for i in 0..3 {
            assert!((at_stop.position[i] - rec.params.location()[i]).abs() < 1e-9);
        }
        let last = samples.last().unwrap();
        assert!(last.t_ms + 50 > rec.end_ms());
        let retract = rec.find(Agent::Robot, Activity::Retract).unwrap();
        if last.t_ms >= retract.end_ms {
            assert_eq!(last.position, robot.retract_pose);
        }
    }

    #[test]
    fn human_model_validation() {
        assert!(HumanModel::default().validate().is_ok());
        let bad = HumanModel {
            force_ramp_rate: 0.0,
            ..HumanModel::default()
        };
        assert!(bad.validate().is_err());
    }
}
