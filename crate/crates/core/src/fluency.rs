//! Objective fluency metrics over two-agent activity logs.
//!
//! * R-IDLE / H-IDLE: share of the log span the robot / human is not active.
//! * C-ACT: share of the span during which both are active.
//! * F-DEL: summed gaps between one agent finishing and the other agent's next
//!   activity starting, over the span.
//!
//! `wait` intervals count as idle time.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{ActivityInterval, Agent, HandoverRecord};
use crate::stats::{mean, wilcoxon_signed_rank, StatsError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FluencyError {
    #[error("event log is empty")]
    EmptyLog,
    #[error("malformed event log: {0}")]
    MalformedLog(String),
    #[error("paired phase lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

impl From<StatsError> for FluencyError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::LengthMismatch(a, b) => FluencyError::LengthMismatch(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluencyReport {
    pub r_idle: f64,
    pub h_idle: f64,
    pub c_act: f64,
    pub f_del: f64,
    /// Log span, seconds.
    pub total_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RIdle,
    HIdle,
    CAct,
    FDel,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::RIdle, Metric::HIdle, Metric::CAct, Metric::FDel];

    pub fn label(self) -> &'static str {
        match self {
            Metric::RIdle => "R-IDLE",
            Metric::HIdle => "H-IDLE",
            Metric::CAct => "C-ACT",
            Metric::FDel => "F-DEL",
        }
    }
}

impl FluencyReport {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::RIdle => self.r_idle,
            Metric::HIdle => self.h_idle,
            Metric::CAct => self.c_act,
            Metric::FDel => self.f_del,
        }
    }

    /// Field-wise mean; `None` for an empty slice.
    pub fn mean(reports: &[FluencyReport]) -> Option<FluencyReport> {
        if reports.is_empty() {
            return None;
        }
        let avg = |f: fn(&FluencyReport) -> f64| mean(&reports.iter().map(f).collect::<Vec<_>>());
        Some(FluencyReport {
            r_idle: avg(|r| r.r_idle),
            h_idle: avg(|r| r.h_idle),
            c_act: avg(|r| r.c_act),
            f_del: avg(|r| r.f_del),
            total_time: avg(|r| r.total_time),
        })
    }
}

fn overlap(a: &ActivityInterval, b: &ActivityInterval) -> u64 {
    let start = a.start_ms.max(b.start_ms);
    let end = a.end_ms.min(b.end_ms);
    end.saturating_sub(start)
}

fn check_agent(events: &[ActivityInterval], agent: Agent) -> Result<(), FluencyError> {
    let mut own: Vec<_> = events.iter().filter(|e| e.agent == agent).collect();
    own.sort_by_key(|e| (e.start_ms, e.end_ms));
    for pair in own.windows(2) {
        if pair[1].start_ms < pair[0].end_ms {
            return Err(FluencyError::MalformedLog(format!(
                "overlapping {agent:?} intervals {:?} and {:?}",
                pair[0].activity, pair[1].activity
            )));
        }
    }
    Ok(())
}

/// Fluency metrics of one task execution.
pub fn compute_fluency(events: &[ActivityInterval]) -> Result<FluencyReport, FluencyError> {
    if events.is_empty() {
        return Err(FluencyError::EmptyLog);
    }
    if let Some(e) = events.iter().find(|e| e.start_ms > e.end_ms) {
        return Err(FluencyError::MalformedLog(format!(
            "{:?} ends before it starts",
            e.activity
        )));
    }
    check_agent(events, Agent::Robot)?;
    check_agent(events, Agent::Human)?;

    let start = events.iter().map(|e| e.start_ms).min().expect("non-empty");
    let end = events.iter().map(|e| e.end_ms).max().expect("non-empty");
    let span = end - start;
    if span == 0 {
        return Err(FluencyError::MalformedLog("log spans zero time".into()));
    }

    let mut active: Vec<&ActivityInterval> = events.iter().filter(|e| e.activity.is_active()).collect();
    active.sort_by_key(|e| (e.start_ms, e.end_ms, e.agent == Agent::Human));
    let busy = |agent: Agent| -> u64 {
        active
            .iter()
            .filter(|e| e.agent == agent)
            .map(|e| e.duration_ms())
            .sum()
    };
    let robot_busy = busy(Agent::Robot);
    let human_busy = busy(Agent::Human);

    // Same-agent intervals are disjoint, so summed pairwise overlap is the
    // measure of the time both are busy.
    let concurrent: u64 = active
        .iter()
        .filter(|e| e.agent == Agent::Robot)
        .flat_map(|r| {
            active
                .iter()
                .filter(|e| e.agent == Agent::Human)
                .map(move |h| overlap(r, h))
        })
        .sum();

    let delay: u64 = active
        .windows(2)
        .filter(|w| w[0].agent != w[1].agent)
        .map(|w| w[1].start_ms.saturating_sub(w[0].end_ms))
        .sum();

    let total = span as f64;
    Ok(FluencyReport {
        r_idle: (span - robot_busy) as f64 / total,
        h_idle: (span - human_busy) as f64 / total,
        c_act: concurrent as f64 / total,
        f_del: delay as f64 / total,
        total_time: total / 1000.0,
    })
}

/// Mean report over the successful handovers of a phase. Falls back to all
/// handovers when none succeeded; `None` if nothing can be measured.
pub fn phase_fluency(records: &[HandoverRecord]) -> Option<FluencyReport> {
    let measure = |only_successful: bool| -> Vec<FluencyReport> {
        records
            .iter()
            .filter(|r| r.success || !only_successful)
            .filter_map(|r| compute_fluency(&r.events).ok())
            .collect()
    };
    let reports = measure(true);
    let reports = if reports.is_empty() { measure(false) } else { reports };
    FluencyReport::mean(&reports)
}

/// `1 − failed/total`.
pub fn success_rate(n_failed: usize, n_total: usize) -> Result<f64, SuccessRateError> {
    if n_total == 0 {
        return Err(SuccessRateError::ZeroTotal);
    }
    if n_failed > n_total {
        return Err(SuccessRateError::MoreFailuresThanTotal { n_failed, n_total });
    }
    Ok(1.0 - n_failed as f64 / n_total as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuccessRateError {
    #[error("no handovers were performed")]
    ZeroTotal,
    #[error("{n_failed} failures out of {n_total} handovers")]
    MoreFailuresThanTotal { n_failed: usize, n_total: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub before_mean: f64,
    pub after_mean: f64,
    /// `after − before` per session.
    pub deltas: Vec<f64>,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseComparison {
    pub before: Vec<FluencyReport>,
    pub after: Vec<FluencyReport>,
    pub metrics: BTreeMap<Metric, MetricComparison>,
}

impl PhaseComparison {
    pub fn metric(&self, m: Metric) -> &MetricComparison {
        &self.metrics[&m]
    }

    /// `{metric → {before_mean, after_mean, z, p}}`.
    pub fn summary_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .metrics
            .iter()
            .map(|(m, c)| {
                (
                    m.label().to_string(),
                    serde_json::json!({
                        "before_mean": c.before_mean,
                        "after_mean": c.after_mean,
                        "z": c.z,
                        "p": c.p,
                    }),
                )
            })
            .collect();
        serde_json::Value::Object(map)
    }

    pub fn table(&self) -> String {
        let mut out = String::from("metric   before   after    z        p\n");
        for (m, c) in &self.metrics {
            let _ = writeln!(
                out,
                "{:<8} {:.4}   {:.4}   {:+.3}   {:.4}",
                m.label(),
                c.before_mean,
                c.after_mean,
                c.z,
                c.p
            );
        }
        out
    }
}

/// Paired before/after comparison of per-session reports.
pub fn compare_phases(before: &[FluencyReport], after: &[FluencyReport]) -> Result<PhaseComparison, FluencyError> {
    if before.len() != after.len() {
        return Err(FluencyError::LengthMismatch(before.len(), after.len()));
    }
    let mut metrics = BTreeMap::new();
    for m in Metric::ALL {
        let b: Vec<f64> = before.iter().map(|r| r.get(m)).collect();
        let a: Vec<f64> = after.iter().map(|r| r.get(m)).collect();
        let test = wilcoxon_signed_rank(&b, &a)?;
        metrics.insert(
            m,
            MetricComparison {
                before_mean: mean(&b),
                after_mean: mean(&a),
                deltas: a.iter().zip(&b).map(|(a, b)| a - b).collect(),
                z: test.z,
                p: test.p,
            },
        );
    }
    Ok(PhaseComparison {
        before: before.to_vec(),
        after: after.to_vec(),
        metrics,
    })
}

/// Per-session reports from per-session record lists.
pub fn compare_phase_logs(
    before: &[Vec<HandoverRecord>],
    after: &[Vec<HandoverRecord>],
) -> Result<PhaseComparison, FluencyError> {
    if before.len() != after.len() {
        return Err(FluencyError::LengthMismatch(before.len(), after.len()));
    }
    let reports = |sessions: &[Vec<HandoverRecord>]| -> Result<Vec<FluencyReport>, FluencyError> {
        sessions
            .iter()
            .map(|s| phase_fluency(s).ok_or(FluencyError::EmptyLog))
            .collect()
    };
    compare_phases(&reports(before)?, &reports(after)?)
}
