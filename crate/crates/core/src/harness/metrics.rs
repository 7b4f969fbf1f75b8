use crate::controller::AdaptationStatus;
use crate::sim::TrialTrace;
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Per-trial figures, derived from the trial trace alone.
///
/// A trial succeeds when it had at least one adaptation episode and every
/// episode succeeded. Retries and adaptation time are summed over episodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialMetrics {
    pub episodes: u32,
    pub success: bool,
    pub first_attempt: bool,
    pub exhausted: bool,
    pub retries: u32,
    pub adaptation_time: Duration,
}

impl TrialMetrics {
    pub fn from_trace(trace: &TrialTrace) -> Self {
        let mut m = TrialMetrics {
            episodes: 0,
            success: true,
            first_attempt: true,
            exhausted: false,
            retries: 0,
            adaptation_time: Duration::ZERO,
        };
        for outcome in trace.adaptations() {
            m.episodes += 1;
            m.retries += outcome.retries();
            m.adaptation_time += outcome.adaptation_time;
            m.success &= outcome.status == AdaptationStatus::Succeeded;
            m.first_attempt &= outcome.attempts_used == 1;
            m.exhausted |= outcome.status == AdaptationStatus::ExhaustedRetries;
        }
        if m.episodes == 0 {
            m.success = false;
        }
        m.first_attempt &= m.success;
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub first_attempt_successes: usize,
    pub first_attempt_rate: f64,
    /// Seconds; absent when no trial succeeded.
    pub mean_adaptation_time_s: Option<f64>,
    pub min_adaptation_time_s: Option<f64>,
    pub max_adaptation_time_s: Option<f64>,
    /// Mean retries over successful trials.
    pub mean_retries: Option<f64>,
    pub max_retries_observed: u32,
    pub exhausted_trials: usize,
    /// `logical` or `wall`.
    pub time_basis: String,
}

impl MetricsSummary {
    pub fn from_trials(trials: &[TrialMetrics], time_basis: &str) -> Self {
        let n = trials.len();
        let wins: Vec<&TrialMetrics> = trials.iter().filter(|t| t.success).collect();
        let successes = wins.len();
        let first_attempt_successes = wins.iter().filter(|t| t.first_attempt).count();
        let ratio = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };

        let times: Vec<Duration> = wins.iter().map(|t| t.adaptation_time).collect();
        let total: Duration = times.iter().sum();
        let mean_time = (successes > 0).then(|| total / successes as u32);
        let retry_total: u64 = wins.iter().map(|t| u64::from(t.retries)).sum();

        MetricsSummary {
            trials: n,
            successes,
            success_rate: ratio(successes),
            first_attempt_successes,
            first_attempt_rate: ratio(first_attempt_successes),
            mean_adaptation_time_s: mean_time.map(|d| d.as_secs_f64()),
            min_adaptation_time_s: times.iter().min().map(Duration::as_secs_f64),
            max_adaptation_time_s: times.iter().max().map(Duration::as_secs_f64),
            mean_retries: (successes > 0).then(|| retry_total as f64 / successes as f64),
            max_retries_observed: trials.iter().map(|t| t.retries).max().unwrap_or(0),
            exhausted_trials: trials.iter().filter(|t| t.exhausted).count(),
            time_basis: time_basis.to_owned(),
        }
    }

    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a TrialTrace>, time_basis: &str) -> Self {
        let trials: Vec<TrialMetrics> = traces.into_iter().map(TrialMetrics::from_trace).collect();
        Self::from_trials(&trials, time_basis)
    }
}
