//! Aggregate statistics over runs.

use pgplan_core::UsageRecord;
use thiserror::Error;

pub const PROFILE_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("no preference usage recorded")]
    EmptyLog,
}

/// Cumulative share of preference uses against depth ratio, at ratios
/// 0.1, 0.2, ..., 1.0. Each log (one run) is normalized on its own, then
/// the curves are averaged; empty logs are skipped.
pub fn depth_profile(logs: &[Vec<UsageRecord>]) -> Result<Vec<f64>, ProfileError> {
    let mut sum = vec![0.0; PROFILE_BINS];
    let mut n = 0usize;
    for log in logs.iter().filter(|l| !l.is_empty()) {
        n += 1;
        for (b, acc) in sum.iter_mut().enumerate() {
            let edge = (b + 1) as f64 / PROFILE_BINS as f64;
            let within = log
                .iter()
                .filter(|r| r.depth_ratio() <= edge + 1e-12)
                .count();
            *acc += within as f64 / log.len() as f64;
        }
    }
    if n == 0 {
        return Err(ProfileError::EmptyLog);
    }
    Ok(sum.into_iter().map(|s| s / n as f64).collect())
}

/// Profile value at a depth ratio, read from the bin whose upper edge is
/// nearest.
pub fn profile_at(profile: &[f64], ratio: f64) -> f64 {
    let bin = ((ratio * PROFILE_BINS as f64).round() as usize).clamp(1, PROFILE_BINS);
    profile[bin - 1]
}

/// Each value divided by the largest. All-zero inputs map to 1.
pub fn ratios_to_max(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![1.0; values.len()];
    }
    values.iter().map(|v| v / max).collect()
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}
