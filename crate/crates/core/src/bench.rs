//! Repeat-and-average wall-clock timing.
//!
//! Each repetition runs the whole task once and is timed with the monotonic
//! clock. Repetitions never overlap. Spread is the sample standard deviation
//! (n - 1 denominator).

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("at least 2 repetitions are required, got {0}")]
    TooFewReps(usize),
    #[error("at least 2 timing results are required to compare, got {0}")]
    TooFewStats(usize),
    #[error("task `{task_id}` failed on repetition {rep}: {message}")]
    TaskFailed {
        task_id: String,
        rep: usize,
        message: String,
        /// Seconds of the repetitions that completed.
        partial: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingStats {
    pub task_id: String,
    pub repetitions: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub samples: Vec<f64>,
    pub warmup: bool,
}

impl TimingStats {
    pub fn from_samples(task_id: impl Into<String>, samples: Vec<f64>, warmup: bool) -> Self {
        let (mean_s, std_s) = mean_std(&samples);
        Self {
            task_id: task_id.into(),
            repetitions: samples.len(),
            mean_s,
            std_s,
            samples,
            warmup,
        }
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = samples.iter().map(|s| (s - mean) * (s - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Times `reps` runs of `task`. With `warmup`, one extra untimed run comes
/// first.
pub fn time_task<F, E>(task_id: &str, reps: usize, warmup: bool, mut task: F) -> Result<TimingStats, BenchError>
where
    F: FnMut() -> Result<(), E>,
    E: std::fmt::Display,
{
    if reps < 2 {
        return Err(BenchError::TooFewReps(reps));
    }
    let fail = |rep, e: E, partial: &[f64]| BenchError::TaskFailed {
        task_id: task_id.to_string(),
        rep,
        message: e.to_string(),
        partial: partial.to_vec(),
    };
    if warmup {
        task().map_err(|e| fail(0, e, &[]))?;
    }
    let mut samples = Vec::with_capacity(reps);
    for rep in 1..=reps {
        let start = Instant::now();
        let outcome = task();
        let elapsed = start.elapsed().as_secs_f64();
        outcome.map_err(|e| fail(rep, e, &samples))?;
        samples.push(elapsed);
    }
    Ok(TimingStats::from_samples(task_id, samples, warmup))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub task_id: String,
    pub mean_s: f64,
    pub std_s: f64,
    /// Mean relative to the fastest mean.
    pub ratio: f64,
    /// `(mean - std) / (fastest + fastest_std)`, floored at 0.
    pub ratio_min: f64,
    /// `(mean + std) / (fastest - fastest_std)`; infinite when the fastest
    /// task's spread reaches zero.
    pub ratio_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub fastest: String,
    /// Sorted by mean, fastest first.
    pub rows: Vec<RatioRow>,
}

pub fn compare(stats: &[TimingStats]) -> Result<Ranking, BenchError> {
    if stats.len() < 2 {
        return Err(BenchError::TooFewStats(stats.len()));
    }
    let mut sorted: Vec<&TimingStats> = stats.iter().collect();
    sorted.sort_by(|a, b| a.mean_s.total_cmp(&b.mean_s));
    let fastest = sorted[0];
    let (fm, fs) = (fastest.mean_s, fastest.std_s);
    let rows = sorted
        .iter()
        .map(|s| {
            let lo_den = fm + fs;
            let hi_den = fm - fs;
            RatioRow {
                task_id: s.task_id.clone(),
                mean_s: s.mean_s,
                std_s: s.std_s,
                ratio: s.mean_s / fm,
                ratio_min: ((s.mean_s - s.std_s) / lo_den).max(0.0),
                ratio_max: if hi_den > 0.0 {
                    (s.mean_s + s.std_s) / hi_den
                } else {
                    f64::INFINITY
                },
            }
        })
        .collect();
    Ok(Ranking {
        fastest: fastest.task_id.clone(),
        rows,
    })
}
