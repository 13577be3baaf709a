//! Lower bound error, relative-precision stop criterion and the theorem
//! check against a reference orbit.
//!
//! For two pseudo-orbits `a`, `b` of equivalent plans, `|a_n - b_n| / 2` is
//! a lower bound on `max(|x_n - a_n|, |x_n - b_n|)` for the exact orbit `x`.

use serde::Serialize;
use thiserror::Error;

use crate::simulator::{PseudoOrbit, ReferenceOrbit};

/// Stop threshold used when none is given.
pub const DEFAULT_EPSILON: f64 = 0.001;

/// Denominators below this magnitude are flagged by the guard.
pub const GUARD_DENOMINATOR: f64 = 4.0 * f64::MIN_POSITIVE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LbeError {
    #[error("at least two orbits are required, got {0}")]
    TooFewOrbits(usize),
    #[error("orbits use different precision modes")]
    PrecisionMismatch,
    #[error("window {start}..{end} exceeds series length {len}")]
    WindowOutOfRange { start: usize, end: usize, len: usize },
    #[error("need at least two nonzero entries to fit a growth rate, found {0}")]
    InsufficientData(usize),
    #[error("requested {requested} iterations but the reference is trusted for {trusted}")]
    TrustWindowExceeded { requested: usize, trusted: usize },
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LbeSeries {
    pub values: Vec<f64>,
    pub plan_ids: Vec<String>,
}

impl LbeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `|a - b| / 2` without spurious overflow.
#[inline]
pub fn half_gap(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.is_finite() {
        d.abs() * 0.5
    } else {
        (a * 0.5 - b * 0.5).abs()
    }
}

fn shared_len(orbits: &[&PseudoOrbit]) -> Result<usize, LbeError> {
    if let Some(first) = orbits.first() {
        if orbits.iter().any(|o| o.precision != first.precision) {
            return Err(LbeError::PrecisionMismatch);
        }
    }
    let min = orbits.iter().map(|o| o.len()).min().unwrap_or(0);
    let max = orbits.iter().map(|o| o.len()).max().unwrap_or(0);
    if min != max {
        log::warn!("orbit lengths differ ({min} vs {max}); using the shared prefix of {min}");
    }
    Ok(min)
}

pub fn lower_bound_error(a: &PseudoOrbit, b: &PseudoOrbit) -> Result<LbeSeries, LbeError> {
    let n = shared_len(&[a, b])?;
    Ok(LbeSeries {
        values: (0..n).map(|i| half_gap(a.values[i], b.values[i])).collect(),
        plan_ids: vec![a.plan_id.clone(), b.plan_id.clone()],
    })
}

/// Largest pairwise half gap at each index.
pub fn lbe_multi(orbits: &[PseudoOrbit]) -> Result<LbeSeries, LbeError> {
    if orbits.len() < 2 {
        return Err(LbeError::TooFewOrbits(orbits.len()));
    }
    let refs: Vec<&PseudoOrbit> = orbits.iter().collect();
    let n = shared_len(&refs)?;
    // the largest pairwise gap is the spread between extremes
    let values = (0..n)
        .map(|i| {
            let (lo, hi) = orbits.iter().map(|o| o.values[i]).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), v| (lo.min(v), hi.max(v)),
            );
            half_gap(hi, lo)
        })
        .collect();
    Ok(LbeSeries {
        values,
        plan_ids: orbits.iter().map(|o| o.plan_id.clone()).collect(),
    })
}

/// Raw parts of a guarded relative-precision entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuardRecord {
    pub numerator: f64,
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionSeries {
    /// `(a - b) / (a + b)`; infinite with the sign of `a - b` where `a + b = 0`.
    pub values: Vec<f64>,
    /// Set where `|a + b|` is zero or below [`GUARD_DENOMINATOR`].
    pub guards: Vec<Option<GuardRecord>>,
}

impl PrecisionSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_guarded(&self, n: usize) -> bool {
        self.guards[n].is_some()
    }
}

pub fn relative_precision(a: &PseudoOrbit, b: &PseudoOrbit) -> Result<PrecisionSeries, LbeError> {
    let n = shared_len(&[a, b])?;
    let mut values = Vec::with_capacity(n);
    let mut guards = Vec::with_capacity(n);
    for i in 0..n {
        let (x, y) = (a.values[i], b.values[i]);
        let numerator = x - y;
        let denominator = x + y;
        let value = if denominator == 0.0 {
            f64::INFINITY.copysign(numerator)
        } else {
            numerator / denominator
        };
        values.push(value);
        guards.push((denominator.abs() < GUARD_DENOMINATOR).then_some(GuardRecord {
            numerator,
            denominator,
        }));
    }
    Ok(PrecisionSeries { values, guards })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Trigger {
    Criterion,
    DenominatorGuard,
    OrbitEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonReport {
    pub horizon_n: Option<usize>,
    pub epsilon: f64,
    pub triggered_by: Trigger,
    /// Relative precision at the horizon, when one was found.
    pub value: Option<f64>,
}

impl std::fmt::Display for HorizonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.horizon_n, self.triggered_by) {
            (Some(n), Trigger::Criterion) => write!(
                f,
                "horizon n={n} (|eps|={:.3e} > {})",
                self.value.unwrap_or(f64::NAN).abs(),
                self.epsilon
            ),
            (Some(n), Trigger::DenominatorGuard) => {
                write!(f, "horizon n={n} (denominator guard, eps={})", self.epsilon)
            }
            _ => write!(f, "horizon none (orbit end, eps={})", self.epsilon),
        }
    }
}

/// Whether index `n` of the series trips the stop rule, and how.
///
/// Unguarded entries trip when `|eps_n| > epsilon`. A guarded entry (sum of
/// the orbits near zero) trips only when the orbits themselves disagree
/// beyond `epsilon` relative to their magnitude: `|a - b| > epsilon *
/// max(|a|, |b|)`.
fn trips(series: &PrecisionSeries, a: f64, b: f64, n: usize, epsilon: f64) -> Option<Trigger> {
    match series.guards[n] {
        None => (series.values[n].abs() > epsilon).then_some(Trigger::Criterion),
        Some(g) => {
            (g.numerator.abs() > epsilon * a.abs().max(b.abs())).then_some(Trigger::DenominatorGuard)
        }
    }
}

pub fn reliability_horizon(a: &PseudoOrbit, b: &PseudoOrbit, epsilon: f64) -> Result<HorizonReport, LbeError> {
    if !(epsilon > 0.0) {
        return Err(LbeError::Epsilon(epsilon));
    }
    let series = relative_precision(a, b)?;
    for n in 0..series.len() {
        if let Some(trigger) = trips(&series, a.values[n], b.values[n], n, epsilon) {
            return Ok(HorizonReport {
                horizon_n: Some(n),
                epsilon,
                triggered_by: trigger,
                value: Some(series.values[n]),
            });
        }
    }
    Ok(HorizonReport {
        horizon_n: None,
        epsilon,
        triggered_by: Trigger::OrbitEnd,
        value: None,
    })
}

/// Earliest horizon over all pairs of the given orbits.
pub fn reliability_horizon_multi(orbits: &[PseudoOrbit], epsilon: f64) -> Result<HorizonReport, LbeError> {
    if orbits.len() < 2 {
        return Err(LbeError::TooFewOrbits(orbits.len()));
    }
    let mut best: Option<HorizonReport> = None;
    for i in 0..orbits.len() {
        for j in i + 1..orbits.len() {
            let r = reliability_horizon(&orbits[i], &orbits[j], epsilon)?;
            let earlier = match (&best, r.horizon_n) {
                (None, _) => true,
                (Some(b), Some(n)) => b.horizon_n.is_none_or(|m| n < m),
                (Some(_), None) => false,
            };
            if earlier {
                best = Some(r);
            }
        }
    }
    Ok(best.expect("at least one pair"))
}

/// Least-squares slope of `log2(lbe_n)` against `n` over `window`, in bits
/// per iteration. Exact zeros are left out of the fit; a window with no
/// nonzero entry shows no divergence and has slope 0.
pub fn lbe_growth_rate(series: &LbeSeries, window: std::ops::Range<usize>) -> Result<f64, LbeError> {
    if window.start > window.end || window.end > series.len() {
        return Err(LbeError::WindowOutOfRange {
            start: window.start,
            end: window.end,
            len: series.len(),
        });
    }
    let points: Vec<(f64, f64)> = window
        .clone()
        .filter(|&n| series.values[n] > 0.0)
        .map(|n| (n as f64, series.values[n].log2()))
        .collect();
    match points.len() {
        0 => return Ok(0.0),
        1 => return Err(LbeError::InsufficientData(1)),
        _ => {}
    }
    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), &(x, y)| {
        let dx = x - mean_x;
        (sxy + dx * (y - mean_y), sxx + dx * dx)
    });
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Number of leading iterations checked.
    pub window: usize,
    /// `max(|r - a|, |r - b|) - lbe` per iteration.
    pub margins: Vec<f64>,
    pub violations: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Checks `max(|r_n - a_n|, |r_n - b_n|) >= |a_n - b_n| / 2` for the first
/// `window` entries.
pub fn verify_theorem(
    reference: &ReferenceOrbit,
    a: &PseudoOrbit,
    b: &PseudoOrbit,
    window: usize,
) -> Result<VerificationReport, LbeError> {
    if window > reference.trusted_len {
        return Err(LbeError::TrustWindowExceeded {
            requested: window,
            trusted: reference.trusted_len,
        });
    }
    let available = reference.orbit.len().min(a.len()).min(b.len());
    if window > available {
        return Err(LbeError::WindowOutOfRange {
            start: 0,
            end: window,
            len: available,
        });
    }
    let r = &reference.orbit.values;
    let margins: Vec<f64> = (0..window)
        .map(|n| {
            let deviation = (r[n] - a.values[n]).abs().max((r[n] - b.values[n]).abs());
            deviation - half_gap(a.values[n], b.values[n])
        })
        .collect();
    let violations = (0..window)
        .filter(|&n| {
            let deviation = (r[n] - a.values[n]).abs().max((r[n] - b.values[n]).abs());
            !(deviation >= half_gap(a.values[n], b.values[n]))
        })
        .count();
    Ok(VerificationReport {
        window,
        margins,
        violations,
    })
}
