//! Free-run simulation of a model under a fixed evaluation plan.
//!
//! Orbit layout: `values[0..n_y]` is the seed, oldest first; each further
//! entry `values[k]` is produced from `y[lag] = values[k - 1 - lag]` and
//! `u[lag] = u_{k - 1 - lag}`. Running `N` iterations yields `n_y + N`
//! values.
//!
//! Binary64 runs execute the plan's operation schedule exactly as compiled:
//! every `+` and `*` is one round-to-nearest-even operation, no contraction,
//! no reassociation. The recursion is sequential and is never split across
//! threads.

mod highprec;

use serde::Serialize;
use thiserror::Error;

use astro_float::BigFloat;

use crate::extension::{canonical_plan, canonicalize, canonicalize_model, Arithmetic, Binary64, EvaluationPlan};
use crate::model::{InputError, InputSignal, PolynomialModel, RegressorKind};

pub use highprec::{agree_to_bits, lift, to_f64, HighPrecision};

/// Smallest accepted reference precision.
pub const MIN_REFERENCE_BITS: usize = 128;
/// Largest accepted reference precision; the trust test needs `2^-(bits/2)`
/// as a binary64 number.
pub const MAX_REFERENCE_BITS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Precision {
    Double,
    HighPrec { bits: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoOrbit {
    pub values: Vec<f64>,
    pub plan_id: String,
    pub precision: Precision,
}

impl PseudoOrbit {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub y_seed: Vec<f64>,
    pub u_signal: InputSignal,
}

impl InitialConditions {
    pub fn new(y_seed: Vec<f64>, u_signal: InputSignal) -> Self {
        Self { y_seed, u_signal }
    }

    /// Seed of `n_y` copies of `value` and no input.
    pub fn constant(model: &PolynomialModel, value: f64) -> Self {
        Self::new(vec![value; model.n_y()], InputSignal::None)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("seed has {got} values but the model needs {expected}")]
    SeedLength { expected: usize, got: usize },
    #[error("plan `{plan}` does not evaluate model `{model}`")]
    PlanMismatch { plan: String, model: String },
    #[error("at least one iteration is required")]
    ZeroIterations,
    #[error("model has input terms: {0}")]
    Input(#[from] InputError),
    #[error("input lag {lag} reaches before the start of the signal")]
    InputBeforeStart { lag: usize },
    #[error("non-finite value at orbit index {index}; orbit aborted")]
    NonFinite {
        index: usize,
        partial: Box<PseudoOrbit>,
    },
    #[error("reference precision {bits} bits outside [{MIN_REFERENCE_BITS}, {MAX_REFERENCE_BITS}]")]
    Precision { bits: usize },
}

/// Runs `iterations` steps of the plan in binary64.
pub fn simulate(
    model: &PolynomialModel,
    plan: &EvaluationPlan,
    init: &InitialConditions,
    iterations: usize,
) -> Result<PseudoOrbit, SimError> {
    check_plan(model, plan)?;
    let inputs = prepare(model, init, iterations)?;
    let arith = Binary64;
    let result = run(model, plan, &arith, &init.y_seed, &inputs, iterations, |x| x, |v| v.is_finite());
    let wrap = |values| PseudoOrbit {
        values,
        plan_id: plan.id().to_string(),
        precision: Precision::Double,
    };
    match result {
        Ok(values) => Ok(wrap(values)),
        Err((values, index)) => Err(SimError::NonFinite {
            index,
            partial: Box::new(wrap(values)),
        }),
    }
}

/// Runs the canonical plan with `bits` of precision and rounds the result
/// to binary64. Stands in for the exact orbit while it agrees with a run at
/// twice the precision; see [`reference_orbit`].
pub fn simulate_reference(
    model: &PolynomialModel,
    init: &InitialConditions,
    iterations: usize,
    bits: usize,
) -> Result<PseudoOrbit, SimError> {
    let wide = simulate_wide(model, init, iterations, bits)?;
    Ok(PseudoOrbit {
        values: wide.iter().map(to_f64).collect(),
        plan_id: format!("reference{bits}"),
        precision: Precision::HighPrec { bits },
    })
}

fn simulate_wide(
    model: &PolynomialModel,
    init: &InitialConditions,
    iterations: usize,
    bits: usize,
) -> Result<Vec<BigFloat>, SimError> {
    if !(MIN_REFERENCE_BITS..=MAX_REFERENCE_BITS).contains(&bits) {
        return Err(SimError::Precision { bits });
    }
    let plan = canonical_plan(model).with_id(format!("reference{bits}"));
    let inputs = prepare(model, init, iterations)?;
    let arith = HighPrecision::new(bits);
    run(
        model,
        &plan,
        &arith,
        &init.y_seed,
        &inputs,
        iterations,
        |x| arith.lift(x),
        highprec::is_finite,
    )
    .map_err(|(values, index)| SimError::NonFinite {
        index,
        partial: Box::new(PseudoOrbit {
            values: values.iter().map(to_f64).collect(),
            plan_id: plan.id().to_string(),
            precision: Precision::HighPrec { bits },
        }),
    })
}

/// A reference orbit and the length of its trusted prefix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceOrbit {
    pub orbit: PseudoOrbit,
    /// Number of leading entries on which the `bits` and `2 * bits` runs
    /// agree to a relative difference below `2^-(bits/2)`.
    pub trusted_len: usize,
}

impl ReferenceOrbit {
    /// Treats the whole of `orbit` as trusted.
    pub fn trusted(orbit: PseudoOrbit) -> Self {
        let trusted_len = orbit.len();
        Self { orbit, trusted_len }
    }
}

pub fn reference_orbit(
    model: &PolynomialModel,
    init: &InitialConditions,
    iterations: usize,
    bits: usize,
) -> Result<ReferenceOrbit, SimError> {
    let narrow = simulate_wide(model, init, iterations, bits)?;
    let wide = simulate_wide(model, init, iterations, 2 * bits)?;
    let trusted_len = narrow
        .iter()
        .zip(&wide)
        .position(|(a, b)| !agree_to_bits(a, b, bits / 2))
        .unwrap_or(narrow.len());
    Ok(ReferenceOrbit {
        orbit: PseudoOrbit {
            values: narrow.iter().map(to_f64).collect(),
            plan_id: format!("reference{bits}"),
            precision: Precision::HighPrec { bits },
        },
        trusted_len,
    })
}

/// Number of leading bits on which the two wide runs of the reference
/// agree at each index, capped at `bits`. Diagnostic helper for choosing a
/// reference precision.
pub fn reference_agreement_bits(
    model: &PolynomialModel,
    init: &InitialConditions,
    iterations: usize,
    bits: usize,
    other_bits: usize,
) -> Result<Vec<usize>, SimError> {
    let a = simulate_wide(model, init, iterations, bits)?;
    let b = simulate_wide(model, init, iterations, other_bits)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| {
            // largest k with agreement, found by bisection on the monotone test
            let (mut lo, mut hi) = (0usize, bits);
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if agree_to_bits(x, y, mid) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            lo
        })
        .collect())
}

fn check_plan(model: &PolynomialModel, plan: &EvaluationPlan) -> Result<(), SimError> {
    let mismatch = || SimError::PlanMismatch {
        plan: plan.id().to_string(),
        model: model.name().to_string(),
    };
    if plan.model_name() != model.name() || plan.len() != model.terms().len() {
        return Err(mismatch());
    }
    if canonicalize(plan) != canonicalize_model(model) {
        return Err(mismatch());
    }
    Ok(())
}

/// Validates the seed and tabulates `u_0 ..= u_{last}` in binary64.
fn prepare(
    model: &PolynomialModel,
    init: &InitialConditions,
    iterations: usize,
) -> Result<Vec<f64>, SimError> {
    if iterations == 0 {
        return Err(SimError::ZeroIterations);
    }
    if init.y_seed.len() != model.n_y() {
        return Err(SimError::SeedLength {
            expected: model.n_y(),
            got: init.y_seed.len(),
        });
    }
    if !model.has_input() {
        return Ok(Vec::new());
    }
    if model.n_u() + 1 > model.n_y().max(1) {
        return Err(SimError::InputBeforeStart { lag: model.n_u() });
    }
    let last = model.n_y().max(1) - 1 + iterations - 1;
    (0..=last)
        .map(|n| init.u_signal.value(n).map_err(SimError::from))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run<A, L, F>(
    model: &PolynomialModel,
    plan: &EvaluationPlan,
    arith: &A,
    seed: &[f64],
    inputs: &[f64],
    iterations: usize,
    lift: L,
    finite: F,
) -> Result<Vec<A::Value>, (Vec<A::Value>, usize)>
where
    A: Arithmetic,
    L: Fn(f64) -> A::Value,
    F: Fn(&A::Value) -> bool,
{
    let start = model.n_y().max(1);
    let mut values: Vec<A::Value> = Vec::with_capacity(seed.len() + iterations);
    values.extend(seed.iter().map(|&x| lift(x)));
    let lifted_inputs: Vec<A::Value> = inputs.iter().map(|&x| lift(x)).collect();
    let mut stack = Vec::with_capacity(16);
    // a model with no output regressors still produces `iterations` values
    let offset = start - seed.len();
    for k in start..start + iterations {
        let next = plan.evaluate(arith, &mut stack, |r| match r.kind {
            RegressorKind::Output => values[k - 1 - r.lag - offset].clone(),
            RegressorKind::Input => lifted_inputs[k - 1 - r.lag].clone(),
        });
        if !finite(&next) {
            return Err((values, k - offset));
        }
        values.push(next);
    }
    Ok(values)
}
