//! Polynomial NARMAX models, their regressors and exogenous input signals.
//!
//! A model predicts `y[n+1]` as a sum of terms, each a decimal coefficient
//! times a product of lagged outputs `y[k]` (meaning `y_{n-k}`) and lagged
//! inputs `u[k]` (meaning `u_{n-k}`). Term order and factor order are kept
//! exactly as written, since both decide the floating-point evaluation order
//! of the canonical plan.

pub(crate) mod parse;

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

pub use parse::{parse_input_signal, parse_model, parse_time_step};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("model `{name}` is invalid: {}", join_diagnostics(.diagnostics))]
    Invalid {
        name: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("line {line}: model name declared twice (`{first}` and `{second}`)")]
    DuplicateName {
        line: usize,
        first: String,
        second: String,
    },
    #[error("invalid decimal literal `{0}`")]
    BadDecimal(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InputError {
    #[error("input signal queried but the signal is `none`")]
    NoSignal,
    #[error("input sample {index} requested but only {len} samples are available")]
    OutOfRange { index: usize, len: usize },
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RegressorKind {
    Output,
    Input,
}

/// A lagged signal value. `lag` counts steps back from the current index
/// `n` when producing `y[n+1]`, so `Output` with lag 0 is `y_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Regressor {
    pub kind: RegressorKind,
    pub lag: usize,
}

impl Regressor {
    pub const fn output(lag: usize) -> Self {
        Self {
            kind: RegressorKind::Output,
            lag,
        }
    }

    pub const fn input(lag: usize) -> Self {
        Self {
            kind: RegressorKind::Input,
            lag,
        }
    }
}

impl fmt::Display for Regressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RegressorKind::Output => write!(f, "y[{}]", self.lag),
            RegressorKind::Input => write!(f, "u[{}]", self.lag),
        }
    }
}

/// A coefficient as written in the model file together with the nearest
/// binary64 value. All floating-point arithmetic uses `value`; exact
/// algebra uses the decimal text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    text: String,
    value: f64,
}

impl Coefficient {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let text = text.trim();
        decimal_to_rational(text)?;
        let value = f64::from_str(text).map_err(|_| ModelError::BadDecimal(text.to_string()))?;
        if !value.is_finite() {
            return Err(ModelError::BadDecimal(text.to_string()));
        }
        Ok(Self {
            text: text.to_string(),
            value,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Exact rational value of the decimal literal.
    pub fn to_rational(&self) -> BigRational {
        decimal_to_rational(&self.text).expect("validated at construction")
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Parses `[+-]digits[.digits][(e|E)[+-]digits]` into an exact rational.
pub fn decimal_to_rational(text: &str) -> Result<BigRational, ModelError> {
    let bad = || ModelError::BadDecimal(text.to_string());
    let (negative, body) = match text.as_bytes().first() {
        Some(b'-') => (true, &text[1..]),
        Some(b'+') => (false, &text[1..]),
        _ => (false, text),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = body[pos + 1..].parse().map_err(|_| bad())?;
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let scale = exponent - frac_part.len() as i64;
    if scale.unsigned_abs() > 10_000 {
        return Err(bad());
    }
    let ten = BigInt::from(10u8);
    let power = num_traits::pow(ten, scale.unsigned_abs() as usize);
    let mut r = if scale >= 0 {
        BigRational::from_integer(numer * power)
    } else {
        BigRational::new(numer, power)
    };
    if negative {
        r = -r;
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub coefficient: Coefficient,
    pub regressors: Vec<Regressor>,
}

impl Term {
    pub fn new(coefficient: Coefficient, regressors: Vec<Regressor>) -> Self {
        Self {
            coefficient,
            regressors,
        }
    }

    pub fn degree(&self) -> usize {
        self.regressors.len()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coefficient)?;
        for r in &self.regressors {
            write!(f, " * {r}")?;
        }
        Ok(())
    }
}

/// Exogenous input `u_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InputSignal {
    None,
    /// `u_n = amplitude * cos(n * step)`; `step_text` keeps the written form
    /// (e.g. `pi/60`) for serialization.
    Cosine {
        amplitude: Coefficient,
        step: f64,
        step_text: String,
    },
    Samples(Vec<f64>),
}

impl InputSignal {
    pub fn cosine(amplitude: f64, step: f64) -> Self {
        let amp_text = format!("{amplitude:?}");
        Self::Cosine {
            amplitude: Coefficient::parse(&amp_text).expect("finite amplitude"),
            step,
            step_text: format!("{step:?}"),
        }
    }

    /// Value of the signal at iteration `n`.
    ///
    /// The cosine uses the portable `libm` implementation so orbits do not
    /// depend on the platform math library.
    pub fn value(&self, n: usize) -> Result<f64, InputError> {
        match self {
            InputSignal::None => Err(InputError::NoSignal),
            InputSignal::Cosine {
                amplitude, step, ..
            } => Ok(amplitude.value() * libm::cos(n as f64 * step)),
            InputSignal::Samples(values) => values.get(n).copied().ok_or(InputError::OutOfRange {
                index: n,
                len: values.len(),
            }),
        }
    }
}

impl fmt::Display for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSignal::None => write!(f, "none"),
            InputSignal::Cosine {
                amplitude,
                step_text,
                ..
            } => write!(f, "cosine A={amplitude} Ts={step_text}"),
            InputSignal::Samples(values) => {
                write!(f, "samples")?;
                for v in values {
                    write!(f, " {v:?}")?;
                }
                Ok(())
            }
        }
    }
}

/// Free function form of [`InputSignal::value`].
pub fn input_value(signal: &InputSignal, n: usize) -> Result<f64, InputError> {
    signal.value(n)
}

/// Orders a model file may declare in its header. They are checked against
/// the values recomputed from the terms, never trusted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DeclaredOrders {
    pub n_y: Option<usize>,
    pub n_u: Option<usize>,
    pub degree: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Diagnostic {
    NoTerms,
    DegreeMismatch { declared: usize, actual: usize },
    OutputOrderMismatch { declared: usize, actual: usize },
    InputOrderMismatch { declared: usize, actual: usize },
    EmptyName,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoTerms => write!(f, "model has no terms"),
            Diagnostic::DegreeMismatch { declared, actual } => {
                write!(f, "declared degree {declared} but terms have degree {actual}")
            }
            Diagnostic::OutputOrderMismatch { declared, actual } => {
                write!(f, "declared ny {declared} but terms need {actual}")
            }
            Diagnostic::InputOrderMismatch { declared, actual } => {
                write!(f, "declared nu {declared} but terms need {actual}")
            }
            Diagnostic::EmptyName => write!(f, "model name is empty"),
        }
    }
}

/// A polynomial NARMAX model.
///
/// `n_y` is the number of past outputs the recursion reads (largest output
/// lag plus one, i.e. the seed length). `n_u` is the largest input lag, and
/// is 0 for models without input terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialModel {
    name: String,
    input: InputSignal,
    terms: Vec<Term>,
    n_y: usize,
    n_u: usize,
    degree: usize,
    declared: DeclaredOrders,
}

impl PolynomialModel {
    /// Builds a model and recomputes its orders. No validation is applied;
    /// see [`validate`].
    pub fn new(name: impl Into<String>, input: InputSignal, terms: Vec<Term>) -> Self {
        Self::with_declared(name, input, terms, DeclaredOrders::default())
    }

    pub fn with_declared(
        name: impl Into<String>,
        input: InputSignal,
        terms: Vec<Term>,
        declared: DeclaredOrders,
    ) -> Self {
        let regs = || terms.iter().flat_map(|t| t.regressors.iter());
        let n_y = regs()
            .filter(|r| r.kind == RegressorKind::Output)
            .map(|r| r.lag + 1)
            .max()
            .unwrap_or(0);
        let n_u = regs()
            .filter(|r| r.kind == RegressorKind::Input)
            .map(|r| r.lag)
            .max()
            .unwrap_or(0);
        let degree = terms.iter().map(Term::degree).max().unwrap_or(0);
        Self {
            name: name.into(),
            input,
            terms,
            n_y,
            n_u,
            degree,
            declared,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Nominal input signal from the model header.
    pub fn input(&self) -> &InputSignal {
        &self.input
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn declared(&self) -> DeclaredOrders {
        self.declared
    }

    pub fn has_input(&self) -> bool {
        self.terms
            .iter()
            .flat_map(|t| &t.regressors)
            .any(|r| r.kind == RegressorKind::Input)
    }

    pub fn has_constant(&self) -> bool {
        self.terms.iter().any(|t| t.regressors.is_empty())
    }
}

/// Serializes to the model-file grammar accepted by [`parse_model`].
impl fmt::Display for PolynomialModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name {}", self.name)?;
        writeln!(f, "input {}", self.input)?;
        if let Some(v) = self.declared.n_y {
            writeln!(f, "ny {v}")?;
        }
        if let Some(v) = self.declared.n_u {
            writeln!(f, "nu {v}")?;
        }
        if let Some(v) = self.declared.degree {
            writeln!(f, "degree {v}")?;
        }
        for t in &self.terms {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Checks the model invariants, returning one diagnostic per violation.
pub fn validate(model: &PolynomialModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if model.name.trim().is_empty() {
        out.push(Diagnostic::EmptyName);
    }
    if model.terms.is_empty() {
        out.push(Diagnostic::NoTerms);
    }
    let d = model.declared;
    if let Some(declared) = d.degree.filter(|&v| v != model.degree) {
        out.push(Diagnostic::DegreeMismatch {
            declared,
            actual: model.degree,
        });
    }
    if let Some(declared) = d.n_y.filter(|&v| v != model.n_y) {
        out.push(Diagnostic::OutputOrderMismatch {
            declared,
            actual: model.n_y,
        });
    }
    if let Some(declared) = d.n_u.filter(|&v| v != model.n_u) {
        out.push(Diagnostic::InputOrderMismatch {
            declared,
            actual: model.n_u,
        });
    }
    out
}

/// Exact value of a binary64 number as a rational.
pub fn f64_to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        let r = decimal_to_rational("-0.0048196").unwrap();
        assert_eq!(r, BigRational::new((-48196).into(), 10_000_000.into()));
        let r = decimal_to_rational("1.1800").unwrap();
        assert_eq!(r, BigRational::new(118.into(), 100.into()));
        let r = decimal_to_rational("2.5e-3").unwrap();
        assert_eq!(r, BigRational::new(1.into(), 400.into()));
        assert!(decimal_to_rational("1.2.3").is_err());
        assert!(decimal_to_rational(".").is_err());
        assert!(decimal_to_rational("abc").is_err());
    }

    #[test]
    fn coefficient_text_round_trips_to_double() {
        for text in ["2.1579", "-1.3203", "0.16239", "1.1800", "-0.0048196"] {
            let c = Coefficient::parse(text).unwrap();
            assert_eq!(c.text(), text);
            assert_eq!(c.text().parse::<f64>().unwrap().to_bits(), c.value().to_bits());
        }
    }

    #[test]
    fn cosine_at_zero_is_amplitude() {
        let s = InputSignal::cosine(11.0, std::f64::consts::PI / 60.0);
        assert_eq!(s.value(0).unwrap(), 11.0);
    }

    #[test]
    fn cosine_near_quarter_turn_matches_high_precision_value() {
        // 11 * cos(30.0 * (pi/60)) evaluated with 50-digit arithmetic at the
        // exact binary64 argument, then rounded to binary64.
        let expected = 6.735557395310442e-16;
        let s = InputSignal::cosine(11.0, std::f64::consts::PI / 60.0);
        let got = s.value(30).unwrap();
        assert_ne!(got, 0.0);
        assert!((got - expected).abs() <= f64::EPSILON * expected.abs());
    }

    #[test]
    fn samples_and_errors() {
        let s = InputSignal::Samples(vec![1.0, 2.0]);
        assert_eq!(input_value(&s, 1), Ok(2.0));
        assert_eq!(
            input_value(&s, 2),
            Err(InputError::OutOfRange { index: 2, len: 2 })
        );
        assert_eq!(input_value(&InputSignal::None, 0), Err(InputError::NoSignal));
    }

    #[test]
    fn degree_mismatch_is_one_diagnostic() {
        let c = Coefficient::parse("1.0").unwrap();
        let cubic = Term::new(c, vec![Regressor::output(0); 3]);
        let model = PolynomialModel::with_declared(
            "m",
            InputSignal::None,
            vec![cubic],
            DeclaredOrders {
                degree: Some(2),
                ..Default::default()
            },
        );
        assert_eq!(
            validate(&model),
            vec![Diagnostic::DegreeMismatch {
                declared: 2,
                actual: 3
            }]
        );
    }

    #[test]
    fn empty_model_is_flagged() {
        let model = PolynomialModel::new("m", InputSignal::None, vec![]);
        assert_eq!(validate(&model), vec![Diagnostic::NoTerms]);
    }
}
