//! Line-oriented model-file parser.
//!
//! ```text
//! # comment
//! name duffing_ueda
//! input cosine A=11 Ts=pi/60
//! ny 3
//! -0.0048196 * y[0] * y[0] * y[0]
//! ```

use super::{
    validate, Coefficient, DeclaredOrders, InputSignal, ModelError, PolynomialModel, Regressor,
    Term,
};

/// Parses and validates a model file. Term order and factor order are kept
/// as written.
pub fn parse_model(text: &str) -> Result<PolynomialModel, ModelError> {
    let mut name: Option<String> = None;
    let mut input = InputSignal::None;
    let mut declared = DeclaredOrders::default();
    let mut terms = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        let syntax = |column: usize, message: String| ModelError::Syntax {
            line: line_no,
            column: column + 1,
            message,
        };

        let (keyword, rest) = match trimmed.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (trimmed, ""),
        };
        let rest_col = indent + trimmed.len() - rest.len();
        match keyword {
            "name" => {
                if rest.is_empty() {
                    return Err(syntax(rest_col, "expected a model name".into()));
                }
                if let Some(first) = name.take() {
                    return Err(ModelError::DuplicateName {
                        line: line_no,
                        first,
                        second: rest.to_string(),
                    });
                }
                name = Some(rest.to_string());
            }
            "input" => {
                input = parse_input_signal(rest).map_err(|m| syntax(rest_col, m))?;
            }
            "ny" | "nu" | "degree" => {
                let v: usize = rest
                    .parse()
                    .map_err(|_| syntax(rest_col, format!("expected an integer after `{keyword}`")))?;
                match keyword {
                    "ny" => declared.n_y = Some(v),
                    "nu" => declared.n_u = Some(v),
                    _ => declared.degree = Some(v),
                }
            }
            _ => terms.push(parse_term(line, &syntax)?),
        }
    }

    let name = name.ok_or(ModelError::Syntax {
        line: 1,
        column: 1,
        message: "missing `name` header".into(),
    })?;
    let model = PolynomialModel::with_declared(name, input, terms, declared);
    let diagnostics = validate(&model);
    if !diagnostics.is_empty() {
        return Err(ModelError::Invalid {
            name: model.name().to_string(),
            diagnostics,
        });
    }
    Ok(model)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn parse_term(
    line: &str,
    syntax: &dyn Fn(usize, String) -> ModelError,
) -> Result<Term, ModelError> {
    let mut offset = 0;
    let mut coefficient = None;
    let mut regressors = Vec::new();
    for (i, piece) in line.split('*').enumerate() {
        let lead = piece.len() - piece.trim_start().len();
        let col = offset + lead;
        let token = piece.trim();
        offset += piece.len() + 1;
        if token.is_empty() {
            return Err(syntax(col, "empty factor".into()));
        }
        if i == 0 {
            coefficient = Some(
                Coefficient::parse(token)
                    .map_err(|_| syntax(col, format!("expected a decimal coefficient, found `{token}`")))?,
            );
        } else {
            regressors.push(parse_regressor(token).map_err(|m| syntax(col, m))?);
        }
    }
    Ok(Term::new(coefficient.expect("first piece always present"), regressors))
}

/// Parses `y[3]`, `u[0]` (also the compact `y3`, `u0`).
pub(crate) fn parse_regressor(token: &str) -> Result<Regressor, String> {
    let mut chars = token.chars();
    let head = chars.next().ok_or_else(|| "empty regressor".to_string())?;
    let body = chars.as_str();
    let lag_text = body
        .strip_prefix('[')
        .and_then(|b| b.strip_suffix(']'))
        .unwrap_or(body)
        .trim();
    let lag = || -> Result<usize, String> {
        lag_text
            .parse()
            .map_err(|_| format!("invalid lag in `{token}`"))
    };
    match head {
        'y' => Ok(Regressor::output(lag()?)),
        'u' => Ok(Regressor::input(lag()?)),
        'e' => Err(format!(
            "noise regressor `{token}` is not supported; free-run simulation is deterministic"
        )),
        _ => Err(format!("unknown regressor `{token}`")),
    }
}

/// Parses an input-signal description:
/// `none`, `cosine A=<dec> Ts=<step>` or `samples <v> <v> ...`.
pub fn parse_input_signal(text: &str) -> Result<InputSignal, String> {
    let mut words = text.split_whitespace();
    match words.next() {
        Some("none") => {
            if words.next().is_some() {
                return Err("`input none` takes no arguments".into());
            }
            Ok(InputSignal::None)
        }
        Some("cosine") => {
            let mut amplitude = None;
            let mut step = None;
            for w in words {
                match w.split_once('=') {
                    Some(("A", v)) => {
                        amplitude = Some(
                            Coefficient::parse(v).map_err(|_| format!("invalid amplitude `{v}`"))?,
                        )
                    }
                    Some(("Ts", v)) => step = Some((parse_time_step(v)?, v.to_string())),
                    _ => return Err(format!("unexpected cosine parameter `{w}`")),
                }
            }
            let amplitude = amplitude.ok_or("cosine input needs `A=<amplitude>`")?;
            let (step, step_text) = step.ok_or("cosine input needs `Ts=<step>`")?;
            Ok(InputSignal::Cosine {
                amplitude,
                step,
                step_text,
            })
        }
        Some("samples") => {
            let values = words
                .map(|w| {
                    w.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or(format!("invalid sample `{w}`"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(InputSignal::Samples(values))
        }
        Some(other) => Err(format!("unknown input kind `{other}`")),
        None => Err("expected `none`, `cosine` or `samples`".into()),
    }
}

/// Parses a sampling step: a decimal, `pi`, or `pi/<int>`. The division is a
/// single binary64 operation on the rounded value of pi.
pub fn parse_time_step(text: &str) -> Result<f64, String> {
    let text = text.trim();
    if text == "pi" {
        return Ok(std::f64::consts::PI);
    }
    if let Some(div) = text.strip_prefix("pi/") {
        let d: u32 = div
            .parse()
            .map_err(|_| format!("invalid divisor in `{text}`"))?;
        if d == 0 {
            return Err("division by zero in time step".into());
        }
        return Ok(std::f64::consts::PI / f64::from(d));
    }
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or(format!("invalid time step `{text}`"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Diagnostic, RegressorKind};

    #[test]
    fn identity_model() {
        let m = parse_model("name id\n1.0 * y[0]\n").unwrap();
        assert_eq!(m.terms().len(), 1);
        assert_eq!(m.n_y(), 1);
        assert_eq!(m.degree(), 1);
        assert!(!m.has_input());
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_model("name m\n1.0 * y[0] * q[1]\n").unwrap_err();
        match err {
            ModelError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_coefficient_is_syntax_error() {
        let err = parse_model("name m\n1.0x * y[0]\n").unwrap_err();
        assert!(matches!(err, ModelError::Syntax { line: 2, column: 1, .. }));
    }

    #[test]
    fn noise_terms_rejected() {
        let err = parse_model("name m\n0.5 * e[1]\n").unwrap_err();
        let ModelError::Syntax { message, .. } = err else {
            panic!("expected syntax error")
        };
        assert!(message.contains("noise"));
    }

    #[test]
    fn duplicate_name_rejected() {
        let err = parse_model("name a\nname b\n1 * y[0]\n").unwrap_err();
        assert_eq!(
            err,
            ModelError::DuplicateName {
                line: 2,
                first: "a".into(),
                second: "b".into()
            }
        );
    }

    #[test]
    fn declared_orders_are_checked() {
        let err = parse_model("name m\ndegree 2\n1 * y[0] * y[0] * y[0]\n").unwrap_err();
        assert_eq!(
            err,
            ModelError::Invalid {
                name: "m".into(),
                diagnostics: vec![Diagnostic::DegreeMismatch {
                    declared: 2,
                    actual: 3
                }]
            }
        );
    }

    #[test]
    fn constant_term_and_compact_regressors() {
        let m = parse_model("name m\n0.25\n2 * y1 * u0\n").unwrap();
        assert!(m.has_constant());
        assert_eq!(m.n_y(), 2);
        assert_eq!(m.n_u(), 0);
        assert_eq!(m.terms()[1].regressors[1].kind, RegressorKind::Input);
    }

    #[test]
    fn missing_name() {
        assert!(matches!(
            parse_model("1 * y[0]\n"),
            Err(ModelError::Syntax { .. })
        ));
    }

    #[test]
    fn input_headers() {
        let s = parse_input_signal("cosine A=11 Ts=pi/60").unwrap();
        let InputSignal::Cosine { amplitude, step, .. } = &s else {
            panic!()
        };
        assert_eq!(amplitude.value(), 11.0);
        assert_eq!(*step, std::f64::consts::PI / 60.0);
        assert_eq!(s.to_string(), "cosine A=11 Ts=pi/60");
        assert_eq!(
            parse_input_signal("samples 1 2.5").unwrap(),
            InputSignal::Samples(vec![1.0, 2.5])
        );
        assert!(parse_input_signal("cosine A=1").is_err());
        assert!(parse_input_signal("square").is_err());
        assert!(parse_time_step("pi/0").is_err());
    }
}
