//! Experiment files.
//!
//! ```text
//! # comment
//! model ../models/chua.model
//! seed 1 1 1 1
//! iters 3000
//! epsilon 0.001
//! ref_bits 256
//! verify_window 400
//! extension F = canonical
//! extension G = regroup(term=6, tree="(c*(y0*y0))*y1")
//! out ../out/chua
//! ```
//!
//! Relative paths resolve against the directory of the experiment file.
//! `input` is required when the model has input terms and overrides the
//! model file's `input` header.

use std::path::{Path, PathBuf};

use serde::Serialize;

use lbe_core::extension::{equivalent, parse_plan_spec, EvaluationPlan};
use lbe_core::lbe::DEFAULT_EPSILON;
use lbe_core::model::{parse_input_signal, parse_model, InputSignal, PolynomialModel};
use lbe_core::simulator::{InitialConditions, MAX_REFERENCE_BITS, MIN_REFERENCE_BITS};

use crate::CliError;

pub const DEFAULT_REF_BITS: usize = 256;

/// Raw key/value content of an experiment file.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ExperimentFile {
    pub model: Option<String>,
    pub input: Option<String>,
    pub seed: Option<Vec<f64>>,
    pub iters: Option<usize>,
    pub epsilon: Option<f64>,
    pub ref_bits: Option<usize>,
    pub verify_window: Option<usize>,
    /// `(id, plan spec)` in file order.
    pub extensions: Vec<(String, String)>,
    pub out: Option<String>,
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub path: PathBuf,
    pub text: String,
    pub model_path: PathBuf,
    pub model: PolynomialModel,
    pub init: InitialConditions,
    pub plans: Vec<EvaluationPlan>,
    pub iterations: usize,
    pub epsilon: f64,
    pub ref_bits: usize,
    pub verify_window: Option<usize>,
    pub out: PathBuf,
}

/// Values given on the command line; each replaces the file's setting.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub iters: Option<usize>,
    pub epsilon: Option<f64>,
    pub ref_bits: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn parse_experiment_text(text: &str) -> Result<ExperimentFile, String> {
    let mut file = ExperimentFile::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| format!("line {}: {msg}", idx + 1);
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        if rest.is_empty() {
            return Err(at(format!("`{key}` needs a value")));
        }
        let seen = match key {
            "model" => file.model.replace(rest.to_string()).is_some(),
            "input" => file.input.replace(rest.to_string()).is_some(),
            "out" => file.out.replace(rest.to_string()).is_some(),
            "seed" => {
                let values = rest
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| at(format!("seed value `{s}`: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                file.seed.replace(values).is_some()
            }
            "iters" => file.iters.replace(parse_num(rest).map_err(at)?).is_some(),
            "epsilon" => file.epsilon.replace(parse_num(rest).map_err(at)?).is_some(),
            "ref_bits" => file.ref_bits.replace(parse_num(rest).map_err(at)?).is_some(),
            "verify_window" => file.verify_window.replace(parse_num(rest).map_err(at)?).is_some(),
            "extension" => {
                let (id, spec) = rest
                    .split_once('=')
                    .ok_or_else(|| at("expected `extension <id> = <plan>`".into()))?;
                let id = id.trim();
                if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                    return Err(at(format!("bad extension id `{id}`")));
                }
                if file.extensions.iter().any(|(x, _)| x == id) {
                    return Err(at(format!("extension `{id}` defined twice")));
                }
                file.extensions.push((id.to_string(), spec.trim().to_string()));
                false
            }
            other => return Err(at(format!("unknown key `{other}`"))),
        };
        if seen {
            return Err(at(format!("`{key}` given twice")));
        }
    }
    Ok(file)
}

fn parse_num<T: std::str::FromStr>(text: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(|e| format!("`{text}`: {e}"))
}

pub fn load_experiment(path: &Path, overrides: &Overrides) -> Result<Experiment, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Spec(format!("cannot read experiment {}: {e}", path.display())))?;
    let spec_err = |msg: String| CliError::Spec(format!("{}: {msg}", path.display()));
    let file = parse_experiment_text(&text).map_err(spec_err)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());

    let model_rel = file.model.as_deref().ok_or_else(|| spec_err("missing `model`".into()))?;
    let model_path = base.join(model_rel);
    let model_text = std::fs::read_to_string(&model_path)
        .map_err(|e| CliError::Spec(format!("cannot read model file {}: {e}", model_path.display())))?;
    let model = parse_model(&model_text).map_err(|e| CliError::Spec(format!("{}: {e}", model_path.display())))?;

    let signal = match &file.input {
        Some(t) => parse_input_signal(t).map_err(|e| spec_err(format!("input: {e}")))?,
        None if model.has_input() => {
            return Err(spec_err(format!("model `{}` has input terms; `input` is required", model.name())))
        }
        None => InputSignal::None,
    };
    let seed = file.seed.clone().ok_or_else(|| spec_err("missing `seed`".into()))?;
    if seed.len() != model.n_y() {
        return Err(spec_err(format!(
            "seed has {} values but model `{}` needs {}",
            seed.len(),
            model.name(),
            model.n_y()
        )));
    }

    let iterations = overrides.iters.or(file.iters).ok_or_else(|| spec_err("missing `iters`".into()))?;
    if iterations == 0 {
        return Err(spec_err("iters must be at least 1".into()));
    }
    let epsilon = overrides.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON);
    if !(epsilon > 0.0) {
        return Err(spec_err(format!("epsilon must be positive, got {epsilon}")));
    }
    let ref_bits = overrides.ref_bits.or(file.ref_bits).unwrap_or(DEFAULT_REF_BITS);
    if !(MIN_REFERENCE_BITS..=MAX_REFERENCE_BITS).contains(&ref_bits) {
        return Err(spec_err(format!(
            "ref_bits {ref_bits} outside [{MIN_REFERENCE_BITS}, {MAX_REFERENCE_BITS}]"
        )));
    }

    let plans = build_plans(&model, &file.extensions).map_err(spec_err)?;
    let out = match (&overrides.out, &file.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("lbe-out").join(&name),
    };

    Ok(Experiment {
        name,
        path: path.to_path_buf(),
        text,
        model_path,
        model,
        init: InitialConditions::new(seed, signal),
        plans,
        iterations,
        epsilon,
        ref_bits,
        verify_window: file.verify_window,
        out,
    })
}

/// Builds the plans and checks that they are mutually equivalent and
/// pairwise distinct.
pub fn build_plans(model: &PolynomialModel, extensions: &[(String, String)]) -> Result<Vec<EvaluationPlan>, String> {
    if extensions.len() < 2 {
        return Err(format!("need at least 2 extensions, got {}", extensions.len()));
    }
    let plans = extensions
        .iter()
        .map(|(id, spec)| parse_plan_spec(model, id, spec).map_err(|e| format!("extension `{id}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, a) in plans.iter().enumerate() {
        for b in &plans[i + 1..] {
            if !equivalent(a, b).map_err(|e| e.to_string())? {
                return Err(format!("extensions `{}` and `{}` are not equivalent", a.id(), b.id()));
            }
            if a.is_structurally_identical(b) {
                return Err(format!(
                    "extensions `{}` and `{}` are the same plan and cannot disagree",
                    a.id(),
                    b.id()
                ));
            }
        }
    }
    Ok(plans)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_and_comments() {
        let f = parse_experiment_text(
            "model m.model # trailing\nseed 1, 2\niters 5\nextension A = canonical\nextension B = reverse\n",
        )
        .unwrap();
        assert_eq!(f.model.as_deref(), Some("m.model"));
        assert_eq!(f.seed, Some(vec![1.0, 2.0]));
        assert_eq!(f.iters, Some(5));
        assert_eq!(f.extensions.len(), 2);
    }

    #[test]
    fn rejects_repeats_and_unknown_keys() {
        assert!(parse_experiment_text("iters 1\niters 2\n").unwrap_err().contains("line 2"));
        assert!(parse_experiment_text("bogus 1\n").unwrap_err().contains("unknown key"));
        assert!(parse_experiment_text("extension A = canonical\nextension A = reverse\n")
            .unwrap_err()
            .contains("twice"));
    }

    #[test]
    fn identical_plans_are_rejected() {
        let m = lbe_core::bundled::chua();
        let ext = vec![("A".to_string(), "canonical".to_string()), ("B".to_string(), "canonical".to_string())];
        assert!(build_plans(&m, &ext).unwrap_err().contains("same plan"));
        let one = vec![("A".to_string(), "canonical".to_string())];
        assert!(build_plans(&m, &one).is_err());
    }
}
