//! Textual plan descriptions used by experiment files.
//!
//! A spec is a `;`-separated list of steps applied to the canonical plan:
//!
//! ```text
//! canonical
//! regroup(term=6, tree="(c*(y0*y0))*y1")
//! permute(order="9 8 7 6 5 4 3 2 1")
//! reverse
//! ```
//!
//! Term numbers are 1-based, counted in model-file order.

use crate::model::PolynomialModel;

use super::{canonical_plan, permute_terms, rewrite_grouping, EvaluationPlan, ExtensionError, FactorTree};

pub fn parse_plan_spec(
    model: &PolynomialModel,
    id: &str,
    text: &str,
) -> Result<EvaluationPlan, ExtensionError> {
    let mut plan = canonical_plan(model).with_id(id);
    for step in split_steps(text)? {
        let (name, args) = parse_call(&step)?;
        plan = match name.as_str() {
            "canonical" => {
                expect_no_args(&name, &args)?;
                plan
            }
            "reverse" => {
                expect_no_args(&name, &args)?;
                let n = plan.len();
                permute_terms(&plan, &(0..n).rev().collect::<Vec<_>>())?
            }
            "regroup" => {
                let term = term_number(arg(&args, "term")?, plan.len())?;
                let tree = FactorTree::parse(arg(&args, "tree")?)
                    .map_err(|e| ExtensionError::Spec(format!("tree: {e}")))?;
                rewrite_grouping(&plan, term, &tree)?
            }
            "permute" => {
                let order = arg(&args, "order")?
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| term_number(s, plan.len()))
                    .collect::<Result<Vec<_>, _>>()?;
                // `order` names terms, so map each to its current position
                let positions = order
                    .iter()
                    .map(|t| {
                        plan.term_order()
                            .iter()
                            .position(|x| x == t)
                            .expect("term number checked")
                    })
                    .collect::<Vec<_>>();
                permute_terms(&plan, &positions)?
            }
            other => return Err(ExtensionError::Spec(format!("unknown step `{other}`"))),
        };
    }
    Ok(plan)
}

fn spec_err(msg: impl Into<String>) -> ExtensionError {
    ExtensionError::Spec(msg.into())
}

fn split_steps(text: &str) -> Result<Vec<String>, ExtensionError> {
    let mut steps = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for ch in text.chars() {
        match ch {
            '"' => {
                quoted = !quoted;
                cur.push(ch);
            }
            ';' if !quoted => steps.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    if quoted {
        return Err(spec_err("unterminated string"));
    }
    steps.push(cur);
    let steps: Vec<String> = steps
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if steps.is_empty() {
        return Err(spec_err("empty plan spec"));
    }
    Ok(steps)
}

fn parse_call(step: &str) -> Result<(String, Vec<(String, String)>), ExtensionError> {
    let Some(open) = step.find('(') else {
        return Ok((step.to_string(), Vec::new()));
    };
    let name = step[..open].trim().to_string();
    let body = step[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| spec_err(format!("missing `)` in `{step}`")))?;
    let mut args = Vec::new();
    let mut rest = body.trim();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| spec_err(format!("expected key=value in `{step}`")))?;
        let key = rest[..eq].trim().to_string();
        let after = rest[eq + 1..].trim_start();
        let (value, remainder) = if let Some(q) = after.strip_prefix('"') {
            let end = q
                .find('"')
                .ok_or_else(|| spec_err("unterminated string"))?;
            (q[..end].to_string(), &q[end + 1..])
        } else {
            let end = after.find(',').unwrap_or(after.len());
            (after[..end].trim().to_string(), &after[end..])
        };
        args.push((key, value));
        rest = remainder.trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        } else if !rest.is_empty() {
            return Err(spec_err(format!("expected `,` in `{step}`")));
        }
    }
    Ok((name, args))
}

fn expect_no_args(name: &str, args: &[(String, String)]) -> Result<(), ExtensionError> {
    if args.is_empty() {
        Ok(())
    } else {
        Err(spec_err(format!("`{name}` takes no arguments")))
    }
}

fn arg<'a>(args: &'a [(String, String)], key: &str) -> Result<&'a str, ExtensionError> {
    args.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| spec_err(format!("missing argument `{key}`")))
}

fn term_number(text: &str, len: usize) -> Result<usize, ExtensionError> {
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| spec_err(format!("invalid term number `{text}`")))?;
    if n == 0 || n > len {
        return Err(ExtensionError::TermOutOfRange {
            index: n,
            len,
        });
    }
    Ok(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::extension::equivalent;

    #[test]
    fn canonical_spec() {
        let m = bundled::chua();
        let p = parse_plan_spec(&m, "F", "canonical").unwrap();
        assert!(p.is_structurally_identical(&canonical_plan(&m)));
        assert_eq!(p.id(), "F");
    }

    #[test]
    fn regroup_spec_uses_one_based_terms() {
        let m = bundled::chua();
        let p = parse_plan_spec(&m, "G", r#"regroup(term=6, tree="(c*(y0*y0))*y1")"#).unwrap();
        assert_eq!(p.trees()[5].to_string(), "c*(y0*y0)*y1");
        assert!(equivalent(&p, &canonical_plan(&m)).unwrap());
    }

    #[test]
    fn chained_steps() {
        let m = bundled::duffing_ueda();
        let p = parse_plan_spec(
            &m,
            "H",
            r#"regroup(term=6, tree="c*(y0*y0)*y0"); permute(order="9 8 7 6 5 4 3 2 1")"#,
        )
        .unwrap();
        assert_eq!(p.term_order(), &[8, 7, 6, 5, 4, 3, 2, 1, 0]);
        let r = parse_plan_spec(&m, "R", "reverse").unwrap();
        assert_eq!(r.term_order(), p.term_order());
    }

    #[test]
    fn errors() {
        let m = bundled::duffing_ueda();
        assert!(parse_plan_spec(&m, "x", "").is_err());
        assert!(parse_plan_spec(&m, "x", "shuffle").is_err());
        assert!(parse_plan_spec(&m, "x", "regroup(term=0, tree=\"c*y0\")").is_err());
        assert!(parse_plan_spec(&m, "x", "regroup(term=1)").is_err());
        assert!(parse_plan_spec(&m, "x", "regroup(term=1, tree=\"c*y0").is_err());
        assert!(parse_plan_spec(&m, "x", "reverse(now=1)").is_err());
        assert!(matches!(
            parse_plan_spec(&m, "x", "permute(order=\"1 2\")"),
            Err(ExtensionError::InvalidPermutation(_))
        ));
    }
}
