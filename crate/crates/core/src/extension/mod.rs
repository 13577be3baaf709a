//! Natural interval extensions as explicit evaluation plans.
//!
//! A plan fixes every floating-point operation used to evaluate a model:
//! the multiplication tree of each term and the order in which term values
//! are accumulated (strictly left to right). Two plans of one model compute
//! the same polynomial in exact arithmetic but generally round differently.
//!
//! Equivalence is decided symbolically: both plans are expanded into a
//! sum of monomials with exact rational coefficients and compared.

mod eval;
mod poly;
mod spec;
mod tree;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Coefficient, PolynomialModel};

pub use eval::{Arithmetic, Binary64, ExactRational, Op};
pub use poly::{canonicalize_model, Monomial, Polynomial};
pub use spec::parse_plan_spec;
pub use tree::{Factor, FactorTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtensionError {
    #[error("plans belong to different models (`{0}` and `{1}`)")]
    ModelMismatch(String, String),
    #[error("term index {index} out of range for a model with {len} terms")]
    TermOutOfRange { index: usize, len: usize },
    #[error("grouping `{grouping}` does not use the factors of term {index} exactly once")]
    LeafMismatch { index: usize, grouping: String },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("plans `{0}` and `{1}` are structurally identical")]
    IdenticalPlans(String, String),
    #[error("plans `{0}` and `{1}` are not algebraically equivalent")]
    NotEquivalent(String, String),
    #[error("invalid plan spec: {0}")]
    Spec(String),
}

/// One fully ordered evaluation of a model.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationPlan {
    id: String,
    model_name: String,
    coefficients: Vec<Coefficient>,
    trees: Vec<FactorTree>,
    term_order: Vec<usize>,
    #[serde(skip)]
    schedule: Vec<Op>,
}

impl EvaluationPlan {
    fn build(
        id: String,
        model_name: String,
        coefficients: Vec<Coefficient>,
        trees: Vec<FactorTree>,
        term_order: Vec<usize>,
    ) -> Self {
        let schedule = eval::compile(&trees, &term_order);
        Self {
            id,
            model_name,
            coefficients,
            trees,
            term_order,
            schedule,
        }
    }

    fn rebuilt(&self, trees: Vec<FactorTree>, term_order: Vec<usize>) -> Self {
        Self::build(
            self.id.clone(),
            self.model_name.clone(),
            self.coefficients.clone(),
            trees,
            term_order,
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn term_order(&self) -> &[usize] {
        &self.term_order
    }

    pub fn trees(&self) -> &[FactorTree] {
        &self.trees
    }

    pub fn coefficients(&self) -> &[Coefficient] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// The operation sequence executed for one evaluation.
    pub fn schedule(&self) -> &[Op] {
        &self.schedule
    }

    /// Replaces one coefficient. The result generally computes a different
    /// function; used to probe the equivalence check.
    pub fn with_coefficient(&self, term: usize, coefficient: Coefficient) -> Result<Self, ExtensionError> {
        self.check_term(term)?;
        let mut coefficients = self.coefficients.clone();
        coefficients[term] = coefficient;
        Ok(Self::build(
            self.id.clone(),
            self.model_name.clone(),
            coefficients,
            self.trees.clone(),
            self.term_order.clone(),
        ))
    }

    /// Same trees, same accumulation order, same coefficients. The id is
    /// not compared.
    pub fn is_structurally_identical(&self, other: &EvaluationPlan) -> bool {
        self.model_name == other.model_name
            && self.term_order == other.term_order
            && self.trees == other.trees
            && self.coefficients == other.coefficients
    }

    /// Evaluates the plan once. `regressor` supplies the value of each
    /// lagged signal.
    pub fn evaluate<A, F>(&self, arith: &A, stack: &mut Vec<A::Value>, regressor: F) -> A::Value
    where
        A: Arithmetic,
        F: FnMut(crate::model::Regressor) -> A::Value,
    {
        eval::run(&self.schedule, &self.coefficients, arith, stack, regressor)
    }

    fn check_term(&self, index: usize) -> Result<(), ExtensionError> {
        if index >= self.trees.len() {
            return Err(ExtensionError::TermOutOfRange {
                index,
                len: self.trees.len(),
            });
        }
        Ok(())
    }
}

/// Term order as written, each term multiplied left to right starting from
/// the coefficient.
pub fn canonical_plan(model: &PolynomialModel) -> EvaluationPlan {
    let terms = model.terms();
    EvaluationPlan::build(
        "canonical".to_string(),
        model.name().to_string(),
        terms.iter().map(|t| t.coefficient.clone()).collect(),
        terms.iter().map(|t| FactorTree::left_fold(&t.regressors)).collect(),
        (0..terms.len()).collect(),
    )
}

/// Replaces the multiplication tree of term `term` (0-based, model order).
pub fn rewrite_grouping(
    plan: &EvaluationPlan,
    term: usize,
    grouping: &FactorTree,
) -> Result<EvaluationPlan, ExtensionError> {
    plan.check_term(term)?;
    if grouping.leaf_multiset() != plan.trees[term].leaf_multiset() {
        return Err(ExtensionError::LeafMismatch {
            index: term,
            grouping: grouping.to_string(),
        });
    }
    let mut trees = plan.trees.clone();
    trees[term] = grouping.clone();
    let rewritten = plan.rebuilt(trees, plan.term_order.clone());
    ensure_equivalent(plan, &rewritten)?;
    Ok(rewritten)
}

/// Reorders accumulation. `permutation[k]` is the position, in the current
/// accumulation order, of the term to add k-th.
pub fn permute_terms(plan: &EvaluationPlan, permutation: &[usize]) -> Result<EvaluationPlan, ExtensionError> {
    let n = plan.term_order.len();
    if permutation.len() != n {
        return Err(ExtensionError::InvalidPermutation(format!(
            "expected {n} entries, got {}",
            permutation.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in permutation {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(ExtensionError::InvalidPermutation(format!(
                "{permutation:?} is not a bijection on 0..{n}"
            )));
        }
    }
    let order = permutation.iter().map(|&p| plan.term_order[p]).collect();
    let permuted = plan.rebuilt(plan.trees.clone(), order);
    ensure_equivalent(plan, &permuted)?;
    Ok(permuted)
}

fn ensure_equivalent(a: &EvaluationPlan, b: &EvaluationPlan) -> Result<(), ExtensionError> {
    if equivalent(a, b)? {
        Ok(())
    } else {
        Err(ExtensionError::NotEquivalent(a.id.clone(), b.id.clone()))
    }
}

/// Exact expansion of a plan.
pub fn canonicalize(plan: &EvaluationPlan) -> Polynomial {
    let mut p = Polynomial::zero();
    for &t in &plan.term_order {
        let (c, mono) = poly::expand_tree(&plan.trees[t], &plan.coefficients[t].to_rational());
        p.add_monomial(mono, c);
    }
    p
}

/// True iff both plans expand to the same exact polynomial.
pub fn equivalent(a: &EvaluationPlan, b: &EvaluationPlan) -> Result<bool, ExtensionError> {
    if a.model_name != b.model_name {
        return Err(ExtensionError::ModelMismatch(
            a.model_name.clone(),
            b.model_name.clone(),
        ));
    }
    Ok(canonicalize(a) == canonicalize(b))
}

/// Two equivalent, structurally distinct plans.
#[derive(Debug, Clone)]
pub struct ExtensionPair {
    plan_a: EvaluationPlan,
    plan_b: EvaluationPlan,
}

impl ExtensionPair {
    pub fn new(plan_a: EvaluationPlan, plan_b: EvaluationPlan) -> Result<Self, ExtensionError> {
        if !equivalent(&plan_a, &plan_b)? {
            return Err(ExtensionError::NotEquivalent(
                plan_a.id.clone(),
                plan_b.id.clone(),
            ));
        }
        if plan_a.is_structurally_identical(&plan_b) {
            return Err(ExtensionError::IdenticalPlans(
                plan_a.id.clone(),
                plan_b.id.clone(),
            ));
        }
        Ok(Self { plan_a, plan_b })
    }

    pub fn plan_a(&self) -> &EvaluationPlan {
        &self.plan_a
    }

    pub fn plan_b(&self) -> &EvaluationPlan {
        &self.plan_b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::model::{parse_model, Regressor};

    fn duffing_g() -> EvaluationPlan {
        let m = bundled::duffing_ueda();
        let tree = FactorTree::parse("(c*(y0*y0))*y0").unwrap();
        rewrite_grouping(&canonical_plan(&m), 5, &tree).unwrap()
    }

    #[test]
    fn canonical_duffing_cubic_is_left_fold() {
        let plan = canonical_plan(&bundled::duffing_ueda());
        assert_eq!(plan.trees()[5], FactorTree::parse("((c*y0)*y0)*y0").unwrap());
        assert_eq!(plan.term_order(), &(0..9).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn canonical_chua_keeps_term_order() {
        let m = bundled::chua();
        let plan = canonical_plan(&m);
        assert_eq!(plan.len(), 17);
        let texts: Vec<_> = plan.coefficients().iter().map(|c| c.text().to_string()).collect();
        let written: Vec<_> = m.terms().iter().map(|t| t.coefficient.text().to_string()).collect();
        assert_eq!(texts, written);
    }

    #[test]
    fn single_term_plan() {
        let m = parse_model("name id\n1.0 * y[0]\n").unwrap();
        let plan = canonical_plan(&m);
        assert_eq!(plan.len(), 1);
        let regrouped = rewrite_grouping(&plan, 0, &FactorTree::parse("c*y0").unwrap()).unwrap();
        assert!(regrouped.is_structurally_identical(&plan));
        let swapped = permute_terms(&plan, &[0]).unwrap();
        assert!(swapped.is_structurally_identical(&plan));
    }

    #[test]
    fn duffing_pair_is_equivalent_and_distinct() {
        let f = canonical_plan(&bundled::duffing_ueda()).with_id("F");
        let g = duffing_g().with_id("G");
        assert!(equivalent(&f, &g).unwrap());
        assert!(!f.is_structurally_identical(&g));
        let pair = ExtensionPair::new(f.clone(), g).unwrap();
        assert_eq!(pair.plan_a().id(), "F");
        assert!(matches!(
            ExtensionPair::new(f.clone(), f.clone().with_id("F2")),
            Err(ExtensionError::IdenticalPlans(..))
        ));
    }

    #[test]
    fn leaf_mismatch_rejected() {
        let plan = canonical_plan(&bundled::duffing_ueda());
        let bad = FactorTree::parse("(c*(y0*y0))*y1").unwrap();
        assert!(matches!(
            rewrite_grouping(&plan, 5, &bad),
            Err(ExtensionError::LeafMismatch { index: 5, .. })
        ));
        assert!(matches!(
            rewrite_grouping(&plan, 9, &bad),
            Err(ExtensionError::TermOutOfRange { index: 9, len: 9 })
        ));
    }

    #[test]
    fn permutations() {
        let plan = canonical_plan(&bundled::duffing_ueda());
        let identity: Vec<usize> = (0..9).collect();
        assert!(permute_terms(&plan, &identity)
            .unwrap()
            .is_structurally_identical(&plan));
        let reversed: Vec<usize> = (0..9).rev().collect();
        let r = permute_terms(&plan, &reversed).unwrap();
        assert!(!r.is_structurally_identical(&plan));
        assert!(equivalent(&plan, &r).unwrap());
        assert!(permute_terms(&plan, &[0, 1]).is_err());
        assert!(permute_terms(&plan, &[0, 0, 1, 2, 3, 4, 5, 6, 7]).is_err());
        assert!(permute_terms(&plan, &[0, 1, 2, 3, 4, 5, 6, 7, 9]).is_err());
    }

    #[test]
    fn different_models_are_an_error() {
        let a = canonical_plan(&bundled::duffing_ueda());
        let b = canonical_plan(&bundled::chua());
        assert_eq!(
            equivalent(&a, &b),
            Err(ExtensionError::ModelMismatch("duffing_ueda".into(), "chua".into()))
        );
    }

    #[test]
    fn perturbed_coefficient_is_not_equivalent() {
        let a = canonical_plan(&bundled::duffing_ueda());
        let b = a
            .with_coefficient(0, Coefficient::parse("2.157900000001").unwrap())
            .unwrap();
        assert!(!equivalent(&a, &b).unwrap());
        let diff: Vec<_> = canonicalize(&a)
            .terms()
            .iter()
            .filter(|(k, v)| canonicalize(&b).terms().get(*k) != Some(v))
            .map(|(k, _)| k.clone())
            .collect();
        assert_eq!(diff, vec![vec![Regressor::output(0)]]);
    }

    #[test]
    fn plan_expansion_matches_model() {
        for m in [bundled::duffing_ueda(), bundled::chua()] {
            assert_eq!(canonicalize(&canonical_plan(&m)), canonicalize_model(&m));
        }
    }

    #[test]
    fn logistic_forms_share_a_polynomial() {
        let a = parse_model(include_str!("../../../../models/logistic_expanded.model")).unwrap();
        let b = parse_model(include_str!("../../../../models/logistic_factored.model")).unwrap();
        assert_eq!(canonicalize_model(&a), canonicalize_model(&b));
        assert!(equivalent(&canonical_plan(&a), &canonical_plan(&b)).unwrap());
    }
}
