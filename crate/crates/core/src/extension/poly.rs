//! Canonical sum-of-monomials form with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::model::{PolynomialModel, Regressor};

use super::tree::{Factor, FactorTree};

/// Sorted multiset of regressors; the empty monomial is the constant.
pub type Monomial = Vec<Regressor>;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add_monomial(&mut self, mut monomial: Monomial, coefficient: BigRational) {
        monomial.sort();
        let sum = match self.terms.remove(&monomial) {
            Some(existing) => existing + coefficient,
            None => coefficient,
        };
        // zero coefficients are never stored, so map equality is polynomial equality
        if !sum.is_zero() {
            self.terms.insert(monomial, sum);
        }
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, BigRational> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (mono, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for r in mono {
                write!(f, "*{r}")?;
            }
        }
        Ok(())
    }
}

/// Expands one term tree into `coefficient * monomial`.
pub(crate) fn expand_tree(tree: &FactorTree, coefficient: &BigRational) -> (BigRational, Monomial) {
    let mut c = BigRational::one();
    let mut mono = Vec::new();
    for leaf in tree.leaves() {
        match leaf {
            Factor::Coefficient => c *= coefficient,
            Factor::Regressor(r) => mono.push(r),
        }
    }
    mono.sort();
    (c, mono)
}

/// Canonical polynomial of a model as written.
pub fn canonicalize_model(model: &PolynomialModel) -> Polynomial {
    let mut p = Polynomial::zero();
    for t in model.terms() {
        p.add_monomial(t.regressors.clone(), t.coefficient.to_rational());
    }
    p
}
