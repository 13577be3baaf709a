use num_rational::BigRational;
use serde::Serialize;

use crate::model::{Coefficient, Regressor};

use super::tree::{Factor, FactorTree};

/// One step of a compiled plan, executed on a value stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Op {
    /// Push the coefficient of the given term.
    Coefficient(usize),
    Regressor(Regressor),
    /// Pop `right`, pop `left`, push `left * right`.
    Mul,
    /// Pop the term value, pop the running sum, push `sum + term`.
    Add,
}

/// Scalar arithmetic a plan can be executed in.
pub trait Arithmetic {
    type Value: Clone;

    fn coefficient(&self, c: &Coefficient) -> Self::Value;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
}

/// IEEE-754 binary64 with the default round-to-nearest-even mode. Each
/// operation is a single rounded `+` or `*`; Rust never contracts these
/// into fused multiply-adds.
#[derive(Debug, Clone, Copy, Default)]
pub struct Binary64;

impl Arithmetic for Binary64 {
    type Value = f64;

    #[inline]
    fn coefficient(&self, c: &Coefficient) -> f64 {
        c.value()
    }

    #[inline]
    fn add(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }

    #[inline]
    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a * b
    }
}

/// Exact rational arithmetic; coefficients take their decimal value.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactRational;

impl Arithmetic for ExactRational {
    type Value = BigRational;

    fn coefficient(&self, c: &Coefficient) -> BigRational {
        c.to_rational()
    }

    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }

    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
}

pub(crate) fn compile(trees: &[FactorTree], order: &[usize]) -> Vec<Op> {
    let mut ops = Vec::new();
    for (k, &t) in order.iter().enumerate() {
        emit(&trees[t], t, &mut ops);
        if k > 0 {
            ops.push(Op::Add);
        }
    }
    ops
}

fn emit(tree: &FactorTree, term: usize, ops: &mut Vec<Op>) {
    match tree {
        FactorTree::Leaf(Factor::Coefficient) => ops.push(Op::Coefficient(term)),
        FactorTree::Leaf(Factor::Regressor(r)) => ops.push(Op::Regressor(*r)),
        FactorTree::Product(l, r) => {
            emit(l, term, ops);
            emit(r, term, ops);
            ops.push(Op::Mul);
        }
    }
}

pub(crate) fn run<A, F>(
    schedule: &[Op],
    coefficients: &[Coefficient],
    arith: &A,
    stack: &mut Vec<A::Value>,
    mut regressor: F,
) -> A::Value
where
    A: Arithmetic,
    F: FnMut(Regressor) -> A::Value,
{
    stack.clear();
    for op in schedule {
        match *op {
            Op::Coefficient(t) => stack.push(arith.coefficient(&coefficients[t])),
            Op::Regressor(r) => stack.push(regressor(r)),
            Op::Mul | Op::Add => {
                let right = stack.pop().expect("compiled schedule is balanced");
                let left = stack.pop().expect("compiled schedule is balanced");
                stack.push(if *op == Op::Mul {
                    arith.mul(&left, &right)
                } else {
                    arith.add(&left, &right)
                });
            }
        }
    }
    debug_assert_eq!(stack.len(), 1);
    stack.pop().expect("plan has at least one term")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let y0 = Regressor::output(0);
        let trees = vec![
            FactorTree::left_fold(&[y0]),
            FactorTree::parse("c*(y0*y0)").unwrap(),
        ];
        let ops = compile(&trees, &[0, 1]);
        assert_eq!(
            ops,
            vec![
                Op::Coefficient(0),
                Op::Regressor(y0),
                Op::Mul,
                Op::Coefficient(1),
                Op::Regressor(y0),
                Op::Regressor(y0),
                Op::Mul,
                Op::Mul,
                Op::Add,
            ]
        );
    }

    #[test]
    fn groupings_round_differently() {
        let c = Coefficient::parse("0.1").unwrap();
        let x = 3.0_f64.sqrt();
        let trees_a = vec![FactorTree::parse("(c*y0)*y0").unwrap()];
        let trees_b = vec![FactorTree::parse("c*(y0*y0)").unwrap()];
        let mut stack = Vec::new();
        let a = run(&compile(&trees_a, &[0]), &[c.clone()], &Binary64, &mut stack, |_| x);
        let b = run(&compile(&trees_b, &[0]), &[c], &Binary64, &mut stack, |_| x);
        assert_eq!(a, (0.1 * x) * x);
        assert_eq!(b, 0.1 * (x * x));
    }
}
