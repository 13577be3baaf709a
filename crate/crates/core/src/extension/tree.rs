use std::fmt;

use serde::Serialize;

use crate::model::{parse::parse_regressor, Regressor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Factor {
    Coefficient,
    Regressor(Regressor),
}

/// Binary multiplication tree over one term's factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum FactorTree {
    Leaf(Factor),
    Product(Box<FactorTree>, Box<FactorTree>),
}

impl FactorTree {
    /// `((c * r1) * r2) * ...`
    pub fn left_fold(regressors: &[Regressor]) -> Self {
        regressors
            .iter()
            .fold(FactorTree::Leaf(Factor::Coefficient), |acc, r| {
                FactorTree::product(acc, FactorTree::Leaf(Factor::Regressor(*r)))
            })
    }

    pub fn product(left: FactorTree, right: FactorTree) -> Self {
        FactorTree::Product(Box::new(left), Box::new(right))
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<Factor> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Factor>) {
        match self {
            FactorTree::Leaf(f) => out.push(*f),
            FactorTree::Product(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Sorted leaf multiset.
    pub fn leaf_multiset(&self) -> Vec<Factor> {
        let mut leaves = self.leaves();
        leaves.sort();
        leaves
    }

    /// Parses a grouping such as `(c*(y0*y0))*y1`. `*` is left-associative;
    /// leaves are `c`, `y<lag>`, `u<lag>` or the bracketed `y[<lag>]` form.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut p = TreeParser {
            src: text.as_bytes(),
            text,
            pos: 0,
        };
        let tree = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(format!("unexpected `{}` at offset {}", &text[p.pos..], p.pos));
        }
        Ok(tree)
    }
}

impl fmt::Display for FactorTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorTree::Leaf(Factor::Coefficient) => write!(f, "c"),
            FactorTree::Leaf(Factor::Regressor(r)) => match r.kind {
                crate::model::RegressorKind::Output => write!(f, "y{}", r.lag),
                crate::model::RegressorKind::Input => write!(f, "u{}", r.lag),
            },
            FactorTree::Product(l, r) => {
                write!(f, "{l}*")?;
                if matches!(**r, FactorTree::Product(..)) {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

struct TreeParser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl TreeParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expr(&mut self) -> Result<FactorTree, String> {
        let mut left = self.atom()?;
        loop {
            self.skip_ws();
            if self.src.get(self.pos) == Some(&b'*') {
                self.pos += 1;
                let right = self.atom()?;
                left = FactorTree::product(left, right);
            } else {
                return Ok(left);
            }
        }
    }

    fn atom(&mut self) -> Result<FactorTree, String> {
        self.skip_ws();
        match self.src.get(self.pos) {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                if self.src.get(self.pos) != Some(&b')') {
                    return Err(format!("expected `)` at offset {}", self.pos));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'c') => {
                self.pos += 1;
                Ok(FactorTree::Leaf(Factor::Coefficient))
            }
            Some(b'y' | b'u') => {
                let start = self.pos;
                self.pos += 1;
                if self.src.get(self.pos) == Some(&b'[') {
                    while self.pos < self.src.len() && self.src[self.pos] != b']' {
                        self.pos += 1;
                    }
                    self.pos += 1;
                } else {
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
                let end = self.pos.min(self.src.len());
                let r = parse_regressor(&self.text[start..end])?;
                Ok(FactorTree::Leaf(Factor::Regressor(r)))
            }
            Some(_) => Err(format!(
                "unexpected `{}` at offset {}",
                &self.text[self.pos..],
                self.pos
            )),
            None => Err("unexpected end of grouping".into()),
        }
    }
}
