//! Models shipped with the repository.

use crate::model::{parse_model, PolynomialModel};

pub const DUFFING_UEDA: &str = include_str!("../../../models/duffing_ueda.model");
pub const CHUA: &str = include_str!("../../../models/chua.model");
pub const IDENTITY: &str = include_str!("../../../models/identity.model");

pub fn duffing_ueda() -> PolynomialModel {
    parse_model(DUFFING_UEDA).expect("bundled model parses")
}

pub fn chua() -> PolynomialModel {
    parse_model(CHUA).expect("bundled model parses")
}

pub fn identity() -> PolynomialModel {
    parse_model(IDENTITY).expect("bundled model parses")
}
