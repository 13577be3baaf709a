//! Reliability analysis of floating-point simulations of polynomial NARMAX
//! models.
//!
//! Several algebraically equivalent evaluation plans of one model are run
//! in binary64. Half the gap between their pseudo-orbits is a lower bound
//! on the error of the worse of them; the first iteration at which their
//! relative gap exceeds a threshold marks the end of the trustworthy part
//! of the simulation.
//!
//! - [`model`]: polynomial models, parsing and input signals
//! - [`extension`]: evaluation plans and their exact equivalence
//! - [`simulator`]: binary64 free-run and high-precision reference orbits
//! - [`lbe`]: lower bound error, stop criterion, theorem check
//! - [`bench`]: repeated wall-clock timing

pub mod bench;
pub mod bundled;
pub mod extension;
pub mod lbe;
pub mod model;
pub mod simulator;
