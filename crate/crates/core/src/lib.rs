//! Revenue-optimal anonymous selling mechanisms for multi-period markets
//! with a continuum of buyers and limited supply.
//!
//! The pipeline is: describe a [`market::Market`], search allocation
//! profiles with [`optimizer::coordinate_ascent`], turn the best profile
//! into posted prices and rationed lotteries with [`mechanism::extract`],
//! and check the menu with [`verifier::verify`]. [`oracle`] provides
//! brute-force ground truth for small instances.

pub mod evaluator;
pub mod io;
pub mod market;
pub mod mechanism;
pub mod optimizer;
pub mod oracle;
pub mod pipeline;
pub mod scalar;
pub mod stepfn;
pub mod verifier;
