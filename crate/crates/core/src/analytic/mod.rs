//! Theory: characteristic-function error probabilities, threshold search and
//! sum-rate formulas.

pub mod cf;
pub mod pe;
pub mod quad;
pub mod rate;
pub mod threshold;
