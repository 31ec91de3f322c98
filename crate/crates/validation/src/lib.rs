//! Reference computations that avoid the closed-form Jacobian and the
//! Neumann-series inverse, plus the randomized property suite built on them.

pub mod checks;
pub mod oracles;

#[cfg(test)]
mod properties;
