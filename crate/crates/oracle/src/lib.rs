//! Reference computations that share no code with the production formulas:
//! numerical quadrature of conditional occupancy probabilities, direct sample
//! path simulation, brute-force schedule search and a generic solver for the
//! frame-level convex program. Used by tests, the acceptance suite and the
//! `validate` command.

pub mod alignment;
pub mod convex;
pub mod ctmc;
pub mod phi;
pub mod placement;
pub mod quad;
