//! Simulation kernels for a three-state innovation diffusion process on
//! finite lattices: ignorant (0), aware (1) and adopter (2) agents.
//!
//! Sample paths come from the Harris graphical construction over a
//! counter-based random stream, so that runs sharing a seed share their
//! Poisson marks. This gives the exact couplings in [`coupling`], the block
//! constructions in [`renormalization`], and bit-reproducible Monte Carlo
//! estimates in [`observables`] and [`estimation`]. [`gillespie`] and the
//! uniformization oracle [`dynamics::exact_transient`] are independent
//! references for the same law.

// `!(a < b)` is used deliberately so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod gillespie;
pub mod harris;
pub mod lattice;
pub mod observables;
pub mod renormalization;
pub mod rng;
pub mod trajectory;

pub use dynamics::{Configuration, Distribution, InitialCondition, Params, State};
pub use error::{Error, Result};
pub use harris::{Event, EventKind, EventStream};
pub use lattice::{Boundary, Lattice, Site};
pub use observables::{Mode, SurvivalEstimate};
pub use trajectory::{Change, Trajectory};
