//! Shared fixtures for the benchmarks.

use diffusim_core::{Boundary, Configuration, Lattice, Params, State};

/// A torus ring with one adopter at the center.
pub fn ring_fixture(side: usize) -> (Lattice, Configuration) {
    let lattice = Lattice::line(side, Boundary::Torus).expect("side >= 3");
    let initial = Configuration::single(side, lattice.center(), State::Adopter).expect("center is on the lattice");
    (lattice, initial)
}

/// Supercritical rates used across the benches.
pub fn supercritical() -> Params {
    Params::new(2.0, 1.0).expect("valid rates")
}
