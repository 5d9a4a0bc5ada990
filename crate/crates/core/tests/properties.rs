//! Randomized invariants over small lattices and arbitrary rates.

use diffusim_core::coupling::{coupled_alpha_pair, projection_violations};
use diffusim_core::harris::{evolve_harris, generate_events, Engine};
use diffusim_core::observables::{extinction_time, state_counts, Extinction};
use diffusim_core::{Boundary, Configuration, Lattice, Mode, Params, State, SurvivalEstimate};
use proptest::prelude::*;

fn config(digits: &[u8]) -> Configuration {
    Configuration::from_digits(digits).unwrap()
}

fn rates() -> impl Strategy<Value = Params> {
    (0.0..4.0f64, 0.0..6.0f64, 0.0..0.5f64)
        .prop_map(|(l, a, g)| Params::new(l, a).unwrap().with_gamma(g).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_always_sum_to_the_site_count(
        params in rates(),
        digits in prop::collection::vec(0u8..3, 4..12),
        seed in any::<u64>(),
    ) {
        let n = digits.len();
        let lattice = Lattice::line(n, Boundary::Torus).unwrap();
        let traj = Engine::simulate(&lattice, &params, &config(&digits), 3.0, seed).unwrap();
        for k in 0..=6 {
            let c = state_counts(&traj, k as f64 * 0.5).unwrap();
            prop_assert_eq!(c.iter().sum::<usize>(), n);
        }
    }

    #[test]
    fn lazy_engine_equals_eager_replay(
        params in rates(),
        digits in prop::collection::vec(0u8..3, 3..10),
        seed in any::<u64>(),
        free in any::<bool>(),
    ) {
        let boundary = if free { Boundary::Free } else { Boundary::Torus };
        let lattice = Lattice::line(digits.len(), boundary).unwrap();
        let initial = config(&digits);
        let lazy = Engine::simulate(&lattice, &params, &initial, 2.0, seed).unwrap();
        let stream = generate_events(&lattice, &params, 2.0, seed).unwrap();
        let eager = evolve_harris(&initial, &stream).unwrap();
        prop_assert_eq!(lazy, eager);
    }

    #[test]
    fn adoption_dies_no_later_than_awareness(
        params in rates().prop_map(|p| p.with_gamma(0.0).unwrap()),
        digits in prop::collection::vec(0u8..3, 3..10),
        seed in any::<u64>(),
    ) {
        let lattice = Lattice::line(digits.len(), Boundary::Torus).unwrap();
        let traj = Engine::simulate(&lattice, &params, &config(&digits), 5.0, seed).unwrap();
        match (extinction_time(&traj, Mode::Adoption), extinction_time(&traj, Mode::Awareness)) {
            (Extinction::At(a), Extinction::At(w)) => prop_assert!(a <= w),
            (Extinction::SurvivedPastHorizon, Extinction::At(_)) => prop_assert!(false, "adopters outlived awareness"),
            _ => {}
        }
    }

    #[test]
    fn projection_commutes_with_the_dynamics(
        params in rates().prop_map(|p| p.with_gamma(0.0).unwrap()),
        digits in prop::collection::vec(0u8..3, 3..10),
        seed in any::<u64>(),
    ) {
        let lattice = Lattice::line(digits.len(), Boundary::Torus).unwrap();
        let stream = generate_events(&lattice, &params, 3.0, seed).unwrap();
        prop_assert_eq!(projection_violations(&config(&digits), &stream).unwrap(), 0);
    }

    #[test]
    fn alpha_coupling_preserves_order(
        lambda in 0.0..4.0f64,
        alphas in (0.0..6.0f64, 0.0..6.0f64),
        digits in prop::collection::vec(0u8..3, 3..10),
        seed in any::<u64>(),
    ) {
        let (lo, hi) = if alphas.0 <= alphas.1 { alphas } else { (alphas.1, alphas.0) };
        let lattice = Lattice::line(digits.len(), Boundary::Torus).unwrap();
        let params = Params::new(lambda, 0.0).unwrap();
        let pair = coupled_alpha_pair(&lattice, &params, lo, hi, &config(&digits), 3.0, seed).unwrap();
        prop_assert_eq!(pair.ordering_violations(), 0);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(reps in 1u64..5000, frac in 0.0..=1.0f64) {
        let k = (frac * reps as f64).round() as u64;
        let e = SurvivalEstimate::from_counts(k, reps).unwrap();
        prop_assert!(0.0 <= e.ci_low && e.ci_low <= e.estimate);
        prop_assert!(e.estimate <= e.ci_high && e.ci_high <= 1.0);
    }

    #[test]
    fn all_ignorant_stays_ignorant_without_gamma(
        lambda in 0.0..4.0f64,
        alpha in 0.0..6.0f64,
        n in 3usize..10,
        seed in any::<u64>(),
    ) {
        let lattice = Lattice::line(n, Boundary::Torus).unwrap();
        let params = Params::new(lambda, alpha).unwrap();
        let traj = Engine::simulate(&lattice, &params, &Configuration::uniform(n, State::Ignorant), 5.0, seed).unwrap();
        prop_assert!(traj.changes().is_empty());
    }
}
