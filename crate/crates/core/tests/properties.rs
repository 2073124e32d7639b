use lattice_kinetic::chain::{hamiltonian_energy, rotate_triple, step_hamiltonian, step_noise, total_momentum, ChainState, SweepOrder};
use lattice_kinetic::kinetic::{apply_l, evolve, KineticGrid, KineticState, DEFAULT_DT};
use lattice_kinetic::model::{beta_at, beta_hat, r_kernel, r_kernel_product, wrap, ModelParams, R_kernel, R_kernel_sum_of_squares};
use lattice_kinetic::ou::{ou_second_moment, OuParams};
use lattice_kinetic::rng::path_rng;
use lattice_kinetic::stats::{mean_se, pairwise_sum};
use lattice_kinetic::wavefield::{compensate, from_wave, to_wave};
use lattice_kinetic::Complex64;
use proptest::prelude::*;

fn torus() -> impl Strategy<Value = f64> {
    -0.5f64..0.5
}

/// Nearest-neighbour or a random stable range-2 interaction.
fn model() -> impl Strategy<Value = ModelParams> {
    prop_oneof![
        (0.0f64..3.0).prop_map(|w| ModelParams::nearest_neighbour(w).unwrap()),
        (0.0f64..0.3, 0.0f64..0.4, 0.5f64..2.0).prop_map(|(a1, a2, pin)| {
            // α̂(k) = pin + 4 a1 sin²πk + 4 a2 sin²2πk > 0
            ModelParams::from_alpha(vec![pin - 2.0 * (-a1 - a2), -a1, -a2]).unwrap()
        }),
    ]
}

fn chain(n: usize) -> impl Strategy<Value = ChainState> {
    (prop::collection::vec(-2.0f64..2.0, n), prop::collection::vec(-2.0f64..2.0, n))
        .prop_map(|(q, p)| ChainState::new(q, p, 0.0).unwrap())
}

proptest! {
    #[test]
    fn scattering_kernel_shape(k in torus(), kp in torus()) {
        let r = R_kernel(k, kp);
        prop_assert!(r >= 0.0);
        prop_assert!((r - R_kernel(kp, k)).abs() <= 1e-12);
        prop_assert!(R_kernel(0.0, kp).abs() <= 1e-15);
        prop_assert!((r - R_kernel_sum_of_squares(k, kp)).abs() <= 1e-12);
        prop_assert!((r_kernel(k, kp) - r_kernel_product(k, kp)).abs() <= 1e-12);
    }

    #[test]
    fn scattering_rate_is_even_and_bounded(k in torus()) {
        let b = beta_hat(k);
        prop_assert!((0.0..=9.0 + 1e-12).contains(&b));
        prop_assert!((b - beta_hat(-k)).abs() <= 1e-14);
        prop_assert!((b - beta_hat(k + 1.0)).abs() <= 1e-12);
    }

    #[test]
    fn dispersion_is_even(params in model(), k in torus()) {
        prop_assert!((params.omega(k) - params.omega(-k)).abs() <= 1e-14);
        prop_assert!(params.omega(k) >= 0.0);
        let unpinned = ModelParams::nearest_neighbour(0.0).unwrap();
        prop_assert!((unpinned.omega(k) - 2f64.sqrt() * (std::f64::consts::PI * k).sin().abs()).abs() <= 1e-14);
    }

    #[test]
    fn wrap_lands_on_torus(k in -50.0f64..50.0) {
        let w = wrap(k);
        prop_assert!((-0.5..0.5).contains(&w));
        prop_assert!(((k - w) - (k - w).round()).abs() < 1e-9);
    }

    #[test]
    fn rotation_keeps_momentum_and_kinetic_energy(
        p in prop::collection::vec(-3.0f64..3.0, 3..40),
        x in 0usize..40,
        angle in -10.0f64..10.0,
    ) {
        let mut q = p.clone();
        let x = x % q.len();
        rotate_triple(&mut q, x, angle);
        let (s0, s1) = (pairwise_sum(&p), pairwise_sum(&q));
        let e0: f64 = p.iter().map(|v| v * v).sum();
        let e1: f64 = q.iter().map(|v| v * v).sum();
        prop_assert!((s0 - s1).abs() <= 1e-12 * (1.0 + p.iter().map(|v| v.abs()).sum::<f64>()));
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splitting_conserves_energy_and_momentum(params in model(), state in chain(32), seed in any::<u64>()) {
        let mut s = state.clone();
        let mut rng = path_rng(seed, 0);
        let h0 = hamiltonian_energy(&s, &params);
        for i in 0..50 {
            step_hamiltonian(&mut s, 0.05, &params);
            let order = if i % 2 == 0 { SweepOrder::Forward } else { SweepOrder::Backward };
            let p0 = total_momentum(&s);
            step_noise(&mut s, 0.05, 0.3, order, &mut rng);
            prop_assert!((total_momentum(&s) - p0).abs() <= 1e-10);
        }
        prop_assert!((hamiltonian_energy(&s, &params) - h0).abs() <= 1e-10 * h0.max(1.0));

        // without pinning the free flight conserves momentum too
        let free = ModelParams::nearest_neighbour(0.0).unwrap();
        let mut s = state;
        let p0 = total_momentum(&s);
        for _ in 0..50 {
            step_hamiltonian(&mut s, 0.05, &free);
            step_noise(&mut s, 0.05, 0.3, SweepOrder::Forward, &mut rng);
        }
        prop_assert!((total_momentum(&s) - p0).abs() <= 1e-10);
    }

    #[test]
    fn free_flight_keeps_mode_energies(params in model(), state in chain(16)) {
        let before = to_wave(&state, &params, 1.0).mode_energies();
        let mut s = state.clone();
        for _ in 0..100 {
            step_hamiltonian(&mut s, 0.1, &params);
        }
        let after = to_wave(&s, &params, 1.0).mode_energies();
        let scale = before.iter().cloned().fold(1.0, f64::max);
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn parseval_and_round_trip(params in model(), state in chain(24)) {
        let field = to_wave(&state, &params, 0.5);
        let h = hamiltonian_energy(&state, &params);
        prop_assert!((field.spectral_energy() - h).abs() <= 1e-10 * h.max(1.0));
        prop_assert!(field.mode_energies().iter().all(|e| *e >= 0.0));
        let back = from_wave(&field, &params).unwrap();
        for (a, b) in back.q.iter().zip(&state.q).chain(back.p.iter().zip(&state.p)) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let mut later = field.clone();
        later.t = 0.37;
        let c = compensate(&later, &params).unwrap();
        for (a, b) in c.mode_energies().iter().zip(later.mode_energies()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn kinetic_generator_is_dissipative(f in prop::collection::vec(-1.0f64..1.0, 32)) {
        let grid = KineticGrid::midpoint(32).unwrap();
        let lf = apply_l(&grid, &f);
        let pair: f64 = lf.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() / 32.0;
        let norm: f64 = f.iter().map(|v| v * v).sum::<f64>() / 32.0;
        prop_assert!(pair <= 1e-10 * norm);
    }

    #[test]
    fn kinetic_flow_conserves_mass_and_relaxes(values in prop::collection::vec(0.0f64..2.0, 32)) {
        let grid = KineticGrid::lattice(32).unwrap();
        let s0 = KineticState::new(grid, values).unwrap();
        let s1 = evolve(&s0, 0.5, DEFAULT_DT).unwrap();
        let s2 = evolve(&s1, 0.5, DEFAULT_DT).unwrap();
        prop_assert!((s2.mass() - s0.mass()).abs() <= 1e-10 * s0.mass().max(1e-300));
        prop_assert!(s1.l1_distance_to_equilibrium() <= s0.l1_distance_to_equilibrium() + 1e-10);
        prop_assert!(s2.l1_distance_to_equilibrium() <= s1.l1_distance_to_equilibrium() + 1e-10);
    }

    /// `m' = -(β̂/2) m + 𝓡` by central differences.
    #[test]
    fn ou_second_moment_solves_its_ode(
        beta in 0.1f64..9.0,
        a in 0.0f64..2.0,
        b in -0.5f64..0.5,
        t in 0.1f64..2.0,
        re in -1.0f64..1.0,
        im in -1.0f64..1.0,
    ) {
        let rate = |s: f64| a * (1.0 + b * (3.0 * s).sin()).max(0.0);
        let p = OuParams { k: 0.2, beta_k: beta, rate, psi0: Complex64::new(re, im) };
        let h = 1e-4;
        let dm = (ou_second_moment(&p, t + h).unwrap() - ou_second_moment(&p, t - h).unwrap()) / (2.0 * h);
        let rhs = -0.5 * beta * ou_second_moment(&p, t).unwrap() + rate(t);
        prop_assert!((dm - rhs).abs() <= 1e-6 * (1.0 + rhs.abs()), "residual {}", dm - rhs);
    }

    #[test]
    fn pairwise_sum_matches_exact_order(xs in prop::collection::vec(-1e3f64..1e3, 0..200)) {
        let naive: f64 = xs.iter().sum();
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-9 * (1.0 + xs.iter().map(|x| x.abs()).sum::<f64>()));
        let ms = mean_se(&xs);
        if xs.len() > 1 {
            prop_assert!(ms.se >= 0.0);
        }
    }
}

#[test]
fn beta_coefficients_sum_to_zero() {
    assert_eq!((-3..=3).map(beta_at).sum::<f64>(), 0.0);
}
