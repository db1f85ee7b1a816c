use heston_lab::scheme::simulate_path;
use heston_lab::*;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = HestonParams> {
    (1e-4..0.5f64, 0.1..8.0f64, 1e-4..0.5f64, 0.05..1.5f64, -0.99..0.99f64, -0.05..0.1f64, 0.1..5.0f64).prop_map(
        |(v0, kappa, theta, sigma, rho, r, maturity)| {
            HestonParams::new(100.0, v0, kappa, theta, sigma, rho, r, maturity, 100.0).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn variance_stays_nonnegative(p in params(), n_exp in 0u32..8, stream in 0u64..1000) {
        let grid = GridSpec::new(p.maturity, 1 << n_exp).unwrap();
        for kind in SchemeKind::BOTH {
            let path = simulate_path(kind, &p, &grid, SeedSpec::new(17, stream));
            prop_assert_eq!(path.len(), grid.n_steps() + 1);
            for s in &path {
                prop_assert!(s.v >= 0.0 && s.x.is_finite());
            }
        }
    }

    #[test]
    fn schemes_coincide_until_z_turns_negative(p in params(), stream in 0u64..1000) {
        let grid = GridSpec::new(p.maturity, 64).unwrap();
        let sym = simulate_path(SchemeKind::Symmetrized, &p, &grid, SeedSpec::new(3, stream));
        let abs = simulate_path(SchemeKind::Absorbed, &p, &grid, SeedSpec::new(3, stream));
        for (a, b) in sym.iter().zip(&abs) {
            prop_assert_eq!(a.x, b.x);
            if a.v != b.v {
                // the first difference is a repaired negative z: AE at 0, SE above
                prop_assert_eq!(b.v, 0.0);
                prop_assert!(a.v > 0.0);
                break;
            }
        }
    }

    #[test]
    fn one_step_repairs_are_abs_and_max(v in 0.0..1.0f64, dw in -3.0..3.0f64, p in params()) {
        let dt = 0.01;
        let z = compute_z(v, &p, dt, dw).unwrap().z;
        prop_assert_eq!(step_variance(SchemeKind::Symmetrized, v, &p, dt, dw).unwrap(), z.abs());
        prop_assert_eq!(step_variance(SchemeKind::Absorbed, v, &p, dt, dw).unwrap(), z.max(0.0));
    }

    #[test]
    fn payoff_level_parity(x in 2.0..7.0f64, v in 0.0..1.0f64, p in params()) {
        let call = eval_payoff(Payoff::Call, &p, x, v).unwrap();
        let put = eval_payoff(Payoff::Put, &p, x, v).unwrap();
        let forward = p.discount() * (x.exp() - p.strike);
        prop_assert!((call - put - forward).abs() <= 1e-12 * (1.0 + x.exp()));
    }

    #[test]
    fn simulation_is_reproducible(p in params(), seed in any::<u64>(), stream in any::<u64>()) {
        let grid = GridSpec::new(p.maturity, 16).unwrap();
        let a = simulate_terminal(SchemeKind::Absorbed, &p, &grid, SeedSpec::new(seed, stream));
        let b = simulate_terminal(SchemeKind::Absorbed, &p, &grid, SeedSpec::new(seed, stream));
        prop_assert_eq!(a, b);
    }
}
