use hcran_core::*;
use proptest::prelude::*;

fn instance(seed: u64, n_rrh: usize, n_sue: usize, n_mue: usize, n_bs: usize) -> Scenario {
    generate_scenario(&ScenarioConfig {
        n_bs_antennas: n_bs,
        n_mue,
        n_rrh,
        n_sue,
        rng_seed: seed,
        ..ScenarioConfig::default()
    })
    .unwrap()
}

fn arb_instance() -> impl Strategy<Value = Scenario> {
    (any::<u64>(), 1usize..6, 1usize..6, 1usize..4, 2usize..12).prop_map(|(s, l, j, k, n)| instance(s, l, j, k, n))
}

/// `psi_l^2 = sigma^2 * 10^e_l` with `e_l` in `[-3, 3]`.
fn arb_psi(sc: &Scenario, exps: &[f64]) -> QuantNoise {
    QuantNoise::new(exps.iter().take(sc.n_rrh).map(|e| sc.sigma2 * 10f64.powf(*e)).collect()).unwrap()
}

fn exps() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 6)
}

fn target_value(sc: &Scenario, psi: &QuantNoise, target: GradTarget) -> f64 {
    let opts = FixedPointOptions::default();
    let fp = solve_fp_pool(sc, psi, &opts, target == GradTarget::PoolLin).unwrap();
    match target {
        GradTarget::PoolSic => rbar_pool(&fp, sc, psi, RxMode::Sic, &opts).unwrap().sum,
        GradTarget::PoolLin => rbar_pool(&fp, sc, psi, RxMode::Lin, &opts).unwrap().sum,
        GradTarget::FhP2p => rbar_fh(sc, psi, &fp, Scheme::P2p).unwrap(),
        GradTarget::FhWz => rbar_fh(sc, psi, &fp, Scheme::Wz).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradients_match_central_differences(sc in arb_instance(), e in exps()) {
        let psi = arb_psi(&sc, &e);
        let fp = solve_fp_pool(&sc, &psi, &FixedPointOptions::default(), true).unwrap();
        for target in [GradTarget::PoolSic, GradTarget::PoolLin, GradTarget::FhP2p, GradTarget::FhWz] {
            let g = grad_psi(&sc, &psi, &fp, target).unwrap();
            for l in 0..sc.n_rrh {
                let h = 1e-6 * psi.psi2[l].max(sc.sigma2);
                let mut up = psi.clone();
                up.psi2[l] += h;
                let mut dn = psi.clone();
                dn.psi2[l] -= h;
                let fd = (target_value(&sc, &up, target) - target_value(&sc, &dn, target)) / (2.0 * h);
                // values are O(1-100) bps/Hz, so absolute cancellation noise
                // in the difference is about 1e-14 / h
                let noise = 1e-13 / h;
                prop_assert!(
                    (g[l] - fd).abs() <= 1e-4 * fd.abs() + noise,
                    "{target:?} l={l}: analytic {} fd {fd}", g[l]
                );
            }
        }
    }

    #[test]
    fn rates_nonincreasing_in_psi(sc in arb_instance(), e in exps(), l in 0usize..6, bump in 0.01f64..10.0) {
        let l = l % sc.n_rrh;
        let psi = arb_psi(&sc, &e);
        let mut more = psi.clone();
        more.psi2[l] *= 1.0 + bump;
        let a = rate_report(&sc, &psi, &FixedPointOptions::default()).unwrap();
        let b = rate_report(&sc, &more, &FixedPointOptions::default()).unwrap();
        let slack = 1e-10;
        prop_assert!(b.r_pool_sic <= a.r_pool_sic + slack);
        prop_assert!(b.r_pool_lin <= a.r_pool_lin + slack);
        prop_assert!(b.r_fh_p2p <= a.r_fh_p2p + slack);
        prop_assert!(b.r_fh_wz <= a.r_fh_wz + slack);
    }

    #[test]
    fn mode_and_scheme_ordering(sc in arb_instance(), e in exps()) {
        let psi = arb_psi(&sc, &e);
        let r = rate_report(&sc, &psi, &FixedPointOptions::default()).unwrap();
        prop_assert!(r.r_bs_sic >= r.r_bs_lin - 1e-10);
        prop_assert!(r.r_pool_sic >= r.r_pool_lin - 1e-10);
        prop_assert!(r.r_fh_wz <= r.r_fh_p2p + 1e-10);
    }

    #[test]
    fn lin_per_user_rates_sum_to_total(sc in arb_instance(), e in exps()) {
        let psi = arb_psi(&sc, &e);
        let r = rate_report(&sc, &psi, &FixedPointOptions::default()).unwrap();
        let bs: f64 = r.bs_lin_per_user.iter().sum();
        let pool: f64 = r.pool_lin_per_user.iter().sum();
        prop_assert!((bs - r.r_bs_lin).abs() <= 1e-12 * (1.0 + r.r_bs_lin.abs()));
        prop_assert!((pool - r.r_pool_lin).abs() <= 1e-12 * (1.0 + r.r_pool_lin.abs()));
    }

    #[test]
    fn pool_log_det_is_stationary_at_fixed_point(sc in arb_instance(), e in exps(), dir in prop::collection::vec(-1.0f64..1.0, 10)) {
        let psi = arb_psi(&sc, &e);
        let fp = solve_fp_pool(&sc, &psi, &FixedPointOptions::default(), false).unwrap();
        let at = |d: f64| {
            let b: Vec<f64> = fp.b.iter().zip(&dir).map(|(b, u)| b + d * u).collect();
            hcran_core::detequiv::pool_log_det_at(&sc, &psi, &b).unwrap()
        };
        let base = at(0.0);
        let c1 = (at(1e-3) - base).abs();
        let c2 = (at(5e-4) - base).abs();
        // halving the perturbation quarters the change
        prop_assert!(c2 <= 0.3 * c1 + 1e-12, "{c1} {c2}");
    }

    #[test]
    fn fixed_point_residual_small(sc in arb_instance(), e in exps()) {
        let psi = arb_psi(&sc, &e);
        let opts = FixedPointOptions::default();
        prop_assert!(solve_fp_pool(&sc, &psi, &opts, true).unwrap().residual < 1e-8);
        prop_assert!(solve_fp_bs(&sc, &opts, true).unwrap().residual < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coordinate_ascent_monotone_and_feasible(
        seed in any::<u64>(),
        eta in 0.05f64..0.95,
        c0 in 2.0f64..40.0,
        scheme in prop::sample::select(Scheme::ALL.to_vec()),
        mode in prop::sample::select(RxMode::ALL.to_vec()),
    ) {
        let sc = instance(seed, 3, 3, 2, 6).with_fronthaul_se(c0).unwrap();
        let opts = OptimizerOptions::default();
        let r = optimize_psi_fixed_eta(&sc, eta, scheme, mode, &opts).unwrap();
        for w in r.trace.objective.windows(2) {
            prop_assert!(w[1] >= w[0], "{} -> {}", w[0], w[1]);
        }
        let budget = (1.0 - eta) * c0;
        prop_assert!(eta * r.r_fh <= budget * (1.0 + 1e-9) + 1e-9);
        let k = kkt_residual(&sc, &r.psi_star, eta, r.lambda1.unwrap(), scheme, mode, &opts.fixed_point).unwrap();
        prop_assert!(k.max_abs() < 1e-5, "{:?}", k.residual);
    }

    #[test]
    fn dinkelbach_omega_nondecreasing(
        seed in any::<u64>(),
        c0 in 2.0f64..40.0,
        scheme in prop::sample::select(Scheme::ALL.to_vec()),
    ) {
        let sc = instance(seed, 3, 3, 2, 6).with_fronthaul_se(c0).unwrap();
        let r = dinkelbach_joint(&sc, scheme, RxMode::Sic, 1e-8, 1e-10, &OptimizerOptions::default()).unwrap();
        let steps = &r.trace.dinkelbach;
        for w in steps.windows(2) {
            prop_assert!(w[1].omega >= w[0].omega);
        }
        let last = steps.last().unwrap().f_omega;
        prop_assert!((0.0..=1e-8).contains(&last), "F = {last}");
        prop_assert!((r.omega.unwrap() - (r.r_bs + r.r_pool) / (r.r_fh + c0)).abs() < 1e-8);
    }
}
