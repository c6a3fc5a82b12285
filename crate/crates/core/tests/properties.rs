use pbe_core::equilibrium::{Sweep, SweepGrid};
use pbe_core::*;
use proptest::prelude::*;

fn etc_model() -> Mm1Cost {
    Mm1Cost::new(Mm1CostParams::new(1700.0, 1700.0, 50.0).unwrap())
}

fn env(theta: f64) -> TrafficEnvironment {
    TrafficEnvironment::new(theta, 2400.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn inverse_undoes_incentive(theta in 0.3..0.4f64, frac in 0.0..0.98f64) {
        let e = env(theta);
        let m = etc_model();
        let sigma = frac * m.high_stability_bound(&e);
        let d = delta_c(&e, &m, sigma).unwrap().finite().unwrap();
        let back = inverse_delta_c(&e, &m, d, 1e-13).unwrap();
        prop_assert!((back - sigma).abs() < 1e-9, "{sigma} -> {d} -> {back}");
    }

    #[test]
    fn incentive_strictly_decreasing(theta in 0.3..0.4f64, a in 0.0..0.5f64, b in 0.0..0.5f64) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let e = env(theta);
        let m = etc_model();
        let (dl, dh) = (delta_c(&e, &m, lo).unwrap().as_f64(), delta_c(&e, &m, hi).unwrap().as_f64());
        prop_assert!(dl > dh);
    }

    #[test]
    fn bayes_beliefs_are_distributions(theta in 0.01..0.99f64, sh in 0.0..=1.0f64, sl in 0.0..=1.0f64) {
        let e = env(theta);
        let b = bayes_update(&e, &MisbehaviorStrategy::new(sh, sl).unwrap());
        prop_assert!(b.is_normalized(1e-12));
    }

    #[test]
    fn solver_output_is_an_equilibrium(
        theta in 0.3..0.4f64,
        p_t_l in 0.01..4.0f64,
        p_d in 0.005..120.0f64,
        f_l in 0.5..200.0f64,
        detect in 0.2..=1.0f64,
    ) {
        let e = env(theta);
        let m = etc_model();
        let params = GameParams::low_type(p_t_l, p_d, f_l).unwrap().with_detect_prob(detect).unwrap();
        let eq = match solve_pbe(&e, &m, &params) {
            Err(SolveError::BoundaryParameters(_)) => return Ok(()),
            r => r.unwrap(),
        };
        prop_assert!(eq.diagnostics.passed, "{:?}", eq.diagnostics);
        let independent = check_pbe(&e, &m, &params, &eq.profile, &eq.belief, 1e-9);
        prop_assert!(independent.passed);
        prop_assert_eq!(eq.profile.traveler.sigma_h, 0.0);
        prop_assert_eq!(eq.profile.operator.sigma_d_l, 0.0);
        prop_assert!(eq.sigma_l() < 1.0);
        prop_assert!((0.0..=1.0).contains(&eq.sigma_d_h()));
        prop_assert!(cost_high(&e, &m.params, &eq.profile.traveler).is_stable());
        prop_assert!(cost_low(&e, &m.params, &eq.profile.traveler).is_stable());
        match eq.regime {
            Regime::A => prop_assert_eq!((eq.sigma_l(), eq.sigma_d_h()), (0.0, 0.0)),
            Regime::B1 => prop_assert_eq!(eq.sigma_d_h(), 0.0),
            Regime::B3 => prop_assert_eq!(eq.sigma_d_h(), 1.0),
            Regime::B2 => {
                let hat = misbehavior_threshold(&e, &params).rate().unwrap();
                prop_assert_eq!(eq.sigma_l(), hat);
            }
            Regime::Boundary(_) => prop_assert!(false),
        }
    }

    #[test]
    fn only_the_effective_fine_matters(
        p_t_l in 0.01..3.0f64,
        p_d in 0.01..60.0f64,
        f_l in 1.0..200.0f64,
        detect in 0.1..=1.0f64,
    ) {
        let e = env(0.3);
        let m = etc_model();
        let scaled = GameParams::low_type(p_t_l, p_d, f_l).unwrap().with_detect_prob(detect).unwrap();
        let folded = GameParams::low_type(p_t_l, p_d, f_l * detect).unwrap();
        let (a, b) = (solve_pbe(&e, &m, &scaled), solve_pbe(&e, &m, &folded));
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.regime, b.regime);
                prop_assert!((a.sigma_l() - b.sigma_l()).abs() < 1e-12);
                prop_assert!((a.sigma_d_h() - b.sigma_d_h()).abs() < 1e-12);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn large_fine_rules_out_full_inspection(
        p_t_l in 0.01..3.0f64,
        p_d in 0.01..60.0f64,
        excess in 1.0..20.0f64,
    ) {
        let e = env(0.3);
        let m = etc_model();
        let dc0 = delta_c(&e, &m, 0.0).unwrap().as_f64();
        let params = GameParams::low_type(p_t_l, p_d, dc0 * excess + 1e-6).unwrap();
        if let Ok(r) = classify_regime(&e, &m, &params, 1e-9) {
            prop_assert_ne!(r, Regime::B3);
        }
    }

    #[test]
    fn threshold_and_cost_gap_move_with_theta(a in 0.1..0.9f64, b in 0.1..0.9f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        // both servers stable at every θ in range
        let m = etc_model();
        let at = |t: f64| TrafficEnvironment::new(t, 1500.0).unwrap();
        let dc = |t: f64| delta_c(&at(t), &m, 0.0).unwrap().as_f64();
        prop_assert!(dc(lo) > dc(hi));
        let params = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
        let hat = |t: f64| misbehavior_threshold(&at(t), &params).rate().unwrap();
        prop_assert!(hat(lo) < hat(hi));
    }
}

#[test]
fn sweep_is_independent_of_evaluation_order() {
    let e = env(0.3);
    let m = etc_model();
    let base = GameParams::low_type(0.5, 5.0, 100.0).unwrap();
    let grid = SweepGrid {
        p_t_l: (1..=15).map(|i| i as f64 * 0.2).collect(),
        p_d: (1..=15).map(|i| i as f64 * 5.0).collect(),
        theta: vec![0.3, 0.33],
        f_l: vec![20.0, 100.0],
    };
    let sweep = Sweep::new(&e, &m, base, grid, SolverTolerances::default());
    let forward = sweep.run();
    let mut backward: Vec<_> = (0..sweep.len()).rev().map(|i| sweep.evaluate(i)).collect();
    backward.reverse();
    assert_eq!(forward.rows, backward);
}

#[test]
fn assumption_report_flags_bad_models() {
    let e = env(0.3);
    // L faster than H: ordering of baseline costs reversed
    let m = Mm1Cost::new(Mm1CostParams::new(1000.0, 3000.0, 50.0).unwrap());
    let r = check_assumptions(&e, &m, 32);
    assert!(!r.passed());
    assert!(r.first_violation().is_some());
    assert!(matches!(
        solve_pbe(&e, &m, &GameParams::low_type(0.5, 5.0, 100.0).unwrap()),
        Err(SolveError::AssumptionViolation(_))
    ));
}
