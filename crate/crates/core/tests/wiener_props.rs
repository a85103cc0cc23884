use proptest::prelude::*;
use pwiener::capacity::CapacityConfig;
use pwiener::geometry::{DomainKind, DomainSpec, Point};
use pwiener::wiener::{self, synthetic, CapacityProfile, EnvelopeParams, RadiusSearch, WienerVerdict};
use pwiener::{Error, StructureParams};

fn le(a: f64, b: f64) -> bool {
    a <= b * (1.0 + 1e-12) + 1e-300
}

proptest! {
    #[test]
    fn c_bar_is_minimal(p in 2.05..8.0f64, g2 in 1.01..1e3f64) {
        let (lambda, c_bar) = wiener::choose_c_bar_raw(p, g2);
        prop_assert!(lambda >= 1);
        prop_assert_eq!(c_bar, 0.5f64.powi(lambda as i32));
        // direct form: 2^{λp/(p-2) - 1} ≥ 3^{1/(p-2)} / (1 - 1/γ₂)
        let holds = |l: u32| {
            let lhs = (l as f64 * p / (p - 2.0) - 1.0) * std::f64::consts::LN_2;
            let rhs = 3f64.ln() / (p - 2.0) - (1.0 - 1.0 / g2).ln();
            lhs >= rhs * (1.0 - 1e-12)
        };
        prop_assert!(holds(lambda));
        prop_assert!(wiener::c_bar_condition(p, g2, lambda));
        if lambda > 1 {
            prop_assert!(!wiener::c_bar_condition(p, g2, lambda - 1));
        }
    }

    #[test]
    fn smaller_gamma_2_never_lowers_lambda(p in 2.05..8.0f64, g2 in 1.01..1e3f64, shrink in 0.0..1.0f64) {
        let g2_small = 1.0 + (g2 - 1.0) * shrink.max(1e-3);
        let (l_big, _) = wiener::choose_c_bar_raw(p, g2);
        let (l_small, _) = wiener::choose_c_bar_raw(p, g2_small);
        prop_assert!(l_small >= l_big);
    }

    #[test]
    fn cascade_bounds_hold_on_random_profiles(
        amps in prop::collection::vec(0.01..=1.0f64, 2..24),
        p in 2.2..5.0f64,
        mu_o in 1.0..4.0f64,
    ) {
        let params = StructureParams::new(p, 2).unwrap();
        let (_, c_bar) = wiener::choose_c_bar(&params);
        let g2 = params.constants.gamma_2;
        let prof = CapacityProfile::from_amplitudes(1.0, c_bar, p, &amps).unwrap();
        let rep = wiener::oscillation_cascade(mu_o, 0.5, &prof, &params).unwrap();
        prop_assert!(rep.all_nesting_ok && rep.all_sub_bound_ok && rep.all_chain_ok);

        let a = prof.amplitudes();
        let idx = &rep.subsequence;
        prop_assert_eq!(idx[0], 0);
        prop_assert!(rep.mu_seq.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        let mut chosen = 0.0;
        for j in 0..idx.len() {
            chosen += a[idx[j]];
            if let Some(&next) = idx.get(j + 1) {
                // selection rule, and no skipped index satisfies it
                prop_assert!(a[next] / a[idx[j]] > 0.5f64.powi((next - idx[j]) as i32));
                for m in idx[j] + 1..next {
                    prop_assert!(a[m] / a[idx[j]] <= 0.5f64.powi((m - idx[j]) as i32));
                }
                let prefix: f64 = a[..next].iter().sum();
                prop_assert!(le(prefix, 2.0 * chosen));
                let mid = mu_o * (-chosen / g2).exp();
                prop_assert!(le(rep.mu_seq[j + 1], mid));
                prop_assert!(le(mid, mu_o * (-prefix / (2.0 * g2)).exp()));
            }
        }
    }

    #[test]
    fn envelope_grows_as_rho_grows(
        deltas in prop::collection::vec(0.0..=1.0f64, 6),
        r1 in 0.02..1.0f64,
        r2 in 0.02..1.0f64,
    ) {
        let params = StructureParams::new(3.0, 2).unwrap();
        let prof = CapacityProfile::from_deltas(1.0, 0.5, 3.0, &deltas).unwrap();
        let env = EnvelopeParams::new(1.0, 0.1, 0.5, 1.0, &params).unwrap();
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let e_lo = wiener::decay_envelope(&env, &prof, lo).unwrap();
        let e_hi = wiener::decay_envelope(&env, &prof, hi).unwrap();
        prop_assert!(e_lo <= e_hi);
    }

    #[test]
    fn constant_profile_gives_exact_power_law(g_o in 0.01..=1.0f64, p in 2.2..5.0f64, rho in 0.01..0.99f64) {
        let params = StructureParams::new(p, 2).unwrap();
        let prof = CapacityProfile::from_deltas(1.0, 0.5, p, &[g_o; 8]).unwrap();
        let mut env = EnvelopeParams::new(1.0, 0.0, 0.5, 1.0, &params).unwrap();
        env.bar_gamma = 0.0;
        let alpha = wiener::holder_exponent(g_o, &params).unwrap();
        let got = wiener::decay_envelope(&env, &prof, rho).unwrap();
        prop_assert!((got.ln() - alpha * rho.ln()).abs() < 1e-12);
    }
}

#[test]
fn wiener_sum_of_constant_profile() {
    let g_o: f64 = 0.3;
    let prof = CapacityProfile::from_deltas(2.0, 0.25, 3.0, &[g_o; 10]).unwrap();
    for k in 1..10 {
        let rho = prof.rho(k);
        let expect = g_o.sqrt() * (2.0 / rho).ln();
        assert!((wiener::wiener_sum(&prof, 0, k - 1) - expect).abs() < 1e-12 * expect);
        assert!((wiener::wiener_integral(&prof, rho).unwrap() - expect).abs() < 1e-12 * expect);
    }
    assert_eq!(wiener::wiener_sum(&prof, 5, 4), 0.0);
}

#[test]
fn noisy_constant_profiles_read_as_diverging() {
    for seed in 0..100 {
        let prof = synthetic::noisy_constant_profile(seed, 16, 3.0, 0.25, 0.6, 0.1).unwrap();
        let diag = wiener::is_wiener_point(&prof, 8, 0.05).unwrap();
        assert_eq!(diag.verdict, WienerVerdict::Diverging, "seed {seed}: {diag:?}");
        assert_eq!(diag.kind, "heuristic");
    }
}

#[test]
fn geometric_amplitudes_read_as_converging() {
    let amps: Vec<f64> = (0..12).map(|i| 0.5f64.powi(i)).collect();
    let prof = CapacityProfile::from_amplitudes(1.0, 0.5, 3.0, &amps).unwrap();
    assert_eq!(wiener::is_wiener_point(&prof, 8, 0.05).unwrap().verdict, WienerVerdict::Converging);
    let rep = wiener::oscillation_cascade(1.0, 0.5, &prof, &StructureParams::new(3.0, 2).unwrap()).unwrap();
    assert_eq!(rep.subsequence, vec![0]);
    assert_eq!(rep.truncated_after, Some(0));
}

#[test]
fn realize_examples() {
    let mut params = StructureParams::new(3.0, 2).unwrap();
    params.constants.gamma_star = 2.0;
    let search = RadiusSearch { r_max: 1.0, levels: 8 };
    let (r, eps) = wiener::realize_with(6.0, &params, 0.5, &search, |_| Ok(1.0)).unwrap();
    assert_eq!((r, eps), (1.0, 0.5));
    // 6 R^{2.5} ≤ 1 fails at R = 1/2 (1.06) and holds at R = 1/4
    let (r, _) = wiener::realize_with(1.0, &params, 0.5, &search, |_| Ok(1.0)).unwrap();
    assert_eq!(r, 0.25);
    let (r, _) = wiener::realize_with(1e12, &params, 0.5, &search, |_| Ok(0.01)).unwrap();
    assert_eq!(r, 1.0);
    let err = wiener::realize_with(1e12, &params, 0.5, &search, |_| Ok(0.0)).unwrap_err();
    assert!(matches!(err, Error::NoAdmissibleRadius { .. }));
}

#[test]
fn half_space_profile_radii() {
    let params = StructureParams::new(3.0, 2).unwrap();
    let d = DomainSpec::new(DomainKind::HalfSpace, Point::origin(2)).unwrap();
    let cfg = CapacityConfig { cells_per_rho: 8, ..Default::default() };
    let prof = wiener::build_profile(&d, &Point::origin(2), 0.8, 0.5, 3, &params, &cfg).unwrap();
    let radii: Vec<f64> = prof.entries.iter().map(|e| e.rho).collect();
    assert_eq!(radii, vec![0.8, 0.4, 0.2]);
}

#[test]
fn exterior_cube_profile_is_banded() {
    let params = StructureParams::new(3.0, 2).unwrap();
    let d =
        DomainSpec::new(DomainKind::ExteriorCube { center: vec![0.0, 0.0], half_edge: 1.0 }, Point::new(&[1.0, 0.0]))
            .unwrap();
    let prof =
        wiener::build_profile(&d, &Point::new(&[1.0, 0.0]), 0.5, 0.5, 4, &params, &CapacityConfig::default()).unwrap();
    let ds: Vec<f64> = prof.entries.iter().map(|e| e.delta).collect();
    let (lo, hi) = ds.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &d| (a.min(d), b.max(d)));
    assert!(lo > 0.0 && hi <= 1.0);
    assert!(hi - lo <= 0.05 * hi, "deltas {ds:?}");
}
