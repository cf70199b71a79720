//! Randomized invariance properties of the dynamics, kernels, and checkers.

use platoon::{
    check_flocking_condition, diagnostics, l_functional, phi_primitive, phi_primitive_inverse,
    rhs, ModelParams, State,
};
use proptest::prelude::*;

/// A valid random configuration: every gap open past its offset, finite
/// velocities, either ascending or descending positions.
fn config_strategy() -> impl Strategy<Value = (ModelParams, State)> {
    (2usize..=8)
        .prop_flat_map(|n| {
            (
                Just(n),
                0.5f64..3.0,
                0.3f64..4.5,
                prop::collection::vec(0.0f64..2.0, n - 1),
                prop::collection::vec(0.05f64..5.0, n - 1),
                prop::collection::vec(-3.0f64..3.0, n - 1),
                prop::collection::vec(-3.0f64..3.0, n),
                -10.0f64..10.0,
                any::<bool>(),
            )
        })
        .prop_map(
            |(n, alpha, beta, deltas, slacks, z, v, x0, descending)| {
                let mut x = vec![x0];
                for i in 0..n - 1 {
                    let gap = deltas[i] + slacks[i];
                    let prev = *x.last().expect("x starts non-empty");
                    x.push(if descending { prev - gap } else { prev + gap });
                }
                let params =
                    ModelParams::new(alpha, beta, deltas, z).expect("strategy emits valid params");
                let state = State::new(0.0, x, v).expect("strategy emits a valid state");
                (params, state)
            },
        )
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn accelerations_carry_no_net_momentum((params, state) in config_strategy()) {
        let (_, dv) = rhs(&state, &params).expect("open gaps evaluate");
        let residual = dv.iter().sum::<f64>().abs();
        let budget = 1e-12 * state.n_agents() as f64 * max_abs(&dv);
        prop_assert!(
            residual <= budget || residual == 0.0,
            "net momentum {residual:e} exceeds {budget:e}"
        );
    }

    #[test]
    fn accelerations_are_galilean_invariant(
        (params, state) in config_strategy(),
        boost in -10.0f64..10.0,
    ) {
        let (_, dv) = rhs(&state, &params).expect("open gaps evaluate");
        let boosted = State::new(
            state.t,
            state.x.clone(),
            state.v.iter().map(|v| v + boost).collect(),
        )
        .expect("boosted state stays valid");
        let (dx_boosted, dv_boosted) = rhs(&boosted, &params).expect("open gaps evaluate");
        let scale = 1.0 + max_abs(&dv);
        for i in 0..dv.len() {
            prop_assert!(
                (dv[i] - dv_boosted[i]).abs() <= 1e-12 * scale,
                "acceleration {i} moved under a velocity boost: {} vs {}",
                dv[i], dv_boosted[i]
            );
            prop_assert_eq!(dx_boosted[i], boosted.v[i], "positions advance at the boosted speed");
        }
    }

    #[test]
    fn accelerations_are_translation_invariant(
        (params, state) in config_strategy(),
        shift in -10.0f64..10.0,
    ) {
        let (_, dv) = rhs(&state, &params).expect("open gaps evaluate");
        let moved = State::new(
            state.t,
            state.x.iter().map(|x| x + shift).collect(),
            state.v.clone(),
        )
        .expect("shifted state stays valid");
        let (_, dv_moved) = rhs(&moved, &params).expect("open gaps evaluate");
        let scale = 1.0 + max_abs(&dv) + shift.abs();
        for i in 0..dv.len() {
            prop_assert!(
                (dv[i] - dv_moved[i]).abs() <= 1e-12 * scale,
                "acceleration {i} moved under a translation: {} vs {}",
                dv[i], dv_moved[i]
            );
        }
    }

    #[test]
    fn diagnostics_are_shift_invariant(
        (params, state) in config_strategy(),
        shift in -10.0f64..10.0,
        boost in -10.0f64..10.0,
    ) {
        let base = diagnostics(&state, &params);
        let moved = State::new(
            state.t,
            state.x.iter().map(|x| x + shift).collect(),
            state.v.iter().map(|v| v + boost).collect(),
        )
        .expect("shifted state stays valid");
        let shifted = diagnostics(&moved, &params);
        let pairs = [
            (base.min_gap_slack, shifted.min_gap_slack, "min gap slack"),
            (base.formation_error, shifted.formation_error, "formation error"),
            (base.velocity_diameter, shifted.velocity_diameter, "velocity diameter"),
        ];
        for (a, b, label) in pairs {
            let scale = 1.0 + a.abs() + shift.abs() + boost.abs();
            prop_assert!(
                (a - b).abs() <= 1e-12 * scale,
                "{label} moved under a rigid shift: {a} vs {b}"
            );
        }
    }

    #[test]
    fn control_primitive_round_trips(
        s in 0.0f64..50.0,
        beta in prop_oneof![
            Just(0.8), Just(1.0), Just(1.0 - 1e-9), Just(1.0 + 1e-9),
            Just(1.025), Just(2.0), Just(4.1),
            0.3f64..4.5,
        ],
    ) {
        let forward = phi_primitive(s, beta).expect("primitive is total on s >= 0");
        let back = phi_primitive_inverse(forward, beta).expect("image point inverts");
        prop_assert!(
            (back - s).abs() <= 1e-10 * s.abs().max(f64::MIN_POSITIVE),
            "round trip at beta {beta} lost digits: {s} came back as {back}"
        );
    }

    #[test]
    fn control_primitive_is_strictly_monotone(
        s1 in 0.0f64..50.0,
        s2 in 0.0f64..50.0,
        beta in 0.3f64..4.5,
    ) {
        prop_assume!(s1 != s2);
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        let f_lo = phi_primitive(lo, beta).expect("primitive is total on s >= 0");
        let f_hi = phi_primitive(hi, beta).expect("primitive is total on s >= 0");
        prop_assert!(
            f_lo < f_hi,
            "primitive must grow strictly: F({lo}) = {f_lo}, F({hi}) = {f_hi}"
        );
    }

    #[test]
    fn flocking_verdict_is_shift_invariant(
        (params, state) in config_strategy(),
        shift in -10.0f64..10.0,
        boost in -10.0f64..10.0,
    ) {
        let base = check_flocking_condition(&state, &params);
        let e = base.constant("initial_energy").expect("energy always reported");
        if let Some(threshold) = base.constant("threshold") {
            // A verdict within round-off of the threshold can legitimately flip.
            prop_assume!((e - threshold).abs() > 1e-9 * (1.0 + e.abs()));
        }
        let moved = State::new(
            state.t,
            state.x.iter().map(|x| x + shift).collect(),
            state.v.iter().map(|v| v + boost).collect(),
        )
        .expect("shifted state stays valid");
        let shifted = check_flocking_condition(&moved, &params);
        prop_assert_eq!(
            base.check("flocking condition satisfied"),
            shifted.check("flocking condition satisfied"),
            "the admission verdict depends only on differences"
        );
    }
}

#[test]
fn gap_functional_diverges_as_a_gap_closes() {
    let params = ModelParams::new(3.0, 0.8, vec![0.0], vec![1.0]).expect("valid parameters");
    let mut previous = f64::NEG_INFINITY;
    for k in 1..=12 {
        let slack = 10.0f64.powi(-k);
        let state = State::new(0.0, vec![slack, 0.0], vec![0.0, 0.0]).expect("valid state");
        let value = l_functional(&state, &params).expect("open gap");
        assert!(
            value > previous,
            "the functional must grow as the gap closes: {value} after {previous}"
        );
        previous = value;
    }
    assert!(
        previous > 1e11,
        "by slack 1e-12 the functional should exceed 1e11, got {previous}"
    );

    let touching = State::new(0.0, vec![0.0, 0.0], vec![0.0, 0.0]).expect("valid state");
    assert!(
        l_functional(&touching, &params).is_err(),
        "a closed gap has no finite functional"
    );
}
