//! Property tests over randomized inputs.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;

use snls_chaos::canonical;
use snls_chaos::global_map::{apply_p10, compose_p};
use snls_chaos::horseshoe::{fixed_point_family, refine_fixed_point, shift_map, Symbol, SymbolSequence};
use snls_chaos::normal_form::{flight_time_to_sigma1, local_flow, local_map_p01, NormalFormPoint};
use snls_chaos::params::{
    check_nonresonance, compute_saddle, compute_spectrum, EigenLadder, LadderEntry, ModelParams, NonresonanceConfig,
};
use snls_chaos::spectral::{shift_half_period, tangency_angle, FieldState};

fn admissible() -> impl Strategy<Value = ModelParams> {
    (0.55f64..0.95, 0.2f64..2.0, 0.0f64..0.02, 1.05f64..3.0).prop_map(|(omega, alpha, eps, ratio)| {
        ModelParams::new(alpha, ratio * alpha * omega, omega, eps).unwrap()
    })
}

fn tail() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..0.5, 4)
}

/// A point of Σ₀ whose image stays inside Σ₁.
fn sigma0_point() -> impl Strategy<Value = NormalFormPoint> {
    let r = canonical::rates();
    let eta = canonical::ETA;
    let x_lo = eta * (-2.0 * PI * r.a / r.b).exp();
    (x_lo..eta, 0.02f64..0.95, -0.9f64..0.9, tail()).prop_map(move |(x, u, v, q)| {
        let z1 = u * eta;
        let reach = (z1 / eta).powf(r.gamma2 / r.gamma1) * eta;
        NormalFormPoint::new(x, 0.0, z1, v * reach, q)
    })
}

proptest! {
    #[test]
    fn ladder_branches_share_the_real_shift(p in admissible()) {
        let ladder = compute_spectrum(&p, 16).unwrap();
        for e in &ladder.entries {
            let n2 = (e.n * e.n) as f64;
            let sum = e.lambda_plus + e.lambda_minus + 2.0 * p.epsilon * (p.alpha + n2);
            prop_assert!(sum.norm() < 1e-12, "n = {}: {sum}", e.n);
            prop_assert!((e.lambda_plus.re, e.lambda_plus.im) >= (e.lambda_minus.re, e.lambda_minus.im));
        }
    }

    #[test]
    fn saddle_phase_identity(p in admissible()) {
        let s = compute_saddle(&p).unwrap();
        prop_assert!((s.theta.cos() - p.alpha * s.intensity.sqrt() / p.beta).abs() < 1e-12);
        prop_assert!(s.theta > 0.0 && s.theta < FRAC_PI_2);
        prop_assert!((s.q_value.norm_sqr() - s.intensity).abs() < 1e-12);
    }

    #[test]
    fn conservative_high_modes_are_oscillatory(p in admissible()) {
        let p0 = ModelParams::new(p.alpha, p.beta, p.omega, 0.0).unwrap();
        let s = compute_saddle(&p0).unwrap();
        prop_assert!((s.intensity - p0.omega * p0.omega).abs() < 1e-15);
        let ladder = compute_spectrum(&p0, 16).unwrap();
        for e in ladder.entries.iter().filter(|e| (e.n * e.n) as f64 / 2.0 >= 2.0 * p0.omega * p0.omega) {
            prop_assert!(e.lambda_plus.re.abs() < 1e-12 && e.lambda_minus.re.abs() < 1e-12);
        }
    }

    #[test]
    fn nonresonance_is_monotone_in_s(values in prop::collection::vec(0.1f64..5.0, 4), s in 1u32..5) {
        let entries = values
            .iter()
            .enumerate()
            .map(|(n, &v)| LadderEntry { n, lambda_plus: Complex64::new(v, 0.3 * v), lambda_minus: Complex64::new(-v, 0.1) })
            .collect();
        let ladder = EigenLadder::from_entries(entries);
        let cfg = |s| NonresonanceConfig { s, n_max: 3, r_max: 3, l_bound: 3, ..Default::default() };
        let lo = check_nonresonance(&ladder, &cfg(s)).unwrap();
        let hi = check_nonresonance(&ladder, &cfg(s + 1)).unwrap();
        prop_assert!(!lo.holds || hi.holds);
        prop_assert!(hi.worst_margin >= lo.worst_margin);
    }

    #[test]
    fn fields_are_even_and_periodic(
        modes in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
        zeta in -10.0f64..10.0,
    ) {
        let state = FieldState { modes: modes.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), time: 0.0 };
        prop_assert!((state.eval(zeta) - state.eval(-zeta)).norm() < 1e-12);
        prop_assert!((state.eval(zeta) - state.eval(zeta + 2.0 * PI)).norm() < 1e-11);
        let shifted = shift_half_period(&state);
        prop_assert!((shifted.eval(zeta) - state.eval(zeta + PI)).norm() < 1e-11);
        prop_assert_eq!(shift_half_period(&shifted), state);
    }

    #[test]
    fn tangency_angles_lie_in_the_quarter_turn(v in prop::collection::vec(-1.0f64..1.0, 8)) {
        let p = NormalFormPoint::new(v[0], v[1], v[2], v[3], v[4..].to_vec());
        if let Some(a) = tangency_angle(&p) {
            prop_assert!((0.0..=FRAC_PI_2).contains(&a));
        }
    }

    #[test]
    fn flight_time_decreases_in_z1(a in 0.01f64..1.49, b in 0.01f64..1.49) {
        prop_assume!((a - b).abs() > 1e-9);
        let eta = canonical::ETA;
        let gamma1 = canonical::rates().gamma1;
        let p = |z1| NormalFormPoint::new(1.0, 0.0, z1, 0.0, vec![0.0; 4]);
        let (ta, tb) = (flight_time_to_sigma1(&p(a), eta, gamma1).unwrap(), flight_time_to_sigma1(&p(b), eta, gamma1).unwrap());
        prop_assert_eq!(a < b, ta > tb);
    }

    #[test]
    fn local_map_power_laws(p in sigma0_point()) {
        let r = canonical::rates();
        let eta = canonical::ETA;
        let out = local_map_p01(&p, eta, &r).unwrap();
        let ratio = p.z1 / eta;
        let amp = out.x.hypot(out.y) / p.x.abs();
        prop_assert!((amp / ratio.powf(r.a / r.gamma1) - 1.0).abs() < 1e-12);
        if p.z2 != 0.0 {
            prop_assert!((out.z2 / p.z2 / ratio.powf(-r.gamma2 / r.gamma1) - 1.0).abs() < 1e-12);
        }
        prop_assert!(out.z1 == eta && out.z2.abs() < eta);
    }

    #[test]
    fn sigma_commutes_with_local_flow(p in sigma0_point(), t in 0.0f64..5.0) {
        let r = canonical::rates();
        let eta = canonical::ETA;
        let a = r.sigma(&local_flow(&p, t, &r, eta).unwrap());
        let b = local_flow(&r.sigma(&p), t, &r, eta).unwrap();
        prop_assert!(a.distance(&b) < 1e-14);
    }

    #[test]
    fn excursion_map_is_affine(
        d1 in prop::collection::vec(-0.3f64..0.3, 7),
        d2 in prop::collection::vec(-0.3f64..0.3, 7),
        w in 0.0f64..1.0,
    ) {
        let model = canonical::model();
        let at = |d: &[f64]| {
            let s = &model.q1_star;
            NormalFormPoint::new(s.x + d[0], s.y + d[1], s.z1, s.z2 + d[2], s.tail.iter().zip(&d[3..]).map(|(a, b)| a + b).collect())
        };
        let mix: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        let f = |d: &[f64]| apply_p10(&model, &at(d), false).unwrap().to_vec();
        let (f1, f2, fm) = (f(&d1), f(&d2), f(&mix));
        for i in 0..fm.len() {
            prop_assert!((fm[i] - (w * f1[i] + (1.0 - w) * f2[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn shift_moves_the_origin(window in prop::collection::vec(0usize..4, 9), i in -3i64..3) {
        let symbols: Vec<Symbol> = window.iter().map(|&k| Symbol::ALL[k]).collect();
        let seq = SymbolSequence::finite(symbols, 4).unwrap();
        prop_assert_eq!(shift_map(&seq).get(i), seq.get(i + 1));
    }
}

#[test]
fn refined_gap_approaches_half_turn_monotonically() {
    let inst = canonical::instance();
    let map = compose_p(inst.model.clone(), inst.eta, inst.rates.clone(), true).unwrap();
    let family = fixed_point_family(&inst.model, &inst.rates, inst.eta, canonical::X0_STAR, 1..=12).unwrap();
    let taus: Vec<f64> = family
        .entries
        .iter()
        .map(|e| refine_fixed_point(&map, &e.guess(&inst.model, &inst.rates, inst.eta)).unwrap().tau)
        .collect();
    let defects: Vec<f64> = taus.windows(2).map(|w| (w[1] - w[0] - PI / inst.rates.b).abs()).collect();
    assert!(defects.windows(2).all(|d| d[1] < d[0]), "{defects:?}");
}
