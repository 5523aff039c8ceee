//! Property tests for invariants that tie the modules together.

use lfun_core::engine::{self, PipelineParams};
use lfun_core::forms::{form_to_json, gen_delta, lift_value, lift_value_unreduced, parse_form, CuspFormSpec};
use lfun_core::geometry::{
    a_mat, iwasawa_compose, iwasawa_decompose, k_mat, n_mat, reduce_to_fundamental_domain, IwasawaCoords, Mat2,
};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Mat2> {
    (-20.0f64..20.0, -4.0f64..3.0, -3.0f64..3.0).prop_map(|(t, y, th)| n_mat(t) * a_mat(y) * k_mat(th))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduction_lands_in_fundamental_domain(m in point()) {
        let red = reduce_to_fundamental_domain(&m).unwrap();
        let z = red.reduced.act_i();
        prop_assert!(z.re.abs() <= 0.5 + 1e-12);
        prop_assert!(z.norm() >= 1.0 - 1e-9);
        let g = red.gamma;
        for e in [g.a, g.b, g.c, g.d] {
            prop_assert_eq!(e, e.round());
        }
        prop_assert_eq!(g.a * g.d - g.b * g.c, 1.0);
        prop_assert!((g * m).max_entry_diff(&red.reduced) <= 1e-9 * m.max_abs().max(1.0) * g.max_abs());
    }

    #[test]
    fn iwasawa_round_trip(t in -5.0f64..5.0, y in -3.0f64..3.0, theta in -3.1f64..3.1) {
        let c = iwasawa_decompose(&iwasawa_compose(&IwasawaCoords { t, y, theta }));
        prop_assert!((c.t - t).abs() < 1e-10 && (c.y - y).abs() < 1e-10 && (c.theta - theta).abs() < 1e-10);
    }

    /// The lift is left Γ-invariant: evaluating the Fourier expansion at an
    /// unreduced point agrees with evaluating it after reduction.
    #[test]
    fn lift_is_modular(t in -0.5f64..0.5, y in 0.45f64..0.9, th in -1.0f64..1.0) {
        let f = CuspFormSpec::delta(200);
        let m = n_mat(t) * a_mat(y.ln()) * k_mat(th);
        let a = lift_value_unreduced(&f, &m).unwrap();
        let b = lift_value(&f, &m).unwrap();
        prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1e-30), "{a} vs {b}");
    }
}

#[test]
fn form_json_round_trip_keeps_exact_coefficients() {
    let f = CuspFormSpec::holomorphic(12, gen_delta(300)).unwrap();
    let g = parse_form(&form_to_json(&f)).unwrap();
    assert_eq!(g.weight, 12);
    for n in 1..=300 {
        assert_eq!(f.coefficients.exact(n), g.coefficients.exact(n), "a({n})");
    }
}

#[test]
fn delta_coefficients_satisfy_known_values() {
    let tau = gen_delta(12);
    let known = [1i128, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920, 534612, -370944];
    for (n, &v) in known.iter().enumerate() {
        assert_eq!(tau.exact(n + 1), Some(v));
    }
}

#[test]
fn fourier_pipeline_recovers_ramanujan_tau() {
    let f = CuspFormSpec::delta(200);
    let p = PipelineParams::default();
    for (t, want) in [(12u64, -370944.0), (100, 37_534_859_200.0)] {
        let out = engine::fourier_fast(&f, t, &p).unwrap();
        assert!((out.value.re - want).abs() <= 1e-8 * want.abs(), "τ({t}) = {}", out.value);
        assert!(out.value.im.abs() <= 1e-8 * want.abs());
    }
}

#[test]
fn lvalue_modes_agree_at_small_height() {
    let f = CuspFormSpec::delta(200);
    let p = PipelineParams::default();
    let fast = engine::lvalue_fast(&f, 16.0, &p).unwrap();
    let direct = engine::lvalue_direct(&f, 16.0, &p).unwrap();
    assert!((fast.value - direct.value).norm() <= 1e-8, "{} vs {}", fast.value, direct.value);
    assert!(fast.err_est.is_finite() && fast.err_est >= 0.0);
}
