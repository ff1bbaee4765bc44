use std::f64::consts::TAU;

use proptest::prelude::*;
use vsc_ctrl::matops::eigenvalues;
use vsc_ctrl::plant::*;

fn base() -> PerUnitBase {
    PerUnitBase::new(100e3, 500.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn park_round_trip(d in -1e3..1e3f64, q in -1e3..1e3f64, theta in -20.0..20.0f64) {
        let (d2, q2) = park(inverse_park((d, q), theta), theta);
        prop_assert!((d - d2).abs() <= 1e-9 * (1.0 + d.abs()));
        prop_assert!((q - q2).abs() <= 1e-9 * (1.0 + q.abs()));
    }

    #[test]
    fn park_of_balanced_set(v in 0.0..1e3f64, phi in -10.0..10.0f64, theta in -10.0..10.0f64) {
        let abc = [phi, phi - TAU / 3.0, phi + TAU / 3.0].map(|a| v * a.cos());
        let (d, q) = park(abc, theta);
        prop_assert!((d - v * (phi - theta).cos()).abs() <= 1e-9 * (1.0 + v));
        prop_assert!((q - v * (phi - theta).sin()).abs() <= 1e-9 * (1.0 + v));
    }

    #[test]
    fn filter_poles(r in 1e-3..1.0f64, l in 1e-5..1e-2f64, f in 1.0..400.0f64) {
        let w = TAU * f;
        let ss = plant_matrices(&FilterParams::new(r, l, 1e-5).unwrap(), w).unwrap();
        let eig = eigenvalues(&ss.a).unwrap();
        for e in eig.iter() {
            prop_assert!((e.re + r / l).abs() <= 1e-9 * (r / l + w));
            prop_assert!((e.im.abs() - w).abs() <= 1e-9 * (r / l + w));
        }
    }

    #[test]
    fn grid_impedance_matches_scr(scr in 0.5..50.0f64, xr in 0.0..30.0f64) {
        let b = base();
        let g = grid_from_scr(scr, xr, &b, 50.0).unwrap();
        prop_assert!((g.impedance_magnitude() - b.z_base / scr).abs() <= 1e-12 * b.z_base);
        if xr > 0.0 {
            prop_assert!((g.omega_nom() * g.l_g / g.r_g - xr).abs() <= 1e-9 * xr);
        }
    }

    #[test]
    fn steady_state_is_stationary(i_d in -0.8..0.8f64, i_q in -0.8..0.8f64, scr in 2.0..20.0f64, r_d in 0.0..3.0f64) {
        let b = base();
        let fp = FilterParams::new(0.02, 600e-6, 12e-6).unwrap().with_damping(r_d).unwrap();
        let g = grid_from_scr(scr, 80f64.to_radians().tan(), &b, 50.0).unwrap();
        let w = TAU * 50.0;
        let ss = steady_state((i_d * b.i_base_pk, i_q * b.i_base_pk), &g, &fp, w).unwrap();
        let dx = plant_derivatives(&ss.state, ss.u, &g, &fp, Frame { omega: w, delta: ss.delta });
        let a = dx.to_array();
        let scale = [b.i_base_pk, b.i_base_pk, b.v_base_pk(), b.v_base_pk(), b.i_base_pk, b.i_base_pk];
        for k in 0..6 {
            prop_assert!(a[k].abs() <= 1e-9 * w * scale[k], "state {} derivative {}", k, a[k]);
        }
        let vt = ss.state.terminal_voltage(&fp);
        prop_assert!(vt.1.abs() <= 1e-9 * b.v_base_pk());
    }
}

#[test]
fn per_unit_bases() {
    let b = base();
    assert!((b.z_base - 2.5).abs() < 1e-12);
    assert!((b.i_base_pk - 163.299_316).abs() < 1e-5);
    assert!((b.v_base_pk() - 408.248_290).abs() < 1e-5);
}

#[test]
fn pll_locks_onto_rotating_voltage() {
    let gains = PllGains { k_p: 48.0, k_i: 144.0 };
    let w = TAU * 50.0;
    let dt = 1e-5;
    let mut pll = PllState::default();
    let phase0 = 0.7;
    for k in 0..400_000 {
        let t = k as f64 * dt;
        let grid_angle = phase0 + (w + 2.0) * t;
        let abc = [grid_angle, grid_angle - TAU / 3.0, grid_angle + TAU / 3.0].map(|a| 400.0 * a.cos());
        let (d, q) = park(abc, pll.theta);
        pll = pll_step(&pll, pll_input(d, q, 408.0), dt, &gains, w);
    }
    assert!((pll.omega_dev - 2.0).abs() < 1e-3, "{}", pll.omega_dev);
}
