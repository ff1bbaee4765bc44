mod common;

use common::{config, linear_response, rms};
use vsc_ctrl::config::Profile;
use vsc_ctrl::matops::Matrix;
use vsc_ctrl::plant::plant_matrices;
use vsc_ctrl::sim::*;

fn profile(name: &str) -> Profile {
    Profile::from_toml_str(&config(name)).unwrap()
}

#[test]
fn reruns_are_bit_identical() {
    let p = profile("step_strong_grid.toml");
    for c in [p.siso_controller(), p.mimo_controller().unwrap()] {
        let cfg = p.scenario(c).unwrap();
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert!(a.i_id.iter().zip(&b.i_id).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn halving_the_plant_step_barely_moves_the_trace() {
    let p = profile("step_strong_grid.toml");
    for c in [p.siso_controller(), p.mimo_controller().unwrap()] {
        let cfg = p.scenario(c).unwrap();
        let mut fine = cfg.clone();
        fine.dt_plant /= 2.0;
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&fine).unwrap();
        assert_eq!(a.len(), b.len());
        let d: Vec<f64> = a.i_id.iter().zip(&b.i_id).map(|(x, y)| x - y).collect();
        assert!(rms(&d) <= 1e-4, "{}", rms(&d));
    }
}

#[test]
fn zero_setpoint_stays_put() {
    let p = profile("zero_setpoint.toml");
    for c in [p.siso_controller(), p.mimo_controller().unwrap()] {
        for scr in [2.0, 5.0, 1000.0] {
            let mut cfg = p.scenario(c.clone()).unwrap();
            cfg.scr_schedule[0].scr = scr;
            let ts = run_scenario(&cfg).unwrap();
            assert!(!ts.diverged);
            let worst = ts.i_id.iter().chain(&ts.i_iq).fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(worst <= 1e-9, "SCR {scr}: {worst:e}");
            let v0 = (ts.v_od[0], ts.v_oq[0]);
            let k = ts.len() - 1;
            assert!((ts.v_od[k] - v0.0).abs() <= 1e-9 && (ts.v_oq[k] - v0.1).abs() <= 1e-9);
        }
    }
}

#[test]
fn stiff_grid_mimo_matches_augmented_design_model() {
    let p = profile("stiff_grid.toml");
    let rep = p.synthesize().unwrap();
    let cfg = p.scenario(p.mimo_controller().unwrap()).unwrap();
    let ts = run_scenario(&cfg).unwrap();
    let ib = cfg.base.i_base_pk;
    let ss = plant_matrices(&cfg.filter, cfg.omega_nom()).unwrap();
    // Closed loop in [x − x*, z] with z = ∫(x* − x):
    // ẋ = (A − B K_P)(x − x*) + B K_I z, ż = −(x − x*).
    let bkp = &ss.b * &rep.result.k_p;
    let bki = &ss.b * &rep.result.k_i;
    let mut a = Matrix::zeros(4, 4);
    a.set_block(0, 0, &(&ss.a - &bkp));
    a.set_block(0, 2, &bki);
    a.set_block(2, 0, &Matrix::identity(2).scale(-1.0));
    let k0 = ts.index_at(0.05).unwrap();
    let step = 0.1;
    let steps = ts.len() - 1 - k0;
    let lin = linear_response(&a, &Matrix::zeros(4, 1), &[0.0], &[-step * ib, 0.0, 0.0, 0.0], cfg.dt_plant, steps);
    let err: Vec<f64> = (0..=steps)
        .flat_map(|j| {
            let k = k0 + j;
            [ts.i_id[k] - (0.6 + lin[j][0] / ib), ts.i_iq[k] - lin[j][1] / ib]
        })
        .collect();
    assert!(rms(&err) / step <= 0.01, "{}", rms(&err) / step);
}

#[test]
fn csv_layout() {
    let p = profile("step_strong_grid.toml");
    let mut cfg = p.scenario(p.siso_controller()).unwrap();
    cfg.t_end = 0.01;
    let ts = run_scenario(&cfg).unwrap();
    let text = ts.to_csv_string();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    assert!(!text.contains('\r'));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), ts.len());
    assert_eq!(rows.len(), 51);
    for r in &rows {
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!(cols.len(), 11);
        assert_eq!(cols[10], "0");
        for c in &cols[..10] {
            c.parse::<f64>().unwrap();
        }
    }
    // Full precision: values parse back exactly.
    let first: Vec<f64> = rows[0].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(first[1], ts.i_id[0]);
}

#[test]
fn divergence_is_flagged_on_last_row() {
    let p = profile("scr_drop.toml");
    let ts = run_scenario(&p.scenario(p.siso_controller()).unwrap()).unwrap();
    assert!(ts.diverged);
    let t = ts.diverged_at.unwrap();
    assert!(t > 0.4 && t < 1.5, "{t}");
    let text = ts.to_csv_string();
    let flags: Vec<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(flags.last(), Some(&"1"));
    assert!(flags[..flags.len() - 1].iter().all(|f| *f == "0"));
    assert!(matches!(run_stable(&p.scenario(p.siso_controller()).unwrap()), Err(vsc_ctrl::Error::DivergedWindow)));
}

#[test]
fn invalid_configs_are_rejected() {
    let p = Profile::default();
    let good = p.scenario(p.siso_controller()).unwrap();
    let mut c = good.clone();
    c.dt_ctrl = 1.5e-5;
    assert!(run_scenario(&c).is_err());
    let mut c = good.clone();
    c.setpoint_schedule.reverse();
    assert!(run_scenario(&c).is_err());
    let mut c = good.clone();
    c.scr_schedule[0].xr = 0.0;
    assert!(run_scenario(&c).is_err());
    let mut c = good;
    c.t_end = 0.0;
    assert!(run_scenario(&c).is_err());
}

#[test]
fn metrics_need_a_step() {
    let p = profile("zero_setpoint.toml");
    let ts = run_scenario(&p.scenario(p.siso_controller()).unwrap()).unwrap();
    assert!(matches!(step_metrics(&ts, 0.5, Axis::D), Err(vsc_ctrl::Error::NoStep { .. })));
}

#[test]
fn linear_setpoint_ramp() {
    let mut p = Profile::default();
    p.scenario.interp = Interp::Linear;
    p.scenario.setpoints = vec![
        SetpointEvent { time: 0.0, i_d: 0.0, i_q: 0.0 },
        SetpointEvent { time: 0.1, i_d: 0.5, i_q: -0.2 },
    ];
    let cfg = p.scenario(p.siso_controller()).unwrap();
    assert_eq!(cfg.setpoint_at(0.05), (0.25, -0.1));
    assert_eq!(cfg.setpoint_at(0.5), (0.5, -0.2));
}

#[test]
fn capped_search_reports_at_least() {
    let p = profile("limits_capped.toml");
    let l = &p.limits;
    let lim = transfer_limit_search(&p.scenario(p.mimo_controller().unwrap()).unwrap(), LimitAxis::P, l.scr, l.xr, &p.limit_search()).unwrap();
    assert_eq!(lim, TransferLimit::AtLeast { cap: 1.0 });
}
