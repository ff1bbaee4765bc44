//! Filter model, grid equivalent and operating point of the reference
//! converter.
//!
//! `cargo run --example plant_model`

use vsc_ctrl::config::Profile;
use vsc_ctrl::matops::eigenvalues;
use vsc_ctrl::plant::{grid_from_scr, plant_matrices, steady_state};

fn main() -> vsc_ctrl::Result<()> {
    let p = Profile::default();
    let fp = p.filter()?;
    let base = p.base()?;
    let w = p.omega_nom();
    let ss = plant_matrices(&fp, w)?;
    let eig: Vec<String> = eigenvalues(&ss.a)?.iter().map(|l| format!("{:.2}{:+.2}i", l.re, l.im)).collect();
    println!("L-filter poles: {}", eig.join(", "));
    println!("base: {:.1} A peak, {:.1} V peak, {:.3} ohm", base.i_base_pk, base.v_base_pk(), base.z_base);
    for scr in [5.0, 2.0] {
        let g = grid_from_scr(scr, 80f64.to_radians().tan(), &base, p.plant.f_nom)?;
        let op = steady_state((0.6 * base.i_base_pk, 0.1 * base.i_base_pk), &g, &fp, w)?;
        let vt = op.state.terminal_voltage(&fp);
        println!(
            "SCR {scr}: R_g = {:.4} ohm, L_g = {:.3} mH, frame angle {:.2} deg, |v_t| = {:.3} p.u.",
            g.r_g,
            1e3 * g.l_g,
            op.delta.to_degrees(),
            vt.0.hypot(vt.1) / base.v_base_pk()
        );
    }
    Ok(())
}
