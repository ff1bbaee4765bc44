//! Simulated transfer-limit search at SCR 1, X/R 1.
//!
//! Each probe ramps the current command to a candidate magnitude and checks
//! that it holds. Takes a few seconds in release mode.
//!
//! `cargo run --release --example transfer_limits`

use vsc_ctrl::analysis::static_limits;
use vsc_ctrl::config::Profile;
use vsc_ctrl::sim::{transfer_limit_search, LimitAxis};

fn main() -> vsc_ctrl::Result<()> {
    let p = Profile::from_toml_str(include_str!("configs/limits_scr1.toml"))?;
    let l = &p.limits;
    let st = static_limits(l.scr, l.xr, l.vg_over_vo)?;
    println!("static limit: P_max = {:.3} p.u.", st.p_max_pu);
    let search = p.limit_search();
    for c in [p.siso_controller(), p.mimo_controller()?] {
        let template = p.scenario(c.clone())?;
        for axis in [LimitAxis::P, LimitAxis::Q] {
            let lim = transfer_limit_search(&template, axis, l.scr, l.xr, &search)?;
            println!("{} {:?}: {:?}", c.name(), axis, lim);
        }
    }
    Ok(())
}
