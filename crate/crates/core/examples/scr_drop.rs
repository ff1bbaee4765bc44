//! Grid strength drops from SCR 4 to 2 under heavy active and reactive load.
//!
//! `cargo run --release --example scr_drop`

use vsc_ctrl::config::Profile;
use vsc_ctrl::sim::run_scenario;

fn main() -> vsc_ctrl::Result<()> {
    let p = Profile::from_toml_str(include_str!("configs/scr_drop.toml"))?;
    for c in [p.siso_controller(), p.mimo_controller()?] {
        let ts = run_scenario(&p.scenario(c.clone())?)?;
        print!("{}: ", c.name());
        match ts.diverged_at {
            Some(t) => println!("lost synchronism at t = {t:.3} s"),
            None => {
                let k = ts.len() - 1;
                let (ed, eq) = (ts.i_id[k] - ts.i_id_ref[k], ts.i_iq[k] - ts.i_iq_ref[k]);
                println!("rides through, final error ({ed:.1e}, {eq:.1e}) p.u., PLL deviation {:.2e} rad/s", ts.omega_dev[k]);
            }
        }
    }
    Ok(())
}
