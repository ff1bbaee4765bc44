//! The strong-grid steps repeated at SCR 1.95.
//!
//! `cargo run --release --example weak_grid`

use vsc_ctrl::config::Profile;
use vsc_ctrl::sim::{run_scenario, step_metrics, Axis};

fn main() -> vsc_ctrl::Result<()> {
    let p = Profile::from_toml_str(include_str!("configs/step_weak_grid.toml"))?;
    for c in [p.siso_controller(), p.mimo_controller()?] {
        let ts = run_scenario(&p.scenario(c.clone())?)?;
        let m = step_metrics(&ts, 0.4, Axis::D)?;
        println!(
            "{}: diverged {}, IAE {:.4}, overshoot {:.0}%, final error {:.1e}",
            c.name(),
            ts.diverged,
            m.iae,
            m.overshoot_pct,
            m.final_error
        );
    }
    Ok(())
}
