//! Robustness to filter-parameter error at SCR 2: the plant's R_f doubles
//! and its L_f halves while both controllers keep their design gains.
//!
//! `cargo run --release --example filter_sweep`

use vsc_ctrl::analysis::{linspace, sweep};
use vsc_ctrl::config::Profile;

fn main() -> vsc_ctrl::Result<()> {
    for text in [include_str!("configs/sweep_rf.toml"), include_str!("configs/sweep_lf.toml")] {
        let p = Profile::from_toml_str(text)?;
        let s = &p.sweep;
        let values = linspace(s.from, s.to, s.points);
        for c in [p.siso_controller(), p.mimo_controller()?] {
            let res = sweep(s.param, &values, &p.sweep_template(c.clone())?)?;
            println!(
                "{} {}: {} unstable points, first at {:?}",
                s.param.name(),
                c.name(),
                res.unstable_count(),
                res.first_unstable
            );
        }
    }
    Ok(())
}
