//! Closed-loop eigenvalues as the grid weakens from SCR 4 to 2.
//!
//! `cargo run --release --example eigen_sweep [-- out_dir]`

use vsc_ctrl::analysis::{linspace, sweep};
use vsc_ctrl::config::Profile;

fn main() -> vsc_ctrl::Result<()> {
    let p = Profile::from_toml_str(include_str!("configs/sweep_scr.toml"))?;
    let s = &p.sweep;
    let values = linspace(s.from, s.to, s.points);
    for c in [p.siso_controller(), p.mimo_controller()?] {
        let res = sweep(s.param, &values, &p.sweep_template(c.clone())?)?;
        let worst = res.max_real_part.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{}: first unstable SCR {:?}, {} of {} points unstable, largest real part {worst:.2}",
            c.name(),
            res.first_unstable,
            res.unstable_count(),
            values.len()
        );
        if let Some(dir) = std::env::args().nth(1) {
            let path = std::path::Path::new(&dir).join(format!("sweep_scr_{}.csv", c.name()));
            res.write_csv(std::fs::File::create(path)?)?;
        }
    }
    Ok(())
}
