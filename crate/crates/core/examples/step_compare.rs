//! SISO vs MIMO current steps on a strong grid.
//!
//! `cargo run --release --example step_compare [-- out_dir]` writes both
//! time series as CSV when a directory is given.

use vsc_ctrl::config::Profile;
use vsc_ctrl::sim::{run_scenario, step_metrics, Axis};

fn main() -> vsc_ctrl::Result<()> {
    let p = Profile::from_toml_str(include_str!("configs/step_strong_grid.toml"))?;
    let out = std::env::args().nth(1);
    println!("{:<5} {:>6} {:>9} {:>10} {:>10} {:>10} {:>9}", "ctrl", "step", "rise ms", "overshoot%", "settle ms", "cross p.u.", "iae");
    for c in [p.siso_controller(), p.mimo_controller()?] {
        let ts = run_scenario(&p.scenario(c.clone())?)?;
        for t in [0.4, 0.6] {
            let m = step_metrics(&ts, t, Axis::D)?;
            println!(
                "{:<5} {:>6} {:>9.2} {:>10.1} {:>10.1} {:>10.4} {:>9.5}",
                c.name(),
                t,
                1e3 * m.rise_time_10_90,
                m.overshoot_pct,
                1e3 * m.settling_time_5pct,
                m.cross_coupling_peak,
                m.iae
            );
        }
        if let Some(dir) = &out {
            let path = std::path::Path::new(dir).join(format!("step_{}.csv", c.name()));
            ts.write_csv(std::fs::File::create(&path)?)?;
        }
    }
    Ok(())
}
