//! Static power-transfer limit over a range of grid strengths.
//!
//! `cargo run --example static_limits`

use vsc_ctrl::analysis::static_limits;

fn main() -> vsc_ctrl::Result<()> {
    let xr80 = 80f64.to_radians().tan();
    println!("{:>5} {:>8} {:>8} {:>8}", "SCR", "X/R", "P_max", "Q");
    for (scr, xr) in [(1.0, 1.0), (1.0, xr80), (2.0, xr80), (4.0, xr80), (5.0, xr80), (4.0, f64::INFINITY)] {
        let s = static_limits(scr, xr, 1.0)?;
        println!("{scr:>5} {xr:>8.3} {:>8.3} {:>8.3}", s.p_max_pu, s.q_pu);
    }
    Ok(())
}
