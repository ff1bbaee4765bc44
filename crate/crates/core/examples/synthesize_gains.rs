//! LQR-PI gains for the reference converter at 50 Hz and 60 Hz.
//!
//! `cargo run --example synthesize_gains`

use vsc_ctrl::config::Profile;

fn main() -> vsc_ctrl::Result<()> {
    for f in [50.0, 60.0] {
        let mut p = Profile::default();
        p.plant.f_nom = f;
        let rep = p.synthesize()?;
        let r = &rep.result;
        println!("f = {f} Hz");
        println!("  K_P = {:.4?}", r.k_p.to_rows());
        println!("  K_I = {:.4?}", r.k_i.to_rows());
        println!("  CARE residual {:.2e}, Hamiltonian agreement {:.2e}", r.care_residual, r.hamiltonian_agreement.unwrap_or(f64::NAN));
        let eig: Vec<String> = r.closed_loop.iter().map(|l| format!("{:.1}{:+.1}i", l.re, l.im)).collect();
        println!("  closed loop: {}", eig.join(", "));
    }
    Ok(())
}
