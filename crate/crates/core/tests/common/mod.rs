#![allow(dead_code)]

use vsc_ctrl::matops::Matrix;

pub fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// RK4 trajectory of `ż = A z + B u` for a constant input, sampled every
/// step including `z0`.
pub fn linear_response(a: &Matrix, b: &Matrix, u: &[f64], z0: &[f64], dt: f64, steps: usize) -> Vec<Vec<f64>> {
    let n = z0.len();
    let bu = b.mul_vec(u);
    let f = |z: &[f64]| -> Vec<f64> { a.mul_vec(z).iter().zip(&bu).map(|(x, y)| x + y).collect() };
    let mut z = z0.to_vec();
    let mut out = vec![z.clone()];
    for _ in 0..steps {
        let k1 = f(&z);
        let t: Vec<f64> = (0..n).map(|i| z[i] + 0.5 * dt * k1[i]).collect();
        let k2 = f(&t);
        let t: Vec<f64> = (0..n).map(|i| z[i] + 0.5 * dt * k2[i]).collect();
        let k3 = f(&t);
        let t: Vec<f64> = (0..n).map(|i| z[i] + dt * k3[i]).collect();
        let k4 = f(&t);
        for i in 0..n {
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(z.clone());
    }
    out
}

pub fn config(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
