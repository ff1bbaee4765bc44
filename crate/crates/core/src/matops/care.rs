//! Continuous algebraic Riccati equation
//!
//! ```text
//! P B R⁻¹ Bᵀ P − P A − Aᵀ P − Q = 0
//! ```
//!
//! The production path is Kleinman–Newton: starting from any stabilizing
//! gain, each step solves one Lyapunov equation and the iterates converge
//! quadratically and monotonically to the stabilizing solution.
//!
//! [`solve_care_hamiltonian`] computes the same solution from the stable
//! invariant subspace of the Hamiltonian matrix (via the matrix sign
//! function). It shares no code with the Newton route beyond LU and is kept
//! as an independent cross-check.

use serde::{Deserialize, Serialize};

use super::lyapunov::solve_lyapunov;
use super::{eigenvalues, lstsq, MatError, Matrix, Result};

const NEWTON_MAX_ITERS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CareSolution {
    /// Stabilizing solution (symmetric, positive semidefinite).
    pub p: Matrix,
    /// Optimal gain `R⁻¹BᵀP`.
    pub k: Matrix,
    pub iterations: usize,
    /// Frobenius residual relative to the sum of term norms.
    pub relative_residual: f64,
}

fn check_inputs(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<()> {
    let n = a.rows();
    if !a.is_square() {
        return Err(MatError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let m = b.cols();
    if b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != m || r.cols() != m {
        return Err(MatError::Dimension(format!(
            "CARE shapes: A {n}x{n}, B {}x{m}, Q {}x{}, R {}x{}",
            b.rows(),
            q.rows(),
            q.cols(),
            r.rows(),
            r.cols()
        )));
    }
    for mat in [a, b, q, r] {
        if !mat.is_finite() {
            return Err(MatError::NonFinite);
        }
    }
    if !q.is_symmetric(1e-10) {
        return Err(MatError::Dimension("Q must be symmetric".into()));
    }
    if !r.is_symmetric(1e-12) {
        return Err(MatError::NotPositiveDefinite);
    }
    let re_min = eigenvalues(r)?
        .iter()
        .map(|l| l.re)
        .fold(f64::INFINITY, f64::min);
    if re_min <= 0.0 {
        return Err(MatError::NotPositiveDefinite);
    }
    Ok(())
}

/// Relative residual of the CARE at `p`.
pub fn care_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<f64> {
    let rinv_bt = r.solve(&b.transpose())?;
    let quad = &(p * b) * &(&rinv_bt * p);
    let pa = p * a;
    let atp = &a.transpose() * p;
    let res = &(&(&quad - &pa) - &atp) - q;
    let scale = quad.norm_fro() + pa.norm_fro() + atp.norm_fro() + q.norm_fro();
    Ok(if scale == 0.0 {
        res.norm_fro()
    } else {
        res.norm_fro() / scale
    })
}

/// Bass-type stabilizing gain: with β above the spectral radius,
/// `(A + βI)Z + Z(A + βI)ᵀ = 2BR⁻¹Bᵀ` has `Z ≻ 0` for a controllable pair and
/// `K₀ = R⁻¹BᵀZ⁻¹` places `A − BK₀` in the open left half-plane.
fn initial_gain(a: &Matrix, b: &Matrix, r: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.is_hurwitz()? {
        return Ok(Matrix::zeros(b.cols(), n));
    }
    let radius = eigenvalues(a)?.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let beta = radius.max(a.max_abs()) + 1.0;
    let shifted = &a.transpose().scale(-1.0) - &Matrix::identity(n).scale(beta);
    let rinv_bt = r.solve(&b.transpose())?;
    let g = (b * &rinv_bt).scale(2.0).symmetrize();
    let z = solve_lyapunov(&shifted, &g).map_err(|_| MatError::NoStabilizingGain)?;
    let zinv = z.inverse().map_err(|_| MatError::NoStabilizingGain)?;
    let k0 = &rinv_bt * &zinv;
    let closed = a - &(b * &k0);
    if !closed.is_hurwitz()? {
        return Err(MatError::NoStabilizingGain);
    }
    Ok(k0)
}

/// Stabilizing solution of the CARE by Kleinman–Newton iteration.
///
/// When `q` is identically zero the trivial solution `P = 0` is returned;
/// it is the stabilizing one only if `a` is already Hurwitz.
pub fn solve_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<CareSolution> {
    check_inputs(a, b, q, r)?;
    let n = a.rows();
    if q.max_abs() == 0.0 {
        return Ok(CareSolution {
            p: Matrix::zeros(n, n),
            k: Matrix::zeros(b.cols(), n),
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let rinv_bt = r.solve(&b.transpose())?;
    let mut k = initial_gain(a, b, r)?;
    let mut p_prev: Option<Matrix> = None;
    let mut iterations = 0;
    let mut p = Matrix::zeros(n, n);
    for it in 1..=NEWTON_MAX_ITERS {
        iterations = it;
        let ak = a - &(b * &k);
        let qk = q + &(&(&k.transpose() * r) * &k);
        p = match solve_lyapunov(&ak, &qk.symmetrize()) {
            Ok(p) => p,
            Err(MatError::NotHurwitz) => return Err(MatError::NoStabilizingGain),
            Err(e) => return Err(e),
        };
        k = &rinv_bt * &p;
        if let Some(prev) = &p_prev {
            let delta = (&p - prev).norm_fro();
            if delta <= 1e-14 * p.norm_fro().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        p_prev = Some(p.clone());
    }
    let relative_residual = care_residual(a, b, q, r, &p)?;
    if relative_residual > RESIDUAL_TOL || !relative_residual.is_finite() {
        return Err(MatError::Stagnation(relative_residual));
    }
    Ok(CareSolution {
        p,
        k,
        iterations,
        relative_residual,
    })
}

/// Stabilizing CARE solution from the stable invariant subspace of the
/// Hamiltonian `H = [[A, −BR⁻¹Bᵀ], [−Q, −Aᵀ]]`, computed with the scaled
/// Newton iteration for `sign(H)`.
pub fn solve_care_hamiltonian(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    check_inputs(a, b, q, r)?;
    let n = a.rows();
    let g = &b.matmul(&r.solve(&b.transpose())?)?;
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.set_block(0, 0, a);
    h.set_block(0, n, &g.scale(-1.0));
    h.set_block(n, 0, &q.scale(-1.0));
    h.set_block(n, n, &a.transpose().scale(-1.0));

    let mut z = h;
    let mut converged = false;
    for _ in 0..200 {
        let lu = z.lu()?;
        let det = lu.determinant().abs();
        let zinv = lu.solve(&Matrix::identity(2 * n))?;
        let c = if det.is_finite() && det > 0.0 {
            det.powf(1.0 / (2 * n) as f64)
        } else {
            1.0
        };
        let next = (&z.scale(1.0 / c) + &zinv.scale(c)).scale(0.5);
        let delta = (&next - &z).norm_fro();
        let scale = next.norm_fro();
        z = next;
        if delta <= 1e-13 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MatError::NoConvergence(200));
    }
    let w11 = z.block(0, 0, n, n);
    let w12 = z.block(0, n, n, n);
    let w21 = z.block(n, 0, n, n);
    let w22 = z.block(n, n, n, n);
    let id = Matrix::identity(n);
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.set_block(0, 0, &w12);
    lhs.set_block(n, 0, &(&w22 + &id));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.set_block(0, 0, &(&w11 + &id).scale(-1.0));
    rhs.set_block(n, 0, &w21.scale(-1.0));
    Ok(lstsq(&lhs, &rhs)?.symmetrize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[[v]])
    }

    #[test]
    fn scalar_integrator() {
        let s = solve_care(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((s.p[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_unstable() {
        let s = solve_care(&scalar(1.0), &scalar(1.0), &scalar(2.0), &scalar(1.0)).unwrap();
        assert!((s.p[(0, 0)] - (1.0 + 3f64.sqrt())).abs() < 1e-12);
        let h = solve_care_hamiltonian(&scalar(1.0), &scalar(1.0), &scalar(2.0), &scalar(1.0)).unwrap();
        assert!((h[(0, 0)] - (1.0 + 3f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn double_integrator_matches_closed_form() {
        // P = [[√3, 1], [1, √3]] for A = [[0,1],[0,0]], B = e₂, Q = I, R = 1.
        let a = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        let b = Matrix::column(&[0.0, 1.0]);
        let s = solve_care(&a, &b, &Matrix::identity(2), &scalar(1.0)).unwrap();
        let want = Matrix::from_rows(&[[3f64.sqrt(), 1.0], [1.0, 3f64.sqrt()]]);
        assert!((&s.p - &want).max_abs() < 1e-12);
        assert!(s.relative_residual < 1e-12);
    }

    #[test]
    fn rejects_indefinite_r() {
        assert_eq!(
            solve_care(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(-1.0)),
            Err(MatError::NotPositiveDefinite)
        );
    }

    #[test]
    fn zero_weight_gives_zero_solution() {
        let s = solve_care(&scalar(-1.0), &scalar(1.0), &scalar(0.0), &scalar(1.0)).unwrap();
        assert_eq!(s.p, scalar(0.0));
    }

    #[test]
    fn uncontrollable_unstable_mode_fails() {
        let a = Matrix::diag(&[1.0, -1.0]);
        let b = Matrix::column(&[0.0, 1.0]);
        assert!(solve_care(&a, &b, &Matrix::identity(2), &scalar(1.0)).is_err());
    }
}
