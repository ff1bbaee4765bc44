//! LQR synthesis of the MIMO-PI current controller.
//!
//! The plant `ẋ = Ax + Bu, y = Cx` is augmented with the integral of the
//! tracking error, `z = ∫(y − y*)`, and the infinite-horizon cost
//! `½∫(x̄ᵀC̄ᵀQ̄C̄x̄ + uᵀR̄u)` is minimized. The optimal state feedback
//! `u = −Kx̄` then splits into a proportional block acting on the state error
//! and an integral block acting on `z`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matops::{
    care_residual, eigenvalues, rank, solve_care, solve_care_hamiltonian, Matrix, Spectrum,
    StateSpace,
};

/// Integral-augmented plant `(Ā, B̄, C̄)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSystem {
    pub a_bar: Matrix,
    pub b_bar: Matrix,
    pub c_bar: Matrix,
    /// Number of plant states (the rest are integrators).
    pub plant_states: usize,
}

impl AugmentedSystem {
    pub fn states(&self) -> usize {
        self.a_bar.rows()
    }

    pub fn inputs(&self) -> usize {
        self.b_bar.cols()
    }

    pub fn plant(&self) -> StateSpace {
        let n = self.plant_states;
        let p = self.states() - n;
        StateSpace {
            a: self.a_bar.block(0, 0, n, n),
            b: self.b_bar.block(0, 0, n, self.inputs()),
            c: self.a_bar.block(n, 0, p, n),
        }
    }
}

/// `Ā = [[A, 0], [C, 0]]`, `B̄ = [[B], [0]]`, `C̄ = [[C, 0], [0, I]]`.
pub fn augment(ss: &StateSpace) -> Result<AugmentedSystem> {
    let (n, m, p) = (ss.states(), ss.inputs(), ss.outputs());
    if ss.a.rows() != n || ss.a.cols() != n || ss.b.rows() != n || ss.c.cols() != n {
        return Err(invalid("inconsistent state-space dimensions"));
    }
    let mut a_bar = Matrix::zeros(n + p, n + p);
    a_bar.set_block(0, 0, &ss.a);
    a_bar.set_block(n, 0, &ss.c);
    let mut b_bar = Matrix::zeros(n + p, m);
    b_bar.set_block(0, 0, &ss.b);
    let mut c_bar = Matrix::zeros(2 * p, n + p);
    c_bar.set_block(0, 0, &ss.c);
    c_bar.set_block(p, n, &Matrix::identity(p));
    Ok(AugmentedSystem {
        a_bar,
        b_bar,
        c_bar,
        plant_states: n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllabilityReport {
    pub rank: usize,
    pub required: usize,
    pub controllable: bool,
}

/// Rank of `[B̄, ĀB̄, …, Āⁿ⁻¹B̄]`.
pub fn controllability_matrix(aug: &AugmentedSystem) -> Matrix {
    let n = aug.states();
    let mut blocks = Vec::with_capacity(n);
    let mut cur = aug.b_bar.clone();
    for _ in 0..n {
        let next = &aug.a_bar * &cur;
        blocks.push(cur);
        cur = next;
    }
    let refs: Vec<&Matrix> = blocks.iter().collect();
    Matrix::hstack(&refs).expect("blocks share a row count")
}

pub fn check_controllability(aug: &AugmentedSystem) -> Result<ControllabilityReport> {
    let r = rank(&controllability_matrix(aug))?;
    let required = aug.states();
    Ok(ControllabilityReport {
        rank: r,
        required,
        controllable: r == required,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqrWeights {
    pub q_bar: Matrix,
    pub r_bar: Matrix,
}

impl LqrWeights {
    pub fn new(q_bar: Matrix, r_bar: Matrix) -> Result<Self> {
        let w = Self { q_bar, r_bar };
        w.validate()?;
        Ok(w)
    }

    pub fn diagonal(q: &[f64], r: &[f64]) -> Result<Self> {
        Self::new(Matrix::diag(q), Matrix::diag(r))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("q_bar", &self.q_bar), ("r_bar", &self.r_bar)] {
            if !m.is_square() || !m.is_finite() || !m.is_symmetric(1e-12) {
                return Err(invalid(format!("{name} must be square, finite and symmetric")));
            }
        }
        let min_re = |m: &Matrix| -> Result<f64> {
            Ok(eigenvalues(m)?.iter().map(|l| l.re).fold(f64::INFINITY, f64::min))
        };
        if min_re(&self.q_bar)? < -1e-12 * self.q_bar.max_abs().max(1.0) {
            return Err(invalid("q_bar must be positive semidefinite"));
        }
        if min_re(&self.r_bar)? <= 0.0 {
            return Err(invalid("r_bar must be positive definite"));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            q_bar: self.q_bar.scale(s),
            r_bar: self.r_bar.scale(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub p: Matrix,
    pub k_full: Matrix,
    pub k_p: Matrix,
    pub k_i: Matrix,
    /// `−B⁻¹A`: maps a state setpoint to its equilibrium input.
    pub feedforward_map: Matrix,
    pub care_residual: f64,
    /// Largest entrywise gap to the Hamiltonian-subspace solution, relative
    /// to `max|P|`; absent when that route is not applicable.
    pub hamiltonian_agreement: Option<f64>,
    pub closed_loop: Spectrum,
    pub closed_loop_hurwitz: bool,
    pub controllability: ControllabilityReport,
}

/// Equilibrium input map `−B⁻¹A` for a square, invertible `B`.
pub fn feedforward_map(ss: &StateSpace) -> Result<Matrix> {
    if ss.b.rows() != ss.b.cols() {
        return Err(invalid("feedforward needs a square input matrix"));
    }
    Ok(ss.b.solve(&ss.a)?.scale(-1.0))
}

/// Input that holds the plant at `x_star`.
pub fn feedforward(x_star: &[f64], ss: &StateSpace) -> Result<Vec<f64>> {
    if x_star.len() != ss.states() {
        return Err(invalid("setpoint length does not match state count"));
    }
    Ok(feedforward_map(ss)?.mul_vec(x_star))
}

pub fn lqr_pi_gains(aug: &AugmentedSystem, w: &LqrWeights) -> Result<SynthesisResult> {
    w.validate()?;
    let n = aug.states();
    let m = aug.inputs();
    if w.q_bar.rows() != aug.c_bar.rows() || w.r_bar.rows() != m {
        return Err(invalid(format!(
            "weights are {}x{} / {}x{}, system needs {}x{} / {m}x{m}",
            w.q_bar.rows(),
            w.q_bar.cols(),
            w.r_bar.rows(),
            w.r_bar.cols(),
            aug.c_bar.rows(),
            aug.c_bar.rows()
        )));
    }
    let controllability = check_controllability(aug)?;
    if !controllability.controllable {
        return Err(Error::Uncontrollable {
            rank: controllability.rank,
            required: controllability.required,
        });
    }
    let q_eff = (&(&aug.c_bar.transpose() * &w.q_bar) * &aug.c_bar).symmetrize();
    let sol = solve_care(&aug.a_bar, &aug.b_bar, &q_eff, &w.r_bar)?;
    let hamiltonian_agreement = if q_eff.max_abs() > 0.0 {
        solve_care_hamiltonian(&aug.a_bar, &aug.b_bar, &q_eff, &w.r_bar)
            .ok()
            .map(|ph| (&ph - &sol.p).max_abs() / sol.p.max_abs().max(f64::MIN_POSITIVE))
    } else {
        None
    };
    let care_residual = care_residual(&aug.a_bar, &aug.b_bar, &q_eff, &w.r_bar, &sol.p)?;
    let k_full = sol.k;
    let np = aug.plant_states;
    let k_p = k_full.block(0, 0, m, np);
    let k_i = k_full.block(0, np, m, n - np);
    let a_cl = &aug.a_bar - &(&aug.b_bar * &k_full);
    let closed_loop = eigenvalues(&a_cl)?;
    let closed_loop_hurwitz = closed_loop.max_real() < 0.0;
    let plant = aug.plant();
    let feedforward_map = if plant.b.is_square() {
        feedforward_map(&plant)?
    } else {
        Matrix::zeros(m, np)
    };
    Ok(SynthesisResult {
        p: sol.p,
        k_full,
        k_p,
        k_i,
        feedforward_map,
        care_residual,
        hamiltonian_agreement,
        closed_loop,
        closed_loop_hurwitz,
        controllability,
    })
}

/// Optimal cost `½ x̄₀ᵀ P x̄₀` from the initial augmented state.
pub fn cost_to_go(p: &Matrix, x_bar0: &[f64]) -> Result<f64> {
    if !p.is_square() || p.rows() != x_bar0.len() {
        return Err(invalid("cost_to_go: dimension mismatch"));
    }
    let px = p.mul_vec(x_bar0);
    Ok(0.5 * x_bar0.iter().zip(&px).map(|(a, b)| a * b).sum::<f64>())
}

/// Everything a synthesis run produces, as written to the JSON report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub omega: f64,
    pub system: AugmentedSystem,
    pub weights: LqrWeights,
    pub result: SynthesisResult,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{plant_matrices, FilterParams};
    use std::f64::consts::TAU;

    fn table_plant(f: f64) -> StateSpace {
        plant_matrices(&FilterParams::new(0.02, 600e-6, 12e-6).unwrap(), TAU * f).unwrap()
    }

    fn table_weights() -> LqrWeights {
        LqrWeights::diagonal(&[0.0769, 0.0769, 70.0, 70.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn augmented_blocks() {
        let aug = augment(&table_plant(60.0)).unwrap();
        assert_eq!(aug.a_bar.block(2, 0, 2, 2), Matrix::identity(2));
        assert_eq!(aug.a_bar.block(2, 2, 2, 2), Matrix::zeros(2, 2));
        assert_eq!(aug.a_bar.block(0, 2, 2, 2), Matrix::zeros(2, 2));
        assert_eq!(aug.b_bar.block(2, 0, 2, 2), Matrix::zeros(2, 2));
        assert_eq!(aug.c_bar, Matrix::identity(4));
    }

    #[test]
    fn shift_structure() {
        let ss = StateSpace::new(Matrix::zeros(2, 2), Matrix::identity(2), Matrix::identity(2)).unwrap();
        let aug = augment(&ss).unwrap();
        let sq = &aug.a_bar * &aug.a_bar;
        assert_eq!(sq, Matrix::zeros(4, 4));
        assert_eq!(aug.a_bar.block(2, 0, 2, 2), Matrix::identity(2));
    }

    #[test]
    fn controllability_cases() {
        let rep = check_controllability(&augment(&table_plant(60.0)).unwrap()).unwrap();
        assert_eq!((rep.rank, rep.controllable), (4, true));
        let rep = check_controllability(&augment(&table_plant(0.0)).unwrap()).unwrap();
        assert_eq!(rep.rank, 4);
        let mut ss = table_plant(60.0);
        ss.b = Matrix::zeros(2, 2);
        let aug = augment(&ss).unwrap();
        let rep = check_controllability(&aug).unwrap();
        assert_eq!((rep.rank, rep.controllable), (0, false));
        assert!(matches!(lqr_pi_gains(&aug, &table_weights()), Err(Error::Uncontrollable { .. })));
    }

    #[test]
    fn gain_structure_is_rotational() {
        for f in [50.0, 60.0] {
            let r = lqr_pi_gains(&augment(&table_plant(f)).unwrap(), &table_weights()).unwrap();
            let k = &r.k_full;
            assert!((k[(0, 2)] - k[(1, 3)]).abs() <= 1e-6);
            assert!((k[(0, 3)] + k[(1, 2)]).abs() <= 1e-6);
            assert!(r.closed_loop_hurwitz);
            assert!(r.hamiltonian_agreement.unwrap() < 1e-6);
        }
    }

    #[test]
    fn weight_scaling_invariance() {
        let aug = augment(&table_plant(60.0)).unwrap();
        let a = lqr_pi_gains(&aug, &table_weights()).unwrap();
        let b = lqr_pi_gains(&aug, &table_weights().scaled(37.0)).unwrap();
        assert!((&a.k_full - &b.k_full).max_abs() <= 1e-8 * a.k_full.max_abs());
    }

    #[test]
    fn zero_state_weight() {
        let aug = augment(&table_plant(60.0)).unwrap();
        let w = LqrWeights::diagonal(&[0.0; 4], &[1.0, 1.0]).unwrap();
        let r = lqr_pi_gains(&aug, &w).unwrap();
        assert_eq!(r.k_full, Matrix::zeros(2, 4));
        assert!(!r.closed_loop_hurwitz);
        assert!(r.hamiltonian_agreement.is_none());
    }

    #[test]
    fn feedforward_values() {
        let ss = table_plant(60.0);
        let u = feedforward(&[1.0, 0.0], &ss).unwrap();
        assert!((u[0] - 0.02).abs() < 1e-12 && (u[1] - 0.226_194_671).abs() < 1e-8);
        let u = feedforward(&[0.0, 1.0], &ss).unwrap();
        assert!((u[0] + 0.226_194_671).abs() < 1e-8 && (u[1] - 0.02).abs() < 1e-12);
        assert_eq!(feedforward(&[0.0, 0.0], &ss).unwrap(), vec![0.0, 0.0]);
        // Equilibrium: A x + B u = 0.
        let x = [3.0, -2.0];
        let u = feedforward(&x, &ss).unwrap();
        let ax = ss.a.mul_vec(&x);
        let bu = ss.b.mul_vec(&u);
        assert!(ax.iter().zip(&bu).all(|(a, b)| (a + b).abs() <= 1e-12 * a.abs().max(1.0)));
    }

    #[test]
    fn cost_is_quadratic() {
        let p = Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]);
        assert_eq!(cost_to_go(&p, &[0.0, 0.0]).unwrap(), 0.0);
        let j1 = cost_to_go(&p, &[1.0, -2.0]).unwrap();
        let j3 = cost_to_go(&p, &[3.0, -6.0]).unwrap();
        assert!((j3 - 9.0 * j1).abs() < 1e-12);
        assert!(cost_to_go(&p, &[1.0]).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(LqrWeights::diagonal(&[1.0, -1.0], &[1.0]).is_err());
        assert!(LqrWeights::diagonal(&[1.0], &[0.0]).is_err());
        assert!(LqrWeights::new(Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]), Matrix::identity(1)).is_err());
    }
}
