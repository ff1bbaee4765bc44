//! Continuous-time closed loop used for small-signal analysis.
//!
//! The digital controller is replaced by its continuous PI equivalent, the
//! transport delay by a second-order Padé block per command channel, and the
//! feedforward low-pass by its continuous first-order form.

use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerState, Measurement};
use crate::error::{invalid, Error, Result};
use crate::matops::Matrix;
use crate::plant::{
    grid_from_scr, pll_input, plant_derivatives, steady_state, Frame, GridParams, PlantState,
};
use crate::sim::ScenarioConfig;

const PLANT_LABELS: [&str; 6] = ["i_id", "i_iq", "v_cd", "v_cq", "i_od", "i_oq"];

/// Closed-loop vector field at a fixed grid and setpoint.
#[derive(Clone, Debug)]
pub struct ClosedLoopModel {
    pub cfg: ScenarioConfig,
    pub grid: GridParams,
    /// Setpoint in A.
    pub setpoint: (f64, f64),
    pade: bool,
    lpf: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizedClosedLoop {
    pub a_cl: Matrix,
    /// Sensitivity of the vector field to the setpoint, per p.u.
    pub b_ref: Matrix,
    pub labels: Vec<String>,
    pub operating_point: Vec<f64>,
    /// Largest scaled derivative at the operating point.
    pub residual: f64,
}

impl ClosedLoopModel {
    /// Model at the grid and setpoint in force at `t = 0`.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let ev = cfg.scr_schedule.iter().rev().find(|e| e.time <= 0.0).unwrap_or(&cfg.scr_schedule[0]);
        let grid = grid_from_scr(ev.scr, ev.xr, &cfg.base, cfg.f_nom)?;
        let sp = cfg.setpoint_at(0.0);
        let ib = cfg.base.i_base_pk;
        Ok(Self {
            cfg: cfg.clone(),
            grid,
            setpoint: (sp.0 * ib, sp.1 * ib),
            pade: cfg.t_delay > 0.0,
            lpf: cfg.v_ff_cutoff > 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        10 + if self.pade { 4 } else { 0 } + if self.lpf { 2 } else { 0 }
    }

    pub fn labels(&self) -> Vec<String> {
        let mut l: Vec<String> = PLANT_LABELS.iter().map(|s| s.to_string()).collect();
        l.extend(["pll_delta", "pll_integ", "z_d", "z_q"].map(String::from));
        if self.pade {
            l.extend(["pade_d1", "pade_d2", "pade_q1", "pade_q2"].map(String::from));
        }
        if self.lpf {
            l.extend(["vff_d", "vff_q"].map(String::from));
        }
        l
    }

    fn pade_coeffs(&self) -> (f64, f64) {
        let t = self.cfg.t_delay;
        (12.0 / (t * t), 6.0 / t)
    }

    /// Natural magnitude of each state, used for scaling perturbations and
    /// residuals.
    pub fn scales(&self) -> Vec<f64> {
        let ib = self.cfg.base.i_base_pk;
        let vb = self.cfg.base.v_base_pk();
        let mut s = vec![ib, ib, vb, vb, ib, ib, 1.0, 1.0, 0.01 * ib, 0.01 * ib];
        if self.pade {
            let (a0, a1) = self.pade_coeffs();
            s.extend([vb / a0, vb / a1, vb / a0, vb / a1]);
        }
        if self.lpf {
            s.extend([vb, vb]);
        }
        s
    }

    fn offsets(&self) -> (usize, usize) {
        let pade = 10;
        let lpf = if self.pade { 14 } else { 10 };
        (pade, lpf)
    }

    /// `ẋ = f(x)` at setpoint `sp` (A).
    pub fn derivative_at(&self, x: &[f64], sp: (f64, f64)) -> Vec<f64> {
        let cfg = &self.cfg;
        let fp = &cfg.filter;
        let w_nom = cfg.omega_nom();
        let vb = cfg.base.v_base_pk();
        let s = PlantState::from_array(&x[..6]);
        let (delta, integ, z_d, z_q) = (x[6], x[7], x[8], x[9]);
        let vt = s.terminal_voltage(fp);
        let v_pll = pll_input(vt.0, vt.1, vb);
        let omega_dev = cfg.pll.k_p * v_pll + integ;
        let omega = w_nom + omega_dev;
        let (po, lo) = self.offsets();
        let vff = if self.lpf { (x[lo], x[lo + 1]) } else { vt };
        let meas = Measurement {
            i_id: s.i_id,
            i_iq: s.i_iq,
            v_od: vff.0,
            v_oq: vff.1,
        };
        let st = ControllerState {
            z_d,
            z_q,
            last_output: (0.0, 0.0),
        };
        let mut u = cfg.controller.output(&st, &meas, sp, omega, cfg.design_filter.l_f);
        if let Some(l) = cfg.command_limit {
            let mag = u.0.hypot(u.1);
            if mag > l * vb {
                u = (u.0 * l * vb / mag, u.1 * l * vb / mag);
            }
        }
        let mut out = vec![0.0; self.dim()];
        let applied = if self.pade {
            let (a0, a1) = self.pade_coeffs();
            let ch = |p1: f64, p2: f64, u: f64| ((p2, -a0 * p1 - a1 * p2 + u), u - 2.0 * a1 * p2);
            let ((d1, d2), yd) = ch(x[po], x[po + 1], u.0);
            let ((q1, q2), yq) = ch(x[po + 2], x[po + 3], u.1);
            out[po..po + 4].copy_from_slice(&[d1, d2, q1, q2]);
            (yd, yq)
        } else {
            u
        };
        let ds = plant_derivatives(&s, applied, &self.grid, fp, Frame { omega, delta });
        out[..6].copy_from_slice(&ds.to_array());
        out[6] = omega_dev;
        out[7] = cfg.pll.k_i * v_pll;
        out[8] = sp.0 - s.i_id;
        out[9] = sp.1 - s.i_iq;
        if self.lpf {
            out[lo] = cfg.v_ff_cutoff * (vt.0 - x[lo]);
            out[lo + 1] = cfg.v_ff_cutoff * (vt.1 - x[lo + 1]);
        }
        out
    }

    pub fn derivative(&self, x: &[f64]) -> Vec<f64> {
        self.derivative_at(x, self.setpoint)
    }

    /// Largest `|ẋⱼ| / (scaleⱼ · ω_nom)`.
    pub fn scaled_residual(&self, x: &[f64]) -> f64 {
        let w = self.cfg.omega_nom();
        self.derivative(x)
            .iter()
            .zip(self.scales())
            .map(|(d, s)| d.abs() / (s * w))
            .fold(0.0, f64::max)
    }

    /// Phasor steady state extended to all controller states.
    pub fn analytic_guess(&self) -> Result<Vec<f64>> {
        let cfg = &self.cfg;
        let w_nom = cfg.omega_nom();
        let ss = steady_state(self.setpoint, &self.grid, &cfg.filter, w_nom)?;
        let vt = ss.state.terminal_voltage(&cfg.filter);
        let meas = Measurement {
            i_id: ss.state.i_id,
            i_iq: ss.state.i_iq,
            v_od: vt.0,
            v_oq: vt.1,
        };
        let cst = cfg.controller.equilibrium_state(&meas, ss.u, w_nom, cfg.design_filter.l_f)?;
        let mut x = ss.state.to_array().to_vec();
        x.extend([ss.delta, 0.0, cst.z_d, cst.z_q]);
        if self.pade {
            let (a0, _) = self.pade_coeffs();
            x.extend([ss.u.0 / a0, 0.0, ss.u.1 / a0, 0.0]);
        }
        if self.lpf {
            x.extend([vt.0, vt.1]);
        }
        Ok(x)
    }

    /// Central-difference Jacobian with step `rel · max(|xⱼ|, scaleⱼ)`.
    pub fn jacobian(&self, x: &[f64], rel: f64) -> Result<Matrix> {
        let n = self.dim();
        let scales = self.scales();
        let mut j = Matrix::zeros(n, n);
        let mut xp = x.to_vec();
        for c in 0..n {
            let h = rel * x[c].abs().max(scales[c]);
            xp[c] = x[c] + h;
            let fp = self.derivative(&xp);
            xp[c] = x[c] - h;
            let fm = self.derivative(&xp);
            xp[c] = x[c];
            for r in 0..n {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        if !j.is_finite() {
            return Err(Error::NoEquilibrium("non-finite Jacobian".into()));
        }
        Ok(j)
    }

    /// Damped Newton polish of the analytic guess.
    pub fn equilibrium(&self) -> Result<Vec<f64>> {
        let mut x = self.analytic_guess()?;
        let scales = self.scales();
        let w = self.cfg.omega_nom();
        for _ in 0..20 {
            let res = self.scaled_residual(&x);
            if res <= 1e-12 {
                break;
            }
            let j = self.jacobian(&x, 1e-7)?;
            let f = self.derivative(&x);
            let dx = match j.lu().and_then(|lu| lu.solve_vec(&f)) {
                Ok(dx) => dx,
                Err(_) => break,
            };
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - step * d).collect();
                if self.scaled_residual(&trial) < res {
                    x = trial;
                    break;
                }
                step *= 0.5;
                if step < 1e-6 {
                    break;
                }
            }
            if step < 1e-6 {
                break;
            }
        }
        let res = self
            .derivative(&x)
            .iter()
            .zip(&scales)
            .map(|(d, s)| d.abs() / (s * w))
            .fold(0.0, f64::max);
        if !(res <= 1e-6) {
            return Err(Error::NoEquilibrium(format!("residual {res:.2e} after Newton")));
        }
        Ok(x)
    }

    pub fn linearize(&self) -> Result<LinearizedClosedLoop> {
        let x = self.equilibrium()?;
        let a_cl = self.jacobian(&x, 1e-6)?;
        let ib = self.cfg.base.i_base_pk;
        let n = self.dim();
        let mut b_ref = Matrix::zeros(n, 2);
        let h = 1e-6 * ib;
        for c in 0..2 {
            let mut sp = self.setpoint;
            let bump = |sp: &mut (f64, f64), v: f64| if c == 0 { sp.0 += v } else { sp.1 += v };
            bump(&mut sp, h);
            let fp = self.derivative_at(&x, sp);
            bump(&mut sp, -2.0 * h);
            let fm = self.derivative_at(&x, sp);
            for r in 0..n {
                b_ref[(r, c)] = (fp[r] - fm[r]) / (2.0 * h) * ib;
            }
        }
        Ok(LinearizedClosedLoop {
            a_cl,
            b_ref,
            labels: self.labels(),
            residual: self.scaled_residual(&x),
            operating_point: x,
        })
    }

    /// RK4 integration of the nonlinear field with a setpoint offset (p.u.)
    /// applied from `t = 0`. Returns the state at every step, including the
    /// initial one.
    pub fn simulate(&self, x0: &[f64], sp_offset_pu: (f64, f64), t_end: f64, dt: f64) -> Result<Vec<Vec<f64>>> {
        if !(dt > 0.0 && t_end > 0.0) {
            return Err(invalid("simulate needs dt > 0 and t_end > 0"));
        }
        let ib = self.cfg.base.i_base_pk;
        let sp = (self.setpoint.0 + sp_offset_pu.0 * ib, self.setpoint.1 + sp_offset_pu.1 * ib);
        let steps = (t_end / dt).round() as usize;
        let mut x = x0.to_vec();
        let mut out = Vec::with_capacity(steps + 1);
        out.push(x.clone());
        let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
        for _ in 0..steps {
            let k1 = self.derivative_at(&x, sp);
            let k2 = self.derivative_at(&axpy(&x, &k1, 0.5 * dt), sp);
            let k3 = self.derivative_at(&axpy(&x, &k2, 0.5 * dt), sp);
            let k4 = self.derivative_at(&axpy(&x, &k3, dt), sp);
            for i in 0..x.len() {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            out.push(x.clone());
        }
        Ok(out)
    }
}

/// Linearization of the closed loop at the operating point of `cfg`.
pub fn linearize(cfg: &ScenarioConfig) -> Result<LinearizedClosedLoop> {
    ClosedLoopModel::new(cfg)?.linearize()
}
