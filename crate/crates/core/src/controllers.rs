//! Discrete-time current controllers and the transport-delay line.
//!
//! Both controllers track converter-current setpoints in the PLL frame and
//! share [`ControllerState`]: the integrators hold `∫(x* − x) dt` in A·s.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matops::Matrix;
use crate::synthesis::SynthesisResult;

/// Conventional per-axis PI with cross-coupling cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SisoPiConfig {
    pub k_p: f64,
    pub k_i: f64,
    pub decoupling: bool,
    pub voltage_feedforward: bool,
}

impl SisoPiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_p >= 0.0 && self.k_i >= 0.0 && self.k_p.is_finite() && self.k_i.is_finite()) {
            return Err(invalid("SISO gains must be finite and non-negative"));
        }
        Ok(())
    }
}

/// `u = K_P(x* − x) + K_I∫(x* − x) + Fx*`, `F = −B⁻¹A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MimoPiConfig {
    pub k_p: Matrix,
    pub k_i: Matrix,
    pub ff_map: Matrix,
    pub voltage_feedforward: bool,
}

impl MimoPiConfig {
    pub fn from_synthesis(r: &SynthesisResult, voltage_feedforward: bool) -> Result<Self> {
        let cfg = Self {
            k_p: r.k_p.clone(),
            k_i: r.k_i.clone(),
            ff_map: r.feedforward_map.clone(),
            voltage_feedforward,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for m in [&self.k_p, &self.k_i, &self.ff_map] {
            if m.rows() != 2 || m.cols() != 2 || !m.is_finite() {
                return Err(invalid("MIMO matrices must be finite 2x2"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub z_d: f64,
    pub z_q: f64,
    pub last_output: (f64, f64),
}

/// Controller inputs: converter current and the voltage used for
/// feedforward, all in the PLL frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Measurement {
    pub i_id: f64,
    pub i_iq: f64,
    pub v_od: f64,
    pub v_oq: f64,
}

fn siso_law(cfg: &SisoPiConfig, st: &ControllerState, m: &Measurement, sp: (f64, f64), omega: f64, l_f: f64) -> (f64, f64) {
    let (e_d, e_q) = (sp.0 - m.i_id, sp.1 - m.i_iq);
    let mut u = (cfg.k_p * e_d + cfg.k_i * st.z_d, cfg.k_p * e_q + cfg.k_i * st.z_q);
    if cfg.decoupling {
        u.0 -= omega * l_f * m.i_iq;
        u.1 += omega * l_f * m.i_id;
    }
    if cfg.voltage_feedforward {
        u.0 += m.v_od;
        u.1 += m.v_oq;
    }
    u
}

fn mimo_law(cfg: &MimoPiConfig, st: &ControllerState, m: &Measurement, sp: (f64, f64)) -> (f64, f64) {
    let e = [sp.0 - m.i_id, sp.1 - m.i_iq];
    let kp = &cfg.k_p;
    let ki = &cfg.k_i;
    let f = &cfg.ff_map;
    let mut u = (
        kp[(0, 0)] * e[0] + kp[(0, 1)] * e[1] + ki[(0, 0)] * st.z_d + ki[(0, 1)] * st.z_q + f[(0, 0)] * sp.0 + f[(0, 1)] * sp.1,
        kp[(1, 0)] * e[0] + kp[(1, 1)] * e[1] + ki[(1, 0)] * st.z_d + ki[(1, 1)] * st.z_q + f[(1, 0)] * sp.0 + f[(1, 1)] * sp.1,
    );
    if cfg.voltage_feedforward {
        u.0 += m.v_od;
        u.1 += m.v_oq;
    }
    u
}

fn advance(st: &ControllerState, m: &Measurement, sp: (f64, f64), u: (f64, f64), dt: f64) -> ControllerState {
    ControllerState {
        z_d: st.z_d + (sp.0 - m.i_id) * dt,
        z_q: st.z_q + (sp.1 - m.i_iq) * dt,
        last_output: u,
    }
}

pub fn siso_step(
    cfg: &SisoPiConfig,
    st: &ControllerState,
    meas: &Measurement,
    setpoint: (f64, f64),
    omega: f64,
    l_f: f64,
    dt: f64,
) -> ((f64, f64), ControllerState) {
    let u = siso_law(cfg, st, meas, setpoint, omega, l_f);
    (u, advance(st, meas, setpoint, u, dt))
}

pub fn mimo_step(
    cfg: &MimoPiConfig,
    st: &ControllerState,
    meas: &Measurement,
    setpoint: (f64, f64),
    dt: f64,
) -> ((f64, f64), ControllerState) {
    let u = mimo_law(cfg, st, meas, setpoint);
    (u, advance(st, meas, setpoint, u, dt))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Controller {
    Siso(SisoPiConfig),
    Mimo(MimoPiConfig),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Siso(_) => "siso",
            Controller::Mimo(_) => "mimo",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Controller::Siso(c) => c.validate(),
            Controller::Mimo(c) => c.validate(),
        }
    }

    /// Control law without advancing the integrators.
    pub fn output(&self, st: &ControllerState, meas: &Measurement, setpoint: (f64, f64), omega: f64, l_f: f64) -> (f64, f64) {
        match self {
            Controller::Siso(c) => siso_law(c, st, meas, setpoint, omega, l_f),
            Controller::Mimo(c) => mimo_law(c, st, meas, setpoint),
        }
    }

    pub fn step(
        &self,
        st: &ControllerState,
        meas: &Measurement,
        setpoint: (f64, f64),
        omega: f64,
        l_f: f64,
        dt: f64,
    ) -> ((f64, f64), ControllerState) {
        let u = self.output(st, meas, setpoint, omega, l_f);
        (u, advance(st, meas, setpoint, u, dt))
    }

    /// Integrator values for which the law outputs `u_target` at zero error.
    pub fn equilibrium_state(
        &self,
        meas: &Measurement,
        u_target: (f64, f64),
        omega: f64,
        l_f: f64,
    ) -> Result<ControllerState> {
        let sp = (meas.i_id, meas.i_iq);
        let base = self.output(&ControllerState::default(), meas, sp, omega, l_f);
        let r = (u_target.0 - base.0, u_target.1 - base.1);
        let (z_d, z_q) = match self {
            Controller::Siso(c) => {
                if c.k_i == 0.0 {
                    return Err(invalid("integral gain is zero"));
                }
                (r.0 / c.k_i, r.1 / c.k_i)
            }
            Controller::Mimo(c) => {
                let z = c.k_i.solve(&Matrix::column(&[r.0, r.1]))?;
                (z[(0, 0)], z[(1, 0)])
            }
        };
        Ok(ControllerState {
            z_d,
            z_q,
            last_output: u_target,
        })
    }
}

/// Fixed-depth FIFO: the output is the sample pushed `depth` calls earlier.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayLine {
    buffer: VecDeque<(f64, f64)>,
    depth: usize,
}

impl DelayLine {
    /// Line pre-filled with `initial`.
    pub fn new(depth: usize, initial: (f64, f64)) -> Self {
        Self {
            buffer: std::iter::repeat(initial).take(depth).collect(),
            depth,
        }
    }

    /// Depth for a delay `t_d` sampled every `tick` seconds.
    pub fn depth_for(t_d: f64, tick: f64) -> Result<usize> {
        if !(t_d >= 0.0 && tick > 0.0) {
            return Err(invalid("delay needs t_d >= 0 and tick > 0"));
        }
        // Nudge so that exact halves round up despite representation error.
        Ok((t_d / tick * (1.0 + 1e-12)).round() as usize)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn push_pop(&mut self, sample: (f64, f64)) -> (f64, f64) {
        if self.depth == 0 {
            return sample;
        }
        self.buffer.push_back(sample);
        self.buffer.pop_front().expect("buffer holds depth samples")
    }
}

/// First-order low-pass on the voltage feedforward path, discretized exactly
/// for a held input. A cutoff of zero disables filtering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoltageFilter {
    alpha: f64,
    pub state: (f64, f64),
}

impl VoltageFilter {
    pub fn new(omega_c: f64, dt: f64, initial: (f64, f64)) -> Self {
        let alpha = if omega_c > 0.0 { 1.0 - (-omega_c * dt).exp() } else { 1.0 };
        Self { alpha, state: initial }
    }

    pub fn update(&mut self, v: (f64, f64)) -> (f64, f64) {
        self.state.0 += self.alpha * (v.0 - self.state.0);
        self.state.1 += self.alpha * (v.1 - self.state.1);
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn table_siso() -> SisoPiConfig {
        SisoPiConfig {
            k_p: 0.13,
            k_i: 11.25,
            decoupling: true,
            voltage_feedforward: true,
        }
    }

    fn table_mimo() -> MimoPiConfig {
        MimoPiConfig {
            k_p: Matrix::diag(&[0.2690, 0.2690]),
            k_i: Matrix::from_rows(&[[7.0076, -4.5710], [4.5710, 7.0076]]),
            ff_map: Matrix::zeros(2, 2),
            voltage_feedforward: false,
        }
    }

    #[test]
    fn siso_feedforward_only() {
        let w = TAU * 60.0;
        let m = Measurement { i_id: 0.0, i_iq: 1.0, v_od: 300.0, v_oq: 0.0 };
        let (u, _) = siso_step(&table_siso(), &ControllerState::default(), &m, (0.0, 1.0), w, 600e-6, 2e-4);
        assert!((u.0 - (300.0 - w * 600e-6)).abs() < 1e-12);
        assert_eq!(u.1, 0.0);
    }

    #[test]
    fn siso_first_step() {
        let cfg = SisoPiConfig { decoupling: false, voltage_feedforward: false, ..table_siso() };
        let (u, st) = siso_step(&cfg, &ControllerState::default(), &Measurement::default(), (1.0, 0.0), 0.0, 600e-6, 2e-4);
        assert_eq!(u, (0.13, 0.0));
        assert_eq!(st.z_d, 2e-4);
        assert_eq!(st.last_output, u);
    }

    #[test]
    fn mimo_table_columns() {
        let cfg = table_mimo();
        let (u, _) = mimo_step(&cfg, &ControllerState::default(), &Measurement::default(), (1.0, 0.0), 1e-4);
        assert!((u.0 - 0.2690).abs() < 1e-12 && u.1.abs() < 1e-12);
        let st = ControllerState { z_d: 1.0, ..Default::default() };
        let (u, _) = mimo_step(&cfg, &st, &Measurement::default(), (0.0, 0.0), 1e-4);
        assert!((u.0 - 7.0076).abs() < 1e-12 && (u.1 - 4.5710).abs() < 1e-12);
    }

    #[test]
    fn mimo_equilibrium_outputs_feedforward() {
        let cfg = MimoPiConfig {
            ff_map: Matrix::from_rows(&[[0.02, -0.2], [0.2, 0.02]]),
            voltage_feedforward: true,
            ..table_mimo()
        };
        let m = Measurement { i_id: 5.0, i_iq: -3.0, v_od: 400.0, v_oq: 1.0 };
        let (u, _) = mimo_step(&cfg, &ControllerState::default(), &m, (5.0, -3.0), 1e-4);
        assert!((u.0 - (0.1 + 0.6 + 400.0)).abs() < 1e-12);
        assert!((u.1 - (1.0 - 0.06 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn mimo_is_linear_in_error() {
        let cfg = table_mimo();
        let st = ControllerState::default();
        let (u1, _) = mimo_step(&cfg, &st, &Measurement::default(), (0.3, -0.7), 1e-4);
        let (u2, _) = mimo_step(&cfg, &st, &Measurement::default(), (0.6, -1.4), 1e-4);
        assert_eq!((2.0 * u1.0, 2.0 * u1.1), u2);
    }

    #[test]
    fn equilibrium_integrators_reproduce_target() {
        let m = Measurement { i_id: 50.0, i_iq: 20.0, v_od: 400.0, v_oq: 0.0 };
        for c in [Controller::Siso(table_siso()), Controller::Mimo(table_mimo())] {
            let st = c.equilibrium_state(&m, (401.0, 10.0), 314.0, 600e-6).unwrap();
            let u = c.output(&st, &m, (50.0, 20.0), 314.0, 600e-6);
            assert!((u.0 - 401.0).abs() < 1e-9 && (u.1 - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn delay_depths() {
        let mut d0 = DelayLine::new(0, (0.0, 0.0));
        assert_eq!(d0.push_pop((1.0, 2.0)), (1.0, 2.0));
        let mut d3 = DelayLine::new(3, (0.0, 0.0));
        let out: Vec<f64> = (0..6).map(|k| d3.push_pop((if k == 0 { 1.0 } else { 0.0 }, 0.0)).0).collect();
        assert_eq!(out, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(DelayLine::depth_for(0.3e-3, 1.0 / 5000.0).unwrap(), 2);
        assert_eq!(DelayLine::depth_for(0.3e-3, 1.0 / 10000.0).unwrap(), 3);
    }

    #[test]
    fn voltage_filter_converges() {
        let mut f = VoltageFilter::new(1500.0, 2e-4, (0.0, 0.0));
        for _ in 0..200 {
            f.update((1.0, -1.0));
        }
        assert!((f.state.0 - 1.0).abs() < 1e-12 && (f.state.1 + 1.0).abs() < 1e-12);
        let mut off = VoltageFilter::new(0.0, 2e-4, (0.0, 0.0));
        assert_eq!(off.update((3.0, 4.0)), (3.0, 4.0));
    }
}
