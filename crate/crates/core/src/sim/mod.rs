//! Fixed-step time-domain simulation of the converter, PLL and controller.
//!
//! The plant is integrated with RK4 at `dt_plant`. The controller samples
//! every `dt_ctrl` and its output passes through a delay line clocked at
//! `delay_tick`, so a 1.5-sample delay is represented exactly on a
//! half-period grid. The PLL is advanced by forward Euler at the plant rate.

mod limits;
mod metrics;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use limits::{probe_stable, transfer_limit_search, LimitAxis, LimitSearch, TransferLimit};
pub use metrics::{step_metrics, Axis, StepMetrics};

use crate::controllers::{Controller, ControllerState, DelayLine, Measurement, VoltageFilter};
use crate::error::{invalid, Error, Result};
use crate::plant::{
    grid_from_scr, pll_input, pll_step, plant_derivatives, steady_state, wrap_pi, FilterParams, Frame,
    GridParams, PerUnitBase, PlantState, PllGains, PllState, wrap_2pi,
};

/// Grid strength takes effect at `time` and holds until the next event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEvent {
    pub time: f64,
    pub scr: f64,
    pub xr: f64,
}

/// Current setpoint in p.u. of `i_base_pk`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetpointEvent {
    pub time: f64,
    pub i_d: f64,
    pub i_q: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    /// Each setpoint holds until the next event.
    #[default]
    Hold,
    /// Setpoints ramp linearly between consecutive events.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub controller: Controller,
    pub scr_schedule: Vec<GridEvent>,
    pub setpoint_schedule: Vec<SetpointEvent>,
    pub setpoint_interp: Interp,
    pub t_end: f64,
    pub dt_plant: f64,
    pub dt_ctrl: f64,
    pub delay_tick: f64,
    pub t_delay: f64,
    pub base: PerUnitBase,
    /// Filter of the simulated plant.
    pub filter: FilterParams,
    /// Filter assumed by the controller (decoupling terms).
    pub design_filter: FilterParams,
    pub pll: PllGains,
    pub f_nom: f64,
    /// Cutoff of the feedforward-voltage low-pass (rad/s); 0 disables it.
    pub v_ff_cutoff: f64,
    /// Settling time simulated before `t = 0`.
    pub pre_settle: f64,
    pub divergence_factor: f64,
    /// Optional clamp on the command magnitude (p.u. of the voltage base).
    pub command_limit: Option<f64>,
}

fn ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-6 * k {
        return Err(invalid(format!("{what} must be a positive integer multiple of dt_plant")));
    }
    Ok(k as usize)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        self.filter.validate()?;
        self.design_filter.validate()?;
        if !(self.t_end > 0.0 && self.dt_plant > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end and dt_plant must be positive"));
        }
        if self.t_end / self.dt_plant > 5e8 {
            return Err(invalid("too many plant steps"));
        }
        ratio(self.dt_ctrl, self.dt_plant, "dt_ctrl")?;
        ratio(self.delay_tick, self.dt_plant, "delay_tick")?;
        if !(self.t_delay >= 0.0 && self.pre_settle >= 0.0 && self.v_ff_cutoff >= 0.0) {
            return Err(invalid("t_delay, pre_settle and v_ff_cutoff must be non-negative"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(invalid("divergence_factor must exceed 1"));
        }
        if self.scr_schedule.is_empty() || self.setpoint_schedule.is_empty() {
            return Err(invalid("schedules must not be empty"));
        }
        if !self.scr_schedule.windows(2).all(|w| w[0].time <= w[1].time)
            || !self.setpoint_schedule.windows(2).all(|w| w[0].time <= w[1].time)
        {
            return Err(invalid("schedules must be time-sorted"));
        }
        for ev in &self.scr_schedule {
            let g = grid_from_scr(ev.scr, ev.xr, &self.base, self.f_nom)?;
            if g.l_g <= 0.0 {
                return Err(invalid("simulation needs a grid inductance (xr > 0)"));
            }
        }
        if self.setpoint_schedule.iter().any(|e| !(e.i_d.is_finite() && e.i_q.is_finite())) {
            return Err(invalid("setpoints must be finite"));
        }
        Ok(())
    }

    /// Setpoint (p.u.) in force at time `t`.
    pub fn setpoint_at(&self, t: f64) -> (f64, f64) {
        let s = &self.setpoint_schedule;
        let idx = s.iter().rposition(|e| e.time <= t + 1e-12);
        match (idx, self.setpoint_interp) {
            (None, _) => (s[0].i_d, s[0].i_q),
            (Some(k), Interp::Linear) if k + 1 < s.len() => {
                let (a, b) = (&s[k], &s[k + 1]);
                let span = b.time - a.time;
                let w = if span > 0.0 { ((t - a.time) / span).clamp(0.0, 1.0) } else { 1.0 };
                (a.i_d + w * (b.i_d - a.i_d), a.i_q + w * (b.i_q - a.i_q))
            }
            (Some(k), _) => (s[k].i_d, s[k].i_q),
        }
    }

    fn grid_index_at(&self, t: f64) -> usize {
        self.scr_schedule
            .iter()
            .rposition(|e| e.time <= t + 1e-12)
            .unwrap_or(0)
    }

    /// Times within `(0, t_end]` at which either schedule changes.
    pub fn event_times(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .scr_schedule
            .iter()
            .map(|e| e.time)
            .chain(self.setpoint_schedule.iter().map(|e| e.time))
            .filter(|&t| t > 0.0 && t <= self.t_end)
            .collect();
        ev.sort_by(f64::total_cmp);
        ev.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        ev
    }

    pub fn omega_nom(&self) -> f64 {
        std::f64::consts::TAU * self.f_nom
    }
}

/// Uniformly sampled record; currents and voltages in p.u., `omega_dev` in
/// rad/s. After divergence the record stops.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub i_id: Vec<f64>,
    pub i_iq: Vec<f64>,
    pub i_id_ref: Vec<f64>,
    pub i_iq_ref: Vec<f64>,
    pub v_od: Vec<f64>,
    pub v_oq: Vec<f64>,
    pub omega_dev: Vec<f64>,
    pub v_id_cmd: Vec<f64>,
    pub v_iq_cmd: Vec<f64>,
    pub diverged: bool,
    pub diverged_at: Option<f64>,
    /// Schedule change times inside the recorded span.
    pub events: Vec<f64>,
}

pub const CSV_HEADER: &str = "t,i_id,i_iq,i_id_ref,i_iq_ref,v_od,v_oq,omega_dev,v_id_cmd,v_iq_cmd,diverged";

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.t.iter().position(|&x| x >= t - 1e-9)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        let n = self.len();
        for k in 0..n {
            let flag = u8::from(self.diverged && k + 1 == n);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.t[k],
                self.i_id[k],
                self.i_iq[k],
                self.i_id_ref[k],
                self.i_iq_ref[k],
                self.v_od[k],
                self.v_oq[k],
                self.omega_dev[k],
                self.v_id_cmd[k],
                self.v_iq_cmd[k],
                flag
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    fn push(&mut self, t: f64, s: &PlantState, vt: (f64, f64), sp: (f64, f64), omega_dev: f64, u: (f64, f64), base: &PerUnitBase) {
        let ib = base.i_base_pk;
        let vb = base.v_base_pk();
        self.t.push(t);
        self.i_id.push(s.i_id / ib);
        self.i_iq.push(s.i_iq / ib);
        self.i_id_ref.push(sp.0);
        self.i_iq_ref.push(sp.1);
        self.v_od.push(vt.0 / vb);
        self.v_oq.push(vt.1 / vb);
        self.omega_dev.push(omega_dev);
        self.v_id_cmd.push(u.0 / vb);
        self.v_iq_cmd.push(u.1 / vb);
    }
}

#[inline]
fn add_scaled(s: &PlantState, k: &PlantState, h: f64) -> PlantState {
    PlantState {
        i_id: s.i_id + h * k.i_id,
        i_iq: s.i_iq + h * k.i_iq,
        v_od: s.v_od + h * k.v_od,
        v_oq: s.v_oq + h * k.v_oq,
        i_od: s.i_od + h * k.i_od,
        i_oq: s.i_oq + h * k.i_oq,
    }
}

/// One RK4 step with the input held and the frame drifting against the grid
/// at the constant rate `omega_dev`.
#[allow(clippy::too_many_arguments)]
pub fn rk4_step(
    s: &PlantState,
    u: (f64, f64),
    grid: &GridParams,
    fp: &FilterParams,
    omega_nom: f64,
    omega_dev: f64,
    delta0: f64,
    dt: f64,
) -> PlantState {
    let omega = omega_nom + omega_dev;
    let fr = |tau: f64| Frame {
        omega,
        delta: delta0 + omega_dev * tau,
    };
    let k1 = plant_derivatives(s, u, grid, fp, fr(0.0));
    let k2 = plant_derivatives(&add_scaled(s, &k1, 0.5 * dt), u, grid, fp, fr(0.5 * dt));
    let k3 = plant_derivatives(&add_scaled(s, &k2, 0.5 * dt), u, grid, fp, fr(0.5 * dt));
    let k4 = plant_derivatives(&add_scaled(s, &k3, dt), u, grid, fp, fr(dt));
    let mut sum = add_scaled(&k1, &k2, 2.0);
    sum = add_scaled(&sum, &k3, 2.0);
    sum = add_scaled(&sum, &k4, 1.0);
    add_scaled(s, &sum, dt / 6.0)
}

fn clamp_command(u: (f64, f64), limit: Option<f64>, vb: f64) -> (f64, f64) {
    match limit {
        Some(l) => {
            let mag = u.0.hypot(u.1);
            let cap = l * vb;
            if mag > cap {
                (u.0 * cap / mag, u.1 * cap / mag)
            } else {
                u
            }
        }
        None => u,
    }
}

/// Runs a scenario. Divergence is reported in the returned record, not as
/// an error; errors mean the configuration itself is unusable.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<TimeSeries> {
    cfg.validate()?;
    let base = cfg.base;
    let ib = base.i_base_pk;
    let vb = base.v_base_pk();
    let w_nom = cfg.omega_nom();
    let dt = cfg.dt_plant;
    let nc = ratio(cfg.dt_ctrl, dt, "dt_ctrl")? as i64;
    let nt = ratio(cfg.delay_tick, dt, "delay_tick")? as i64;
    let grids: Vec<GridParams> = cfg
        .scr_schedule
        .iter()
        .map(|e| grid_from_scr(e.scr, e.xr, &base, cfg.f_nom))
        .collect::<Result<_>>()?;

    let sp0 = cfg.setpoint_at(0.0);
    let ss = steady_state((sp0.0 * ib, sp0.1 * ib), &grids[cfg.grid_index_at(0.0)], &cfg.filter, w_nom)?;
    let mut x = ss.state;
    let mut delta = ss.delta;
    let mut pll = PllState {
        theta: wrap_2pi(delta),
        omega_dev: 0.0,
        integ: 0.0,
    };
    let vt0 = x.terminal_voltage(&cfg.filter);
    let meas0 = Measurement {
        i_id: x.i_id,
        i_iq: x.i_iq,
        v_od: vt0.0,
        v_oq: vt0.1,
    };
    let mut cst: ControllerState = cfg
        .controller
        .equilibrium_state(&meas0, ss.u, w_nom, cfg.design_filter.l_f)?;
    let depth = DelayLine::depth_for(cfg.t_delay, cfg.delay_tick)?;
    let mut delay = DelayLine::new(depth, ss.u);
    let mut vfilt = VoltageFilter::new(cfg.v_ff_cutoff, cfg.dt_ctrl, vt0);
    let mut held = ss.u;
    let mut applied = ss.u;

    let i_start = -((cfg.pre_settle / cfg.dt_ctrl).ceil() as i64) * nc;
    let i_end = (cfg.t_end / dt).round() as i64;
    let mut ts = TimeSeries {
        events: cfg.event_times(),
        ..Default::default()
    };
    let cap = (i_end / nc + 1) as usize;
    for v in [
        &mut ts.t, &mut ts.i_id, &mut ts.i_iq, &mut ts.i_id_ref, &mut ts.i_iq_ref, &mut ts.v_od,
        &mut ts.v_oq, &mut ts.omega_dev, &mut ts.v_id_cmd, &mut ts.v_iq_cmd,
    ] {
        v.reserve(cap);
    }

    for i in i_start..=i_end {
        let t = i as f64 * dt;
        if i.rem_euclid(nc) == 0 {
            let sp = cfg.setpoint_at(t.max(0.0));
            let vt = x.terminal_voltage(&cfg.filter);
            let vf = vfilt.update(vt);
            let meas = Measurement {
                i_id: x.i_id,
                i_iq: x.i_iq,
                v_od: vf.0,
                v_oq: vf.1,
            };
            let (u, next) = cfg.controller.step(
                &cst,
                &meas,
                (sp.0 * ib, sp.1 * ib),
                pll.omega(w_nom),
                cfg.design_filter.l_f,
                cfg.dt_ctrl,
            );
            held = clamp_command(u, cfg.command_limit, vb);
            cst = next;
            if i >= 0 {
                ts.push(t, &x, vt, sp, pll.omega_dev, held, &base);
            }
        }
        if i.rem_euclid(nt) == 0 {
            applied = delay.push_pop(held);
        }
        if i == i_end {
            break;
        }
        let grid = &grids[cfg.grid_index_at(t.max(0.0))];
        let vt = x.terminal_voltage(&cfg.filter);
        pll = pll_step(&pll, pll_input(vt.0, vt.1, vb), dt, &cfg.pll, w_nom);
        x = rk4_step(&x, applied, grid, &cfg.filter, w_nom, pll.omega_dev, delta, dt);
        delta = wrap_pi(delta + pll.omega_dev * dt);
        if x.exceeds(&base, cfg.divergence_factor) || !pll.omega_dev.is_finite() {
            ts.diverged = true;
            ts.diverged_at = Some(t + dt);
            break;
        }
    }
    Ok(ts)
}

/// Runs a scenario and fails if it diverged.
pub fn run_stable(cfg: &ScenarioConfig) -> Result<TimeSeries> {
    let ts = run_scenario(cfg)?;
    if ts.diverged {
        return Err(Error::DivergedWindow);
    }
    Ok(ts)
}
