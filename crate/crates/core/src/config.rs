//! TOML run profiles.
//!
//! Every section and key is optional; omitted values fall back to the
//! reference converter (100 kW, 500 V, 5 kHz). Hardware values are SI,
//! setpoints are p.u. of the peak phase current base.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::SweepParam;
use crate::controllers::{Controller, MimoPiConfig, SisoPiConfig};
use crate::error::{Error, Result};
use crate::matops::Matrix;
use crate::plant::{plant_matrices, FilterParams, PerUnitBase, PllGains};
use crate::sim::{GridEvent, Interp, LimitSearch, ScenarioConfig, SetpointEvent};
use crate::synthesis::{augment, lqr_pi_gains, LqrWeights, SynthesisReport};

/// `tan 80°`, the reference grid impedance ratio.
pub const XR_80DEG: f64 = 5.671_281_819_617_709;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub r_f: f64,
    pub l_f: f64,
    pub c_f: f64,
    /// Series damping resistor of the filter capacitor.
    pub r_d: f64,
    pub f_nom: f64,
    pub s_base: f64,
    pub v_base_ll: f64,
    pub f_sw: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            r_f: 0.02,
            l_f: 600e-6,
            c_f: 12e-6,
            r_d: 2.0,
            f_nom: 50.0,
            s_base: 100e3,
            v_base_ll: 500.0,
            f_sw: 5000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SisoSection {
    pub k_p: f64,
    pub k_i: f64,
    pub decoupling: bool,
    pub voltage_feedforward: bool,
}

impl Default for SisoSection {
    fn default() -> Self {
        Self {
            k_p: 0.13,
            k_i: 11.25,
            decoupling: true,
            voltage_feedforward: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MimoSection {
    pub q_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub voltage_feedforward: bool,
    /// Replaces the design-model input matrix (rows of a 2x2).
    pub b_override: Option<Vec<Vec<f64>>>,
}

impl Default for MimoSection {
    fn default() -> Self {
        Self {
            q_diag: vec![0.0769, 0.0769, 70.0, 70.0],
            r_diag: vec![1.0, 1.0],
            voltage_feedforward: true,
            b_override: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PllSection {
    pub k_p: f64,
    pub k_i: f64,
}

impl Default for PllSection {
    fn default() -> Self {
        Self { k_p: 48.0, k_i: 144.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub dt_plant: f64,
    pub dt_ctrl: f64,
    pub delay_tick: f64,
    /// Control delay in switching periods.
    pub delay_periods: f64,
    pub pre_settle: f64,
    pub v_ff_cutoff: f64,
    pub divergence_factor: f64,
    pub command_limit: Option<f64>,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            dt_plant: 1e-5,
            dt_ctrl: 2e-4,
            delay_tick: 1e-4,
            delay_periods: 1.5,
            pre_settle: 0.3,
            v_ff_cutoff: 2000.0,
            divergence_factor: 50.0,
            command_limit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub t_end: f64,
    pub interp: Interp,
    pub grid: Vec<GridEvent>,
    pub setpoints: Vec<SetpointEvent>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            t_end: 0.8,
            interp: Interp::Hold,
            grid: vec![GridEvent { time: 0.0, scr: 5.0, xr: XR_80DEG }],
            setpoints: vec![
                SetpointEvent { time: 0.0, i_d: 0.6, i_q: 0.1 },
                SetpointEvent { time: 0.4, i_d: 0.2, i_q: 0.1 },
                SetpointEvent { time: 0.6, i_d: 0.6, i_q: 0.1 },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    /// Grid at which non-SCR sweeps are evaluated.
    pub scr: f64,
    pub xr: f64,
    pub i_d: f64,
    pub i_q: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            param: SweepParam::Scr,
            from: 4.0,
            to: 2.0,
            points: 50,
            scr: 2.0,
            xr: XR_80DEG,
            i_d: 0.66,
            i_q: -0.66,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    pub scr: f64,
    pub xr: f64,
    pub vg_over_vo: f64,
    /// Also run the simulated transfer-limit search.
    pub search: bool,
    pub ramp: f64,
    pub hold: f64,
    pub coarse_points: usize,
    pub resolution: f64,
    pub cap: Option<f64>,
}

impl Default for LimitsSection {
    fn default() -> Self {
        let s = LimitSearch::default();
        Self {
            scr: 1.0,
            xr: 1.0,
            vg_over_vo: 1.0,
            search: false,
            ramp: s.ramp,
            hold: s.hold,
            coarse_points: s.coarse_points,
            resolution: s.resolution,
            cap: s.cap,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    pub plant: PlantSection,
    pub siso: SisoSection,
    pub mimo: MimoSection,
    pub pll: PllSection,
    pub timing: TimingSection,
    pub scenario: ScenarioSection,
    pub sweep: SweepSection,
    pub limits: LimitsSection,
}

impl Profile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    pub fn base(&self) -> Result<PerUnitBase> {
        PerUnitBase::new(self.plant.s_base, self.plant.v_base_ll)
    }

    pub fn filter(&self) -> Result<FilterParams> {
        FilterParams::new(self.plant.r_f, self.plant.l_f, self.plant.c_f)?.with_damping(self.plant.r_d)
    }

    pub fn omega_nom(&self) -> f64 {
        std::f64::consts::TAU * self.plant.f_nom
    }

    pub fn weights(&self) -> Result<LqrWeights> {
        LqrWeights::diagonal(&self.mimo.q_diag, &self.mimo.r_diag)
    }

    pub fn synthesize(&self) -> Result<SynthesisReport> {
        let omega = self.omega_nom();
        let mut ss = plant_matrices(&self.filter()?, omega)?;
        if let Some(b) = &self.mimo.b_override {
            let b = Matrix::try_from(b.clone())?;
            if b.rows() != 2 || b.cols() != 2 {
                return Err(Error::Config("b_override must be 2x2".into()));
            }
            ss.b = b;
        }
        let system = augment(&ss)?;
        let weights = self.weights()?;
        let result = lqr_pi_gains(&system, &weights)?;
        Ok(SynthesisReport {
            omega,
            system,
            weights,
            result,
        })
    }

    pub fn siso_controller(&self) -> Controller {
        Controller::Siso(SisoPiConfig {
            k_p: self.siso.k_p,
            k_i: self.siso.k_i,
            decoupling: self.siso.decoupling,
            voltage_feedforward: self.siso.voltage_feedforward,
        })
    }

    pub fn mimo_controller(&self) -> Result<Controller> {
        let rep = self.synthesize()?;
        Ok(Controller::Mimo(MimoPiConfig::from_synthesis(&rep.result, self.mimo.voltage_feedforward)?))
    }

    /// The configured scenario run under `controller`.
    pub fn scenario(&self, controller: Controller) -> Result<ScenarioConfig> {
        let filter = self.filter()?;
        let t = &self.timing;
        let cfg = ScenarioConfig {
            controller,
            scr_schedule: self.scenario.grid.clone(),
            setpoint_schedule: self.scenario.setpoints.clone(),
            setpoint_interp: self.scenario.interp,
            t_end: self.scenario.t_end,
            dt_plant: t.dt_plant,
            dt_ctrl: t.dt_ctrl,
            delay_tick: t.delay_tick,
            t_delay: t.delay_periods / self.plant.f_sw,
            base: self.base()?,
            filter,
            design_filter: filter,
            pll: PllGains {
                k_p: self.pll.k_p,
                k_i: self.pll.k_i,
            },
            f_nom: self.plant.f_nom,
            v_ff_cutoff: t.v_ff_cutoff,
            pre_settle: t.pre_settle,
            divergence_factor: t.divergence_factor,
            command_limit: t.command_limit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scenario template for sweeps: a constant operating point.
    pub fn sweep_template(&self, controller: Controller) -> Result<ScenarioConfig> {
        let mut cfg = self.scenario(controller)?;
        let s = &self.sweep;
        cfg.scr_schedule = vec![GridEvent { time: 0.0, scr: s.scr, xr: s.xr }];
        cfg.setpoint_schedule = vec![SetpointEvent { time: 0.0, i_d: s.i_d, i_q: s.i_q }];
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn limit_search(&self) -> LimitSearch {
        LimitSearch {
            ramp: self.limits.ramp,
            hold: self.limits.hold,
            coarse_points: self.limits.coarse_points,
            resolution: self.limits.resolution,
            cap: self.limits.cap,
            ..LimitSearch::default()
        }
    }
}
