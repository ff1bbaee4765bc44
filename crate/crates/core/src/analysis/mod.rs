//! Small-signal analysis and static transfer limits.

mod model;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use model::{linearize, ClosedLoopModel, LinearizedClosedLoop};

use crate::controllers::Controller;
use crate::error::{invalid, Result};
use crate::matops::{eigenvalues, Spectrum};
use crate::sim::ScenarioConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Grid short-circuit ratio.
    Scr,
    /// Multiplier on the plant filter resistance.
    RfScale,
    /// Multiplier on the plant filter inductance.
    LfScale,
    /// SISO proportional gain; leaves a MIMO loop untouched.
    SisoKp,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Scr => "scr",
            SweepParam::RfScale => "rf_scale",
            SweepParam::LfScale => "lf_scale",
            SweepParam::SisoKp => "siso_kp",
        }
    }

    /// `template` with the parameter set to `value`. Filter multipliers act
    /// on the simulated plant only; the controller keeps its design values.
    pub fn apply(self, template: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut cfg = template.clone();
        match self {
            SweepParam::Scr => {
                for ev in &mut cfg.scr_schedule {
                    ev.scr = value;
                }
            }
            SweepParam::RfScale => cfg.filter.r_f = template.filter.r_f * value,
            SweepParam::LfScale => cfg.filter.l_f = template.filter.l_f * value,
            SweepParam::SisoKp => {
                if let Controller::Siso(c) = &mut cfg.controller {
                    c.k_p = value;
                }
            }
        }
        cfg
    }
}

/// `count` evenly spaced values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![from],
        _ => (0..count)
            .map(|k| from + (to - from) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: SweepParam,
    pub values: Vec<f64>,
    /// `None` where no equilibrium could be found.
    pub spectra: Vec<Option<Spectrum>>,
    /// NaN where the point failed.
    pub max_real_part: Vec<f64>,
    /// First value, in sweep order, whose spectrum reaches the closed right
    /// half-plane.
    pub first_unstable: Option<f64>,
    pub errors: Vec<Option<String>>,
}

impl SweepResult {
    pub fn unstable_count(&self) -> usize {
        self.max_real_part.iter().filter(|&&m| m >= 0.0).count()
    }

    /// Header `param,re_1,im_1,…,re_n,im_n,max_re`; failed points are NaN.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self
            .spectra
            .iter()
            .flatten()
            .map(|s| s.len())
            .max()
            .unwrap_or(0);
        let mut header = String::from("param");
        for k in 1..=n {
            header.push_str(&format!(",re_{k},im_{k}"));
        }
        header.push_str(",max_re");
        writeln!(w, "{header}")?;
        for (i, v) in self.values.iter().enumerate() {
            let mut row = format!("{v}");
            for k in 0..n {
                match self.spectra[i].as_ref().and_then(|s| s.eigenvalues.get(k)) {
                    Some(l) => row.push_str(&format!(",{},{}", l.re, l.im)),
                    None => row.push_str(",NaN,NaN"),
                }
            }
            row.push_str(&format!(",{}", self.max_real_part[i]));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Linearizes the closed loop at every value. Points are evaluated in
/// parallel; the result keeps the order of `values`.
pub fn sweep(param: SweepParam, values: &[f64], template: &ScenarioConfig) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(invalid("empty sweep range"));
    }
    template.validate()?;
    let points: Vec<std::result::Result<Spectrum, String>> = values
        .par_iter()
        .map(|&v| {
            let cfg = param.apply(template, v);
            linearize(&cfg)
                .and_then(|lin| Ok(eigenvalues(&lin.a_cl)?))
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut spectra = Vec::with_capacity(values.len());
    let mut max_real_part = Vec::with_capacity(values.len());
    let mut errors = Vec::with_capacity(values.len());
    for p in points {
        match p {
            Ok(s) => {
                max_real_part.push(s.max_real());
                spectra.push(Some(s));
                errors.push(None);
            }
            Err(e) => {
                max_real_part.push(f64::NAN);
                spectra.push(None);
                errors.push(Some(e));
            }
        }
    }
    let first_unstable = values
        .iter()
        .zip(&max_real_part)
        .find(|(_, &m)| m >= 0.0)
        .map(|(&v, _)| v);
    Ok(SweepResult {
        param,
        values: values.to_vec(),
        spectra,
        max_real_part,
        first_unstable,
        errors,
    })
}

/// Static power-transfer limit of a converter behind a Thevenin grid, with
/// the converter voltage as the voltage base.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticLimits {
    pub scr: f64,
    pub xr_ratio: f64,
    pub vg_over_vo: f64,
    pub p_max_pu: f64,
    /// Reactive power at the angle of maximum active power.
    pub q_pu: f64,
}

impl StaticLimits {
    /// Active power (p.u.) at inverter angle `delta` (rad).
    pub fn p_at(&self, delta: f64) -> f64 {
        let (r, _) = self.unit_impedance();
        let arg = delta - std::f64::consts::FRAC_PI_2 + self.angle();
        self.scr * (self.vg_over_vo * arg.sin() + r)
    }

    /// Reactive power (p.u.) at inverter angle `delta` (rad).
    pub fn q_at(&self, delta: f64) -> f64 {
        let (_, x) = self.unit_impedance();
        let arg = delta - std::f64::consts::FRAC_PI_2 + self.angle();
        self.scr * (-self.vg_over_vo * arg.cos() + x)
    }

    /// Angle at which `p_at` peaks.
    pub fn delta_at_max(&self) -> f64 {
        std::f64::consts::PI - self.angle()
    }

    fn angle(&self) -> f64 {
        if self.xr_ratio.is_infinite() {
            std::f64::consts::FRAC_PI_2
        } else {
            self.xr_ratio.atan()
        }
    }

    /// `(R_g, X_g) / |Z_g|`.
    fn unit_impedance(&self) -> (f64, f64) {
        let a = self.angle();
        (a.cos(), a.sin())
    }
}

pub fn static_limits(scr: f64, xr_ratio: f64, vg_over_vo: f64) -> Result<StaticLimits> {
    if !(scr > 0.0 && scr.is_finite()) {
        return Err(invalid(format!("scr must be > 0, got {scr}")));
    }
    if !(xr_ratio >= 0.0) {
        return Err(invalid(format!("xr_ratio must be >= 0, got {xr_ratio}")));
    }
    if !(vg_over_vo > 0.0 && vg_over_vo.is_finite()) {
        return Err(invalid("vg_over_vo must be > 0"));
    }
    let mut s = StaticLimits {
        scr,
        xr_ratio,
        vg_over_vo,
        p_max_pu: 0.0,
        q_pu: 0.0,
    };
    let (r, x) = s.unit_impedance();
    s.p_max_pu = scr * (vg_over_vo + r);
    s.q_pu = scr * x;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_reference_points() {
        let s = static_limits(1.0, 1.0, 1.0).unwrap();
        assert!((s.p_max_pu - 1.707_106_781).abs() < 1e-6);
        assert!((s.q_pu - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let s = static_limits(4.0, 80f64.to_radians().tan(), 1.0).unwrap();
        assert!((s.p_max_pu - 4.0 * (1.0 + 80f64.to_radians().cos())).abs() < 1e-9);
        assert!((s.q_pu - 4.0 * 80f64.to_radians().sin()).abs() < 1e-9);
        let s = static_limits(3.0, f64::INFINITY, 1.2).unwrap();
        assert!((s.p_max_pu - 3.6).abs() < 1e-12 && (s.q_pu - 3.0).abs() < 1e-12);
        assert!(static_limits(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn angle_form_peaks_at_limit() {
        let s = static_limits(2.0, 3.0, 0.9).unwrap();
        let d = s.delta_at_max();
        assert!((s.p_at(d) - s.p_max_pu).abs() < 1e-9);
        assert!((s.q_at(d) - s.q_pu).abs() < 1e-9);
        for k in 0..100 {
            assert!(s.p_at(k as f64 * 0.0628) <= s.p_max_pu + 1e-12);
        }
    }

    #[test]
    fn linspace_ends() {
        assert_eq!(linspace(4.0, 2.0, 3), vec![4.0, 3.0, 2.0]);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
        assert!(linspace(1.0, 2.0, 0).is_empty());
    }
}
