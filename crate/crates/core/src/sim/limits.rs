use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_scenario, GridEvent, Interp, ScenarioConfig, SetpointEvent};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitAxis {
    /// Active power: d-axis current.
    P,
    /// Reactive power injection: negative q-axis current.
    Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSearch {
    pub ramp: f64,
    pub hold: f64,
    /// Length of the final stretch that must stay in the band.
    pub check_window: f64,
    pub band: f64,
    pub coarse_points: usize,
    pub resolution: f64,
    /// Upper end of the search; `2·scr` when unset.
    pub cap: Option<f64>,
}

impl Default for LimitSearch {
    fn default() -> Self {
        Self {
            ramp: 0.5,
            hold: 1.0,
            check_window: 0.2,
            band: 0.05,
            coarse_points: 20,
            resolution: 0.01,
            cap: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransferLimit {
    /// Largest stable magnitude, to the search resolution.
    Point { value: f64 },
    /// Stable all the way to the search cap.
    AtLeast { cap: f64 },
    /// Stability is not monotone in the magnitude: the first loss of
    /// stability is above `lo`, and stable points exist up to `hi`.
    Bracket { lo: f64, hi: f64 },
    /// Even the zero setpoint does not settle.
    Unstable,
}

impl TransferLimit {
    /// Conservative limit: the largest magnitude known to be stable below
    /// the first failure.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            TransferLimit::Point { value } => value,
            TransferLimit::AtLeast { cap } => cap,
            TransferLimit::Bracket { lo, .. } => lo,
            TransferLimit::Unstable => 0.0,
        }
    }
}

fn probe_config(template: &ScenarioConfig, axis: LimitAxis, scr: f64, xr: f64, mag: f64, s: &LimitSearch) -> ScenarioConfig {
    let (i_d, i_q) = match axis {
        LimitAxis::P => (mag, 0.0),
        LimitAxis::Q => (0.0, -mag),
    };
    let mut cfg = template.clone();
    cfg.scr_schedule = vec![GridEvent { time: 0.0, scr, xr }];
    cfg.setpoint_schedule = vec![
        SetpointEvent { time: 0.0, i_d: 0.0, i_q: 0.0 },
        SetpointEvent { time: s.ramp, i_d, i_q },
    ];
    cfg.setpoint_interp = Interp::Linear;
    cfg.t_end = s.ramp + s.hold;
    cfg
}

/// Runs one probe; `Ok(true)` when the currents stay within the band over
/// the final check window.
pub fn probe_stable(template: &ScenarioConfig, axis: LimitAxis, scr: f64, xr: f64, mag: f64, s: &LimitSearch) -> Result<bool> {
    let cfg = probe_config(template, axis, scr, xr, mag, s);
    let ts = match run_scenario(&cfg) {
        Ok(ts) => ts,
        Err(Error::NoEquilibrium(_)) => return Ok(false),
        Err(e) => return Err(e),
    };
    if ts.diverged {
        return Ok(false);
    }
    let tol = s.band * mag.max(0.1);
    let t0 = cfg.t_end - s.check_window;
    Ok(ts.t.iter().enumerate().filter(|(_, &t)| t >= t0).all(|(k, _)| {
        (ts.i_id[k] - ts.i_id_ref[k]).abs() <= tol && (ts.i_iq[k] - ts.i_iq_ref[k]).abs() <= tol
    }))
}

/// Largest current magnitude the controller can hold at the given grid,
/// searched over `[0, 2·scr]` p.u. by a coarse scan refined by bisection.
pub fn transfer_limit_search(
    template: &ScenarioConfig,
    axis: LimitAxis,
    scr: f64,
    xr: f64,
    search: &LimitSearch,
) -> Result<TransferLimit> {
    template.validate()?;
    if search.coarse_points < 2 || !(search.resolution > 0.0) || !(search.check_window <= search.hold) {
        return Err(invalid("bad limit-search settings"));
    }
    let cap = search.cap.unwrap_or(2.0 * scr);
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(invalid("limit-search cap must be > 0"));
    }
    let grid: Vec<f64> = (0..=search.coarse_points)
        .map(|k| cap * k as f64 / search.coarse_points as f64)
        .collect();
    let stable: Vec<bool> = grid
        .par_iter()
        .map(|&m| probe_stable(template, axis, scr, xr, m, search))
        .collect::<Result<_>>()?;
    let Some(first_bad) = stable.iter().position(|s| !s) else {
        return Ok(TransferLimit::AtLeast { cap });
    };
    if first_bad == 0 {
        return Ok(TransferLimit::Unstable);
    }
    let (mut lo, mut hi) = (grid[first_bad - 1], grid[first_bad]);
    while hi - lo > search.resolution {
        let mid = 0.5 * (lo + hi);
        if probe_stable(template, axis, scr, xr, mid, search)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let steps = (lo / search.resolution + 1e-9).floor();
    let lo = (steps * search.resolution * 1e12).round() / 1e12;
    match stable.iter().rposition(|&s| s) {
        Some(k) if k > first_bad => Ok(TransferLimit::Bracket { lo, hi: grid[k] }),
        _ => Ok(TransferLimit::Point { value: lo }),
    }
}
