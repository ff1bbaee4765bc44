use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    D,
    Q,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::D => "d",
            Axis::Q => "q",
        }
    }
}

/// Step-response figures over `[step_time, next event)`.
///
/// Times are measured from the step. `settling_time_5pct` is infinite when
/// the response is still outside the band at the end of the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step_time: f64,
    pub rise_time_10_90: f64,
    pub overshoot_pct: f64,
    pub settling_time_5pct: f64,
    pub cross_coupling_peak: f64,
    pub iae: f64,
    /// `|y − y*|` at the end of the window.
    pub final_error: f64,
}

/// Time at which the piecewise-linear signal first reaches `level`, or
/// `None` when it never does.
fn first_crossing(t: &[f64], r: &[f64], level: f64) -> Option<f64> {
    if r[0] >= level {
        return Some(t[0]);
    }
    for k in 1..r.len() {
        if r[k] >= level {
            let w = (level - r[k - 1]) / (r[k] - r[k - 1]);
            return Some(t[k - 1] + w * (t[k] - t[k - 1]));
        }
    }
    None
}

pub fn step_metrics(ts: &TimeSeries, step_time: f64, axis: Axis) -> Result<StepMetrics> {
    let (y, yref, other) = match axis {
        Axis::D => (&ts.i_id, &ts.i_id_ref, &ts.i_iq),
        Axis::Q => (&ts.i_iq, &ts.i_iq_ref, &ts.i_id),
    };
    let no_step = || Error::NoStep {
        axis: axis.name(),
        time: step_time,
    };
    let k0 = ts.index_at(step_time).ok_or_else(no_step)?;
    if let Some(td) = ts.diverged_at {
        if td >= step_time - 1e-9 {
            return Err(Error::DivergedWindow);
        }
    }
    if k0 == 0 {
        return Err(no_step());
    }
    let (y0, y1) = (yref[k0 - 1], yref[k0]);
    let step = y1 - y0;
    if step.abs() < 1e-12 {
        return Err(no_step());
    }
    let t_stop = ts
        .events
        .iter()
        .copied()
        .find(|&e| e > step_time + 1e-9)
        .unwrap_or(f64::INFINITY);
    let mut k1 = k0;
    while k1 + 1 < ts.len() && ts.t[k1 + 1] < t_stop - 1e-9 {
        k1 += 1;
    }
    let t = &ts.t[k0..=k1];
    let r: Vec<f64> = y[k0..=k1].iter().map(|v| (v - y0) / step).collect();
    let t_start = ts.t[k0];

    let rise_time_10_90 = match (first_crossing(t, &r, 0.1), first_crossing(t, &r, 0.9)) {
        (Some(a), Some(b)) => b - a,
        _ => f64::INFINITY,
    };
    let peak = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let overshoot_pct = 100.0 * (peak - 1.0).max(0.0);

    let band = 0.05;
    let dev: Vec<f64> = r.iter().map(|v| (v - 1.0).abs()).collect();
    let settling_time_5pct = match dev.iter().rposition(|&d| d > band) {
        None => 0.0,
        Some(j) if j + 1 == dev.len() => f64::INFINITY,
        Some(j) => {
            let w = (dev[j] - band) / (dev[j] - dev[j + 1]);
            t[j] + w * (t[j + 1] - t[j]) - t_start
        }
    };

    let o0 = other[k0];
    let cross_coupling_peak = other[k0..=k1].iter().map(|v| (v - o0).abs()).fold(0.0, f64::max);

    let err: Vec<f64> = (k0..=k1).map(|k| (yref[k] - y[k]).abs()).collect();
    let iae = t
        .windows(2)
        .zip(err.windows(2))
        .map(|(tw, ew)| 0.5 * (ew[0] + ew[1]) * (tw[1] - tw[0]))
        .sum();

    Ok(StepMetrics {
        step_time,
        rise_time_10_90,
        overshoot_pct,
        settling_time_5pct,
        cross_coupling_peak,
        iae,
        final_error: err[err.len() - 1],
    })
}
