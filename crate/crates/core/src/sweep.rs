//! One-parameter sweeps over a base configuration, run in parallel.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, SweepAxis};
use crate::error::Result;
use crate::sim::{Outcome, Summary};

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    /// `None` when the scenario could not be assembled or run.
    pub outcome: Option<Outcome>,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

impl SweepRow {
    pub const HEADER: &'static str = "axis,value,outcome,divergence_time,max_norm,max_x_norm_after_settle,terminal_deviation,convergence_time,observer_convergence_time,max_steer1_deg,max_steer2_deg,fy1_tail,fy2_tail,error";

    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        let axis = match self.axis {
            SweepAxis::Delay => "delay",
            SweepAxis::IcScale => "ic_scale",
            SweepAxis::ObserverGain => "observer_gain",
        };
        let outcome = match self.outcome {
            Some(Outcome::Stable) => "stable",
            Some(Outcome::Bounded) => "bounded",
            Some(Outcome::Diverged) => "diverged",
            None => "failed",
        };
        let err = self.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        match &self.summary {
            Some(s) => {
                let f = s.mean_forces_tail;
                format!(
                    "{axis},{},{outcome},{},{:.6e},{},{:.6e},{},{},{:.6e},{:.6e},{},{},{err}",
                    self.value,
                    opt(s.divergence_time),
                    s.max_norm,
                    opt(s.max_x_norm_after_settle),
                    s.terminal_deviation,
                    opt(s.convergence_time),
                    opt(s.observer_convergence_time),
                    s.max_abs_steer_deg[0],
                    s.max_abs_steer_deg[1],
                    opt(f.map(|f| f[0])),
                    opt(f.map(|f| f[1])),
                )
            }
            None => format!("{axis},{},{outcome},,,,,,,,,,,{err}", self.value),
        }
    }
}

/// Copy of `base` with the swept parameter set to `value`.
pub fn apply(base: &Config, axis: SweepAxis, value: f64) -> Config {
    let mut c = base.clone();
    match axis {
        SweepAxis::Delay => c.sim.delay_u = value,
        SweepAxis::IcScale => {
            let b = base.sweep.ic_base;
            c.sim.x0 = [-value * b[0], -value * b[1]];
        }
        SweepAxis::ObserverGain => c.observer.p = value,
    }
    c
}

fn run_one(cfg: &Config) -> Result<Summary> {
    Ok(cfg.assemble()?.scenario.run()?.summary)
}

/// Runs one scenario per value. Failures are recorded in the row and do
/// not stop the sweep; rows keep the order of `values`.
pub fn run_sweep(base: &Config, axis: SweepAxis, values: &[f64]) -> Vec<SweepRow> {
    values
        .par_iter()
        .map(|&value| match run_one(&apply(base, axis, value)) {
            Ok(s) => SweepRow {
                axis,
                value,
                outcome: Some(s.outcome),
                summary: Some(s),
                error: None,
            },
            Err(e) => SweepRow {
                axis,
                value,
                outcome: None,
                summary: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SweepRow::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}
