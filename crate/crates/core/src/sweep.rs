//! Initial-condition sweeps comparing fixed gain vectors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::controller::GainVector;
use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::simulator::{EvalPool, Simulator, DIVERGENCE_PENALTY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "q1_0")]
    Q1,
    #[serde(rename = "q2_0")]
    Q2,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Q1 => "q1_0",
            SweepAxis::Q2 => "q2_0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub gains: Vec<(String, GainVector)>,
    /// State whose `axis` coordinate is overwritten for each row.
    pub base: State,
    /// Simulation is deterministic, so repetitions only average identical runs.
    pub repetitions: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.values.iter().any(|v| !(v.abs() <= PI)) {
            return Err(Error::Config("sweep values must lie in [-pi, pi]".into()));
        }
        if self.gains.is_empty() {
            return Err(Error::Config("sweep needs at least one gain vector".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self, v: f64) -> State {
        let mut s = self.base;
        match self.axis {
            SweepAxis::Q1 => s.q1 = v,
            SweepAxis::Q2 => s.q2 = v,
        }
        s
    }
}

/// The seven pendulum angles of the hardware comparison.
pub fn paper_q2_values() -> Vec<f64> {
    vec![PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0, 3.0 * PI / 4.0, 5.0 * PI / 6.0]
}

/// `n` evenly spaced points covering `[-pi, pi]` inclusive.
pub fn uniform_values(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -PI + 2.0 * PI * i as f64 / (n - 1) as f64).collect()
}

/// K_nom and K_ES with their labels.
pub fn paper_gains() -> Vec<(String, GainVector)> {
    vec![("K_nom".to_string(), GainVector::nominal()), ("K_ES".to_string(), GainVector::entropy_search_optimum())]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub label: String,
    pub gains: GainVector,
    #[serde(rename = "J")]
    pub j: f64,
    pub swingup_success: bool,
    pub diverged: bool,
}

/// One row per (value, gains) pair, value-major.
pub fn run_sweep(spec: &SweepSpec, sim: &Simulator, pool: &EvalPool) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(f64, usize)> =
        spec.values.iter().flat_map(|&v| (0..spec.gains.len()).map(move |g| (v, g))).collect();
    let rows = pool.map(&jobs, |&(v, g)| -> Result<SweepRow> {
        let (label, gains) = &spec.gains[g];
        let run = sim.with_config(sim.config.with_initial_state(spec.initial_state(v)))?;
        let mut total = 0.0;
        let mut success = true;
        let mut diverged = false;
        for _ in 0..spec.repetitions {
            match run.evaluate(gains) {
                Ok(c) => {
                    total += c.j;
                    success &= c.swingup_success;
                    diverged |= c.diverged;
                }
                Err(_) => {
                    total += DIVERGENCE_PENALTY;
                    success = false;
                    diverged = true;
                }
            }
        }
        Ok(SweepRow {
            axis: spec.axis,
            value: v,
            label: label.clone(),
            gains: *gains,
            j: total / spec.repetitions as f64,
            swingup_success: success,
            diverged,
        })
    });
    rows.into_iter().collect()
}
