//! Closed-loop fixed-step simulation and the trajectory cost functional.

use nalgebra::{RowVector4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{design_lqr, ControlMode, ControllerOptions, GainVector, HybridController, LqrSpec};
use crate::dynamics::{
    dynamics_rhs, inertia_constants, total_energy, wrap_angle, DerivedConstants, PhysicalParams, State,
};
use crate::error::{Error, Result};
use crate::ode::rk4_step;

/// Cost assigned to simulations whose state stops being finite.
pub const DIVERGENCE_PENALTY: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub t0: f64,
    pub tf: f64,
    pub dt: f64,
    #[serde(with = "state_as_array")]
    pub initial_state: State,
    #[serde(flatten)]
    pub controller: ControllerOptions,
    /// Length of the trailing window checked for a successful catch (s).
    pub success_window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            tf: 30.0,
            dt: 1e-3,
            initial_state: State::default_initial(),
            controller: ControllerOptions::default(),
            success_window: 5.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tf > self.t0) {
            return Err(Error::Config("tf must exceed t0".into()));
        }
        if !(self.dt > 0.0 && self.dt <= self.tf - self.t0) {
            return Err(Error::Config("dt must lie in (0, tf - t0]".into()));
        }
        if !self.initial_state.is_finite() {
            return Err(Error::Config("initial state must be finite".into()));
        }
        if let Some(m) = self.controller.u_max {
            if !(m > 0.0) {
                return Err(Error::Config("u_max must be positive when set".into()));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.tf - self.t0) / self.dt).round() as usize
    }

    pub fn with_initial_state(mut self, s: State) -> Self {
        self.initial_state = s;
        self
    }
}

mod state_as_array {
    use super::State;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: &State, ser: S) -> Result<S::Ok, S::Error> {
        s.to_array().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<State, D::Error> {
        let a = <[f64; 4]>::deserialize(de)?;
        Ok(State::from(a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub inputs: Vec<f64>,
    pub modes: Vec<ControlMode>,
    pub energies: Vec<f64>,
    pub guard_events: usize,
    /// Time of the first non-finite state, if the run blew up.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            inputs: Vec::with_capacity(n),
            modes: Vec::with_capacity(n),
            energies: Vec::with_capacity(n),
            guard_events: 0,
            diverged_at: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// `Err(NonFiniteState)` when the run was aborted.
    pub fn check(&self) -> Result<()> {
        match self.diverged_at {
            Some(time) => Err(Error::NonFiniteState { time }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub gains: GainVector,
    #[serde(rename = "J")]
    pub j: f64,
    pub swingup_success: bool,
    pub settle_time: Option<f64>,
    pub diverged: bool,
    pub guard_events: usize,
}

/// Integrand of the cost functional with initial-condition normalization.
pub fn cost_integrand(x: &State, x0: &State) -> f64 {
    20.0 * (1.0 - x.q1.cos()) / (5.0 - x0.q1.cos())
        + 100.0 * (1.0 - x.q2.cos()) / (30.0 - x0.q2.cos())
        + 0.5 * (x.dq1 / (80.0 + x0.dq1.abs())).powi(2)
        + 0.5 * (x.dq2 / (100.0 + x0.dq2.abs())).powi(2)
}

/// Trapezoidal quadrature of [`cost_integrand`] over the recorded samples.
pub fn cost_of_trajectory(traj: &Trajectory, x0: &State) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let v = cost_integrand(s, x0);
        if let Some((tp, vp)) = prev {
            total += 0.5 * (t - tp) * (v + vp);
        }
        prev = Some((*t, v));
    }
    total
}

/// First time after which the wrapped pendulum angle stays inside the band.
pub fn settle_time(traj: &Trajectory, band: f64) -> Option<f64> {
    let last_out = traj.states.iter().rposition(|s| wrap_angle(s.q2).abs() >= band);
    match last_out {
        None => traj.times.first().copied(),
        Some(i) if i + 1 < traj.len() => Some(traj.times[i + 1]),
        Some(_) => None,
    }
}

/// All samples in the trailing `window` seconds are inside the band.
pub fn held_upright(traj: &Trajectory, band: f64, window: f64) -> bool {
    let Some(&t_end) = traj.times.last() else { return false };
    traj.times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= t_end - window - 1e-12)
        .all(|(_, s)| wrap_angle(s.q2).abs() <= band)
}

/// Plant constants and LQR gain computed once, reused for every gain vector.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub constants: DerivedConstants,
    pub lqr: LqrSpec,
    pub lqr_gain: RowVector4<f64>,
    pub config: SimConfig,
}

impl Simulator {
    pub fn new(physical: &PhysicalParams, lqr: &LqrSpec, config: SimConfig) -> Result<Self> {
        config.validate()?;
        let constants = inertia_constants(physical)?;
        let design = design_lqr(&constants, lqr)?;
        Ok(Self { constants, lqr: *lqr, lqr_gain: design.gain, config })
    }

    /// Same plant and LQR design, different run settings.
    pub fn with_config(&self, config: SimConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, ..self.clone() })
    }

    pub fn controller(&self, gains: &GainVector) -> HybridController {
        HybridController {
            gains: *gains,
            lqr_gain: self.lqr_gain,
            spec: self.lqr,
            constants: self.constants,
            options: self.config.controller,
        }
    }

    /// Runs RK4 with the feedback law re-evaluated at every stage.
    pub fn simulate(&self, gains: &GainVector) -> Result<Trajectory> {
        let cfg = &self.config;
        let ctrl = self.controller(gains);
        let c = &self.constants;
        let n = cfg.steps();
        let mut traj = Trajectory::with_capacity(n + 1);
        let mut x = cfg.initial_state.to_vector();

        for i in 0..=n {
            let t = cfg.t0 + i as f64 * cfg.dt;
            let s = State::from_vector(&x);
            let first = ctrl.control(&s)?;
            traj.guard_events += first.guarded as usize;
            traj.times.push(t);
            traj.states.push(s);
            traj.inputs.push(first.u);
            traj.modes.push(first.mode);
            traj.energies.push(total_energy(&s, c));
            if i == n {
                break;
            }

            let mut stage = 0;
            let mut failure: Option<Error> = None;
            let mut guarded = 0usize;
            let next = rk4_step(&x, cfg.dt, |y: &Vector4<f64>| {
                let ys = State::from_vector(y);
                let u = if stage == 0 {
                    first.u
                } else {
                    match ctrl.control(&ys) {
                        Ok(out) => {
                            guarded += out.guarded as usize;
                            out.u
                        }
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                };
                stage += 1;
                dynamics_rhs(&ys, u, c)
            });
            if let Some(e) = failure {
                return Err(e);
            }
            traj.guard_events += guarded;
            if !next.iter().all(|v| v.is_finite()) {
                traj.diverged_at = Some(cfg.t0 + (i + 1) as f64 * cfg.dt);
                break;
            }
            x = next;
        }
        Ok(traj)
    }

    /// Simulates and scores one gain vector. Diverged runs get
    /// [`DIVERGENCE_PENALTY`].
    pub fn evaluate(&self, gains: &GainVector) -> Result<CostSample> {
        let traj = self.simulate(gains)?;
        Ok(self.score(gains, &traj))
    }

    pub fn score(&self, gains: &GainVector, traj: &Trajectory) -> CostSample {
        let band = self.lqr.switch_angle;
        if traj.diverged() {
            return CostSample {
                gains: *gains,
                j: DIVERGENCE_PENALTY,
                swingup_success: false,
                settle_time: None,
                diverged: true,
                guard_events: traj.guard_events,
            };
        }
        CostSample {
            gains: *gains,
            j: cost_of_trajectory(traj, &traj.states[0]),
            swingup_success: held_upright(traj, band, self.config.success_window),
            settle_time: settle_time(traj, band),
            diverged: false,
            guard_events: traj.guard_events,
        }
    }
}

/// Convenience wrapper with default physical and LQR settings.
pub fn simulate(gains: &GainVector, cfg: &SimConfig) -> Result<Trajectory> {
    Simulator::new(&PhysicalParams::default(), &LqrSpec::default(), *cfg)?.simulate(gains)
}

/// Convenience wrapper with default physical and LQR settings.
pub fn evaluate_gains(gains: &GainVector, cfg: &SimConfig) -> Result<CostSample> {
    Simulator::new(&PhysicalParams::default(), &LqrSpec::default(), *cfg)?.evaluate(gains)
}

/// Bounded-parallelism evaluation pool; results keep submission order.
pub struct EvalPool {
    pool: rayon::ThreadPool,
}

impl EvalPool {
    /// `threads == 0` uses the rayon default.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }

    pub fn evaluate_all(&self, sim: &Simulator, gains: &[GainVector]) -> Vec<Result<CostSample>> {
        self.map(gains, |g| sim.evaluate(g))
    }
}
