//! Energy-based swing-up law, its storage function, and the hybrid switch to
//! an LQR catch controller near the upright equilibrium.

use nalgebra::{DMatrix, RowVector4};
use serde::{Deserialize, Serialize};

use crate::care::{solve_care, CareSolution};
use crate::dynamics::{
    coriolis_matrix, gravity_vector, inverse_mass_matrix, linearize_upright, total_energy, wrap_angle,
    DerivedConstants, State,
};
use crate::error::{Error, Result};
use nalgebra::Vector2;

/// Ratio in the sufficient swing-up condition `kv > ratio · kE`.
pub const SUFFICIENT_CONDITION_RATIO: f64 = 6.8366e-6;

/// Controller gains `K = (kp, kE, kv, kx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainVector {
    pub kp: f64,
    #[serde(rename = "kE")]
    pub ke: f64,
    pub kv: f64,
    pub kx: f64,
}

impl GainVector {
    pub fn new(kp: f64, ke: f64, kv: f64, kx: f64) -> Result<Self> {
        let g = Self { kp, ke, kv, kx };
        g.validate()?;
        Ok(g)
    }

    /// Gains found by the uniform random-search baseline.
    pub fn nominal() -> Self {
        Self { kp: 770.152, ke: 6255313.438, kv: 35.190, kx: 465.098 }
    }

    /// Gains reported as the Entropy Search optimum.
    pub fn entropy_search_optimum() -> Self {
        Self { kp: 467.727, ke: 3015436.481, kv: 13.235, kx: 273.014 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("kE", self.ke), ("kv", self.kv), ("kx", self.kx)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("gain {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.kp, self.ke, self.kv, self.kx]
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Which form of the arm-angle term enters `H(q, q̇)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KxTerm {
    /// `kx (1 − cos q1)`.
    #[default]
    AsPrinted,
    /// `kx sin q1`, the exact derivative of the storage term.
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerOptions {
    pub h_kx_term: KxTerm,
    /// Symmetric torque clamp; `None` means unsaturated.
    pub u_max: Option<f64>,
    /// Minimum magnitude of the swing-up denominator.
    pub guard: f64,
    /// When false, hitting the guard threshold is an error instead of a clamp.
    pub guard_enabled: bool,
}

impl Default for ControllerOptions {
    fn default() -> Self {
        Self { h_kx_term: KxTerm::AsPrinted, u_max: None, guard: 1e-9, guard_enabled: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlMode {
    SwingUp,
    Lqr,
}

impl ControlMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::SwingUp => "swingup",
            ControlMode::Lqr => "lqr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    pub mode: ControlMode,
    /// The denominator guard clamped this evaluation.
    pub guarded: bool,
}

/// Storage function `kE ½(E − E0)² + kv ½ dq1² + kx (1 − cos q1)`.
pub fn storage_value(s: &State, k: &GainVector, c: &DerivedConstants) -> f64 {
    let de = total_energy(s, c) - c.e0;
    0.5 * k.ke * de * de + 0.5 * k.kv * s.dq1 * s.dq1 + k.kx * (1.0 - s.q1.cos())
}

/// `R(q) = I2 / (I10 I2 − I12² cos² q2 + I11 I2 sin² q2)`.
pub fn r_factor(q2: f64, c: &DerivedConstants) -> f64 {
    let (s, co) = q2.sin_cos();
    c.i2 / (c.i10 * c.i2 - c.i12 * c.i12 * co * co + c.i11 * c.i2 * s * s)
}

/// `kE (E − E0) + kv R(q)`, the swing-up law's denominator.
pub fn swingup_denominator(s: &State, k: &GainVector, c: &DerivedConstants) -> f64 {
    k.ke * (total_energy(s, c) - c.e0) + k.kv * r_factor(s.q2, c)
}

/// `H(q, q̇)` of the swing-up law.
pub fn h_term(s: &State, k: &GainVector, c: &DerivedConstants, kx_term: KxTerm) -> f64 {
    let m_inv = inverse_mass_matrix(s.q2, c);
    let dq = Vector2::new(s.dq1, s.dq2);
    let mc = m_inv * (coriolis_matrix(s.q2, s.dq1, s.dq2, c) * dq);
    let mg = m_inv * gravity_vector(s.q2, c);
    let arm = match kx_term {
        KxTerm::AsPrinted => k.kx * (1.0 - s.q1.cos()),
        KxTerm::Sin => k.kx * s.q1.sin(),
    };
    -k.kv * mc[0] - k.kv * mg[0] + arm
}

/// Energy-based swing-up torque. Returns the torque and whether the
/// denominator guard fired.
pub fn swingup_torque(
    s: &State,
    k: &GainVector,
    c: &DerivedConstants,
    opts: &ControllerOptions,
) -> Result<(f64, bool)> {
    let num = -k.kp * s.dq1 - h_term(s, k, c, opts.h_kx_term);
    let mut den = swingup_denominator(s, k, c);
    let mut guarded = false;
    if den.abs() < opts.guard {
        if !opts.guard_enabled {
            return Err(Error::DenominatorSingular { value: den });
        }
        den = if den < 0.0 { -opts.guard } else { opts.guard };
        guarded = true;
    }
    Ok((num / den, guarded))
}

/// Strict check of `kv > 6.8366e-6 · kE`. Advisory only.
pub fn sufficient_condition_holds(k: &GainVector) -> bool {
    k.kv > SUFFICIENT_CONDITION_RATIO * k.ke
}

/// LQR weights and the catch region half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrSpec {
    #[serde(rename = "Q")]
    pub q_diag: [f64; 4],
    #[serde(rename = "R")]
    pub r: f64,
    /// Radians.
    pub switch_angle: f64,
}

impl Default for LqrSpec {
    fn default() -> Self {
        Self { q_diag: [1.0, 10.0, 1.0, 10.0], r: 10_000.0, switch_angle: 20f64.to_radians() }
    }
}

impl LqrSpec {
    pub fn validate(&self) -> Result<()> {
        if self.q_diag.iter().any(|q| !(*q > 0.0)) {
            return Err(Error::Domain("LQR Q diagonal entries must be positive".into()));
        }
        if !(self.r > 0.0) {
            return Err(Error::Domain("LQR R must be positive".into()));
        }
        if !(self.switch_angle > 0.0 && self.switch_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Domain("switch_angle must lie in (0, pi/2)".into()));
        }
        Ok(())
    }
}

/// Upright LQR design: the CARE solution plus the gain as a row vector.
#[derive(Debug, Clone)]
pub struct LqrDesign {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub solution: CareSolution,
    pub gain: RowVector4<f64>,
}

pub fn design_lqr(c: &DerivedConstants, spec: &LqrSpec) -> Result<LqrDesign> {
    spec.validate()?;
    let (a4, b4) = linearize_upright(c);
    let a = DMatrix::from_iterator(4, 4, a4.iter().copied());
    let b = DMatrix::from_iterator(4, 1, b4.iter().copied());
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&spec.q_diag));
    let r = DMatrix::from_element(1, 1, spec.r);
    let solution = solve_care(&a, &b, &q, &r)?;
    let gain = RowVector4::from_iterator(solution.gain.iter().copied());
    Ok(LqrDesign { a, b, solution, gain })
}

/// Applies the optional symmetric torque clamp.
fn saturate(u: f64, u_max: Option<f64>) -> f64 {
    match u_max {
        Some(m) => u.clamp(-m, m),
        None => u,
    }
}

/// Hybrid law: LQR on the wrapped state inside the catch band, swing-up
/// outside it.
pub fn hybrid_control(
    s: &State,
    k: &GainVector,
    lqr_gain: &RowVector4<f64>,
    spec: &LqrSpec,
    c: &DerivedConstants,
    opts: &ControllerOptions,
) -> Result<ControlOutput> {
    let q2w = wrap_angle(s.q2);
    if q2w.abs() <= spec.switch_angle {
        let x = nalgebra::Vector4::new(wrap_angle(s.q1), q2w, s.dq1, s.dq2);
        let u = -(lqr_gain * x)[0];
        return Ok(ControlOutput { u: saturate(u, opts.u_max), mode: ControlMode::Lqr, guarded: false });
    }
    let (u, guarded) = swingup_torque(s, k, c, opts)?;
    Ok(ControlOutput { u: saturate(u, opts.u_max), mode: ControlMode::SwingUp, guarded })
}

/// Everything needed to evaluate the hybrid law repeatedly for one gain set.
#[derive(Debug, Clone)]
pub struct HybridController {
    pub gains: GainVector,
    pub lqr_gain: RowVector4<f64>,
    pub spec: LqrSpec,
    pub constants: DerivedConstants,
    pub options: ControllerOptions,
}

impl HybridController {
    pub fn control(&self, s: &State) -> Result<ControlOutput> {
        hybrid_control(s, &self.gains, &self.lqr_gain, &self.spec, &self.constants, &self.options)
    }
}
