//! Furuta pendulum model: physical constants, Euler-Lagrange terms, total
//! energy and the linearization about the upright equilibrium.
//!
//! State order everywhere is `(q1, q2, dq1, dq2)`, with `q1` the rotary arm
//! angle and `q2` the pendulum angle measured from upright.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Raw physical parameters of the rig (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    pub g: f64,
}

impl Default for PhysicalParams {
    /// QUBE Servo 2 values.
    fn default() -> Self {
        Self { m1: 0.095, m2: 0.024, l1: 0.085, l2: 0.129, j1: 5.72e-5, j2: 3.33e-5, g: 9.81 }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("J1", self.j1),
            ("J2", self.j2),
            ("g", self.g),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("physical parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Inertia combinations and energy scales derived from [`PhysicalParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub i10: f64,
    pub i11: f64,
    pub i12: f64,
    pub i2: f64,
    pub v0: f64,
    /// Target energy: the total energy at the upright rest state.
    pub e0: f64,
}

impl DerivedConstants {
    /// Evaluates the closed-form combinations without validating the inputs.
    pub fn compute(p: &PhysicalParams) -> Self {
        let v0 = p.m2 * p.l2 * p.g / 2.0;
        Self {
            i10: p.j1 + p.m2 * p.l1 * p.l1,
            i11: p.m2 * p.l2 * p.l2 / 3.0,
            i12: p.m2 * p.l1 * p.l2 / 2.0,
            i2: p.j2 + p.m2 * p.l2 * p.l2 / 4.0,
            v0,
            e0: v0,
        }
    }

    /// `det M(q2)` at `q2 = 0`, the smallest value over all angles.
    pub fn upright_determinant(&self) -> f64 {
        self.i10 * self.i2 - self.i12 * self.i12
    }
}

impl Default for DerivedConstants {
    fn default() -> Self {
        Self::compute(&PhysicalParams::default())
    }
}

/// Validated construction of the derived constants.
pub fn inertia_constants(p: &PhysicalParams) -> Result<DerivedConstants> {
    p.validate()?;
    let c = DerivedConstants::compute(p);
    if c.upright_determinant() <= 0.0 {
        return Err(Error::Domain("mass matrix is not positive definite (I10*I2 - I12^2 <= 0)".into()));
    }
    Ok(c)
}

/// Pendulum configuration and velocities. Angles are stored unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub q1: f64,
    pub q2: f64,
    pub dq1: f64,
    pub dq2: f64,
}

impl State {
    pub const fn new(q1: f64, q2: f64, dq1: f64, dq2: f64) -> Self {
        Self { q1, q2, dq1, dq2 }
    }

    pub fn origin() -> Self {
        Self::default()
    }

    /// `(0, 7π/9, 0, 0)`: the default start used for tuning and reporting.
    pub fn default_initial() -> Self {
        Self::new(0.0, 7.0 * PI / 9.0, 0.0, 0.0)
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.q1, self.q2, self.dq1, self.dq2)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q1, self.q2, self.dq1, self.dq2]
    }

    pub fn is_finite(&self) -> bool {
        self.q1.is_finite() && self.q2.is_finite() && self.dq1.is_finite() && self.dq2.is_finite()
    }
}

impl From<[f64; 4]> for State {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Maps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = a.rem_euclid(two_pi);
    if w > PI {
        w -= two_pi;
    }
    w
}

pub fn mass_matrix(q2: f64, c: &DerivedConstants) -> Matrix2<f64> {
    let (s, co) = q2.sin_cos();
    let off = -c.i12 * co;
    Matrix2::new(c.i10 + c.i11 * s * s, off, off, c.i2)
}

pub fn coriolis_matrix(q2: f64, dq1: f64, dq2: f64, c: &DerivedConstants) -> Matrix2<f64> {
    let (s, co) = q2.sin_cos();
    Matrix2::new(2.0 * c.i11 * dq2 * s * co, c.i12 * dq2 * s, -c.i11 * dq1 * s * co, 0.0)
}

pub fn gravity_vector(q2: f64, c: &DerivedConstants) -> Vector2<f64> {
    Vector2::new(0.0, -c.v0 * q2.sin())
}

/// Closed-form inverse of the 2x2 mass matrix.
pub fn inverse_mass_matrix(q2: f64, c: &DerivedConstants) -> Matrix2<f64> {
    let m = mass_matrix(q2, c);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
}

pub fn potential_energy(q2: f64, c: &DerivedConstants) -> f64 {
    c.v0 * q2.cos()
}

pub fn total_energy(s: &State, c: &DerivedConstants) -> f64 {
    let (sn, co) = s.q2.sin_cos();
    0.5 * ((c.i10 + c.i11 * sn * sn) * s.dq1 * s.dq1 + c.i2 * s.dq2 * s.dq2) - c.i12 * s.dq1 * s.dq2 * co
        + potential_energy(s.q2, c)
}

/// Acceleration `q̈ = M⁻¹((u, 0)ᵀ − C q̇ − G)`.
pub fn accelerations(s: &State, u: f64, c: &DerivedConstants) -> Vector2<f64> {
    let dq = Vector2::new(s.dq1, s.dq2);
    let rhs = Vector2::new(u, 0.0) - coriolis_matrix(s.q2, s.dq1, s.dq2, c) * dq - gravity_vector(s.q2, c);
    inverse_mass_matrix(s.q2, c) * rhs
}

/// Time derivative of the state under arm torque `u`.
pub fn dynamics_rhs(s: &State, u: f64, c: &DerivedConstants) -> Vector4<f64> {
    let qdd = accelerations(s, u, c);
    Vector4::new(s.dq1, s.dq2, qdd[0], qdd[1])
}

/// Linearization about `(0, 0, 0, 0)`: `ẋ ≈ A x + B u`.
pub fn linearize_upright(c: &DerivedConstants) -> (Matrix4<f64>, Vector4<f64>) {
    let det = c.upright_determinant();
    // M(0)^-1 = [[I2, I12], [I12, I10]] / det
    let mut a = Matrix4::zeros();
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    a[(2, 1)] = c.i12 * c.v0 / det;
    a[(3, 1)] = c.i10 * c.v0 / det;
    let b = Vector4::new(0.0, 0.0, c.i2 / det, c.i12 / det);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper() -> DerivedConstants {
        inertia_constants(&PhysicalParams::default()).unwrap()
    }

    #[test]
    fn derived_constants_match_hand_arithmetic() {
        let c = paper();
        assert_relative_eq!(c.i10, 2.3060e-4, max_relative = 1e-12);
        assert_relative_eq!(c.v0, 1.51859e-2, max_relative = 1e-5);
        assert_relative_eq!(c.i11, 0.024 * 0.129 * 0.129 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(c.i12, 1.3158e-4, max_relative = 1e-12);
        assert_relative_eq!(c.i2, 1.33146e-4, max_relative = 1e-12);
        assert_eq!(c.e0, c.v0);
        assert!(c.upright_determinant() > 0.0);
    }

    #[test]
    fn zero_mass_limit() {
        let p = PhysicalParams { m2: 0.0, ..Default::default() };
        let c = DerivedConstants::compute(&p);
        assert_eq!(c.i11, 0.0);
        assert_eq!(c.i12, 0.0);
        assert_eq!(c.v0, 0.0);
        assert_eq!(c.i10, p.j1);
        assert!(matches!(inertia_constants(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_non_positive_parameters() {
        let p = PhysicalParams { l1: -0.1, ..Default::default() };
        assert!(inertia_constants(&p).is_err());
        let p = PhysicalParams { g: f64::NAN, ..Default::default() };
        assert!(inertia_constants(&p).is_err());
    }

    #[test]
    fn mass_matrix_special_angles() {
        let c = paper();
        let m = mass_matrix(0.0, &c);
        assert_relative_eq!(m[(0, 0)], 2.3060e-4, max_relative = 1e-12);
        assert_relative_eq!(m[(0, 1)], -1.3158e-4, max_relative = 1e-12);
        assert_relative_eq!(m[(1, 0)], -1.3158e-4, max_relative = 1e-12);
        assert_relative_eq!(m[(1, 1)], 1.33146e-4, max_relative = 1e-12);

        let m = mass_matrix(PI / 2.0, &c);
        assert!(m[(0, 1)].abs() < 1e-19);
        assert_relative_eq!(m[(0, 0)], c.i10 + c.i11, max_relative = 1e-14);

        let m = mass_matrix(PI, &c);
        assert_relative_eq!(m[(0, 1)], c.i12, max_relative = 1e-14);
    }

    #[test]
    fn coriolis_and_gravity_examples() {
        let c = paper();
        assert_eq!(coriolis_matrix(1.3, 0.0, 0.0, &c), Matrix2::zeros());
        assert_eq!(coriolis_matrix(0.0, 2.0, -3.0, &c), Matrix2::zeros());
        let cm = coriolis_matrix(PI / 4.0, 1.0, 1.0, &c);
        assert_relative_eq!(cm[(0, 0)], c.i11, max_relative = 1e-14);
        assert_eq!(cm[(1, 1)], 0.0);

        assert_eq!(gravity_vector(0.0, &c), Vector2::zeros());
        assert!(gravity_vector(PI, &c).norm() < 1e-17);
        let g = gravity_vector(PI / 2.0, &c);
        assert_eq!(g[0], 0.0);
        assert_relative_eq!(g[1], -1.51859e-2, max_relative = 1e-5);
    }

    #[test]
    fn energy_examples() {
        let c = paper();
        assert_relative_eq!(total_energy(&State::origin(), &c), 1.51859e-2, max_relative = 1e-5);
        assert_relative_eq!(total_energy(&State::new(0.0, PI, 0.0, 0.0), &c), -c.v0, max_relative = 1e-14);
        assert_relative_eq!(total_energy(&State::default_initial(), &c), -1.16333e-2, max_relative = 5e-5);
    }

    #[test]
    fn energy_is_half_quadratic_form_plus_potential() {
        let c = paper();
        let s = State::new(0.3, -2.1, 1.7, -0.4);
        let dq = Vector2::new(s.dq1, s.dq2);
        let direct = 0.5 * (dq.transpose() * mass_matrix(s.q2, &c) * dq)[0] + c.v0 * s.q2.cos();
        assert_relative_eq!(total_energy(&s, &c), direct, max_relative = 1e-13);
    }

    #[test]
    fn equilibria_have_zero_derivative() {
        let c = paper();
        assert_eq!(dynamics_rhs(&State::origin(), 0.0, &c), Vector4::zeros());
        let d = dynamics_rhs(&State::new(0.0, PI, 0.0, 0.0), 0.0, &c);
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn free_acceleration_matches_dense_solve() {
        let c = paper();
        let q2 = 7.0 * PI / 9.0;
        let m = mass_matrix(q2, &c);
        let f = Vector2::new(0.0, c.v0 * q2.sin());
        let oracle = m.lu().solve(&f).unwrap();
        let d = dynamics_rhs(&State::new(0.0, q2, 0.0, 0.0), 0.0, &c);
        assert_relative_eq!(d[2], oracle[0], max_relative = 1e-12);
        assert_relative_eq!(d[3], oracle[1], max_relative = 1e-12);
    }

    #[test]
    fn linearization_structure_and_entries() {
        let c = paper();
        let (a, _) = linearize_upright(&c);
        assert_eq!(a[(0, 2)], 1.0);
        assert_eq!(a[(1, 3)], 1.0);
        for r in 0..4 {
            assert_eq!(a[(r, 0)], 0.0);
        }
        let det = c.i10 * c.i2 - c.i12 * c.i12;
        assert_relative_eq!(a[(2, 1)], c.i12 * c.v0 / det, max_relative = 1e-14);
        assert_relative_eq!(a[(3, 1)], c.i10 * c.v0 / det, max_relative = 1e-14);
    }

    #[test]
    fn linearization_matches_finite_difference_jacobian() {
        let c = paper();
        let (a, b) = linearize_upright(&c);
        let h = 1e-6;
        for j in 0..4 {
            let mut xp = Vector4::zeros();
            let mut xm = Vector4::zeros();
            xp[j] = h;
            xm[j] = -h;
            let col = (dynamics_rhs(&State::from_vector(&xp), 0.0, &c)
                - dynamics_rhs(&State::from_vector(&xm), 0.0, &c))
                / (2.0 * h);
            for i in 0..4 {
                let scale = a[(i, j)].abs().max(1.0);
                assert!((col[i] - a[(i, j)]).abs() <= 1e-6 * scale, "A[{i}][{j}]");
            }
        }
        let col = (dynamics_rhs(&State::origin(), h, &c) - dynamics_rhs(&State::origin(), -h, &c)) / (2.0 * h);
        for i in 0..4 {
            let scale = b[i].abs().max(1.0);
            assert!((col[i] - b[i]).abs() <= 1e-6 * scale, "B[{i}]");
        }
    }

    #[test]
    fn mass_matrix_positive_definite_on_samples() {
        let c = paper();
        for k in 0..10_000 {
            let q2 = -PI + 2.0 * PI * (k as f64 + 0.5) / 10_000.0;
            let m = mass_matrix(q2, &c);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
            let eig = m.symmetric_eigenvalues();
            assert!(eig.min() > 0.0, "q2 = {q2}");
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(2.0 * PI + 0.1), 0.1, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_relative_eq!(wrap_angle(PI), PI, epsilon = 1e-15);
        assert_relative_eq!(wrap_angle(-7.0 * PI / 2.0), PI / 2.0, epsilon = 1e-12);
    }
}
