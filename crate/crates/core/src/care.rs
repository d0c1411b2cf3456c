//! Continuous algebraic Riccati equation solver.
//!
//! The stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` is obtained as
//! the steady state of the Riccati differential equation integrated backward
//! in time from `P = 0`, using an embedded Dormand-Prince 5(4) pair with
//! step-size control. Near the steady state an explicit integrator is held
//! back by its stability limit, so once the flow residual is small (or
//! periodically, when the iterate already stabilizes the plant) it is
//! polished with Newton-Kleinman steps. The solver stops once the
//! right-hand side (which is exactly the CARE residual) falls below
//! `1e-10·‖Q‖`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    /// `R⁻¹BᵀP`; the control law is `u = −gain · x`.
    pub gain: DMatrix<f64>,
    pub residual_norm: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct CareOptions {
    /// Stop when `‖Ṗ‖_F ≤ stop_ratio · ‖Q‖_F`.
    pub stop_ratio: f64,
    /// Hand over to Newton-Kleinman below `polish_ratio · ‖Q‖_F`.
    pub polish_ratio: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for CareOptions {
    fn default() -> Self {
        Self { stop_ratio: 1e-10, polish_ratio: 1e-6, rtol: 1e-9, atol: 1e-13, max_steps: 500_000 }
    }
}

/// `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let pb = p * b;
    a.transpose() * p + p * a - &pb * r_inv * pb.transpose() + q
}

pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<CareSolution> {
    solve_care_with(a, b, q, r, &CareOptions::default())
}

pub fn solve_care_with(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &CareOptions,
) -> Result<CareSolution> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.nrows() != b.ncols() || !r.is_square() {
        return Err(Error::Domain("inconsistent CARE dimensions".into()));
    }
    let r_inv =
        r.clone().cholesky().ok_or_else(|| Error::Domain("R must be symmetric positive definite".into()))?.inverse();

    let q_norm = q.norm();
    let stop = opts.stop_ratio * q_norm;
    let rhs = |p: &DMatrix<f64>| care_residual(a, b, q, &r_inv, p);

    // Dormand-Prince 5(4) tableau.
    const C: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] =
        [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut k1 = rhs(&p);
    let mut h = 1e-4;
    let mut steps = 0usize;

    let polish = opts.polish_ratio * q_norm;
    let mut last_polish = None;
    while k1.norm() > stop {
        let due = k1.norm() <= polish || (steps > 0 && steps.is_multiple_of(1000));
        if due && last_polish != Some(steps) {
            last_polish = Some(steps);
            if let Some(p_nk) = newton_kleinman(a, b, q, &r_inv, &p, stop) {
                let k_nk = rhs(&p_nk);
                if k_nk.norm() < k1.norm() {
                    p = p_nk;
                    k1 = k_nk;
                    continue;
                }
            }
        }
        if steps >= opts.max_steps {
            return Err(Error::NotStabilizable(format!("residual {:.3e} after {steps} steps", k1.norm())));
        }
        let mut ks: Vec<DMatrix<f64>> = Vec::with_capacity(7);
        ks.push(k1.clone());
        for row in C.iter() {
            let mut stage = p.clone();
            for (coef, k) in row.iter().zip(ks.iter()) {
                if *coef != 0.0 {
                    stage += k * (h * coef);
                }
            }
            ks.push(rhs(&stage));
        }
        // FSAL: the sixth row is the 5th-order solution itself.
        let mut p_new = p.clone();
        for (coef, k) in C[5].iter().zip(ks.iter()) {
            if *coef != 0.0 {
                p_new += k * (h * coef);
            }
        }
        let mut err = DMatrix::<f64>::zeros(n, n);
        for (coef, k) in E.iter().zip(ks.iter()) {
            if *coef != 0.0 {
                err += k * (h * coef);
            }
        }
        let scale = opts.atol + opts.rtol * p.amax().max(p_new.amax());
        let err_ratio = err.amax() / scale;

        if !err_ratio.is_finite() || !p_new.iter().all(|v| v.is_finite()) {
            return Err(Error::NotStabilizable("Riccati flow became non-finite".into()));
        }
        if err_ratio <= 1.0 {
            p = p_new;
            p = (&p + p.transpose()) * 0.5;
            k1 = rhs(&p);
            steps += 1;
            if p.amax() > 1e15 {
                return Err(Error::NotStabilizable("Riccati flow diverged".into()));
            }
        }
        let factor = if err_ratio == 0.0 { 5.0 } else { (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }

    let gain = &r_inv * b.transpose() * &p;
    let closed = a - b * &gain;
    if closed.complex_eigenvalues().iter().any(|ev| ev.re >= 0.0) {
        return Err(Error::NotStabilizable("closed loop is not Hurwitz".into()));
    }
    let residual_norm = k1.norm();
    Ok(CareSolution { p, gain, residual_norm, steps })
}

/// Newton-Kleinman refinement from a stabilizing iterate. Returns `None` if
/// an intermediate closed loop is not Hurwitz or a Lyapunov solve fails.
fn newton_kleinman(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
    p0: &DMatrix<f64>,
    stop: f64,
) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut p = p0.clone();
    let mut best = care_residual(a, b, q, r_inv, &p).norm();
    for _ in 0..30 {
        let s = b * r_inv * b.transpose();
        let a_cl = a - &s * &p;
        if a_cl.complex_eigenvalues().iter().any(|ev| ev.re >= 0.0) {
            return None;
        }
        // (A - S P)ᵀ X + X (A - S P) = -(Q + P S P)
        let rhs = -(q + &p * &s * &p);
        let eye = DMatrix::<f64>::identity(n, n);
        let at = a_cl.transpose();
        let lyap = eye.kronecker(&at) + at.kronecker(&eye);
        let vec_rhs = DMatrix::from_column_slice(n * n, 1, rhs.as_slice());
        let x = lyap.lu().solve(&vec_rhs)?;
        let mut p_next = DMatrix::from_column_slice(n, n, x.as_slice());
        p_next = (&p_next + p_next.transpose()) * 0.5;
        let res = care_residual(a, b, q, r_inv, &p_next).norm();
        if !res.is_finite() || res >= best {
            break;
        }
        p = p_next;
        best = res;
        if best <= stop * 1e-2 {
            break;
        }
    }
    Some(p)
}

/// Eigenvalues of `A − B·gain`.
pub fn closed_loop_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>, gain: &DMatrix<f64>) -> Vec<Complex<f64>> {
    (a - b * gain).complex_eigenvalues().iter().copied().collect()
}
