//! Helpers shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector4};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use furuta_es::gp::{rq_kernel, GpHyper};

fn q(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

/// `cᵀ a⁻¹ b` exactly over the rationals, by Gauss-Jordan elimination.
pub fn exact_form(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let n = b.len();
    let mut m: Vec<Vec<BigRational>> =
        (0..n).map(|i| (0..n).map(|j| q(a[(i, j)])).chain([q(b[i])]).collect()).collect();
    for col in 0..n {
        let p = (col..n).find(|&r| !m[r][col].is_zero()).expect("singular");
        m.swap(col, p);
        let pivot = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = &*v / &pivot;
        }
        let row = m[col].clone();
        for (r, other) in m.iter_mut().enumerate() {
            if r != col && !other[col].is_zero() {
                let f = other[col].clone();
                for (v, w) in other.iter_mut().zip(&row) {
                    *v = &*v - &f * w;
                }
            }
        }
    }
    let mut acc = BigRational::zero();
    for i in 0..n {
        acc += q(c[i]) * &m[i][n];
    }
    acc.to_f64().unwrap()
}

/// Posterior moments from exact solves on the same kernel entries. The mean
/// uses the exact Gram matrix; the variance uses the jittered one the model
/// factors.
pub fn dense_oracle(xs: &[Vector4<f64>], ys: &[f64], h: &GpHyper, q: &Vector4<f64>, add: f64) -> (f64, f64) {
    let n = xs.len();
    let k = DMatrix::from_fn(n, n, |i, j| rq_kernel(&xs[i], &xs[j], h));
    let kq = DVector::from_fn(n, |i, _| rq_kernel(&xs[i], q, h));
    let y = DVector::from_fn(n, |i, _| ys[i] - h.prior_mean);
    let kj = &k + DMatrix::identity(n, n) * add;
    (h.prior_mean + exact_form(&k, &y, &kq), h.signal_variance - exact_form(&kj, &kq, &kq))
}
