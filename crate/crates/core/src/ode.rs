use nalgebra::Vector4;

/// One classic fourth-order Runge-Kutta step of `ẋ = f(x)`.
///
/// `f` is called at each of the four stage states in order, so a feedback
/// law evaluated inside `f` is re-sampled per stage.
pub fn rk4_step<F>(x: &Vector4<f64>, dt: f64, mut f: F) -> Vector4<f64>
where
    F: FnMut(&Vector4<f64>) -> Vector4<f64>,
{
    let k1 = f(x);
    let k2 = f(&(x + k1 * (dt / 2.0)));
    let k3 = f(&(x + k2 * (dt / 2.0)));
    let k4 = f(&(x + k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let f = |x: &Vector4<f64>| -x;
        let err = |dt: f64| {
            let mut x = Vector4::repeat(1.0);
            let n = (1.0 / dt).round() as usize;
            for _ in 0..n {
                x = rk4_step(&x, dt, f);
            }
            (x[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }
}
