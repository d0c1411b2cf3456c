//! Noise-free Gaussian process regression with a constant prior mean and the
//! rational-quadratic kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Space in which kernel distances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpace {
    /// Gains mapped affinely onto the unit cube.
    #[default]
    Normalized,
    /// Gains as they are.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpHyper {
    pub prior_mean: f64,
    pub signal_variance: f64,
    pub alpha: f64,
    /// Diagonal divisors `S_i` of the squared distance.
    pub lengthscales: [f64; 4],
    /// Relative diagonal jitter; the Gram matrix gets `jitter · s²` added.
    pub jitter: f64,
    pub kernel_space: KernelSpace,
}

impl Default for GpHyper {
    fn default() -> Self {
        Self {
            prior_mean: 20.0,
            signal_variance: 9.894,
            alpha: 0.131,
            lengthscales: [58.552, 40.343, 21.515, 271.180],
            jitter: 1e-6,
            kernel_space: KernelSpace::Normalized,
        }
    }
}

impl GpHyper {
    pub fn validate(&self) -> Result<()> {
        if !self.prior_mean.is_finite() {
            return Err(Error::Domain("prior_mean must be finite".into()));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::Domain("signal_variance must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain("alpha must be positive".into()));
        }
        if self.lengthscales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Domain("lengthscales must be positive".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::Domain("jitter must be non-negative".into()));
        }
        Ok(())
    }
}

/// `s² (1 + Σ (a_i − b_i)² / S_i / (2α))^(−α)`.
pub fn rq_kernel(a: &Vector4<f64>, b: &Vector4<f64>, h: &GpHyper) -> f64 {
    let mut d = 0.0;
    for i in 0..4 {
        let e = a[i] - b[i];
        d += e * e / h.lengthscales[i];
    }
    h.signal_variance * (1.0 + d / (2.0 * h.alpha)).powf(-h.alpha)
}

pub fn gram_matrix(xs: &[Vector4<f64>], h: &GpHyper) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = h.signal_variance;
        for j in 0..i {
            let v = rq_kernel(&xs[i], &xs[j], h);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `[k(a_i, b_j)]`.
pub fn cross_covariance(a: &[Vector4<f64>], b: &[Vector4<f64>], h: &GpHyper) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| rq_kernel(&a[i], &b[j], h))
}

/// Evaluated points and their costs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GpDataset {
    points: Vec<Vector4<f64>>,
    values: Vec<f64>,
}

impl GpDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(points: Vec<Vector4<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Domain("points and values differ in length".into()));
        }
        let mut ds = Self::new();
        for (p, v) in points.into_iter().zip(values) {
            ds.push(p, v)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, point: Vector4<f64>, value: f64) -> Result<()> {
        if !point.iter().all(|v| v.is_finite()) || !value.is_finite() {
            return Err(Error::Domain("training data must be finite".into()));
        }
        if self.points.contains(&point) {
            return Err(Error::DuplicatePoint);
        }
        self.points.push(point);
        self.values.push(value);
        Ok(())
    }

    pub fn points(&self) -> &[Vector4<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Cholesky of `K + jitter·s²·I`, doubling the jitter up to `1e-2·s²`.
/// Returns the factor and the absolute diagonal term actually used.
pub fn gram_factorization(k: &DMatrix<f64>, h: &GpHyper) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let s2 = h.signal_variance;
    let max = 1e-2 * s2;
    let mut add = h.jitter * s2;
    loop {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += add;
        }
        if let Some(c) = kj.cholesky() {
            return Ok((c, add));
        }
        if add >= max {
            return Err(Error::NotPositiveDefinite { jitter: add / s2 });
        }
        add = if add == 0.0 { 1e-12 * s2 } else { (2.0 * add).min(max) };
    }
}

/// A dataset conditioned and ready for repeated queries.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub hyper: GpHyper,
    dataset: GpDataset,
    factor: Option<Cholesky<f64, Dyn>>,
    /// The jittered Gram matrix the factor came from.
    gram: DMatrix<f64>,
    /// `K⁻¹ (y − m)` for the un-jittered Gram matrix, as far as it can be
    /// resolved numerically, split into leading and trailing parts.
    weights: (DVector<f64>, DVector<f64>),
    noise: f64,
}

impl GpModel {
    pub fn fit(dataset: &GpDataset, hyper: &GpHyper) -> Result<Self> {
        hyper.validate()?;
        let n = dataset.len();
        if n == 0 {
            return Ok(Self {
                hyper: *hyper,
                dataset: dataset.clone(),
                factor: None,
                gram: DMatrix::zeros(0, 0),
                weights: (DVector::zeros(0), DVector::zeros(0)),
                noise: 0.0,
            });
        }
        let k = gram_matrix(dataset.points(), hyper);
        let (factor, noise) = gram_factorization(&k, hyper)?;
        let mut gram = k.clone();
        for i in 0..n {
            gram[(i, i)] += noise;
        }
        let y = DVector::from_iterator(n, dataset.values().iter().map(|v| v - hyper.prior_mean));

        // The mean should interpolate, so the weights target K itself.
        // When K alone factors, solve with it; otherwise precondition with the
        // jittered factor. Either way refine against K.
        let exact = k.clone().cholesky();
        let w = refine(exact.as_ref().unwrap_or(&factor), &k, &y);

        Ok(Self { hyper: *hyper, dataset: dataset.clone(), factor: Some(factor), gram, weights: w, noise })
    }

    pub fn dataset(&self) -> &GpDataset {
        &self.dataset
    }

    /// Absolute diagonal term in the factored Gram matrix.
    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn posterior(&self, query: &Vector4<f64>) -> PosteriorMoments {
        let h = &self.hyper;
        let Some(factor) = &self.factor else {
            return PosteriorMoments { mean: h.prior_mean, variance: h.signal_variance };
        };
        let kq =
            DVector::from_iterator(self.dataset.len(), self.dataset.points().iter().map(|p| rq_kernel(p, query, h)));
        let (wh, wl) = &self.weights;
        let mean = h.prior_mean + dot_split(kq.as_slice(), wh.as_slice(), wl.as_slice());
        let (zh, zl) = refine(factor, &self.gram, &kq);
        let variance = (h.signal_variance - dot_split(kq.as_slice(), zh.as_slice(), zl.as_slice())).max(0.0);
        PosteriorMoments { mean, variance }
    }

    /// Joint posterior mean vector and covariance over `queries`.
    pub fn joint_posterior(&self, queries: &[Vector4<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let h = &self.hyper;
        let m = queries.len();
        let prior = gram_matrix(queries, h);
        let Some(factor) = &self.factor else {
            return (DVector::from_element(m, h.prior_mean), prior);
        };
        let kxq = cross_covariance(self.dataset.points(), queries, h);
        let (wh, wl) = &self.weights;
        let n = kxq.nrows();
        let mut mean = DVector::from_element(m, h.prior_mean);
        let mut zh = DMatrix::zeros(n, m);
        let mut zl = DMatrix::zeros(n, m);
        for j in 0..m {
            let col = kxq.column(j).into_owned();
            mean[j] += dot_split(col.as_slice(), wh.as_slice(), wl.as_slice());
            let (a, b) = refine(factor, &self.gram, &col);
            zh.set_column(j, &a);
            zl.set_column(j, &b);
        }
        let mut cov = prior;
        for i in 0..m {
            let ki = kxq.column(i);
            for j in i..m {
                let c = cov[(i, j)] - dot_split(ki.as_slice(), zh.column(j).as_slice(), zl.column(j).as_slice());
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        for i in 0..m {
            if cov[(i, i)] < 0.0 {
                cov[(i, i)] = 0.0;
            }
        }
        (mean, cov)
    }
}

/// Dot product with a compensated accumulator, accurate to about twice the
/// working precision.
fn dot2<'a>(pairs: impl Iterator<Item = (&'a f64, &'a f64)>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (a, b) in pairs {
        let p = a * b;
        let pe = a.mul_add(*b, -p);
        let t = s + p;
        let z = t - s;
        c += (s - (t - z)) + (p - z) + pe;
        s = t;
    }
    s + c
}

/// Solution of `k x = b` as an unevaluated sum `hi + lo`, refined with
/// residuals in compensated arithmetic until the correction stops shrinking.
fn refine(solver: &Cholesky<f64, Dyn>, k: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = b.len();
    let mut hi = solver.solve(b);
    let mut lo = DVector::zeros(n);
    let mut last = f64::INFINITY;
    let mut terms = Vec::with_capacity(2 * n + 1);
    for _ in 0..50 {
        let r = DVector::from_fn(n, |i, _| {
            terms.clear();
            terms.push((b[i], 1.0));
            for j in 0..n {
                terms.push((-k[(i, j)], hi[j]));
                terms.push((-k[(i, j)], lo[j]));
            }
            dot2(terms.iter().map(|(a, b)| (a, b)))
        });
        let d = solver.solve(&r);
        let size = d.amax();
        if !(size < last) {
            break;
        }
        for i in 0..n {
            let l = lo[i] + d[i];
            let t = hi[i] + l;
            lo[i] = l - (t - hi[i]);
            hi[i] = t;
        }
        if size <= 1e-30 * hi.amax() {
            break;
        }
        last = size;
    }
    (hi, lo)
}

/// `aᵀ (hi + lo)` in compensated arithmetic.
fn dot_split(a: &[f64], hi: &[f64], lo: &[f64]) -> f64 {
    dot2(a.iter().zip(hi).chain(a.iter().zip(lo)))
}

/// Convenience: fit and query in one call.
pub fn posterior(ds: &GpDataset, h: &GpHyper, query: &Vector4<f64>) -> Result<PosteriorMoments> {
    Ok(GpModel::fit(ds, h)?.posterior(query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h() -> GpHyper {
        GpHyper::default()
    }

    #[test]
    fn kernel_examples() {
        let a = Vector4::new(0.2, 0.4, 0.6, 0.8);
        assert_eq!(rq_kernel(&a, &a, &h()), 9.894);
        let b = a + Vector4::new(1.0, 0.0, 0.0, 0.0);
        let expected = 9.894 * (1.0f64 + (1.0 / 58.552) / (2.0 * 0.131)).powf(-0.131);
        assert_relative_eq!(rq_kernel(&a, &b, &h()), expected, max_relative = 1e-15);
        let mut prev = 9.894;
        for r in [0.1, 1.0, 10.0, 1e3, 1e6, 1e12] {
            let k = rq_kernel(&a, &(a + Vector4::repeat(r)), &h());
            assert!(k < prev && k > 0.0);
            prev = k;
        }
        assert!(prev < 1e-1);
    }

    #[test]
    fn single_point_factor() {
        let k = DMatrix::from_element(1, 1, 9.894);
        let (c, _) = gram_factorization(&k, &h()).unwrap();
        assert_relative_eq!(c.l()[(0, 0)], (9.894f64 * (1.0 + 1e-6)).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn two_point_factor_matches_hand_cholesky() {
        let hp = h();
        let xs = [Vector4::zeros(), Vector4::new(0.5, 0.5, 0.5, 0.5)];
        let k = gram_matrix(&xs, &hp);
        let (c, add) = gram_factorization(&k, &hp).unwrap();
        let d = 9.894 + add;
        let off = k[(0, 1)];
        let l = c.l();
        assert_relative_eq!(l[(0, 0)], d.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(l[(1, 0)], off / d.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(l[(1, 1)], (d - off * off / d).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn empty_dataset_is_prior() {
        let m = GpModel::fit(&GpDataset::new(), &h()).unwrap();
        let p = m.posterior(&Vector4::new(0.1, 0.2, 0.3, 0.4));
        assert_eq!((p.mean, p.variance), (20.0, 9.894));
    }

    #[test]
    fn duplicates_are_rejected() {
        let mut ds = GpDataset::new();
        ds.push(Vector4::repeat(0.5), 1.0).unwrap();
        assert_eq!(ds.push(Vector4::repeat(0.5), 2.0), Err(Error::DuplicatePoint));
    }

    #[test]
    fn interpolates_training_points() {
        let pts =
            vec![Vector4::new(0.1, 0.2, 0.3, 0.4), Vector4::new(0.9, 0.1, 0.5, 0.2), Vector4::new(0.4, 0.8, 0.7, 0.9)];
        let ds = GpDataset::from_parts(pts.clone(), vec![12.0, 30.0, 8.5]).unwrap();
        let m = GpModel::fit(&ds, &h()).unwrap();
        for (p, v) in pts.iter().zip(ds.values()) {
            let post = m.posterior(p);
            assert!((post.mean - v).abs() < 1e-6, "{} vs {v}", post.mean);
            assert!(post.variance <= 1e-4 * 9.894);
        }
    }

    #[test]
    fn escalation_gives_up() {
        let hp = GpHyper { jitter: 0.0, ..h() };
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(gram_factorization(&k, &hp), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn joint_diagonal_matches_pointwise() {
        let pts = vec![Vector4::new(0.1, 0.2, 0.3, 0.4), Vector4::new(0.9, 0.1, 0.5, 0.2)];
        let ds = GpDataset::from_parts(pts, vec![12.0, 30.0]).unwrap();
        let m = GpModel::fit(&ds, &h()).unwrap();
        let qs = [Vector4::new(0.5, 0.5, 0.5, 0.5), Vector4::new(0.0, 1.0, 0.0, 1.0)];
        let (mu, cov) = m.joint_posterior(&qs);
        for (i, q) in qs.iter().enumerate() {
            let p = m.posterior(q);
            assert_relative_eq!(mu[i], p.mean, max_relative = 1e-12);
            assert_relative_eq!(cov[(i, i)], p.variance, max_relative = 1e-9);
        }
    }
}
