//! Uniform random search over the gain box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::GainVector;
use crate::entropy_search::Domain;
use crate::error::Result;
use crate::simulator::{CostSample, EvalPool, Simulator};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    /// Ascending in `J`; ties keep draw order.
    pub ranked: Vec<CostSample>,
    pub evaluations: usize,
    pub seed: u64,
}

impl SearchReport {
    pub fn best(&self) -> &CostSample {
        &self.ranked[0]
    }

    pub fn top(&self, k: usize) -> &[CostSample] {
        &self.ranked[..k.min(self.ranked.len())]
    }
}

/// `n` independent draws from `domain`. With `log_uniform_ke` the second
/// coordinate is drawn uniformly in `log kE` instead.
pub fn draw_gains(n: usize, domain: &Domain, log_uniform_ke: bool, seed: u64) -> Result<Vec<GainVector>> {
    domain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut k = [0.0; 4];
            for (i, v) in k.iter_mut().enumerate() {
                let (lo, hi) = (domain.lower[i], domain.upper[i]);
                *v = if i == 1 && log_uniform_ke && lo > 0.0 {
                    rng.random_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi)
                } else {
                    rng.random_range(lo..=hi)
                };
            }
            GainVector::from_array(k)
        })
        .collect()
}

pub fn random_search(
    n: usize,
    domain: &Domain,
    sim: &Simulator,
    pool: &EvalPool,
    log_uniform_ke: bool,
    seed: u64,
) -> Result<SearchReport> {
    if n == 0 {
        return Err(crate::Error::Config("random search needs at least one draw".into()));
    }
    let gains = draw_gains(n, domain, log_uniform_ke, seed)?;
    let mut ranked = pool.evaluate_all(sim, &gains).into_iter().collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.j.total_cmp(&b.j));
    Ok(SearchReport { ranked, evaluations: n, seed })
}
