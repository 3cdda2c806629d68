//! Hill climbing with Gaussian parameter noise.
//!
//! The search loop is the same one fitness monotonic execution uses (same
//! buffer, same sampling); only the way a child is produced differs. The
//! parent is perturbed with fixed-variance noise and then run with its
//! weights frozen, so execution measures fitness and nothing else.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fme::{run_seeds, search, EnvFactory, FmeConfig, Proposal, SearchOutcome};
use crate::net::NetParams;

/// Grid searched when no sigma values are given.
pub const DEFAULT_SIGMA_GRID: [f64; 5] = [0.001, 0.003, 0.01, 0.03, 0.1];

/// Copy of `params` with independent N(0, sigma^2) noise on every weight.
pub fn perturb<R: Rng + ?Sized>(params: &NetParams, sigma: f64, rng: &mut R) -> NetParams {
    let mut out = params.clone();
    if sigma == 0.0 {
        return out;
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    for layer in out.layers_mut() {
        for w in layer.as_mut_slice() {
            *w += noise.sample(rng);
        }
    }
    out
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Config(format!("noise sigma must be finite and non-negative, got {sigma}")));
    }
    Ok(())
}

pub fn hillclimb_run(config: &FmeConfig, sigma: f64, factory: &dyn EnvFactory) -> Result<SearchOutcome> {
    check_sigma(sigma)?;
    search(config, factory, Proposal::Perturb { sigma })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    pub mean_final_best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the sigma with the highest mean final best
    /// (the first one on ties).
    pub best: usize,
}

impl SweepResult {
    pub fn best_sigma(&self) -> f64 {
        self.rows[self.best].sigma
    }
}

/// Runs the hill climber for every `(sigma, seed)` pair and reports the mean
/// final best fitness per sigma.
pub fn variance_sweep(
    sigmas: &[f64],
    config: &FmeConfig,
    factory: &dyn EnvFactory,
    seeds: &[u64],
) -> Result<SweepResult> {
    if sigmas.is_empty() || seeds.is_empty() {
        return Err(Error::Config("variance sweep needs at least one sigma and one seed".into()));
    }
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        check_sigma(sigma)?;
        let outs = run_seeds(config, seeds, |c| hillclimb_run(c, sigma, factory))?;
        let total: f64 = outs.iter().map(|o| o.history.final_best().unwrap_or(f64::NAN)).sum();
        rows.push(SweepRow { sigma, mean_final_best: total / seeds.len() as f64 });
    }
    let mut best = 0;
    for (i, row) in rows.iter().enumerate() {
        if row.mean_final_best > rows[best].mean_final_best {
            best = i;
        }
    }
    Ok(SweepResult { rows, best })
}
