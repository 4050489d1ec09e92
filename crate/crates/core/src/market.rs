//! Price path containers and the parametric simulators behind them.
//!
//! Both models step in log-price, which keeps every simulated price strictly
//! positive. GBM uses the exact log-normal transition so marginals carry no
//! discretization bias; the rank-dependent model is an explicit Euler scheme
//! with rank frozen at the left endpoint of each step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{ModelSpec, VolSpec};

/// Strictly positive price matrix on a time grid, asset-major: `prices[i][k]`
/// is the price of asset `i` at grid point `k`.
#[derive(Debug, Clone)]
pub struct MarketPath {
    pub grid: TimeGrid,
    pub prices: Vec<Vec<f64>>,
}

impl MarketPath {
    pub fn new(grid: TimeGrid, prices: Vec<Vec<f64>>) -> Result<Self> {
        let m = grid.len();
        if prices.len() < 2 {
            return Err(Error::invalid("need at least 2 assets"));
        }
        for (i, row) in prices.iter().enumerate() {
            if row.len() != m {
                return Err(Error::invalid(format!(
                    "asset {i} has {} prices, expected {m}",
                    row.len()
                )));
            }
            for (k, &s) in row.iter().enumerate() {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NonPositivePrice {
                        row: k,
                        col: i,
                        value: s,
                    });
                }
            }
        }
        Ok(MarketPath { grid, prices })
    }

    pub fn n_assets(&self) -> usize {
        self.prices.len()
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Total capitalization per grid point.
    pub fn total_cap(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.prices.iter().map(|row| row[k]).sum())
            .collect()
    }

    /// Prices of all assets at grid point `k`.
    pub fn at(&self, k: usize) -> Vec<f64> {
        self.prices.iter().map(|row| row[k]).collect()
    }

    /// Path restricted to every `factor`-th grid point.
    pub fn subsample(&self, factor: usize) -> Result<MarketPath> {
        let grid = self.grid.subsample(factor)?;
        let prices = self
            .prices
            .iter()
            .map(|row| row.iter().copied().step_by(factor).collect())
            .collect();
        Ok(MarketPath { grid, prices })
    }
}

/// Simple per-step return increments `(S[k+1] - S[k]) / S[k]`, asset-major
/// with one column per step.
#[derive(Debug, Clone)]
pub struct IncrementSeries {
    pub dr: Vec<Vec<f64>>,
}

impl IncrementSeries {
    pub fn n_assets(&self) -> usize {
        self.dr.len()
    }

    pub fn steps(&self) -> usize {
        self.dr[0].len()
    }
}

/// Exact simple returns of a path.
pub fn increments(path: &MarketPath) -> IncrementSeries {
    let steps = path.grid.steps();
    let dr = path
        .prices
        .iter()
        .map(|row| {
            (0..steps)
                .map(|k| (row[k + 1] - row[k]) / row[k])
                .collect()
        })
        .collect();
    IncrementSeries { dr }
}

/// Simulates one path. Identical `(spec, grid, seed)` reproduce the path
/// bit-exactly; ensembles should vary `stream` (see [`simulate_stream`]) so
/// paths are independent and order-free.
pub fn simulate(spec: &ModelSpec, grid: &TimeGrid, seed: u64) -> Result<MarketPath> {
    simulate_stream(spec, grid, seed, 0)
}

/// Simulates the path on RNG stream `stream` of the generator seeded with
/// `seed`. Distinct streams of one seed are independent.
pub fn simulate_stream(
    spec: &ModelSpec,
    grid: &TimeGrid,
    seed: u64,
    stream: u64,
) -> Result<MarketPath> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    simulate_with_rng(spec, grid, &mut rng)
}

fn simulate_with_rng(
    spec: &ModelSpec,
    grid: &TimeGrid,
    rng: &mut impl Rng,
) -> Result<MarketPath> {
    let n = spec.n_assets();
    let steps = grid.steps();
    let mut cur: Vec<f64> = spec.initial_prices().to_vec();
    let mut prices: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(steps + 1);
            row.push(cur[i]);
            row
        })
        .collect();

    // multiplicative update S * exp(log increment): strictly positive, and a
    // zero increment leaves the price bit-identical
    let push = |cur: &mut Vec<f64>, prices: &mut Vec<Vec<f64>>, i: usize, dlog: f64, k: usize| {
        if dlog != 0.0 {
            cur[i] *= dlog.exp();
        }
        if !cur[i].is_finite() || cur[i] <= 0.0 {
            return Err(Error::NonFinite { step: k + 1, asset: i });
        }
        prices[i].push(cur[i]);
        Ok(())
    };

    match spec {
        ModelSpec::Gbm { drift, vol, .. } => {
            // Per-asset log drift a_i - c_ii/2 keeps the simple-return drift
            // equal to the model drift, so the exponential with zero drift is
            // a martingale.
            let cov = vol.covariance();
            let log_drift: Vec<f64> = (0..n).map(|i| drift[i] - 0.5 * cov[i][i]).collect();
            let d = match vol {
                VolSpec::Diagonal(_) => n,
                VolSpec::Matrix(m) => m[0].len(),
            };
            let mut z = vec![0.0; d];
            for k in 0..steps {
                let dt = grid.dt(k);
                let sq = dt.sqrt();
                for zi in z.iter_mut() {
                    *zi = rng.sample::<f64, _>(StandardNormal);
                }
                for i in 0..n {
                    let shock: f64 = match vol {
                        VolSpec::Diagonal(v) => v[i] * z[i],
                        VolSpec::Matrix(m) => m[i].iter().zip(&z).map(|(a, b)| a * b).sum(),
                    };
                    push(&mut cur, &mut prices, i, log_drift[i] * dt + sq * shock, k)?;
                }
            }
        }
        ModelSpec::Atlas {
            rank_drift,
            rank_vol,
            ..
        } => {
            let mut order: Vec<usize> = (0..n).collect();
            for k in 0..steps {
                let dt = grid.dt(k);
                let sq = dt.sqrt();
                // rank of each asset at the left endpoint
                order.sort_by(|&a, &b| cur[b].partial_cmp(&cur[a]).unwrap().then(a.cmp(&b)));
                let mut rank_of = vec![0usize; n];
                for (r, &i) in order.iter().enumerate() {
                    rank_of[i] = r;
                }
                for i in 0..n {
                    let r = rank_of[i];
                    let (g, v) = (rank_drift[r], rank_vol[r]);
                    let z: f64 = rng.sample(StandardNormal);
                    push(&mut cur, &mut prices, i, (g - 0.5 * v * v) * dt + v * sq * z, k)?;
                }
            }
        }
    }

    Ok(MarketPath {
        grid: grid.clone(),
        prices,
    })
}
