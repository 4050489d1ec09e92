//! Constant rebalanced portfolios by rank, the best retrospectively chosen
//! weights, and the universal portfolio that averages over all of them.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::market::{increments, simulate_stream, IncrementSeries};
use crate::model::ModelSpec;
use crate::portfolio::{wealth, WealthPath, WeightPath};
use crate::ranks::{rank_path, RankView};

/// A point of the rank-weight simplex: nonnegative weights on the first n
/// ranks summing to one, zero beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    xi: Vec<f64>,
    n_active: usize,
}

impl SimplexPoint {
    pub fn new(active: Vec<f64>, n_assets: usize) -> Result<Self> {
        let n = active.len();
        if n == 0 || n > n_assets {
            return Err(Error::invalid(format!(
                "need 1 <= n <= N rank weights, got {n} for N={n_assets}"
            )));
        }
        if active.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("rank weights must be >= 0"));
        }
        let sum: f64 = active.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "rank weights must sum to 1, got {sum}"
            )));
        }
        let mut xi = active;
        xi.resize(n_assets, 0.0);
        Ok(SimplexPoint { xi, n_active: n })
    }

    pub fn active(&self) -> &[f64] {
        &self.xi[..self.n_active]
    }

    pub fn full(&self) -> &[f64] {
        &self.xi
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }
}

/// Per-step returns of the asset occupying each rank at the step's left
/// endpoint: `out[r][m] = dR of the rank-r asset over step m`.
pub fn rank_returns(rv: &RankView, inc: &IncrementSeries, n: usize) -> Vec<Vec<f64>> {
    let steps = inc.steps();
    (0..n)
        .map(|r| (0..steps).map(|m| inc.dr[rv.p[r][m]][m]).collect())
        .collect()
}

fn cr_factors(xi: &[f64], rr: &[Vec<f64>]) -> Result<Vec<f64>> {
    let steps = rr[0].len();
    let mut f = Vec::with_capacity(steps);
    for m in 0..steps {
        let mut r = 0.0;
        for (k, &x) in xi.iter().enumerate() {
            if x != 0.0 {
                r += x * rr[k][m];
            }
        }
        if r <= -1.0 {
            return Err(Error::BlowThrough { step: m, ret: r });
        }
        f.push(1.0 + r);
    }
    Ok(f)
}

/// Wealth of the constant rebalanced portfolio holding fraction `xi_k` in the
/// rank-k stock at every step.
pub fn cr_wealth(
    xi: &SimplexPoint,
    rv: &RankView,
    inc: &IncrementSeries,
) -> Result<WealthPath> {
    let rr = rank_returns(rv, inc, xi.n_active());
    let f = cr_factors(xi.active(), &rr)?;
    let mut x = Vec::with_capacity(f.len() + 1);
    x.push(1.0);
    let mut cur = 1.0;
    for v in f {
        cur *= v;
        x.push(cur);
    }
    Ok(WealthPath { x })
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Log-wealth of a candidate over a step range, plus its gradient in the
/// rank weights.
fn log_wealth_and_grad(xi: &[f64], rr: &[Vec<f64>], steps: usize) -> (f64, Vec<f64>) {
    let n = xi.len();
    let mut f = 0.0;
    let mut grad = vec![0.0; n];
    for m in 0..steps {
        let mut r = 0.0;
        for k in 0..n {
            r += xi[k] * rr[k][m];
        }
        let denom = 1.0 + r;
        f += denom.ln();
        for k in 0..n {
            grad[k] += rr[k][m] / denom;
        }
    }
    (f, grad)
}

/// Projected gradient ascent of the (concave) log-wealth over the simplex.
fn polish(start: &[f64], rr: &[Vec<f64>], steps: usize, iters: usize) -> Vec<f64> {
    let mut xi = start.to_vec();
    let (mut best_f, _) = log_wealth_and_grad(&xi, rr, steps);
    let mut step = 0.5 / (steps as f64).max(1.0).sqrt();
    for _ in 0..iters {
        let (_, grad) = log_wealth_and_grad(&xi, rr, steps);
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = xi.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
            let trial = project_simplex(&trial);
            let (f, _) = log_wealth_and_grad(&trial, rr, steps);
            if f > best_f + 1e-15 {
                best_f = f;
                xi = trial;
                improved = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    xi
}

/// Search strategy for the best retrospectively chosen weights.
#[derive(Debug, Clone, Copy)]
pub enum Optimizer {
    /// Exhaustive simplex grid at the given resolution plus one local polish.
    Grid { resolution: usize },
    /// Projected gradient ascent from the given number of random starts.
    MultistartGradient { starts: usize },
}

impl Optimizer {
    /// Exhaustive grid at 1/200 for n <= 3, twenty gradient starts above.
    pub fn default_for(n: usize) -> Self {
        if n <= 3 {
            Optimizer::Grid { resolution: 200 }
        } else {
            Optimizer::MultistartGradient { starts: 20 }
        }
    }
}

/// Enumerates the simplex grid of the given resolution for n ranks.
pub fn simplex_grid(n: usize, resolution: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let r = resolution;
    match n {
        1 => out.push(vec![1.0]),
        2 => {
            for i in 0..=r {
                let a = i as f64 / r as f64;
                out.push(vec![a, 1.0 - a]);
            }
        }
        3 => {
            for i in 0..=r {
                for j in 0..=(r - i) {
                    let a = i as f64 / r as f64;
                    let b = j as f64 / r as f64;
                    out.push(vec![a, b, 1.0 - a - b]);
                }
            }
        }
        _ => {
            // coarse corner/center seeding for higher dimensions
            for k in 0..n {
                let mut v = vec![0.0; n];
                v[k] = 1.0;
                out.push(v);
            }
            out.push(vec![1.0 / n as f64; n]);
        }
    }
    out
}

/// Best retrospectively chosen rank weights over the full horizon.
pub fn best_retrospective(
    rv: &RankView,
    inc: &IncrementSeries,
    n: usize,
    optimizer: Optimizer,
) -> Result<(SimplexPoint, f64)> {
    let rr = rank_returns(rv, inc, n);
    let steps = inc.steps();
    let n_assets = rv.n_assets();

    fn consider(best: &mut Option<(Vec<f64>, f64)>, xi: Vec<f64>, f: f64) {
        if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
            *best = Some((xi, f));
        }
    }
    let mut best: Option<(Vec<f64>, f64)> = None;

    match optimizer {
        Optimizer::Grid { resolution } => {
            if resolution == 0 {
                return Err(Error::invalid("grid resolution must be >= 1"));
            }
            for xi in simplex_grid(n, resolution) {
                let (f, _) = log_wealth_and_grad(&xi, &rr, steps);
                consider(&mut best, xi, f);
            }
            let (seed, _) = best.clone().unwrap();
            let polished = polish(&seed, &rr, steps, 200);
            let (f, _) = log_wealth_and_grad(&polished, &rr, steps);
            consider(&mut best, polished, f);
        }
        Optimizer::MultistartGradient { starts } => {
            if starts == 0 {
                return Err(Error::invalid("need at least one start"));
            }
            let mut rng = ChaCha12Rng::seed_from_u64(0x005E_ED0F_u64);
            let mut starts_v = vec![vec![1.0 / n as f64; n]];
            for _ in 1..starts {
                starts_v.push(crate::fgp::sample_simplex(n, &mut rng));
            }
            for s in starts_v {
                let polished = polish(&s, &rr, steps, 300);
                let (f, _) = log_wealth_and_grad(&polished, &rr, steps);
                consider(&mut best, polished, f);
            }
        }
    }

    let (xi, logw) = best.unwrap();
    // clean projection dust so the point passes the simplex invariants
    let sum: f64 = xi.iter().sum();
    let xi: Vec<f64> = xi.iter().map(|v| v / sum).collect();
    Ok((SimplexPoint::new(xi, n_assets)?, logw.exp()))
}

/// The universal portfolio and its wealth, computed two ways.
#[derive(Debug)]
pub struct UniversalWealth {
    /// Wealth of the performance-weighted average weight path.
    pub from_weights: WealthPath,
    /// Plain average of the sampled constant-rebalanced wealths.
    pub averaged: WealthPath,
    /// The averaged weight path itself (per asset).
    pub pi_hat: WeightPath,
    /// Largest pointwise relative difference between the two routes.
    pub identity_gap: f64,
    pub samples: usize,
}

/// Samples rank-weight vectors uniformly from the simplex on n ranks and
/// forms the universal portfolio: weights are the wealth-weighted average of
/// the samples, and the resulting wealth should match the plain average of
/// the sampled wealths.
pub fn universal_wealth(
    rv: &RankView,
    inc: &IncrementSeries,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<UniversalWealth> {
    if samples < 100 {
        return Err(Error::EnsembleTooSmall {
            got: samples,
            need: 100,
        });
    }
    let steps = inc.steps();
    let n_assets = rv.n_assets();
    let rr = rank_returns(rv, inc, n);

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let xis: Vec<Vec<f64>> = (0..samples)
        .map(|_| {
            if n == 1 {
                vec![1.0]
            } else {
                crate::fgp::sample_simplex(n, &mut rng)
            }
        })
        .collect();

    let mut x = vec![1.0f64; samples];
    let mut averaged = Vec::with_capacity(steps + 1);
    averaged.push(1.0);
    let mut pi_hat = vec![vec![0.0; steps]; n_assets];
    for m in 0..steps {
        // wealth-weighted average of the sampled weights, left endpoint
        let total: f64 = x.iter().sum();
        for r in 0..n {
            let mut num = 0.0;
            for (s, xi) in xis.iter().enumerate() {
                num += xi[r] * x[s];
            }
            pi_hat[rv.p[r][m]][m] = num / total;
        }
        for (s, xi) in xis.iter().enumerate() {
            let mut r = 0.0;
            for k in 0..n {
                r += xi[k] * rr[k][m];
            }
            if r <= -1.0 {
                return Err(Error::BlowThrough { step: m, ret: r });
            }
            x[s] *= 1.0 + r;
        }
        averaged.push(x.iter().sum::<f64>() / samples as f64);
    }

    let pi_hat = WeightPath::new(pi_hat);
    let from_weights = wealth(&pi_hat, inc)?;
    let identity_gap = from_weights
        .x
        .iter()
        .zip(&averaged)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0f64, f64::max);

    Ok(UniversalWealth {
        from_weights,
        averaged: WealthPath { x: averaged },
        pi_hat,
        identity_gap,
        samples,
    })
}

/// Ensemble study of the per-horizon growth gap between the best
/// retrospectively chosen weights and the universal portfolio.
#[derive(Debug, Clone)]
pub struct UniversalReport {
    pub horizons: Vec<f64>,
    pub gap_mean: Vec<f64>,
    pub gap_se: Vec<f64>,
    /// Standard errors of the paired consecutive differences
    /// `gap(T_{j+1}) - gap(T_j)`.
    pub diff_se: Vec<f64>,
    pub xstar_mean: Vec<f64>,
    pub xhat_mean: Vec<f64>,
    pub samples: usize,
    pub n_paths: usize,
    /// Smallest n-th ranked market weight seen across the ensemble.
    pub mu_n_min: f64,
    /// Whether the empirical floor stayed above the configured delta.
    pub hypothesis_met: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GapConfig {
    pub samples: usize,
    pub grid_resolution: usize,
    /// Floor for the n-th ranked market weight; falling below downgrades the
    /// verdict to hypothesis-unmet rather than failing.
    pub delta: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            samples: 1000,
            grid_resolution: 200,
            delta: 1e-4,
        }
    }
}

pub fn asymptotic_gap(
    spec: &ModelSpec,
    grid: &TimeGrid,
    n: usize,
    horizons: &[f64],
    n_paths: usize,
    seed: u64,
    config: &GapConfig,
) -> Result<UniversalReport> {
    if horizons.is_empty() {
        return Err(Error::invalid("need at least one horizon"));
    }
    let times = grid.times();
    let mut horizon_idx = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let k = times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - h).abs().partial_cmp(&(b.1 - h).abs()).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        if (times[k] - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::invalid(format!(
                "horizon {h} does not lie on the grid"
            )));
        }
        if k == 0 {
            return Err(Error::invalid("horizons must be positive"));
        }
        horizon_idx.push(k);
    }

    struct PathOutcome {
        gaps: Vec<f64>,
        xstar: Vec<f64>,
        xhat: Vec<f64>,
        mu_n_min: f64,
    }

    let outcomes: Result<Vec<PathOutcome>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let path = simulate_stream(spec, grid, seed, p as u64)?;
            let (rv, tv) = rank_path(&path, n)?;
            let inc = increments(&path);
            let rr = rank_returns(&rv, &inc, n);
            let mu_n_min = (0..path.len())
                .map(|k| tv.mu_ranked[n - 1][k])
                .fold(f64::INFINITY, f64::min);

            // candidate set: simplex grid plus this path's Dirichlet samples
            let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9));
            rng.set_stream(p as u64);
            let samples: Vec<Vec<f64>> = (0..config.samples)
                .map(|_| {
                    if n == 1 {
                        vec![1.0]
                    } else {
                        crate::fgp::sample_simplex(n, &mut rng)
                    }
                })
                .collect();
            let mut candidates = simplex_grid(n, config.grid_resolution);
            let sample_start = candidates.len();
            candidates.extend(samples.iter().cloned());

            // evolve every candidate once, recording log-wealth at horizons
            let steps = inc.steps();
            let mut logw = vec![0.0f64; candidates.len()];
            let mut at_horizon = vec![vec![0.0f64; candidates.len()]; horizon_idx.len()];
            let mut sample_wealth_sum = vec![0.0f64; horizon_idx.len()];
            let mut next_h = 0;
            for m in 0..steps {
                for (c, xi) in candidates.iter().enumerate() {
                    let mut r = 0.0;
                    for k in 0..n {
                        r += xi[k] * rr[k][m];
                    }
                    if r <= -1.0 {
                        return Err(Error::BlowThrough { step: m, ret: r });
                    }
                    logw[c] += (1.0 + r).ln();
                }
                while next_h < horizon_idx.len() && horizon_idx[next_h] == m + 1 {
                    at_horizon[next_h].copy_from_slice(&logw);
                    sample_wealth_sum[next_h] = candidates[sample_start..]
                        .iter()
                        .enumerate()
                        .map(|(s, _)| at_horizon[next_h][sample_start + s].exp())
                        .sum();
                    next_h += 1;
                }
            }

            let mut gaps = Vec::with_capacity(horizon_idx.len());
            let mut xstar_v = Vec::with_capacity(horizon_idx.len());
            let mut xhat_v = Vec::with_capacity(horizon_idx.len());
            for (j, &k) in horizon_idx.iter().enumerate() {
                let t = times[k];
                let best_c = at_horizon[j]
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(c, _)| c)
                    .unwrap();
                let polished = polish(&candidates[best_c], &rr, k, 120);
                let (fpol, _) = log_wealth_and_grad(&polished, &rr, k);
                let log_xstar = fpol.max(at_horizon[j][best_c]);
                let xhat = sample_wealth_sum[j] / config.samples as f64;
                let gap = (log_xstar - xhat.ln()) / t;
                gaps.push(gap);
                xstar_v.push(log_xstar.exp());
                xhat_v.push(xhat);
            }
            Ok(PathOutcome {
                gaps,
                xstar: xstar_v,
                xhat: xhat_v,
                mu_n_min,
            })
        })
        .collect();
    let outcomes = outcomes?;

    let nh = horizons.len();
    let nf = n_paths as f64;
    let mut gap_mean = vec![0.0; nh];
    let mut gap_se = vec![0.0; nh];
    let mut diff_se = vec![0.0; nh.saturating_sub(1)];
    let mut xstar_mean = vec![0.0; nh];
    let mut xhat_mean = vec![0.0; nh];
    for j in 0..nh {
        let xs: Vec<f64> = outcomes.iter().map(|o| o.gaps[j]).collect();
        let mean = xs.iter().sum::<f64>() / nf;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
        gap_mean[j] = mean;
        gap_se[j] = (var / nf).sqrt();
        xstar_mean[j] = outcomes.iter().map(|o| o.xstar[j]).sum::<f64>() / nf;
        xhat_mean[j] = outcomes.iter().map(|o| o.xhat[j]).sum::<f64>() / nf;
    }
    for j in 0..nh.saturating_sub(1) {
        let ds: Vec<f64> = outcomes.iter().map(|o| o.gaps[j + 1] - o.gaps[j]).collect();
        let mean = ds.iter().sum::<f64>() / nf;
        let var = ds.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
        diff_se[j] = (var / nf).sqrt();
    }
    let mu_n_min = outcomes
        .iter()
        .map(|o| o.mu_n_min)
        .fold(f64::INFINITY, f64::min);

    Ok(UniversalReport {
        horizons: horizons.to_vec(),
        gap_mean,
        gap_se,
        diff_se,
        xstar_mean,
        xhat_mean,
        samples: config.samples,
        n_paths,
        mu_n_min,
        hypothesis_met: mu_n_min >= config.delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::market::MarketPath;
    use crate::model::VolSpec;
    use approx::assert_relative_eq;

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![0.6, 0.4], 4).is_ok());
        assert!(SimplexPoint::new(vec![0.6, 0.5], 4).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1], 4).is_err());
        assert!(SimplexPoint::new(vec![0.2; 5], 4).is_err());
        let p = SimplexPoint::new(vec![1.0], 3).unwrap();
        assert_eq!(p.full(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn simplex_sampling_is_feasible_and_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 3;
        let samples = 20_000;
        let mut mean = vec![0.0; n];
        for _ in 0..samples {
            let x = crate::fgp::sample_simplex(n, &mut rng);
            let sum: f64 = x.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
            assert!(x.iter().all(|&v| v >= 0.0));
            for k in 0..n {
                mean[k] += x[k];
            }
        }
        // each coordinate has mean 1/n and variance (n-1)/(n^2 (n+1))
        let se = ((n as f64 - 1.0) / (n as f64 * n as f64 * (n as f64 + 1.0)) / samples as f64)
            .sqrt();
        for k in 0..n {
            let m = mean[k] / samples as f64;
            assert!(
                (m - 1.0 / n as f64).abs() <= 3.0 * se,
                "coordinate {k} mean {m}"
            );
        }
    }

    /// Deterministic 2-asset market with constant ranks and distinct
    /// per-step returns.
    fn deterministic_market(steps: usize, r1: f64, r2: f64) -> MarketPath {
        let grid = TimeGrid::uniform(steps as f64, steps).unwrap();
        let mut p1 = vec![100.0];
        let mut p2 = vec![10.0];
        for _ in 0..steps {
            p1.push(p1.last().unwrap() * (1.0 + r1));
            p2.push(p2.last().unwrap() * (1.0 + r2));
        }
        MarketPath::new(grid, vec![p1, p2]).unwrap()
    }

    #[test]
    fn cr_wealth_follows_the_leader_for_unit_weight() {
        let path = deterministic_market(10, 0.01, 0.02);
        let (rv, _) = rank_path(&path, 1).unwrap();
        let inc = increments(&path);
        let xi = SimplexPoint::new(vec![1.0], 2).unwrap();
        let x = cr_wealth(&xi, &rv, &inc).unwrap();
        // asset 0 stays the leader: X tracks its normalized price
        for k in 0..path.len() {
            assert_relative_eq!(x.x[k], path.prices[0][k] / path.prices[0][0], max_relative = 1e-12);
        }
    }

    #[test]
    fn cr_wealth_zero_vol_constant_rank_products() {
        let (r1, r2) = (0.003, -0.001);
        let path = deterministic_market(50, r1, r2);
        let (rv, _) = rank_path(&path, 1).unwrap();
        let inc = increments(&path);
        // n = 1 on a 2-asset market: the single rank weight is 1
        let xi = SimplexPoint::new(vec![1.0], 2).unwrap();
        let x = cr_wealth(&xi, &rv, &inc).unwrap();
        assert_relative_eq!(x.terminal(), (1.0 + r1).powi(50), max_relative = 1e-12);
    }

    #[test]
    fn cr_wealth_matches_fgp_generated_route() {
        // two independent code paths: direct rank returns vs the generated
        // weight path through the portfolio engine
        let spec = ModelSpec::Gbm {
            initial_prices: vec![100.0, 90.0, 80.0, 70.0],
            drift: vec![0.02, 0.0, 0.01, 0.0],
            vol: VolSpec::Diagonal(vec![0.3, 0.25, 0.35, 0.2]),
        };
        let grid = TimeGrid::uniform(1.0, 2000).unwrap();
        let path = simulate_stream(&spec, &grid, 41, 0).unwrap();
        let (rv, tv) = rank_path(&path, 2).unwrap();
        let inc = increments(&path);
        let xi = SimplexPoint::new(vec![0.65, 0.35], 4).unwrap();
        let direct = cr_wealth(&xi, &rv, &inc).unwrap();
        let g = crate::fgp::Geometric::constant_rebalanced(xi.active()).unwrap();
        let w = crate::fgp::generate_ranked(&g, &tv, &rv).unwrap();
        let via_fgp = wealth(&w, &inc).unwrap();
        for k in 0..path.len() {
            assert_relative_eq!(direct.x[k], via_fgp.x[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn best_retrospective_picks_dominating_rank() {
        // rank-1 return dominates every step, so all weight goes there
        let path = deterministic_market(40, 0.004, 0.001);
        let (rv, _) = rank_path(&path, 1).unwrap();
        let inc = increments(&path);
        let (xi, xstar) = best_retrospective(&rv, &inc, 1, Optimizer::default_for(1)).unwrap();
        assert_eq!(xi.active(), &[1.0]);
        assert_relative_eq!(xstar, 1.004f64.powi(40), max_relative = 1e-10);
    }

    #[test]
    fn grid_optimum_matches_fine_grid_oracle() {
        let spec = ModelSpec::Gbm {
            initial_prices: vec![100.0, 95.0, 90.0],
            drift: vec![0.1, -0.05, 0.02],
            vol: VolSpec::Diagonal(vec![0.3, 0.35, 0.25]),
        };
        let grid = TimeGrid::uniform(1.0, 500).unwrap();
        let path = simulate_stream(&spec, &grid, 43, 0).unwrap();
        let (rv, _) = rank_path(&path, 2).unwrap();
        let inc = increments(&path);
        let (xi, xstar) =
            best_retrospective(&rv, &inc, 2, Optimizer::Grid { resolution: 200 }).unwrap();
        // fine-grid oracle at resolution 1/2000
        let rr = rank_returns(&rv, &inc, 2);
        let mut best = f64::NEG_INFINITY;
        let mut best_xi = vec![0.0; 2];
        for i in 0..=2000 {
            let a = i as f64 / 2000.0;
            let cand = vec![a, 1.0 - a];
            let (f, _) = log_wealth_and_grad(&cand, &rr, inc.steps());
            if f > best {
                best = f;
                best_xi = cand;
            }
        }
        assert!(
            (xi.active()[0] - best_xi[0]).abs() <= 1.0 / 200.0,
            "argmax {} vs oracle {}",
            xi.active()[0],
            best_xi[0]
        );
        assert!(xstar >= best.exp() * (1.0 - 1e-10));
    }

    #[test]
    fn best_retrospective_dominates_candidates() {
        let spec = ModelSpec::Gbm {
            initial_prices: vec![100.0, 95.0, 90.0],
            drift: vec![0.0, 0.05, -0.02],
            vol: VolSpec::Diagonal(vec![0.25, 0.3, 0.2]),
        };
        let grid = TimeGrid::uniform(1.0, 300).unwrap();
        let path = simulate_stream(&spec, &grid, 47, 0).unwrap();
        let (rv, _) = rank_path(&path, 2).unwrap();
        let inc = increments(&path);
        let (_, xstar) = best_retrospective(&rv, &inc, 2, Optimizer::default_for(2)).unwrap();
        // the rank-average of the top-n market weights is one feasible
        // candidate among many
        for cand in [vec![0.5, 0.5], vec![0.9, 0.1], vec![0.0, 1.0]] {
            let xi = SimplexPoint::new(cand, 3).unwrap();
            let x = cr_wealth(&xi, &rv, &inc).unwrap();
            assert!(xstar >= x.terminal() - 1e-12);
        }
    }

    #[test]
    fn multistart_gradient_handles_larger_n() {
        let spec = ModelSpec::Gbm {
            initial_prices: vec![100.0, 96.0, 92.0, 88.0, 84.0],
            drift: vec![0.08, 0.02, -0.03, 0.05, 0.0],
            vol: VolSpec::Diagonal(vec![0.3, 0.25, 0.35, 0.28, 0.22]),
        };
        let grid = TimeGrid::uniform(1.0, 400).unwrap();
        let path = simulate_stream(&spec, &grid, 53, 0).unwrap();
        let (rv, _) = rank_path(&path, 4).unwrap();
        let inc = increments(&path);
        let (xi, xstar) =
            best_retrospective(&rv, &inc, 4, Optimizer::MultistartGradient { starts: 20 })
                .unwrap();
        assert_eq!(xi.n_active(), 4);
        // sanity: the optimum beats the uniform candidate
        let uniform = SimplexPoint::new(vec![0.25; 4], 5).unwrap();
        let xu = cr_wealth(&uniform, &rv, &inc).unwrap();
        assert!(xstar >= xu.terminal() - 1e-12);
    }

    #[test]
    fn universal_identity_two_routes_agree() {
        let spec = ModelSpec::Gbm {
            initial_prices: vec![100.0, 95.0, 90.0, 85.0],
            drift: vec![0.03, 0.0, 0.02, -0.01],
            vol: VolSpec::Diagonal(vec![0.3, 0.25, 0.2, 0.35]),
        };
        let grid = TimeGrid::uniform(1.0, 1000).unwrap();
        let path = simulate_stream(&spec, &grid, 59, 0).unwrap();
        let (rv, _) = rank_path(&path, 2).unwrap();
        let inc = increments(&path);
        let u = universal_wealth(&rv, &inc, 2, 300, 61).unwrap();
        assert!(
            u.identity_gap <= 5e-3,
            "identity gap {} too large",
            u.identity_gap
        );
        assert!(u.pi_hat.is_top_n(&rv));
        assert!(u.pi_hat.is_stock(1e-9));
    }

    #[test]
    fn universal_rejects_small_sample_counts() {
        let path = deterministic_market(10, 0.01, 0.0);
        let (rv, _) = rank_path(&path, 1).unwrap();
        let inc = increments(&path);
        assert!(matches!(
            universal_wealth(&rv, &inc, 1, 50, 1),
            Err(Error::EnsembleTooSmall { .. })
        ));
    }

    #[test]
    fn universal_degenerate_single_rank_is_exact() {
        let path = deterministic_market(30, 0.002, 0.005);
        let (rv, _) = rank_path(&path, 1).unwrap();
        let inc = increments(&path);
        let u = universal_wealth(&rv, &inc, 1, 200, 1).unwrap();
        let xi = SimplexPoint::new(vec![1.0], 2).unwrap();
        let direct = cr_wealth(&xi, &rv, &inc).unwrap();
        for k in 0..direct.x.len() {
            assert_relative_eq!(u.averaged.x[k], direct.x[k], max_relative = 1e-12);
            assert_relative_eq!(u.from_weights.x[k], direct.x[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn universal_quadrature_oracle_zero_vol() {
        // constant ranks, zero vol: X_hat(T) is a 1-d integral over the
        // weight on rank 1, evaluated by Simpson quadrature
        let (r1, r2) = (0.002, -0.0015);
        let steps = 60;
        let path = deterministic_market(steps, r1, r2);
        let (rv, _) = rank_path(&path, 1).unwrap();
        let _ = rv;
        // need n = 2 on a 3-asset market so the simplex is 1-dimensional
        let grid = TimeGrid::uniform(steps as f64, steps).unwrap();
        let mut p3 = vec![1.0];
        for _ in 0..steps {
            p3.push(*p3.last().unwrap() * (1.0 + 0.0005));
        }
        let path = MarketPath::new(
            grid,
            vec![
                path.prices[0].clone(),
                path.prices[1].clone(),
                p3,
            ],
        )
        .unwrap();
        let (rv, _) = rank_path(&path, 2).unwrap();
        let inc = increments(&path);
        let u = universal_wealth(&rv, &inc, 2, 40_000, 7).unwrap();
        // Simpson quadrature of prod_m (1 + a r1 + (1-a) r2) over a in [0,1]
        let m = 2000;
        let f = |a: f64| (1.0 + a * r1 + (1.0 - a) * r2).powi(steps as i32);
        let mut quad = f(0.0) + f(1.0);
        for i in 1..m {
            let a = i as f64 / m as f64;
            quad += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a);
        }
        quad /= 3.0 * m as f64;
        assert!(
            (u.averaged.terminal() - quad).abs() / quad <= 1e-3,
            "universal {} vs quadrature {}",
            u.averaged.terminal(),
            quad
        );
    }

    #[test]
    fn deterministic_gap_is_exact_identity_and_decreasing() {
        // constant-rank zero-vol market: the gap equals log(Xstar/Xhat)/T
        // computed independently, and with equal rank returns it vanishes
        let steps = 64;
        let grid = TimeGrid::uniform(16.0, steps).unwrap();
        let dt_growth = 0.01;
        let mut p1 = vec![100.0];
        let mut p2 = vec![10.0];
        for _ in 0..steps {
            p1.push(p1.last().unwrap() * (1.0 + dt_growth));
            p2.push(p2.last().unwrap() * (1.0 + dt_growth));
        }
        let spec_path = MarketPath::new(grid.clone(), vec![p1, p2]).unwrap();
        let (rv, _) = rank_path(&spec_path, 1).unwrap();
        let inc = increments(&spec_path);
        let u = universal_wealth(&rv, &inc, 1, 200, 3).unwrap();
        let (_, xstar) = best_retrospective(&rv, &inc, 1, Optimizer::default_for(1)).unwrap();
        // with n = 1 the simplex is a single point: gap is exactly zero
        assert_relative_eq!(u.averaged.terminal(), xstar, max_relative = 1e-12);
    }

    #[test]
    fn ensemble_gap_decreases_with_horizon() {
        let spec = ModelSpec::Atlas {
            initial_prices: vec![100.0, 90.0, 80.0, 70.0],
            rank_drift: vec![0.0, 0.0, 0.1, 0.3],
            rank_vol: vec![0.25, 0.25, 0.25, 0.25],
        };
        let grid = TimeGrid::uniform(8.0, 800).unwrap();
        let config = GapConfig {
            samples: 200,
            grid_resolution: 100,
            delta: 1e-6,
        };
        let rep = asymptotic_gap(&spec, &grid, 2, &[1.0, 4.0, 8.0], 60, 67, &config).unwrap();
        // sup property: the gap can only be nonnegative up to MC noise
        for j in 0..rep.horizons.len() {
            assert!(rep.gap_mean[j] >= -3.0 * rep.gap_se[j]);
        }
        assert!(
            rep.gap_mean[2] < rep.gap_mean[0],
            "gap should shrink: {:?}",
            rep.gap_mean
        );
    }
}
