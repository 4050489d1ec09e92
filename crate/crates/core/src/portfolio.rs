//! Weight trajectories and the wealth they generate.
//!
//! Wealth follows a multiplicative recursion on simple returns:
//! `X[k+1] = X[k] (1 + sum_i pi_i[k] dR_i[k])`. This keeps the self-financing
//! telescoping exact for single assets and for capitalization weights, at the
//! cost of a hard failure when a leveraged portfolio loses its entire wealth
//! in one step.

use rayon::prelude::*;

use crate::characteristics::LocalCharacteristics;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::local_time::{collision_local_times, CollisionLevel, LocalTimeEstimate};
use crate::market::{increments, simulate_stream, IncrementSeries, MarketPath};
use crate::model::ModelSpec;
use crate::ranks::{censored_increments, rank_path, RankView, TopNView};

/// Per-step portfolio weights, asset-major: `w[i][m]` is the fraction of
/// wealth in asset `i` over step `m` (chosen at the step's left endpoint).
/// The cash weight is `1 - sum_i w[i][m]`.
#[derive(Debug, Clone)]
pub struct WeightPath {
    pub w: Vec<Vec<f64>>,
}

impl WeightPath {
    pub fn new(w: Vec<Vec<f64>>) -> Self {
        WeightPath { w }
    }

    pub fn n_assets(&self) -> usize {
        self.w.len()
    }

    pub fn steps(&self) -> usize {
        self.w[0].len()
    }

    pub fn cash_weight(&self, m: usize) -> f64 {
        1.0 - self.w.iter().map(|row| row[m]).sum::<f64>()
    }

    /// True iff the weights sum to one at every step (a stock portfolio).
    pub fn is_stock(&self, tol: f64) -> bool {
        (0..self.steps()).all(|m| self.cash_weight(m).abs() <= tol)
    }

    /// True iff the weights vanish off the top-n mask at every step.
    pub fn is_top_n(&self, rv: &RankView) -> bool {
        (0..self.steps()).all(|m| {
            (0..self.n_assets()).all(|i| rv.mask[i][m] || self.w[i][m] == 0.0)
        })
    }

    /// All cash.
    pub fn zero(n_assets: usize, steps: usize) -> Self {
        WeightPath::new(vec![vec![0.0; steps]; n_assets])
    }

    /// Everything in one asset at all times.
    pub fn single_asset(i: usize, n_assets: usize, steps: usize) -> Self {
        let mut w = vec![vec![0.0; steps]; n_assets];
        w[i] = vec![1.0; steps];
        WeightPath::new(w)
    }

    /// Market portfolio: capitalization weights of the whole market.
    pub fn market(tv: &TopNView) -> Self {
        let steps = tv.mu[0].len() - 1;
        WeightPath::new(
            tv.mu
                .iter()
                .map(|row| row[..steps].to_vec())
                .collect(),
        )
    }

    /// Top-n market portfolio: capitalization weights over the current top n.
    pub fn top_n_market(tv: &TopNView) -> Self {
        let steps = tv.mu_tilde[0].len() - 1;
        WeightPath::new(
            tv.mu_tilde
                .iter()
                .map(|row| row[..steps].to_vec())
                .collect(),
        )
    }

    /// Fixed weights per rank, assigned to asset names through the
    /// left-endpoint rank map.
    pub fn from_rank_weights(xi: &[f64], rv: &RankView) -> Self {
        let n_assets = rv.n_assets();
        let steps = rv.len() - 1;
        let mut w = vec![vec![0.0; steps]; n_assets];
        for m in 0..steps {
            for (r, &x) in xi.iter().enumerate() {
                if x != 0.0 {
                    w[rv.p[r][m]][m] = x;
                }
            }
        }
        WeightPath::new(w)
    }
}

/// Wealth path normalized to `X[0] = 1`.
#[derive(Debug, Clone)]
pub struct WealthPath {
    pub x: Vec<f64>,
}

impl WealthPath {
    pub fn terminal(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn log_terminal(&self) -> f64 {
        self.terminal().ln()
    }
}

/// Multiplicative wealth of a weight path over given increments.
pub fn wealth(w: &WeightPath, inc: &IncrementSeries) -> Result<WealthPath> {
    let n = inc.n_assets();
    let steps = inc.steps();
    if w.n_assets() != n || w.steps() != steps {
        return Err(Error::invalid(format!(
            "weights {}x{} vs increments {}x{}",
            w.n_assets(),
            w.steps(),
            n,
            steps
        )));
    }
    let mut x = Vec::with_capacity(steps + 1);
    x.push(1.0);
    let mut cur = 1.0;
    for m in 0..steps {
        let mut r = 0.0;
        for i in 0..n {
            let wi = w.w[i][m];
            if wi != 0.0 {
                r += wi * inc.dr[i][m];
            }
        }
        if r <= -1.0 {
            return Err(Error::BlowThrough { step: m, ret: r });
        }
        cur *= 1.0 + r;
        if !cur.is_finite() {
            return Err(Error::NonFinite { step: m, asset: 0 });
        }
        x.push(cur);
    }
    Ok(WealthPath { x })
}

/// Pointwise ratio of two wealth paths on the same grid.
pub fn relative_wealth(num: &WealthPath, den: &WealthPath) -> Result<Vec<f64>> {
    if num.x.len() != den.x.len() {
        return Err(Error::invalid("wealth paths live on different grids"));
    }
    Ok(num.x.iter().zip(&den.x).map(|(a, b)| a / b).collect())
}

/// Rate-level growth decomposition of a weight path against market
/// characteristics.
#[derive(Debug, Clone)]
pub struct GrowthDecomposition {
    /// Rate of return `pi' alpha` per step.
    pub alpha_pi: Vec<f64>,
    /// Growth rate `pi' alpha - pi' c pi / 2` per step.
    pub gamma_pi: Vec<f64>,
    /// Clock integral of `alpha_pi` (one value per grid point).
    pub a_pi: Vec<f64>,
    /// Clock integral of `gamma_pi`: the cumulative growth.
    pub big_gamma_pi: Vec<f64>,
    /// Clock integral of the covariation rate `pi' c pi`.
    pub c_pipi: Vec<f64>,
}

/// Realized martingale part of the cumulative portfolio return: the return
/// increments minus the predicted drift increments, accumulated.
pub fn martingale_part(
    w: &WeightPath,
    inc: &IncrementSeries,
    chars: &LocalCharacteristics,
) -> Result<Vec<f64>> {
    let d = growth_decomposition(w, chars)?;
    if inc.steps() != w.steps() || inc.n_assets() != w.n_assets() {
        return Err(Error::invalid("weights and increments shapes disagree"));
    }
    let mut m_pi = vec![0.0];
    for m in 0..w.steps() {
        let r: f64 = (0..w.n_assets()).map(|i| w.w[i][m] * inc.dr[i][m]).sum();
        let drift = d.alpha_pi[m] * chars.d_o[m];
        m_pi.push(m_pi.last().unwrap() + r - drift);
    }
    Ok(m_pi)
}

pub fn growth_decomposition(
    w: &WeightPath,
    chars: &LocalCharacteristics,
) -> Result<GrowthDecomposition> {
    let n = chars.n_assets;
    let steps = chars.steps();
    if w.n_assets() != n || w.steps() != steps {
        return Err(Error::invalid("weights and characteristics shapes disagree"));
    }
    let mut alpha_pi = Vec::with_capacity(steps);
    let mut gamma_pi = Vec::with_capacity(steps);
    let mut a_pi = vec![0.0];
    let mut big_gamma = vec![0.0];
    let mut c_pipi = vec![0.0];
    for m in 0..steps {
        let a = chars.alpha.at(m);
        let c = chars.cov.at(m);
        let mut ap = 0.0;
        let mut quad = 0.0;
        for i in 0..n {
            let wi = w.w[i][m];
            if wi == 0.0 {
                continue;
            }
            ap += wi * a[i];
            for j in 0..n {
                let wj = w.w[j][m];
                if wj != 0.0 {
                    quad += wi * c[(i, j)] * wj;
                }
            }
        }
        let g = ap - 0.5 * quad;
        alpha_pi.push(ap);
        gamma_pi.push(g);
        let d_o = chars.d_o[m];
        a_pi.push(a_pi.last().unwrap() + ap * d_o);
        big_gamma.push(big_gamma.last().unwrap() + g * d_o);
        c_pipi.push(c_pipi.last().unwrap() + quad * d_o);
    }
    Ok(GrowthDecomposition {
        alpha_pi,
        gamma_pi,
        a_pi,
        big_gamma_pi: big_gamma,
        c_pipi,
    })
}

/// Everything a per-path portfolio rule can look at.
pub struct PathContext<'a> {
    pub path: &'a MarketPath,
    pub rv: &'a RankView,
    pub tv: &'a TopNView,
    pub inc: &'a IncrementSeries,
    pub censored: &'a IncrementSeries,
}

pub type PortfolioRule<'r> = dyn Fn(&PathContext) -> Result<WeightPath> + Sync + 'r;

#[derive(Debug, Clone)]
pub struct SupermartingaleRow {
    pub id: String,
    pub mean: f64,
    pub se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct SupermartingaleReport {
    pub rows: Vec<SupermartingaleRow>,
    pub n_paths: usize,
}

impl SupermartingaleReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Monte Carlo supermartingale check: for each test rule, estimates the mean
/// of the terminal wealth ratio `X_pi(T) / X_rho(T)` over an ensemble and
/// passes iff the estimate is at most `1 + 3 SE`.
pub fn supermartingale_test(
    spec: &ModelSpec,
    grid: &TimeGrid,
    n: usize,
    seed: u64,
    n_paths: usize,
    rho_rule: &PortfolioRule,
    tests: &[(String, Box<PortfolioRule>)],
) -> Result<SupermartingaleReport> {
    if n_paths < 100 {
        return Err(Error::EnsembleTooSmall {
            got: n_paths,
            need: 100,
        });
    }
    let ratios: Result<Vec<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let path = simulate_stream(spec, grid, seed, j as u64)?;
            let (rv, tv) = rank_path(&path, n)?;
            let inc = increments(&path);
            let censored = censored_increments(&inc, &rv)?;
            let ctx = PathContext {
                path: &path,
                rv: &rv,
                tv: &tv,
                inc: &inc,
                censored: &censored,
            };
            let rho = rho_rule(&ctx)?;
            let x_rho = wealth(&rho, &inc)?;
            let mut row = Vec::with_capacity(tests.len());
            for (_, rule) in tests {
                let pi = rule(&ctx)?;
                let x_pi = wealth(&pi, &inc)?;
                row.push(x_pi.terminal() / x_rho.terminal());
            }
            Ok(row)
        })
        .collect();
    let ratios = ratios?;

    let rows = tests
        .iter()
        .enumerate()
        .map(|(t, (id, _))| {
            let xs: Vec<f64> = ratios.iter().map(|row| row[t]).collect();
            let nf = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / nf;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
            let se = (var / nf).sqrt();
            SupermartingaleRow {
                id: id.clone(),
                mean,
                se,
                pass: mean <= 1.0 + 3.0 * se,
            }
        })
        .collect();

    Ok(SupermartingaleReport {
        rows,
        n_paths,
    })
}

/// Wealth of the top-n market portfolio computed two ways: directly from the
/// weights, and through the leakage representation
/// `Sigma_tilde(t) / Sigma_tilde(0) * exp(-1/2 int dL / Sigma_tilde)` where
/// `L` is the collision local time at the rank-n boundary.
#[derive(Debug, Clone)]
pub struct LeakageReport {
    pub direct: WealthPath,
    pub via_leakage: WealthPath,
    /// Relative gap of the terminal values.
    pub rel_gap: f64,
    pub boundary_local_time: LocalTimeEstimate,
}

pub fn tilde_mu_wealth(path: &MarketPath, rv: &RankView, tv: &TopNView) -> Result<LeakageReport> {
    let inc = increments(path);
    let direct = wealth(&WeightPath::top_n_market(tv), &inc)?;

    let collisions = collision_local_times(rv, tv, CollisionLevel::Price);
    let boundary = collisions.adjacent[rv.n - 1].clone();
    let dl = boundary.increments();
    let steps = path.grid.steps();
    let mut x = Vec::with_capacity(steps + 1);
    x.push(1.0);
    let mut leak = 0.0;
    for m in 0..steps {
        // left-endpoint integrand against the local-time increment
        leak += dl[m] / tv.sigma_tilde[m];
        x.push(tv.sigma_tilde[m + 1] / tv.sigma_tilde[0] * (-0.5 * leak).exp());
    }
    let via_leakage = WealthPath { x };
    let rel_gap = (direct.terminal() - via_leakage.terminal()).abs() / direct.terminal();
    Ok(LeakageReport {
        direct,
        via_leakage,
        rel_gap,
        boundary_local_time: boundary,
    })
}
