//! Ranking machinery: per-step rank maps, ranked prices, the censoring mask
//! selecting the top-n assets, and the capitalization weights built on it.
//!
//! Ranks are 0-based in code (rank 0 is the largest price). Ties are broken
//! by index: on equal prices the smaller asset index gets the better rank.

use crate::error::{Error, Result};
use crate::market::{IncrementSeries, MarketPath};

/// Rank structure of a path.
#[derive(Debug, Clone)]
pub struct RankView {
    /// `u[i][k]`: rank of asset `i` at grid point `k` (0-based).
    pub u: Vec<Vec<usize>>,
    /// `p[r][k]`: asset occupying rank `r` at grid point `k`.
    pub p: Vec<Vec<usize>>,
    /// `ranked[r][k]`: the rank-r price at grid point `k` (nonincreasing in r).
    pub ranked: Vec<Vec<f64>>,
    /// `mask[i][k]`: true iff asset `i` is among the top n at grid point `k`.
    pub mask: Vec<Vec<bool>>,
    pub n: usize,
}

/// Capitalization weights of the whole market and of the top-n market.
#[derive(Debug, Clone)]
pub struct TopNView {
    /// Censored prices: `S_i` where ranked in the top n, else 0.
    pub s_tilde: Vec<Vec<f64>>,
    /// Top-n capitalization per grid point.
    pub sigma_tilde: Vec<f64>,
    /// Market weights `mu[i][k] = S_i / Sigma`.
    pub mu: Vec<Vec<f64>>,
    /// Top-n market weights (zero off the top n, summing to 1).
    pub mu_tilde: Vec<Vec<f64>>,
    /// Ranked market weights `mu_ranked[r][k] = ranked[r][k] / Sigma[k]`.
    pub mu_ranked: Vec<Vec<f64>>,
}

impl RankView {
    pub fn n_assets(&self) -> usize {
        self.u.len()
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.u[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Ranks every grid point of a path and derives the top-n weight views.
/// Requires `1 <= n < N`.
pub fn rank_path(path: &MarketPath, n: usize) -> Result<(RankView, TopNView)> {
    let n_assets = path.n_assets();
    if n < 1 || n >= n_assets {
        return Err(Error::invalid(format!(
            "open market requires 1 <= n < N, got n={n}, N={n_assets}"
        )));
    }
    let m = path.len();
    let mut u = vec![vec![0usize; m]; n_assets];
    let mut p = vec![vec![0usize; m]; n_assets];
    let mut ranked = vec![vec![0.0f64; m]; n_assets];
    let mut mask = vec![vec![false; m]; n_assets];
    let mut s_tilde = vec![vec![0.0f64; m]; n_assets];
    let mut sigma_tilde = vec![0.0f64; m];
    let mut mu = vec![vec![0.0f64; m]; n_assets];
    let mut mu_tilde = vec![vec![0.0f64; m]; n_assets];
    let mut mu_ranked = vec![vec![0.0f64; m]; n_assets];

    let mut order: Vec<usize> = (0..n_assets).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| {
            path.prices[b][k]
                .partial_cmp(&path.prices[a][k])
                .unwrap()
                .then(a.cmp(&b))
        });
        let sigma: f64 = (0..n_assets).map(|i| path.prices[i][k]).sum();
        let mut top_sum = 0.0;
        for (r, &i) in order.iter().enumerate() {
            u[i][k] = r;
            p[r][k] = i;
            let s = path.prices[i][k];
            ranked[r][k] = s;
            mu_ranked[r][k] = s / sigma;
            mu[i][k] = s / sigma;
            if r < n {
                mask[i][k] = true;
                s_tilde[i][k] = s;
                top_sum += s;
            }
        }
        sigma_tilde[k] = top_sum;
        for i in 0..n_assets {
            if mask[i][k] {
                mu_tilde[i][k] = path.prices[i][k] / top_sum;
            }
        }
    }

    Ok((
        RankView {
            u,
            p,
            ranked,
            mask,
            n,
        },
        TopNView {
            s_tilde,
            sigma_tilde,
            mu,
            mu_tilde,
            mu_ranked,
        },
    ))
}

/// Censors increments with the left-endpoint mask: the increment over step m
/// survives iff the asset ranked in the top n at the step's left endpoint.
/// The left-endpoint convention keeps the integrand predictable.
pub fn censored_increments(inc: &IncrementSeries, rv: &RankView) -> Result<IncrementSeries> {
    let n_assets = inc.n_assets();
    let steps = inc.steps();
    if rv.n_assets() != n_assets || rv.len() != steps + 1 {
        return Err(Error::invalid(format!(
            "shape mismatch: increments {}x{}, rank view {}x{}",
            n_assets,
            steps,
            rv.n_assets(),
            rv.len()
        )));
    }
    let dr = (0..n_assets)
        .map(|i| {
            (0..steps)
                .map(|k| if rv.mask[i][k] { inc.dr[i][k] } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(IncrementSeries { dr })
}
