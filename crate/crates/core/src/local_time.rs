//! Discrete local-time estimators.
//!
//! `local_time` handles an arbitrary scalar series via the Tanaka sum or an
//! occupation-density estimate. Collision local times of adjacent ranked
//! series need the name/rank bookkeeping of [`collision_local_times`]: the
//! gap between ranked series is nonnegative by construction, so a signed
//! estimator applied to it directly would telescope to zero. Tracking which
//! asset occupies each rank across a step recovers the accumulation.

use crate::error::{Error, Result};
use crate::ranks::{RankView, TopNView};

#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    /// Discrete Tanaka sum, no bandwidth parameter.
    Tanaka,
    /// Occupation-density estimate with half-width `epsilon`.
    Occupation(f64),
    /// Telescoped rank-vs-name estimator used for collision local times.
    RankedTanaka,
}

/// Nondecreasing local-time estimate on the grid, `L[0] = 0`.
#[derive(Debug, Clone)]
pub struct LocalTimeEstimate {
    pub l: Vec<f64>,
    pub scheme: Scheme,
}

impl LocalTimeEstimate {
    pub fn terminal(&self) -> f64 {
        *self.l.last().unwrap()
    }

    /// Per-step increments (already nonnegative after the monotone clamp).
    pub fn increments(&self) -> Vec<f64> {
        self.l.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Running-max clamp. Raw sums can dip by floating-point dust; the estimate
/// must be nondecreasing.
fn monotone_envelope(mut l: Vec<f64>) -> Vec<f64> {
    let mut run = l[0];
    for v in l.iter_mut() {
        run = run.max(*v);
        *v = run;
    }
    l
}

/// Local time accumulated at the origin by the series `y`.
pub fn local_time(y: &[f64], scheme: Scheme) -> Result<LocalTimeEstimate> {
    if y.len() < 2 {
        return Err(Error::invalid("series needs at least 2 points"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series must be finite"));
    }
    let l = match scheme {
        Scheme::Tanaka => {
            let mut l = Vec::with_capacity(y.len());
            l.push(0.0);
            let mut signed_sum = 0.0;
            for k in 0..y.len() - 1 {
                signed_sum += sign(y[k]) * (y[k + 1] - y[k]);
                l.push(0.5 * (y[k + 1].abs() - y[0].abs() - signed_sum));
            }
            monotone_envelope(l)
        }
        Scheme::Occupation(eps) => {
            if !(eps > 0.0) {
                return Err(Error::invalid(format!(
                    "occupation bandwidth must be > 0, got {eps}"
                )));
            }
            let mut l = Vec::with_capacity(y.len());
            l.push(0.0);
            let mut acc = 0.0;
            for k in 0..y.len() - 1 {
                if y[k].abs() < eps {
                    let dy = y[k + 1] - y[k];
                    acc += dy * dy / (2.0 * eps);
                }
                l.push(acc);
            }
            l
        }
        Scheme::RankedTanaka => {
            return Err(Error::invalid(
                "ranked scheme requires rank bookkeeping; use collision_local_times",
            ))
        }
    };
    Ok(LocalTimeEstimate {
        l,
        scheme,
    })
}

/// Which series the collision estimate ranks: raw prices or market weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionLevel {
    Price,
    Weight,
}

/// Collision local times of all adjacent ranked gaps, plus non-adjacent
/// estimates as a degeneracy diagnostic.
#[derive(Debug, Clone)]
pub struct CollisionReport {
    /// `adjacent[k]` estimates the local time of the gap between ranks k and
    /// k+1 (0-based), for k = 0..N-2.
    pub adjacent: Vec<LocalTimeEstimate>,
    /// Terminal non-adjacent estimates keyed by rank pair (k, l), |k-l| >= 2.
    /// Under pathwise mutual nondegeneracy these should be near zero.
    pub nonadjacent: Vec<((usize, usize), f64)>,
}

impl CollisionReport {
    pub fn max_adjacent_terminal(&self) -> f64 {
        self.adjacent
            .iter()
            .map(|l| l.terminal())
            .fold(0.0, f64::max)
    }

    pub fn max_nonadjacent_terminal(&self) -> f64 {
        self.nonadjacent.iter().map(|&(_, v)| v).fold(0.0, f64::max)
    }
}

/// Estimates the collision local times `L` of the gaps between adjacent
/// ranked series.
///
/// The increment over one step for the gap between ranks k and k+1 is
/// `2 * (sum of the k+1 largest values at the right endpoint minus the
/// right-endpoint values of the k+1 left-endpoint leaders)`. The sum of the
/// k+1 largest dominates any (k+1)-subset, so increments are nonnegative, and
/// a step where no name enters or leaves the top k+1 contributes zero.
pub fn collision_local_times(
    rv: &RankView,
    tv: &TopNView,
    level: CollisionLevel,
) -> CollisionReport {
    let n_assets = rv.n_assets();
    let m = rv.len();
    let series: &Vec<Vec<f64>> = match level {
        CollisionLevel::Price => &rv.ranked,
        CollisionLevel::Weight => &tv.mu_ranked,
    };
    // value of a given asset at grid point k, recovered through its rank
    let by_name = |i: usize, k: usize| series[rv.u[i][k]][k];

    let mut raw = vec![vec![0.0f64; m]; n_assets - 1];
    for step in 0..m - 1 {
        let mut ranked_sum = 0.0;
        let mut name_sum = 0.0;
        for k in 0..n_assets - 1 {
            ranked_sum += series[k][step + 1];
            name_sum += by_name(rv.p[k][step], step + 1);
            let dl = 2.0 * (ranked_sum - name_sum);
            raw[k][step + 1] = raw[k][step] + dl.max(0.0);
        }
    }

    let adjacent = raw
        .into_iter()
        .map(|l| LocalTimeEstimate {
            l: monotone_envelope(l),
            scheme: Scheme::RankedTanaka,
        })
        .collect();

    // Non-adjacent diagnostic: direct swaps between ranks k and l within one
    // step, scaled to match the adjacent convention.
    let mut nonadjacent = Vec::new();
    for k in 0..n_assets {
        for l in k + 2..n_assets {
            let mut acc = 0.0;
            for step in 0..m - 1 {
                let hi = by_name(rv.p[k][step], step + 1);
                let lo = by_name(rv.p[l][step], step + 1);
                acc += 2.0 * (lo - hi).max(0.0);
            }
            nonadjacent.push(((k, l), acc));
        }
    }

    CollisionReport {
        adjacent,
        nonadjacent,
    }
}
