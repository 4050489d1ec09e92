use crate::error::{Error, Result};

/// Volatility specification for the GBM model. The covariance rate of
/// cumulative returns is `sigma * sigma'`.
#[derive(Debug, Clone)]
pub enum VolSpec {
    /// Independent assets with per-asset volatilities.
    Diagonal(Vec<f64>),
    /// Full loading matrix `sigma` (N rows); covariance is `sigma * sigma'`.
    Matrix(Vec<Vec<f64>>),
}

impl VolSpec {
    pub fn n_assets(&self) -> usize {
        match self {
            VolSpec::Diagonal(v) => v.len(),
            VolSpec::Matrix(m) => m.len(),
        }
    }

    /// Covariance rate matrix `sigma * sigma'` (N x N).
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        match self {
            VolSpec::Diagonal(v) => {
                let n = v.len();
                let mut c = vec![vec![0.0; n]; n];
                for i in 0..n {
                    c[i][i] = v[i] * v[i];
                }
                c
            }
            VolSpec::Matrix(m) => {
                let n = m.len();
                let d = m[0].len();
                let mut c = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        c[i][j] = (0..d).map(|k| m[i][k] * m[j][k]).sum();
                    }
                }
                c
            }
        }
    }
}

/// Parametric market models producing strictly positive price paths.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// Geometric Brownian motion: `dS_i/S_i = drift_i dt + (sigma dW)_i`.
    /// `drift` is the rate of return of cumulative returns, so the analytic
    /// characteristics are exactly `(drift, sigma sigma')`.
    Gbm {
        initial_prices: Vec<f64>,
        drift: Vec<f64>,
        vol: VolSpec,
    },
    /// Rank-dependent dynamics: the asset occupying rank k gets return drift
    /// `rank_drift[k]` and volatility `rank_vol[k]`, with independent noise
    /// per asset. Rank is evaluated at the left endpoint of each step.
    Atlas {
        initial_prices: Vec<f64>,
        rank_drift: Vec<f64>,
        rank_vol: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn n_assets(&self) -> usize {
        match self {
            ModelSpec::Gbm { initial_prices, .. } => initial_prices.len(),
            ModelSpec::Atlas { initial_prices, .. } => initial_prices.len(),
        }
    }

    pub fn initial_prices(&self) -> &[f64] {
        match self {
            ModelSpec::Gbm { initial_prices, .. } => initial_prices,
            ModelSpec::Atlas { initial_prices, .. } => initial_prices,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_assets();
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 assets, got {n}")));
        }
        for (i, &s) in self.initial_prices().iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::invalid(format!(
                    "initial price of asset {i} must be > 0, got {s}"
                )));
            }
        }
        match self {
            ModelSpec::Gbm { drift, vol, .. } => {
                if drift.len() != n {
                    return Err(Error::invalid(format!(
                        "drift has {} entries, expected {n}",
                        drift.len()
                    )));
                }
                match vol {
                    VolSpec::Diagonal(v) => {
                        if v.len() != n {
                            return Err(Error::invalid(format!(
                                "vol has {} entries, expected {n}",
                                v.len()
                            )));
                        }
                        if v.iter().any(|&s| s < 0.0 || !s.is_finite()) {
                            return Err(Error::invalid("volatilities must be >= 0"));
                        }
                    }
                    VolSpec::Matrix(m) => {
                        if m.len() != n {
                            return Err(Error::invalid(format!(
                                "vol matrix has {} rows, expected {n}",
                                m.len()
                            )));
                        }
                        let d = m[0].len();
                        if d == 0 || m.iter().any(|r| r.len() != d) {
                            return Err(Error::invalid("vol matrix rows must have equal length"));
                        }
                        if m.iter().flatten().any(|v| !v.is_finite()) {
                            return Err(Error::invalid("vol matrix must be finite"));
                        }
                    }
                }
            }
            ModelSpec::Atlas {
                rank_drift,
                rank_vol,
                ..
            } => {
                if rank_drift.len() != n || rank_vol.len() != n {
                    return Err(Error::invalid(format!(
                        "rank_drift/rank_vol need {n} entries, got {}/{}",
                        rank_drift.len(),
                        rank_vol.len()
                    )));
                }
                if rank_vol.iter().any(|&s| s < 0.0 || !s.is_finite()) {
                    return Err(Error::invalid("rank volatilities must be >= 0"));
                }
                if rank_drift.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("rank drifts must be finite"));
                }
            }
        }
        Ok(())
    }
}
