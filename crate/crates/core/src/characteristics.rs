//! Local characteristics of the market (drift and covariation rates against
//! the operational clock), their censored versions, the spectral
//! pseudo-inverse, the numeraire weights built from them, and the growth /
//! viability report.
//!
//! For the models implemented here every drift and covariation is absolutely
//! continuous in time, so the operational clock is calendar time and all
//! rates are per year.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::market::MarketPath;
use crate::model::ModelSpec;
use crate::portfolio::WeightPath;
use crate::ranks::RankView;

/// A per-step series that is often constant.
#[derive(Debug, Clone)]
pub enum Series<T> {
    Constant(T),
    PerStep(Vec<T>),
}

impl<T> Series<T> {
    pub fn at(&self, step: usize) -> &T {
        match self {
            Series::Constant(v) => v,
            Series::PerStep(v) => &v[step],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Series::Constant(_))
    }
}

/// Drift rates, covariation rates, and clock increments per step.
#[derive(Debug, Clone)]
pub struct LocalCharacteristics {
    pub alpha: Series<Vec<f64>>,
    pub cov: Series<DMatrix<f64>>,
    /// Clock increments; calendar-time steps for the built-in models.
    pub d_o: Vec<f64>,
    pub n_assets: usize,
}

impl LocalCharacteristics {
    pub fn steps(&self) -> usize {
        self.d_o.len()
    }
}

/// Characteristics censored by the top-n mask at the left endpoint of each
/// step: `alpha_tilde = D alpha`, `cov_tilde = D cov D`.
#[derive(Debug, Clone)]
pub struct CensoredCharacteristics {
    /// `alpha_tilde[step][asset]`.
    pub alpha_tilde: Vec<Vec<f64>>,
    /// Sorted indices of the assets in the top n at each step's left endpoint.
    pub active: Vec<Vec<usize>>,
    pub cov: Series<DMatrix<f64>>,
    pub d_o: Vec<f64>,
    pub n_assets: usize,
}

impl CensoredCharacteristics {
    pub fn steps(&self) -> usize {
        self.d_o.len()
    }

    /// `cov_tilde(step) * v` without materializing the censored matrix.
    pub fn cov_tilde_times(&self, step: usize, v: &[f64]) -> Vec<f64> {
        let c = self.cov.at(step);
        let act = &self.active[step];
        let mut out = vec![0.0; self.n_assets];
        for &i in act {
            let mut s = 0.0;
            for &j in act {
                s += c[(i, j)] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// Quadratic form `v' cov_tilde(step) v`.
    pub fn quad_form(&self, step: usize, v: &[f64]) -> f64 {
        let c = self.cov.at(step);
        let act = &self.active[step];
        let mut s = 0.0;
        for &i in act {
            for &j in act {
                s += v[i] * c[(i, j)] * v[j];
            }
        }
        s
    }

    /// Censored covariance restricted to the active set (dense submatrix).
    pub fn cov_sub(&self, step: usize) -> DMatrix<f64> {
        let c = self.cov.at(step);
        let act = &self.active[step];
        DMatrix::from_fn(act.len(), act.len(), |a, b| c[(act[a], act[b])])
    }

    /// Full censored covariance matrix (zero rows and columns off the mask).
    pub fn cov_tilde(&self, step: usize) -> DMatrix<f64> {
        let c = self.cov.at(step);
        let act = &self.active[step];
        let mut out = DMatrix::zeros(self.n_assets, self.n_assets);
        for &i in act {
            for &j in act {
                out[(i, j)] = c[(i, j)];
            }
        }
        out
    }
}

/// Characteristics implied by a parametric model along a simulated path.
/// GBM rates are the model constants; the rank-based model assigns each
/// asset the rate of the rank it occupies at the step's left endpoint.
pub fn analytic_characteristics(
    spec: &ModelSpec,
    path: &MarketPath,
    rv: &RankView,
) -> Result<LocalCharacteristics> {
    spec.validate()?;
    let n = spec.n_assets();
    if path.n_assets() != n || rv.n_assets() != n || rv.len() != path.len() {
        return Err(Error::invalid("model, path and rank view shapes disagree"));
    }
    let steps = path.grid.steps();
    let d_o: Vec<f64> = (0..steps).map(|k| path.grid.dt(k)).collect();
    match spec {
        ModelSpec::Gbm { drift, vol, .. } => {
            let cov = vol.covariance();
            let cov = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
            Ok(LocalCharacteristics {
                alpha: Series::Constant(drift.clone()),
                cov: Series::Constant(cov),
                d_o,
                n_assets: n,
            })
        }
        ModelSpec::Atlas {
            rank_drift,
            rank_vol,
            ..
        } => {
            let mut alpha = Vec::with_capacity(steps);
            let mut cov = Vec::with_capacity(steps);
            for k in 0..steps {
                let a: Vec<f64> = (0..n).map(|i| rank_drift[rv.u[i][k]]).collect();
                let mut c = DMatrix::zeros(n, n);
                for i in 0..n {
                    let v = rank_vol[rv.u[i][k]];
                    c[(i, i)] = v * v;
                }
                alpha.push(a);
                cov.push(c);
            }
            Ok(LocalCharacteristics {
                alpha: Series::PerStep(alpha),
                cov: Series::PerStep(cov),
                d_o,
                n_assets: n,
            })
        }
    }
}

/// Censors characteristics with the left-endpoint top-n mask.
pub fn censor(chars: &LocalCharacteristics, rv: &RankView) -> Result<CensoredCharacteristics> {
    let n = chars.n_assets;
    let steps = chars.steps();
    if rv.n_assets() != n || rv.len() != steps + 1 {
        return Err(Error::invalid("characteristics and rank view shapes disagree"));
    }
    let mut alpha_tilde = Vec::with_capacity(steps);
    let mut active = Vec::with_capacity(steps);
    for k in 0..steps {
        let a = chars.alpha.at(k);
        let mut at = vec![0.0; n];
        let mut act = Vec::with_capacity(rv.n);
        for i in 0..n {
            if rv.mask[i][k] {
                at[i] = a[i];
                act.push(i);
            }
        }
        alpha_tilde.push(at);
        active.push(act);
    }
    Ok(CensoredCharacteristics {
        alpha_tilde,
        active,
        cov: chars.cov.clone(),
        d_o: chars.d_o.clone(),
        n_assets: n,
    })
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix by spectral
/// decomposition. Eigenvalues at or below `tol * lambda_max` are treated as
/// zero; the rest are inverted.
pub fn pseudo_inverse(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::invalid("pseudo-inverse needs a square matrix"));
    }
    let scale = m.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-9 * scale.max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = m.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let thr = tol * lmax;
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam > thr {
            let q = eig.eigenvectors.column(k);
            let w = 1.0 / lam;
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += w * q[i] * q[j];
                }
            }
        }
    }
    Ok(out)
}

/// Default relative spectral threshold for the pseudo-inverse.
pub const PINV_TOL: f64 = 1e-10;
/// Default relative tolerance for the range membership check.
pub const RANGE_TOL: f64 = 1e-8;

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Small cache so a constant covariance is only decomposed once per mask.
struct PinvCache {
    constant: bool,
    map: HashMap<u64, DMatrix<f64>>,
}

impl PinvCache {
    fn new(constant: bool) -> Self {
        PinvCache {
            constant,
            map: HashMap::new(),
        }
    }

    fn key(active: &[usize]) -> u64 {
        active.iter().fold(0u64, |k, &i| k | (1 << i))
    }

    fn pinv_sub(
        &mut self,
        cc: &CensoredCharacteristics,
        step: usize,
        tol: f64,
    ) -> Result<DMatrix<f64>> {
        if !self.constant {
            return pseudo_inverse(&cc.cov_sub(step), tol);
        }
        let key = Self::key(&cc.active[step]);
        if let Some(p) = self.map.get(&key) {
            return Ok(p.clone());
        }
        let p = pseudo_inverse(&cc.cov_sub(step), tol)?;
        self.map.insert(key, p.clone());
        Ok(p)
    }
}

/// Numeraire candidate per step: the censored drift solved against the
/// censored covariance, `rho = D pinv(cov_tilde) alpha_tilde`, plus the
/// per-step range verdict (`alpha_tilde` within range of `cov_tilde`).
pub struct NumeraireResult {
    pub weights: WeightPath,
    pub range_ok: Vec<bool>,
}

pub fn numeraire_portfolio(cc: &CensoredCharacteristics, range_tol: f64) -> Result<NumeraireResult> {
    let steps = cc.steps();
    let n = cc.n_assets;
    let mut cache = PinvCache::new(cc.cov.is_constant());
    let mut w = vec![vec![0.0; steps]; n];
    let mut range_ok = Vec::with_capacity(steps);
    for m in 0..steps {
        let act = &cc.active[m];
        let a = &cc.alpha_tilde[m];
        let pinv = cache.pinv_sub(cc, m, PINV_TOL)?;
        let asub: Vec<f64> = act.iter().map(|&i| a[i]).collect();
        let mut rho = vec![0.0; n];
        for (r, &i) in act.iter().enumerate() {
            let mut s = 0.0;
            for (c, _) in act.iter().enumerate() {
                s += pinv[(r, c)] * asub[c];
            }
            rho[i] = s;
        }
        let resid: Vec<f64> = {
            let cr = cc.cov_tilde_times(m, &rho);
            (0..n).map(|i| cr[i] - a[i]).collect()
        };
        let na = l2(a);
        let ok = if na == 0.0 {
            true
        } else {
            l2(&resid) <= range_tol * na
        };
        range_ok.push(ok);
        for i in 0..n {
            w[i][m] = rho[i];
        }
    }
    Ok(NumeraireResult {
        weights: WeightPath::new(w),
        range_ok,
    })
}

/// Whole-market numeraire weights `pinv(cov) alpha` with their range check.
pub fn whole_market_numeraire(
    chars: &LocalCharacteristics,
    range_tol: f64,
) -> Result<NumeraireResult> {
    let steps = chars.steps();
    let n = chars.n_assets;
    let mut w = vec![vec![0.0; steps]; n];
    let mut range_ok = Vec::with_capacity(steps);
    let mut cached: Option<DMatrix<f64>> = None;
    for m in 0..steps {
        let c = chars.cov.at(m);
        let pinv = if chars.cov.is_constant() {
            if cached.is_none() {
                cached = Some(pseudo_inverse(c, PINV_TOL)?);
            }
            cached.as_ref().unwrap().clone()
        } else {
            pseudo_inverse(c, PINV_TOL)?
        };
        let a = chars.alpha.at(m);
        let av = DMatrix::from_column_slice(n, 1, a);
        let rho = &pinv * &av;
        let resid = c * &rho - &av;
        let na = av.norm();
        range_ok.push(if na == 0.0 { true } else { resid.norm() <= range_tol * na });
        for i in 0..n {
            w[i][m] = rho[(i, 0)];
        }
    }
    Ok(NumeraireResult {
        weights: WeightPath::new(w),
        range_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Viability {
    Viable,
    /// Drift escapes the range of the covariance on some step.
    NonviableCaseA,
    /// Aggregate maximal growth exceeds the explosion threshold.
    NonviableCaseB,
}

/// Weights exposing a case-A failure: supported where the drift leaves the
/// covariance range, with unit drift exposure and vanishing covariation.
#[derive(Debug, Clone)]
pub struct CaseAWitness {
    pub weights: WeightPath,
    /// Predicted wealth increments `phi' alpha_tilde dO` per step.
    pub drift_increments: Vec<f64>,
    /// Predicted quadratic variation of the martingale part,
    /// `sum phi' cov_tilde phi dO`; zero up to roundoff by construction.
    pub predicted_qv: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GrowthConfig {
    pub range_tol: f64,
    /// Case-B detector: the market is flagged when the aggregate maximal
    /// growth exceeds this level (finite data cannot be literally infinite).
    pub explosion_threshold: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            range_tol: RANGE_TOL,
            explosion_threshold: 1e6,
        }
    }
}

/// Growth rates, their aggregates, the viability verdict, and the gap to the
/// whole market.
#[derive(Debug)]
pub struct GrowthReport {
    /// Maximal growth rate of the top-n market per step; infinite where the
    /// range check fails.
    pub g_tilde: Vec<f64>,
    /// Aggregate maximal growth of the top-n market (cumulative, clock-
    /// integrated; one value per grid point).
    pub big_g_tilde: Vec<f64>,
    pub range_ok: Vec<bool>,
    /// Whole-market analogues.
    pub g: Vec<f64>,
    pub big_g: Vec<f64>,
    pub range_ok_whole: Vec<bool>,
    /// Cumulative difference `G - G_tilde`, nondecreasing and nonnegative.
    pub gap: Vec<f64>,
    pub gap_nondecreasing: bool,
    pub verdict: Viability,
    pub witness: Option<CaseAWitness>,
}

pub fn growth_report(
    chars: &LocalCharacteristics,
    cc: &CensoredCharacteristics,
    config: &GrowthConfig,
) -> Result<GrowthReport> {
    let steps = cc.steps();
    let n = cc.n_assets;
    if chars.steps() != steps || chars.n_assets != n {
        return Err(Error::invalid("characteristics shapes disagree"));
    }

    let mut cache = PinvCache::new(cc.cov.is_constant());
    let mut g_tilde = Vec::with_capacity(steps);
    let mut range_ok = Vec::with_capacity(steps);
    let mut witness_w = vec![vec![0.0; steps]; n];
    let mut witness_drift = vec![0.0; steps];
    let mut witness_qv = 0.0;
    let mut any_case_a = false;

    for m in 0..steps {
        let act = &cc.active[m];
        let a = &cc.alpha_tilde[m];
        let asub: Vec<f64> = act.iter().map(|&i| a[i]).collect();
        let pinv = cache.pinv_sub(cc, m, PINV_TOL)?;
        // projection residual alpha_tilde - cov cov^+ alpha_tilde on the mask
        let proj: Vec<f64> = {
            let csub = cc.cov_sub(m);
            let x = &pinv * DMatrix::from_column_slice(act.len(), 1, &asub);
            let cx = csub * x;
            (0..act.len()).map(|r| asub[r] - cx[(r, 0)]).collect()
        };
        let na = l2(&asub);
        let nresid = l2(&proj);
        let ok = if na == 0.0 { true } else { nresid <= config.range_tol * na };
        range_ok.push(ok);
        if ok {
            let mut q = 0.0;
            for (r, _) in act.iter().enumerate() {
                for (c, _) in act.iter().enumerate() {
                    q += asub[r] * pinv[(r, c)] * asub[c];
                }
            }
            g_tilde.push(0.5 * q);
        } else {
            any_case_a = true;
            g_tilde.push(f64::INFINITY);
            let norm2 = nresid * nresid;
            let mut phi = vec![0.0; n];
            for (r, &i) in act.iter().enumerate() {
                phi[i] = proj[r] / norm2;
            }
            for i in 0..n {
                witness_w[i][m] = phi[i];
            }
            let drift: f64 = (0..n).map(|i| phi[i] * a[i]).sum();
            witness_drift[m] = drift * cc.d_o[m];
            witness_qv += cc.quad_form(m, &phi) * cc.d_o[m];
        }
    }

    // whole-market rates
    let mut g = Vec::with_capacity(steps);
    let mut range_ok_whole = Vec::with_capacity(steps);
    let mut cached_pinv: Option<DMatrix<f64>> = None;
    for m in 0..steps {
        let c = chars.cov.at(m);
        let pinv = if chars.cov.is_constant() {
            if cached_pinv.is_none() {
                cached_pinv = Some(pseudo_inverse(c, PINV_TOL)?);
            }
            cached_pinv.clone().unwrap()
        } else {
            pseudo_inverse(c, PINV_TOL)?
        };
        let a = chars.alpha.at(m);
        let av = DMatrix::from_column_slice(n, 1, a);
        let x = &pinv * &av;
        let resid = c * &x - &av;
        let na = av.norm();
        let ok = if na == 0.0 { true } else { resid.norm() <= config.range_tol * na };
        range_ok_whole.push(ok);
        if ok {
            g.push(0.5 * (av.transpose() * &x)[(0, 0)]);
        } else {
            g.push(f64::INFINITY);
        }
    }

    let cumulate = |rates: &[f64], d_o: &[f64]| {
        let mut acc = 0.0f64;
        let mut out = Vec::with_capacity(steps + 1);
        out.push(0.0);
        for m in 0..steps {
            acc += rates[m] * d_o[m];
            out.push(acc);
        }
        out
    };
    let big_g_tilde = cumulate(&g_tilde, &cc.d_o);
    let big_g = cumulate(&g, &chars.d_o);
    let gap: Vec<f64> = big_g
        .iter()
        .zip(&big_g_tilde)
        .map(|(a, b)| a - b)
        .collect();
    let gap_nondecreasing = gap
        .windows(2)
        .all(|w| !(w[0].is_finite() && w[1].is_finite()) || w[1] >= w[0] - 1e-12);

    let verdict = if any_case_a {
        Viability::NonviableCaseA
    } else if big_g_tilde
        .iter()
        .any(|&v| v.is_finite() && v > config.explosion_threshold)
    {
        Viability::NonviableCaseB
    } else {
        Viability::Viable
    };

    let witness = if any_case_a {
        Some(CaseAWitness {
            weights: WeightPath::new(witness_w),
            drift_increments: witness_drift,
            predicted_qv: witness_qv,
        })
    } else {
        None
    };

    Ok(GrowthReport {
        g_tilde,
        big_g_tilde,
        range_ok,
        g,
        big_g,
        range_ok_whole,
        gap,
        gap_nondecreasing,
        verdict,
        witness,
    })
}

/// Realized diagnostics of a case-A witness along a path: the additive
/// wealth it finances and the realized quadratic variation of its martingale
/// part (increments minus predicted drift).
#[derive(Debug, Clone)]
pub struct WitnessDiagnostics {
    pub wealth: Vec<f64>,
    pub nondecreasing: bool,
    pub martingale_qv: f64,
}

pub fn witness_diagnostics(
    witness: &CaseAWitness,
    censored_dr: &crate::market::IncrementSeries,
) -> Result<WitnessDiagnostics> {
    let steps = censored_dr.steps();
    let n = censored_dr.n_assets();
    if witness.weights.steps() != steps || witness.weights.n_assets() != n {
        return Err(Error::invalid("witness and increments shapes disagree"));
    }
    let mut wealth = Vec::with_capacity(steps + 1);
    wealth.push(0.0);
    let mut qv = 0.0;
    let mut nondecreasing = true;
    for m in 0..steps {
        let mut dk = 0.0;
        for i in 0..n {
            dk += witness.weights.w[i][m] * censored_dr.dr[i][m];
        }
        if dk < -1e-12 {
            nondecreasing = false;
        }
        let resid = dk - witness.drift_increments[m];
        qv += resid * resid;
        wealth.push(wealth.last().unwrap() + dk);
    }
    Ok(WitnessDiagnostics {
        wealth,
        nondecreasing,
        martingale_qv: qv,
    })
}
