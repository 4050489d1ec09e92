//! Functionally generated portfolios.
//!
//! Two constructions: weights generated from a positive C^2 function of the
//! ranked market weights (with the balanced/top-n-only conditions keeping the
//! weights inside the open market), and weights generated from a function of
//! prices denominated by the top-n market wealth. Each comes with a pathwise
//! master-formula decomposition of the log relative wealth, verified here
//! numerically with realized brackets and collision local times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::local_time::{collision_local_times, CollisionLevel};
use crate::market::{increments, MarketPath};
use crate::portfolio::{wealth, WealthPath, WeightPath};
use crate::ranks::{RankView, TopNView};

/// A positive C^2 generating function with analytic derivatives.
///
/// For rank-based generation the argument is the vector of ranked market
/// weights; for denominated generation it is a vector of positive prices.
pub trait GeneratingFunction: Sync {
    fn name(&self) -> &str;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>>;
    /// Satisfies `G(x) = sum_j x_j D_j G(x)` (degree-1 homogeneity).
    fn balanced(&self) -> bool {
        false
    }
    /// `Some(n)` iff the function only reads the first n components.
    fn top_n_only(&self) -> Option<usize> {
        None
    }
    /// Domain check for a single evaluation point.
    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if self.value(x) > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{} is not positive at the requested point",
                self.name()
            )))
        }
    }
    /// Exact per-rank weight fractions `x_k D_k G / G` where the generator
    /// knows them in closed form (sharper than going through the gradient).
    fn balanced_weights(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// `G(x) = sum_{k<n} c_k x_k`.
#[derive(Debug, Clone)]
pub struct WeightedArithmetic {
    c: Vec<f64>,
    name: String,
}

impl WeightedArithmetic {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("arithmetic coefficients must be >= 0"));
        }
        if c.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("arithmetic coefficients cannot all vanish"));
        }
        Ok(WeightedArithmetic {
            name: format!("weighted_arithmetic(n={})", c.len()),
            c,
        })
    }
}

impl GeneratingFunction for WeightedArithmetic {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        g[..self.c.len()].copy_from_slice(&self.c);
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![0.0; x.len()]; x.len()]
    }

    fn balanced(&self) -> bool {
        true
    }

    fn top_n_only(&self) -> Option<usize> {
        Some(self.c.len())
    }
}

/// `G(x) = prod_{k<n} x_k^{c_k}` with `sum c_k = 1`, `c_k >= 0`.
#[derive(Debug, Clone)]
pub struct Geometric {
    c: Vec<f64>,
    name: String,
}

impl Geometric {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("geometric exponents must be >= 0"));
        }
        let sum: f64 = c.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "geometric exponents must sum to 1, got {sum}"
            )));
        }
        Ok(Geometric {
            name: format!("geometric(n={})", c.len()),
            c,
        })
    }

    /// The generating function of a constant rebalanced portfolio holding
    /// fraction `xi_k` in the rank-k stock.
    pub fn constant_rebalanced(xi: &[f64]) -> Result<Self> {
        let mut g = Self::new(xi.to_vec())?;
        g.name = format!("cr(n={})", xi.len());
        Ok(g)
    }
}

impl GeneratingFunction for Geometric {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.c
            .iter()
            .zip(x)
            .map(|(&c, &x)| if c == 0.0 { 1.0 } else { x.powf(c) })
            .product()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let v = self.value(x);
        let mut g = vec![0.0; x.len()];
        for (k, &c) in self.c.iter().enumerate() {
            if c != 0.0 {
                g[k] = c * v / x[k];
            }
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let v = self.value(x);
        let n = x.len();
        let mut h = vec![vec![0.0; n]; n];
        for (k, &ck) in self.c.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            for (l, &cl) in self.c.iter().enumerate() {
                if cl == 0.0 {
                    continue;
                }
                h[k][l] = if k == l {
                    ck * (ck - 1.0) * v / (x[k] * x[k])
                } else {
                    ck * cl * v / (x[k] * x[l])
                };
            }
        }
        h
    }

    fn balanced(&self) -> bool {
        true
    }

    fn top_n_only(&self) -> Option<usize> {
        Some(self.c.len())
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if self.c.iter().zip(x).any(|(&c, &x)| c != 0.0 && x <= 0.0) {
            return Err(Error::invalid(
                "geometric generator needs positive inputs on its support",
            ));
        }
        Ok(())
    }

    fn balanced_weights(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut w = vec![0.0; x.len()];
        w[..self.c.len()].copy_from_slice(&self.c);
        Some(w)
    }
}

/// `G(x) = (sum_{k<n} x_k^p)^{1/p}`. The diversity-weighted portfolio uses
/// `p` in (0, 1); other exponents are admitted only when explicitly unchecked.
#[derive(Debug, Clone)]
pub struct Diversity {
    p: f64,
    n: usize,
    name: String,
}

impl Diversity {
    pub fn new(p: f64, n: usize) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!(
                "diversity exponent must lie in (0, 1), got {p}; use new_unchecked to override"
            )));
        }
        Ok(Self::build(p, n))
    }

    /// Admits exponents outside (0, 1); the caller owns the consequences.
    pub fn new_unchecked(p: f64, n: usize) -> Result<Self> {
        if p == 0.0 || !p.is_finite() {
            return Err(Error::invalid("diversity exponent must be finite and nonzero"));
        }
        Ok(Self::build(p, n))
    }

    fn build(p: f64, n: usize) -> Self {
        Diversity {
            p,
            n,
            name: format!("diversity(p={p}, n={n})"),
        }
    }

    fn q(&self, x: &[f64]) -> f64 {
        x[..self.n].iter().map(|&v| v.powf(self.p)).sum()
    }
}

impl GeneratingFunction for Diversity {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.q(x).powf(1.0 / self.p)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let q = self.q(x);
        let f = q.powf(1.0 / self.p - 1.0);
        let mut g = vec![0.0; x.len()];
        for k in 0..self.n {
            g[k] = f * x[k].powf(self.p - 1.0);
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let q = self.q(x);
        let f2 = q.powf(1.0 / self.p - 2.0);
        let f1 = q.powf(1.0 / self.p - 1.0);
        let n = x.len();
        let mut h = vec![vec![0.0; n]; n];
        for k in 0..self.n {
            let xk = x[k].powf(self.p - 1.0);
            for l in 0..self.n {
                let xl = x[l].powf(self.p - 1.0);
                let mut v = (1.0 - self.p) * f2 * xk * xl;
                if k == l {
                    v -= (1.0 - self.p) * f1 * x[k].powf(self.p - 2.0);
                }
                h[k][l] = v;
            }
        }
        h
    }

    fn balanced(&self) -> bool {
        true
    }

    fn top_n_only(&self) -> Option<usize> {
        Some(self.n)
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x[..self.n].iter().any(|&v| v <= 0.0) {
            return Err(Error::invalid(
                "diversity generator needs positive inputs on its support",
            ));
        }
        Ok(())
    }
}

/// `G(x) = sum_{k<n} x_k`; generates the top-n market portfolio.
#[derive(Debug, Clone)]
pub struct TopNSum {
    n: usize,
    name: String,
}

impl TopNSum {
    pub fn new(n: usize) -> Self {
        TopNSum {
            n,
            name: format!("topn_sum(n={n})"),
        }
    }
}

impl GeneratingFunction for TopNSum {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> f64 {
        x[..self.n].iter().sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for v in g[..self.n].iter_mut() {
            *v = 1.0;
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        vec![vec![0.0; x.len()]; x.len()]
    }

    fn balanced(&self) -> bool {
        true
    }

    fn top_n_only(&self) -> Option<usize> {
        Some(self.n)
    }
}

/// A generating function is admissible for the open market iff it is
/// balanced and only reads the top n ranked weights; then the generated
/// weights stay inside the top n.
pub fn is_admissible(g: &dyn GeneratingFunction, n: usize) -> bool {
    g.balanced() && g.top_n_only().is_some_and(|m| m <= n)
}

/// Weights generated from the ranked market weights and mapped back to asset
/// names through the rank permutation.
pub fn generate_ranked(
    g: &dyn GeneratingFunction,
    tv: &TopNView,
    rv: &RankView,
) -> Result<WeightPath> {
    let n_assets = rv.n_assets();
    let steps = rv.len() - 1;
    let mut w = vec![vec![0.0; steps]; n_assets];
    let mut x = vec![0.0; n_assets];
    for m in 0..steps {
        for r in 0..n_assets {
            x[r] = tv.mu_ranked[r][m];
        }
        g.check_domain(&x)?;
        if g.balanced() {
            if let Some(fr) = g.balanced_weights(&x) {
                for (r, &f) in fr.iter().enumerate() {
                    if f != 0.0 {
                        w[rv.p[r][m]][m] = f;
                    }
                }
                continue;
            }
        }
        let v = g.value(&x);
        let grad = g.gradient(&x);
        if g.balanced() {
            for r in 0..n_assets {
                let f = grad[r] / v * x[r];
                if f != 0.0 {
                    w[rv.p[r][m]][m] = f;
                }
            }
        } else {
            let mut covered = 0.0;
            for r in 0..n_assets {
                covered += x[r] * grad[r] / v;
            }
            let common = 1.0 - covered;
            for r in 0..n_assets {
                w[rv.p[r][m]][m] = (grad[r] / v + common) * x[r];
            }
        }
    }
    Ok(WeightPath::new(w))
}

/// Weights generated from a function of prices denominated by the top-n
/// market wealth: `pi_i = s_i D_i G / G + mu_tilde_i (1 - sum_j s_j D_j G / G)`
/// with `s = S / X_mu_tilde`.
pub fn generate_denominated(
    g: &dyn GeneratingFunction,
    path: &MarketPath,
    x_mu_tilde: &WealthPath,
    tv: &TopNView,
) -> Result<WeightPath> {
    let n = path.n_assets();
    let steps = path.grid.steps();
    if x_mu_tilde.x.len() != steps + 1 {
        return Err(Error::invalid("wealth path does not match the grid"));
    }
    let mut w = vec![vec![0.0; steps]; n];
    let mut s = vec![0.0; n];
    for m in 0..steps {
        for i in 0..n {
            s[i] = path.prices[i][m] / x_mu_tilde.x[m];
        }
        g.check_domain(&s)?;
        let v = g.value(&s);
        let grad = g.gradient(&s);
        let mut covered = 0.0;
        for j in 0..n {
            covered += s[j] * grad[j] / v;
        }
        for i in 0..n {
            w[i][m] = s[i] * grad[i] / v + tv.mu_tilde[i][m] * (1.0 - covered);
        }
    }
    Ok(WeightPath::new(w))
}

/// Which master formula to verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasterMode {
    /// Rank-generated weights against the whole market portfolio.
    Entire,
    /// Admissible rank-generated weights against the top-n market portfolio.
    TopN,
    /// Denominated-price weights against the top-n market portfolio.
    Denominated,
}

/// Pathwise comparison of the two sides of a master formula.
#[derive(Debug, Clone)]
pub struct MasterFormulaReport {
    pub t: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub gap: Vec<f64>,
    pub max_abs_gap: f64,
    pub max_abs_lhs: f64,
}

impl MasterFormulaReport {
    fn assemble(t: Vec<f64>, lhs: Vec<f64>, rhs: Vec<f64>) -> Self {
        let gap: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let max_abs_gap = gap.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let max_abs_lhs = lhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        MasterFormulaReport {
            t,
            lhs,
            rhs,
            gap,
            max_abs_gap,
            max_abs_lhs,
        }
    }
}

/// Verifies the master formula of the requested mode along one path.
///
/// The left side is the realized log relative wealth. The right side is
/// assembled from the log change of the generating function, collision
/// local-time integrals with left-endpoint integrands, and the Hessian
/// integral against realized quadratic covariations of the ranked weights.
pub fn verify_master(
    g: &dyn GeneratingFunction,
    path: &MarketPath,
    rv: &RankView,
    tv: &TopNView,
    mode: MasterMode,
) -> Result<MasterFormulaReport> {
    match mode {
        MasterMode::Entire => verify_master_ranked(g, path, rv, tv, false),
        MasterMode::TopN => {
            if !is_admissible(g, rv.n) {
                return Err(Error::invalid(format!(
                    "{} is not admissible for the top-{} market (balanced: {}, top-n-only: {:?})",
                    g.name(),
                    rv.n,
                    g.balanced(),
                    g.top_n_only()
                )));
            }
            verify_master_ranked(g, path, rv, tv, true)
        }
        MasterMode::Denominated => verify_master_denominated(g, path, rv, tv),
    }
}

fn verify_master_ranked(
    g: &dyn GeneratingFunction,
    path: &MarketPath,
    rv: &RankView,
    tv: &TopNView,
    top_n: bool,
) -> Result<MasterFormulaReport> {
    let n_assets = rv.n_assets();
    let steps = path.grid.steps();
    let inc = increments(path);
    let pi = generate_ranked(g, tv, rv)?;
    let x_pi = wealth(&pi, &inc)?;
    let benchmark = if top_n {
        wealth(&WeightPath::top_n_market(tv), &inc)?
    } else {
        wealth(&WeightPath::market(tv), &inc)?
    };

    let collisions = collision_local_times(rv, tv, CollisionLevel::Weight);
    let dl: Vec<Vec<f64>> = collisions
        .adjacent
        .iter()
        .map(|lt| lt.increments())
        .collect();

    let mut lhs = Vec::with_capacity(steps + 1);
    let mut rhs = Vec::with_capacity(steps + 1);
    lhs.push(0.0);
    rhs.push(0.0);

    let x0: Vec<f64> = (0..n_assets).map(|r| tv.mu_ranked[r][0]).collect();
    let g0 = g.value(&x0);
    let q0: f64 = x0[..rv.n].iter().sum();

    let mut local_acc = 0.0;
    let mut boundary_acc = 0.0;
    let mut hess_acc = 0.0;
    let mut x = vec![0.0; n_assets];
    let mut x_next = vec![0.0; n_assets];

    let hess_range = if top_n { rv.n } else { n_assets };
    for m in 0..steps {
        for r in 0..n_assets {
            x[r] = tv.mu_ranked[r][m];
            x_next[r] = tv.mu_ranked[r][m + 1];
        }
        let v = g.value(&x);
        let grad = g.gradient(&x);
        let hess = g.hessian(&x);

        if top_n {
            // sum over the top ranks of (D_k G - D_{k+1} G) / G against the
            // adjacent collision local times, plus the boundary relief term
            for r in 0..rv.n {
                let upper = grad[r] / v;
                let lower = if r + 1 < n_assets { grad[r + 1] / v } else { 0.0 };
                local_acc += (upper - lower) * dl[r][m];
            }
            let q: f64 = x[..rv.n].iter().sum();
            boundary_acc += dl[rv.n - 1][m] / q;
        } else {
            // coefficients are the weight-to-weight ratios pi_(k) / mu_(k)
            let mut covered = 0.0;
            for r in 0..n_assets {
                covered += x[r] * grad[r] / v;
            }
            let common = if g.balanced() { 0.0 } else { 1.0 - covered };
            for r in 0..n_assets - 1 {
                let upper = grad[r] / v + common;
                let lower = grad[r + 1] / v + common;
                local_acc += (upper - lower) * dl[r][m];
            }
        }

        for (r, hr) in hess.iter().enumerate().take(hess_range) {
            let dxr = x_next[r] - x[r];
            for (s, &h) in hr.iter().enumerate().take(hess_range) {
                hess_acc += h / v * dxr * (x_next[s] - x[s]);
            }
        }

        let gv = g.value(&x_next);
        let mut r = (gv / g0).ln() - 0.5 * local_acc - 0.5 * hess_acc;
        if top_n {
            let q_next: f64 = x_next[..rv.n].iter().sum();
            r += -(q_next / q0).ln() + 0.5 * boundary_acc;
        }
        rhs.push(r);
        lhs.push((x_pi.x[m + 1] / benchmark.x[m + 1]).ln());
    }

    Ok(MasterFormulaReport::assemble(
        path.grid.times().to_vec(),
        lhs,
        rhs,
    ))
}

fn verify_master_denominated(
    g: &dyn GeneratingFunction,
    path: &MarketPath,
    rv: &RankView,
    tv: &TopNView,
) -> Result<MasterFormulaReport> {
    let n = path.n_assets();
    let steps = path.grid.steps();
    let inc = increments(path);
    let x_mu = wealth(&WeightPath::top_n_market(tv), &inc)?;
    let pi = generate_denominated(g, path, &x_mu, tv)?;
    let x_pi = wealth(&pi, &inc)?;
    let _ = rv;

    let denominated = |m: usize| -> Vec<f64> {
        (0..n).map(|i| path.prices[i][m] / x_mu.x[m]).collect()
    };

    let mut lhs = Vec::with_capacity(steps + 1);
    let mut rhs = Vec::with_capacity(steps + 1);
    lhs.push(0.0);
    rhs.push(0.0);
    let s0 = denominated(0);
    let g0 = g.value(&s0);
    let mut hess_acc = 0.0;
    let mut s = s0;
    for m in 0..steps {
        let s_next = denominated(m + 1);
        let v = g.value(&s);
        let hess = g.hessian(&s);
        for (i, hi) in hess.iter().enumerate() {
            let dsi = s_next[i] - s[i];
            for (j, &h) in hi.iter().enumerate() {
                hess_acc += h / v * dsi * (s_next[j] - s[j]);
            }
        }
        rhs.push((g.value(&s_next) / g0).ln() - 0.5 * hess_acc);
        lhs.push((x_pi.x[m + 1] / x_mu.x[m + 1]).ln());
        s = s_next;
    }

    Ok(MasterFormulaReport::assemble(
        path.grid.times().to_vec(),
        lhs,
        rhs,
    ))
}

/// Draws a point uniformly from the positive simplex of dimension `dim`.
pub fn sample_simplex(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..dim)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let sum: f64 = x.iter().sum();
        if sum > 0.0 {
            for v in x.iter_mut() {
                *v /= sum;
            }
            return x;
        }
    }
}

/// Largest violation of the balance identity `G(x) = sum x_j D_j G(x)` over
/// random simplex points.
pub fn max_balance_violation(g: &dyn GeneratingFunction, dim: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = sample_simplex(dim, &mut rng);
        let v = g.value(&x);
        let grad = g.gradient(&x);
        let dot: f64 = x.iter().zip(&grad).map(|(a, b)| a * b).sum();
        worst = worst.max((v - dot).abs());
    }
    worst
}

/// Largest violation of degree-1 homogeneity `G(a x) = a G(x)` for the given
/// scale factors over random simplex points.
pub fn max_homogeneity_violation(
    g: &dyn GeneratingFunction,
    dim: usize,
    scales: &[f64],
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = sample_simplex(dim, &mut rng);
        let v = g.value(&x);
        for &a in scales {
            let xa: Vec<f64> = x.iter().map(|&u| a * u).collect();
            worst = worst.max((g.value(&xa) - a * v).abs());
        }
    }
    worst
}

/// Largest relative error between the analytic gradient/Hessian and central
/// finite differences over random simplex points.
pub fn max_derivative_fd_error(
    g: &dyn GeneratingFunction,
    dim: usize,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        // keep points interior so central differences stay inside the domain
        let mut x = sample_simplex(dim, &mut rng);
        for v in x.iter_mut() {
            *v = 0.05 + 0.9 * *v;
        }
        let grad = g.gradient(&x);
        let hess = g.hessian(&x);
        let scale_g = grad.iter().fold(1e-12f64, |a, &b| a.max(b.abs()));
        let scale_h = hess
            .iter()
            .flatten()
            .fold(1e-12f64, |a, &b| a.max(b.abs()));
        for k in 0..dim {
            let h = 1e-5 * x[k].max(0.1);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (g.value(&xp) - g.value(&xm)) / (2.0 * h);
            worst = worst.max((fd - grad[k]).abs() / scale_g);
            let gp = g.gradient(&xp);
            let gm = g.gradient(&xm);
            for l in 0..dim {
                let fd2 = (gp[l] - gm[l]) / (2.0 * h);
                worst = worst.max((fd2 - hess[l][k]).abs() / scale_h);
            }
        }
    }
    worst
}
