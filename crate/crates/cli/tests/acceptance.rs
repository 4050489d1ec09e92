//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its runtime (run with `--nocapture` to see them). Tolerances are pinned
//! in the assertions.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use open_markets::capm::{capm_fit, residual_orthogonality, CapmConfig};
use open_markets::characteristics::{
    analytic_characteristics, censor, growth_report, numeraire_portfolio, pseudo_inverse,
    witness_diagnostics, CensoredCharacteristics, GrowthConfig, LocalCharacteristics, Series,
    Viability, PINV_TOL,
};
use open_markets::fgp::{
    generate_ranked, max_derivative_fd_error, sample_simplex, Diversity, GeneratingFunction,
    Geometric, MasterMode, TopNSum, WeightedArithmetic,
};
use open_markets::grid::TimeGrid;
use open_markets::market::{increments, simulate_stream, MarketPath};
use open_markets::model::{ModelSpec, VolSpec};
use open_markets::portfolio::{
    supermartingale_test, tilde_mu_wealth, PathContext, PortfolioRule, WeightPath,
};
use open_markets::ranks::{censored_increments, rank_path};
use open_markets::universal::{asymptotic_gap, universal_wealth, GapConfig, SimplexPoint};

fn done(criterion: &str, started: Instant, detail: &str) {
    println!(
        "[PASS] {criterion} ({:.2} s) {detail}",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_01_rank_invariants() {
    let started = Instant::now();
    let spec = ModelSpec::Gbm {
        initial_prices: vec![120.0, 112.0, 104.0, 96.0, 88.0, 80.0],
        drift: vec![0.02; 6],
        vol: VolSpec::Diagonal(vec![0.3; 6]),
    };
    let grid = TimeGrid::uniform(1.0, 1000).unwrap();
    let worst: f64 = (0..1000u64)
        .into_par_iter()
        .map(|j| {
            let path = simulate_stream(&spec, &grid, 101, j).unwrap();
            let (rv, tv) = rank_path(&path, 3).unwrap();
            let mut worst = 0.0f64;
            for k in 0..path.len() {
                for i in 0..6 {
                    assert_eq!(rv.p[rv.u[i][k]][k], i, "u/p not mutually inverse");
                }
                for r in 0..5 {
                    assert!(rv.ranked[r][k] >= rv.ranked[r + 1][k], "ranked increasing");
                }
                let sum_ranked: f64 = (0..6).map(|r| rv.ranked[r][k]).sum();
                let sum_named: f64 = (0..6).map(|i| path.prices[i][k]).sum();
                worst = worst.max((sum_ranked - sum_named).abs() / sum_named);
                let mu_sum: f64 = (0..6).map(|i| tv.mu[i][k]).sum();
                let mut_sum: f64 = (0..6).map(|i| tv.mu_tilde[i][k]).sum();
                worst = worst.max((mu_sum - 1.0).abs()).max((mut_sum - 1.0).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    assert!(worst <= 1e-12, "conservation violated: {worst:.2e}");

    // tie case: equal prices rank the smaller index first
    let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    let tie = MarketPath::new(
        grid,
        vec![vec![2.0, 2.0], vec![2.0, 2.0], vec![1.0, 1.0]],
    )
    .unwrap();
    let (rv, _) = rank_path(&tie, 2).unwrap();
    assert_eq!(rv.u[0][0], 0);
    assert_eq!(rv.u[1][0], 1);
    assert_eq!(rv.u[2][0], 2);
    done(
        "criterion 1: rank invariants on 1000 paths",
        started,
        &format!("max conservation error {worst:.2e}"),
    );
}

fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let q = a.qr().q();
    let mut lam = DMatrix::zeros(n, n);
    for k in 0..rank {
        lam[(k, k)] = 0.1 + 1.9 * rng.gen::<f64>();
    }
    &q * lam * q.transpose()
}

#[test]
fn criterion_02_pseudo_inverse_identities() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let n = 1 + (trial % 8);
        let rank = (rng.gen::<u64>() % (n as u64 + 1)) as usize;
        let m = random_psd(n, rank, &mut rng);
        let p = pseudo_inverse(&m, PINV_TOL).unwrap();
        let mpm = (&m * &p * &m - &m).norm();
        let pmp = (&p * &m * &p - &p).norm();
        let proj = &m * &p;
        let idem = (&proj * &proj - &proj).norm();
        let sym = (&proj - proj.transpose()).norm();
        // projector onto the range: acts as identity on columns of m
        let range_fix = (&proj * &m - &m).norm();
        worst = worst
            .max(mpm)
            .max(pmp)
            .max(idem)
            .max(sym)
            .max(range_fix);
    }
    assert!(worst <= 1e-10, "pseudo-inverse identity residual {worst:.2e}");
    done(
        "criterion 2: pseudo-inverse on 1000 random PSD matrices",
        started,
        &format!("max residual {worst:.2e}"),
    );
}

/// Random censored characteristics with a known range structure per step.
/// Even steps have in-range drift, odd steps are tilted out of range
/// (possible only when the masked covariance is singular).
fn synthetic_censored(
    steps: usize,
    n_assets: usize,
    n: usize,
    seed: u64,
) -> (CensoredCharacteristics, Vec<bool>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut alpha_tilde = Vec::with_capacity(steps);
    let mut active_v = Vec::with_capacity(steps);
    let mut covs = Vec::with_capacity(steps);
    let mut expect_in_range = Vec::with_capacity(steps);
    for m in 0..steps {
        let mut idx: Vec<usize> = (0..n_assets).collect();
        for i in (1..idx.len()).rev() {
            let j = (rng.gen::<u64>() % (i as u64 + 1)) as usize;
            idx.swap(i, j);
        }
        let mut active: Vec<usize> = idx[..n].to_vec();
        active.sort_unstable();

        let want_out = m % 2 == 1;
        let rank = if want_out { n - 1 } else { n };
        let sub = random_psd(n, rank, &mut rng);
        let mut cov = DMatrix::zeros(n_assets, n_assets);
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                cov[(i, j)] = sub[(a, b)];
            }
        }

        let v = DMatrix::from_fn(n, 1, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let mut a_sub = &sub * v;
        if want_out {
            // add a kernel direction of the masked covariance
            let eig = sub.clone().symmetric_eigen();
            let kmin = (0..n)
                .min_by(|&a, &b| {
                    eig.eigenvalues[a]
                        .partial_cmp(&eig.eigenvalues[b])
                        .unwrap()
                })
                .unwrap();
            let kern = eig.eigenvectors.column(kmin);
            for r in 0..n {
                a_sub[(r, 0)] += kern[r];
            }
        }
        let mut at = vec![0.0; n_assets];
        for (r, &i) in active.iter().enumerate() {
            at[i] = a_sub[(r, 0)];
        }
        alpha_tilde.push(at);
        active_v.push(active);
        covs.push(cov);
        expect_in_range.push(!want_out);
    }
    (
        CensoredCharacteristics {
            alpha_tilde,
            active: active_v,
            cov: Series::PerStep(covs),
            d_o: vec![1.0 / steps as f64; steps],
            n_assets,
        },
        expect_in_range,
    )
}

#[test]
fn criterion_03_numeraire_algebra() {
    let started = Instant::now();
    let (cc, expect_in_range) = synthetic_censored(400, 6, 3, 303);
    let res = numeraire_portfolio(&cc, 1e-10).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(304);
    let mut worst_resid = 0.0f64;
    for m in 0..cc.steps() {
        assert_eq!(
            res.range_ok[m], expect_in_range[m],
            "range verdict wrong at step {m}"
        );
        if res.range_ok[m] {
            let rho: Vec<f64> = (0..6).map(|i| res.weights.w[i][m]).collect();
            let crho = cc.cov_tilde_times(m, &rho);
            let resid: f64 = (0..6)
                .map(|i| (crho[i] - cc.alpha_tilde[m][i]).powi(2))
                .sum::<f64>()
                .sqrt();
            let na: f64 = cc.alpha_tilde[m].iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(
                resid <= 1e-10 * na,
                "residual {resid:.2e} vs 1e-10 * {na:.2e} at step {m}"
            );
            worst_resid = worst_resid.max(resid / na);
        }
    }

    // growth supremum: no masked vector beats the maximal growth rate
    let chars = LocalCharacteristics {
        alpha: Series::PerStep(cc.alpha_tilde.clone()),
        cov: cc.cov.clone(),
        d_o: cc.d_o.clone(),
        n_assets: 6,
    };
    let rep = growth_report(&chars, &cc, &GrowthConfig::default()).unwrap();
    for m in 0..cc.steps() {
        if !rep.range_ok[m] {
            continue;
        }
        let g = rep.g_tilde[m];
        for _ in 0..100 {
            let mut p = vec![0.0; 6];
            for &i in &cc.active[m] {
                p[i] = 3.0 * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            let pa: f64 = (0..6).map(|i| p[i] * cc.alpha_tilde[m][i]).sum();
            let quad = cc.quad_form(m, &p);
            assert!(
                pa - 0.5 * quad <= g + 1e-10,
                "masked vector beats the maximal growth rate at step {m}"
            );
        }
    }
    done(
        "criterion 3: numeraire algebra and growth supremum",
        started,
        &format!("max in-range relative residual {worst_resid:.2e}"),
    );
}

fn capm_test_spec() -> ModelSpec {
    ModelSpec::Gbm {
        initial_prices: vec![130.0, 118.0, 106.0, 94.0, 82.0],
        drift: vec![0.05, 0.03, 0.04, 0.02, 0.01],
        vol: VolSpec::Diagonal(vec![0.2, 0.25, 0.3, 0.22, 0.28]),
    }
}

#[test]
fn criterion_04_supermartingale_monte_carlo() {
    let started = Instant::now();
    let spec = capm_test_spec();
    let grid = TimeGrid::uniform(1.0, 1000).unwrap();
    let n = 3usize;
    let n_paths = 20_000usize;

    let spec_rho = spec.clone();
    let rho_rule = move |ctx: &PathContext| {
        let chars = analytic_characteristics(&spec_rho, ctx.path, ctx.rv)?;
        let cc = censor(&chars, ctx.rv)?;
        Ok(numeraire_portfolio(&cc, 1e-8)?.weights)
    };

    let mut rng = ChaCha12Rng::seed_from_u64(404);
    let mut tests: Vec<(String, Box<PortfolioRule>)> = Vec::new();
    for j in 0..10 {
        let xi = sample_simplex(n, &mut rng);
        tests.push((
            format!("rank-dirichlet-{j}"),
            Box::new(move |ctx: &PathContext| Ok(WeightPath::from_rank_weights(&xi, ctx.rv))),
        ));
    }

    let report = supermartingale_test(&spec, &grid, n, 405, n_paths, &rho_rule, &tests).unwrap();
    for row in &report.rows {
        assert!(
            row.pass,
            "true numeraire failed for {}: mean {} se {}",
            row.id, row.mean, row.se
        );
    }

    // deliberately wrong numeraire: +0.5 on the top-ranked asset, -0.5 on
    // the second; some test portfolio must now beat it detectably
    let spec_bad = spec.clone();
    let bad_rule = move |ctx: &PathContext| {
        let chars = analytic_characteristics(&spec_bad, ctx.path, ctx.rv)?;
        let cc = censor(&chars, ctx.rv)?;
        let mut w = numeraire_portfolio(&cc, 1e-8)?.weights;
        for m in 0..w.steps() {
            w.w[ctx.rv.p[0][m]][m] += 0.5;
            w.w[ctx.rv.p[1][m]][m] -= 0.5;
        }
        Ok(w)
    };
    let mut rng = ChaCha12Rng::seed_from_u64(404);
    let mut tests_bad: Vec<(String, Box<PortfolioRule>)> = Vec::new();
    for j in 0..10 {
        let xi = sample_simplex(n, &mut rng);
        tests_bad.push((
            format!("rank-dirichlet-{j}"),
            Box::new(move |ctx: &PathContext| Ok(WeightPath::from_rank_weights(&xi, ctx.rv))),
        ));
    }
    let bad = supermartingale_test(&spec, &grid, n, 405, n_paths, &bad_rule, &tests_bad).unwrap();
    let failures = bad.rows.iter().filter(|r| !r.pass).count();
    assert!(
        failures > 0,
        "perturbed numeraire was not rejected by any test portfolio: {:?}",
        bad.rows
            .iter()
            .map(|r| (r.mean, r.se))
            .collect::<Vec<_>>()
    );
    done(
        "criterion 4: supermartingale Monte Carlo (2e4 paths)",
        started,
        &format!("true numeraire passed 10/10, perturbed rejected by {failures}/10"),
    );
}

#[test]
fn criterion_05_leakage_identity() {
    let started = Instant::now();
    let spec = ModelSpec::Gbm {
        initial_prices: vec![120.0, 100.0, 99.0],
        drift: vec![0.0; 3],
        vol: VolSpec::Diagonal(vec![0.3; 3]),
    };
    // finest grid dt = 2.5e-5; factors give the schedule {4e-4, 1e-4, 2.5e-5}
    let fine_grid = TimeGrid::uniform(1.0, 40_000).unwrap();
    let n_paths = 24usize;
    let factors = [16usize, 4, 1];
    let gaps: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|j| {
            let fine = simulate_stream(&spec, &fine_grid, 505, j).unwrap();
            factors
                .iter()
                .map(|&f| {
                    let path = fine.subsample(f).unwrap();
                    let (rv, tv) = rank_path(&path, 2).unwrap();
                    tilde_mu_wealth(&path, &rv, &tv).unwrap().rel_gap
                })
                .collect()
        })
        .collect();
    let means: Vec<f64> = (0..3)
        .map(|l| gaps.iter().map(|row| row[l]).sum::<f64>() / n_paths as f64)
        .collect();
    let dts = [4e-4, 1e-4, 2.5e-5];
    assert!(
        means[1] <= 0.01,
        "relative gap {} at dt=1e-4 exceeds 1%",
        means[1]
    );
    let slope = {
        let lx: Vec<f64> = dts.iter().map(|v: &f64| v.ln()).collect();
        let ly: Vec<f64> = means.iter().map(|v| v.ln()).collect();
        let mx = lx.iter().sum::<f64>() / 3.0;
        let my = ly.iter().sum::<f64>() / 3.0;
        let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        num / den
    };
    assert!(
        (0.3..=0.7).contains(&slope),
        "refinement slope {slope} outside [0.3, 0.7]; gaps {means:?}"
    );
    done(
        "criterion 5: leakage identity",
        started,
        &format!("gap at dt=1e-4: {:.2e}, slope {slope:.3}", means[1]),
    );
}

#[test]
fn criterion_06_master_formula_topn() {
    let started = Instant::now();
    let spec = ModelSpec::Gbm {
        initial_prices: vec![115.0, 108.0, 101.0, 94.0, 87.0],
        drift: vec![0.0; 5],
        vol: VolSpec::Diagonal(vec![0.3; 5]),
    };
    let g = Diversity::new(0.5, 3).unwrap();
    let fine_grid = TimeGrid::uniform(1.0, 40_000).unwrap();
    let n_paths = 16usize;
    let factors = [16usize, 4, 1];
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|j| {
            let fine = simulate_stream(&spec, &fine_grid, 606, j).unwrap();
            let mut gaps = Vec::new();
            let mut lhss = Vec::new();
            for &f in &factors {
                let path = fine.subsample(f).unwrap();
                let (rv, tv) = rank_path(&path, 3).unwrap();
                let rep =
                    open_markets::fgp::verify_master(&g, &path, &rv, &tv, MasterMode::TopN)
                        .unwrap();
                gaps.push(rep.max_abs_gap);
                lhss.push(rep.max_abs_lhs);
            }
            (gaps, lhss)
        })
        .collect();
    let mean_gap: Vec<f64> = (0..3)
        .map(|l| rows.iter().map(|r| r.0[l]).sum::<f64>() / n_paths as f64)
        .collect();
    let mean_lhs: Vec<f64> = (0..3)
        .map(|l| rows.iter().map(|r| r.1[l]).sum::<f64>() / n_paths as f64)
        .collect();
    let ratio = mean_gap[1] / mean_lhs[1];
    assert!(
        ratio <= 0.05,
        "master-formula gap ratio {ratio} exceeds 5% at dt=1e-4"
    );
    let dts = [4e-4, 1e-4, 2.5e-5];
    let slope = {
        let lx: Vec<f64> = dts.iter().map(|v: &f64| v.ln()).collect();
        let ly: Vec<f64> = mean_gap.iter().map(|v| v.ln()).collect();
        let mx = lx.iter().sum::<f64>() / 3.0;
        let my = ly.iter().sum::<f64>() / 3.0;
        let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        num / den
    };
    assert!(
        (0.3..=0.7).contains(&slope),
        "refinement slope {slope} outside [0.3, 0.7]; gaps {mean_gap:?}"
    );
    done(
        "criterion 6: top-n master formula (diversity p=0.5)",
        started,
        &format!("gap ratio {ratio:.4}, slope {slope:.3}"),
    );
}

#[test]
fn criterion_07_fgp_identities() {
    let started = Instant::now();
    let spec = ModelSpec::Gbm {
        initial_prices: vec![110.0, 100.0, 90.0, 80.0],
        drift: vec![0.0; 4],
        vol: VolSpec::Diagonal(vec![0.3; 4]),
    };
    let grid = TimeGrid::uniform(1.0, 2000).unwrap();
    let path = simulate_stream(&spec, &grid, 707, 0).unwrap();
    let (rv, tv) = rank_path(&path, 2).unwrap();

    // topn_sum generates the top-n market portfolio to 1e-12
    let g = TopNSum::new(2);
    let w = generate_ranked(&g, &tv, &rv).unwrap();
    let mu = WeightPath::top_n_market(&tv);
    let mut worst = 0.0f64;
    for i in 0..4 {
        for m in 0..w.steps() {
            worst = worst.max((w.w[i][m] - mu.w[i][m]).abs());
        }
    }
    assert!(worst <= 1e-12, "topn_sum deviates from mu-tilde by {worst:.2e}");

    // cr reproduces constant rank weights exactly
    let xi = [0.55, 0.45];
    let cr = Geometric::constant_rebalanced(&xi).unwrap();
    let w = generate_ranked(&cr, &tv, &rv).unwrap();
    for m in 0..w.steps() {
        assert_eq!(w.w[rv.p[0][m]][m], 0.55);
        assert_eq!(w.w[rv.p[1][m]][m], 0.45);
    }

    // analytic derivatives of every builtin match finite differences
    let gens: Vec<Box<dyn GeneratingFunction>> = vec![
        Box::new(TopNSum::new(3)),
        Box::new(Diversity::new(0.5, 3).unwrap()),
        Box::new(Geometric::new(vec![0.2, 0.3, 0.5]).unwrap()),
        Box::new(WeightedArithmetic::new(vec![1.0, 2.0, 0.5]).unwrap()),
        Box::new(Geometric::constant_rebalanced(&[0.7, 0.3]).unwrap()),
    ];
    let mut worst_fd = 0.0f64;
    for g in &gens {
        worst_fd = worst_fd.max(max_derivative_fd_error(g.as_ref(), 4, 100, 708));
    }
    assert!(worst_fd <= 1e-6, "finite-difference error {worst_fd:.2e}");
    done(
        "criterion 7: generating function identities",
        started,
        &format!("mu-tilde deviation {worst:.1e}, fd error {worst_fd:.1e}"),
    );
}

#[test]
fn criterion_08_universal_identity() {
    let started = Instant::now();
    let spec = ModelSpec::Gbm {
        initial_prices: vec![110.0, 100.0, 90.0, 80.0],
        drift: vec![0.03, 0.01, 0.02, 0.0],
        vol: VolSpec::Diagonal(vec![0.25, 0.3, 0.2, 0.35]),
    };
    let grid = TimeGrid::uniform(1.0, 10_000).unwrap();
    let path = simulate_stream(&spec, &grid, 808, 0).unwrap();
    let (rv, _) = rank_path(&path, 2).unwrap();
    let inc = increments(&path);
    let u = universal_wealth(&rv, &inc, 2, 1000, 809).unwrap();
    assert!(
        u.identity_gap <= 5e-3,
        "identity gap {} exceeds 0.5%",
        u.identity_gap
    );

    // n = 1 degeneracy: the simplex is one point, both routes equal X_{e1}
    let (rv1, _) = rank_path(&path, 1).unwrap();
    let u1 = universal_wealth(&rv1, &inc, 1, 100, 810).unwrap();
    let e1 = SimplexPoint::new(vec![1.0], 4).unwrap();
    let direct = open_markets::universal::cr_wealth(&e1, &rv1, &inc).unwrap();
    for k in 0..direct.x.len() {
        assert!((u1.averaged.x[k] - direct.x[k]).abs() <= 1e-12 * direct.x[k]);
        assert!((u1.from_weights.x[k] - direct.x[k]).abs() <= 1e-12 * direct.x[k]);
    }
    done(
        "criterion 8: universal wealth identity",
        started,
        &format!("identity gap {:.2e}", u.identity_gap),
    );
}

#[test]
fn criterion_09_asymptotic_gap() {
    let started = Instant::now();
    let spec = ModelSpec::Atlas {
        initial_prices: vec![100.0, 90.0, 80.0, 70.0],
        rank_drift: vec![0.0, 0.0, 0.12, 0.35],
        rank_vol: vec![0.25, 0.25, 0.25, 0.25],
    };
    let grid = TimeGrid::uniform(20.0, 4000).unwrap();
    let horizons = [1.0, 5.0, 10.0, 20.0];
    let config = GapConfig {
        samples: 500,
        grid_resolution: 200,
        delta: 1e-4,
    };
    let rep = asymptotic_gap(&spec, &grid, 2, &horizons, 500, 909, &config).unwrap();

    for j in 0..4 {
        assert!(
            rep.gap_mean[j] >= -3.0 * rep.gap_se[j],
            "gap below -3 se at horizon {}",
            horizons[j]
        );
    }
    for j in 0..3 {
        assert!(
            rep.gap_mean[j + 1] < rep.gap_mean[j] + rep.diff_se[j],
            "gap failed to decrease from T={} to T={} ({} -> {}, diff se {})",
            horizons[j],
            horizons[j + 1],
            rep.gap_mean[j],
            rep.gap_mean[j + 1],
            rep.diff_se[j]
        );
    }
    assert!(
        rep.gap_mean[3] < 0.5 * rep.gap_mean[0],
        "final gap {} not below half the initial {}",
        rep.gap_mean[3],
        rep.gap_mean[0]
    );
    done(
        "criterion 9: universal asymptotic gap trend",
        started,
        &format!(
            "gaps {:?} (mu_n floor {:.3e})",
            rep.gap_mean
                .iter()
                .map(|v| (v * 1e4).round() / 1e4)
                .collect::<Vec<_>>(),
            rep.mu_n_min
        ),
    );
}

#[test]
fn criterion_10_capm_recovery() {
    let started = Instant::now();
    // single-factor market: strong common factor, weak idiosyncratic noise
    let n = 6usize;
    let betas = [1.2, 1.0, 0.8, 0.6, 0.9, 0.7];
    let sigma_f = 0.3;
    let idio = 0.05;
    let loadings: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n + 1];
            row[0] = sigma_f * betas[i];
            row[i + 1] = idio;
            row
        })
        .collect();
    let vol = VolSpec::Matrix(loadings);
    let cov_rows = vol.covariance();
    let cov = DMatrix::from_fn(n, n, |i, j| cov_rows[i][j]);
    let spec = ModelSpec::Gbm {
        initial_prices: vec![240.0, 200.0, 170.0, 140.0, 80.0, 60.0],
        drift: vec![0.02; n],
        vol,
    };
    let grid = TimeGrid::uniform(1.0, 10_000).unwrap();
    let path = simulate_stream(&spec, &grid, 1010, 0).unwrap();
    let top = 4usize;
    let (rv, tv) = rank_path(&path, top).unwrap();
    let mu = WeightPath::top_n_market(&tv);
    let steps = grid.steps();

    // synthetic drift lambda * censored-cov * mu keeps the market in the CAPM
    let lambda = 2.0;
    let alpha: Vec<Vec<f64>> = (0..steps)
        .map(|m| {
            (0..n)
                .map(|i| {
                    if rv.mask[i][m] {
                        lambda
                            * (0..n)
                                .filter(|&j| rv.mask[j][m])
                                .map(|j| cov[(i, j)] * mu.w[j][m])
                                .sum::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let chars = LocalCharacteristics {
        alpha: Series::PerStep(alpha),
        cov: Series::Constant(cov.clone()),
        d_o: (0..steps).map(|k| grid.dt(k)).collect(),
        n_assets: n,
    };
    let cc = censor(&chars, &rv).unwrap();
    let fit = capm_fit(&cc, &mu, &CapmConfig::default()).unwrap();
    assert!(fit.verdict_a, "condition (A) violated: {}", fit.max_violation_a);
    let b_err = fit
        .b
        .iter()
        .map(|b| (b - lambda).abs() / lambda)
        .fold(0.0f64, f64::max);
    assert!(b_err <= 0.01, "leverage error {b_err}");

    // realized beta from path increments vs the model's time-averaged beta
    let inc = increments(&path);
    let censored = censored_increments(&inc, &rv).unwrap();
    let mut num = vec![0.0; n];
    let mut den = 0.0;
    for m in 0..steps {
        let dm: f64 = (0..n).map(|i| mu.w[i][m] * censored.dr[i][m]).sum();
        den += dm * dm;
        for i in 0..n {
            num[i] += censored.dr[i][m] * dm;
        }
    }
    let mut sq_sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        // compare only assets that stayed in the top set throughout
        if (0..steps).all(|m| rv.mask[i][m]) {
            let realized = num[i] / den;
            let truth: f64 = (0..steps).map(|m| fit.beta[i][m]).sum::<f64>() / steps as f64;
            sq_sum += (realized - truth) * (realized - truth);
            count += 1;
        }
    }
    assert!(count >= 2, "need at least two permanent members");
    let rmse = (sq_sum / count as f64).sqrt();
    assert!(rmse <= 0.02, "realized beta rmse {rmse}");

    let resid = residual_orthogonality(&censored, &mu, &fit.beta).unwrap();
    assert!(
        resid.max_ratio <= 0.01,
        "residual covariation ratio {}",
        resid.max_ratio
    );

    // non-CAPM counterexample: independent assets, unequal drifts
    let flat_grid = TimeGrid::uniform(1.0, 4).unwrap();
    let flat = MarketPath::new(
        flat_grid,
        vec![vec![100.0; 5], vec![90.0; 5], vec![10.0; 5]],
    )
    .unwrap();
    let (rv2, tv2) = rank_path(&flat, 2).unwrap();
    let chars2 = LocalCharacteristics {
        alpha: Series::Constant(vec![1.0, 0.0, 0.0]),
        cov: Series::Constant(DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                0.04
            } else {
                0.0
            }
        })),
        d_o: vec![0.25; 4],
        n_assets: 3,
    };
    let cc2 = censor(&chars2, &rv2).unwrap();
    let fit2 = capm_fit(&cc2, &WeightPath::top_n_market(&tv2), &CapmConfig::default()).unwrap();
    assert!(!fit2.verdict_a, "counterexample wrongly accepted");
    done(
        "criterion 10: CAPM recovery",
        started,
        &format!(
            "b error {b_err:.1e}, beta rmse {rmse:.2e}, residual {:.2e}",
            resid.max_ratio
        ),
    );
}

#[test]
fn criterion_11_viability_witnesses() {
    let started = Instant::now();
    // case A: deterministic drift with zero covariance escapes the range
    let bad = ModelSpec::Gbm {
        initial_prices: vec![100.0, 50.0],
        drift: vec![0.5, 0.0],
        vol: VolSpec::Diagonal(vec![0.0, 0.0]),
    };
    let grid = TimeGrid::uniform(1.0, 10_000).unwrap();
    let path = simulate_stream(&bad, &grid, 1111, 0).unwrap();
    let (rv, _) = rank_path(&path, 1).unwrap();
    let chars = analytic_characteristics(&bad, &path, &rv).unwrap();
    let cc = censor(&chars, &rv).unwrap();
    let rep = growth_report(&chars, &cc, &GrowthConfig::default()).unwrap();
    assert_eq!(rep.verdict, Viability::NonviableCaseA);
    let witness = rep.witness.as_ref().expect("case A must produce a witness");
    assert!(witness.predicted_qv <= 1e-12);
    let inc = increments(&path);
    let censored = censored_increments(&inc, &rv).unwrap();
    let diag = witness_diagnostics(witness, &censored).unwrap();
    assert!(diag.nondecreasing, "witness wealth decreased");
    assert!(
        diag.martingale_qv <= 1e-12,
        "witness martingale qv {}",
        diag.martingale_qv
    );
    assert!(*diag.wealth.last().unwrap() > 0.0);

    // benign GBM is viable
    let good = capm_test_spec();
    let grid = TimeGrid::uniform(1.0, 1000).unwrap();
    let path = simulate_stream(&good, &grid, 1112, 0).unwrap();
    let (rv, _) = rank_path(&path, 3).unwrap();
    let chars = analytic_characteristics(&good, &path, &rv).unwrap();
    let cc = censor(&chars, &rv).unwrap();
    let rep = growth_report(&chars, &cc, &GrowthConfig::default()).unwrap();
    assert_eq!(rep.verdict, Viability::Viable);
    assert!(rep.gap_nondecreasing);
    assert!(rep.gap.iter().all(|&v| v >= -1e-12));
    done(
        "criterion 11: viability witnesses",
        started,
        &format!(
            "case-A witness qv {:.1e}, terminal wealth {:.4}",
            diag.martingale_qv,
            diag.wealth.last().unwrap()
        ),
    );
}

#[test]
fn criterion_12_determinism() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.cfg");
    let run = |out: &str| {
        let cfg = format!(
            "
[experiment]
kind = masterformula
output = {}
seed = 42
ensemble = 2
tolerance = 0.2

[model]
kind = gbm
assets = 4
top = 2
initial = 100, 92, 84, 76
drift = 0, 0, 0, 0
vol = 0.3, 0.3, 0.3, 0.3

[grid]
horizon = 0.25
dt = 0.00025

[masterformula]
generator = diversity
p = 0.5
",
            dir.path().join(out).display()
        );
        std::fs::write(&config_path, cfg).unwrap();
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_openmkt"))
            .arg("run")
            .arg(&config_path)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "run failed");
    };
    run("a");
    run("b");
    for name in ["master_formula.csv", "refinement.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // the simulate subcommand is bit-stable too
    let sim_cfg = dir.path().join("sim.cfg");
    let write_sim = |out: &str| {
        std::fs::write(
            &sim_cfg,
            format!(
                "
[experiment]
kind = simulate
output = {}
seed = 7
ensemble = 3

[model]
kind = atlas
assets = 3
top = 1
initial = 100, 90, 80
rank_drift = 0, 0, 0.4
rank_vol = 0.2, 0.2, 0.2

[grid]
horizon = 1.0
dt = 0.001
",
                dir.path().join(out).display()
            ),
        )
        .unwrap();
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_openmkt"))
            .arg("simulate")
            .arg(&sim_cfg)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
    };
    write_sim("sa");
    write_sim("sb");
    for j in 0..3 {
        let a = std::fs::read(dir.path().join("sa").join(format!("path_{j}.csv"))).unwrap();
        let b = std::fs::read(dir.path().join("sb").join(format!("path_{j}.csv"))).unwrap();
        assert_eq!(a, b, "path_{j}.csv differs between identical runs");
    }
    done(
        "criterion 12: determinism of artifacts",
        started,
        "byte-identical CSVs across repeated runs",
    );
}
