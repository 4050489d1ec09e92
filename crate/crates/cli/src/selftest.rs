//! Fast invariant fixtures runnable from the command line. A trimmed-down
//! version of the acceptance suite, meant to finish in seconds.

use open_markets::characteristics::{pseudo_inverse, PINV_TOL};
use open_markets::fgp::{
    generate_ranked, max_balance_violation, max_derivative_fd_error, max_homogeneity_violation,
    Diversity, GeneratingFunction, Geometric, TopNSum, WeightedArithmetic,
};
use open_markets::grid::TimeGrid;
use open_markets::local_time::{local_time, Scheme};
use open_markets::market::{simulate, simulate_stream};
use open_markets::model::{ModelSpec, VolSpec};
use open_markets::portfolio::WeightPath;
use open_markets::ranks::rank_path;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    // orthogonal factor from QR of a Gaussian matrix
    let a = DMatrix::from_fn(n, n, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let qr = a.qr();
    let q = qr.q();
    let mut lam = DMatrix::zeros(n, n);
    for k in 0..rank {
        lam[(k, k)] = 0.1 + 1.9 * rng.gen::<f64>();
    }
    &q * lam * q.transpose()
}

pub fn run() -> Vec<Check> {
    let mut checks = Vec::new();

    // rank invariants on a short ensemble
    {
        let spec = ModelSpec::Gbm {
            initial_prices: vec![100.0, 96.0, 92.0, 88.0],
            drift: vec![0.0; 4],
            vol: VolSpec::Diagonal(vec![0.3; 4]),
        };
        let grid = TimeGrid::uniform(1.0, 200).unwrap();
        let mut ok = true;
        let mut worst: f64 = 0.0;
        for j in 0..50 {
            let path = simulate_stream(&spec, &grid, 1, j).unwrap();
            let (rv, tv) = rank_path(&path, 2).unwrap();
            for k in 0..path.len() {
                for i in 0..4 {
                    ok &= rv.p[rv.u[i][k]][k] == i;
                }
                for r in 0..3 {
                    ok &= rv.ranked[r][k] >= rv.ranked[r + 1][k];
                }
                let mu_sum: f64 = (0..4).map(|i| tv.mu[i][k]).sum();
                let mut_sum: f64 = (0..4).map(|i| tv.mu_tilde[i][k]).sum();
                worst = worst.max((mu_sum - 1.0).abs()).max((mut_sum - 1.0).abs());
            }
        }
        checks.push(Check {
            name: "rank permutations and weight sums",
            pass: ok && worst <= 1e-12,
            detail: format!("max weight-sum deviation {worst:.2e}"),
        });
    }

    // pseudo-inverse identities on random PSD matrices
    {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let n = 2 + (rng.gen::<u64>() % 5) as usize;
            let rank = (rng.gen::<u64>() % (n as u64 + 1)) as usize;
            let m = random_psd(n, rank, &mut rng);
            let p = pseudo_inverse(&m, PINV_TOL).unwrap();
            worst = worst.max((&m * &p * &m - &m).norm());
            worst = worst.max((&p * &m * &p - &p).norm());
            let proj = &m * &p;
            worst = worst.max((&proj * &proj - &proj).norm());
        }
        checks.push(Check {
            name: "pseudo-inverse identities",
            pass: worst <= 1e-10,
            detail: format!("max identity residual {worst:.2e}"),
        });
    }

    // generating function flags and derivatives
    {
        let gens: Vec<Box<dyn GeneratingFunction>> = vec![
            Box::new(TopNSum::new(3)),
            Box::new(Diversity::new(0.5, 3).unwrap()),
            Box::new(Geometric::new(vec![0.2, 0.3, 0.5]).unwrap()),
            Box::new(WeightedArithmetic::new(vec![1.0, 2.0, 0.5]).unwrap()),
        ];
        let mut worst: f64 = 0.0;
        for g in &gens {
            worst = worst.max(max_balance_violation(g.as_ref(), 5, 200, 3));
            worst = worst.max(max_homogeneity_violation(g.as_ref(), 5, &[0.5, 2.0], 200, 4));
            worst = worst.max(max_derivative_fd_error(g.as_ref(), 4, 10, 5) * 1e-2);
        }
        checks.push(Check {
            name: "generating function flags",
            pass: worst <= 1e-8,
            detail: format!("max violation {worst:.2e}"),
        });
    }

    // the top-n sum generator reproduces the top-n market portfolio
    {
        let spec = ModelSpec::Gbm {
            initial_prices: vec![100.0, 95.0, 90.0, 85.0],
            drift: vec![0.0; 4],
            vol: VolSpec::Diagonal(vec![0.25; 4]),
        };
        let grid = TimeGrid::uniform(0.5, 100).unwrap();
        let path = simulate(&spec, &grid, 7).unwrap();
        let (rv, tv) = rank_path(&path, 2).unwrap();
        let g = TopNSum::new(2);
        let w = generate_ranked(&g, &tv, &rv).unwrap();
        let mu = WeightPath::top_n_market(&tv);
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for m in 0..w.steps() {
                worst = worst.max((w.w[i][m] - mu.w[i][m]).abs());
            }
        }
        checks.push(Check {
            name: "top-n sum generator reproduces the top-n market",
            pass: worst <= 1e-12,
            detail: format!("max weight deviation {worst:.2e}"),
        });
    }

    // local time estimates are nondecreasing and vanish away from zero
    {
        let y: Vec<f64> = (0..200).map(|k| 1.0 + 0.01 * k as f64).collect();
        let flat = local_time(&y, Scheme::Tanaka).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut w = vec![0.0f64];
        for _ in 0..400 {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            w.push(w.last().unwrap() + 0.05 * z);
        }
        let lt = local_time(&w, Scheme::Tanaka).unwrap();
        let monotone = lt.l.windows(2).all(|p| p[1] >= p[0]);
        checks.push(Check {
            name: "local time estimator sanity",
            pass: flat.terminal() == 0.0 && monotone,
            detail: format!("flat terminal {}, brownian terminal {:.3}", flat.terminal(), lt.terminal()),
        });
    }

    // determinism of the simulator
    {
        let spec = ModelSpec::Atlas {
            initial_prices: vec![100.0, 90.0, 80.0],
            rank_drift: vec![0.0, 0.0, 0.4],
            rank_vol: vec![0.2, 0.2, 0.2],
        };
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let a = simulate(&spec, &grid, 13).unwrap();
        let b = simulate(&spec, &grid, 13).unwrap();
        checks.push(Check {
            name: "simulation determinism",
            pass: a.prices == b.prices,
            detail: "same seed reproduces identical paths".into(),
        });
    }

    checks
}
