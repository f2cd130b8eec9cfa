use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, Normal};
use segqc_core::mixed::fit_random_intercept;

struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    g: Vec<usize>,
}

fn simulate(seed: u64, groups: usize, per_group: usize, sigma_b2: f64) -> Dataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let e = Normal::new(0.0, 1.0).unwrap();
    let b = Normal::new(0.0, sigma_b2.sqrt()).unwrap();
    let (mut y, mut x, mut g) = (Vec::new(), Vec::new(), Vec::new());
    for grp in 0..groups {
        let bi = b.sample(&mut rng);
        for _ in 0..per_group {
            let xi = if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 };
            y.push(1.0 + 0.5 * xi + bi + e.sample(&mut rng));
            x.push(xi);
            g.push(grp);
        }
    }
    Dataset { y, x, g }
}

/// Profiled REML evaluated through the eigendecomposition of ZZᵀ.
struct SpectralOracle {
    d: DVector<f64>,
    xt: DMatrix<f64>,
    yt: DVector<f64>,
    n: usize,
    p: usize,
}

impl SpectralOracle {
    fn new(ds: &Dataset) -> Self {
        let n = ds.y.len();
        let groups = ds.g.iter().max().unwrap() + 1;
        let z = DMatrix::from_fn(n, groups, |i, j| if ds.g[i] == j { 1.0 } else { 0.0 });
        let eig = SymmetricEigen::new(&z * z.transpose());
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { ds.x[i] });
        let qt = eig.eigenvectors.transpose();
        SpectralOracle {
            d: eig.eigenvalues.map(|v: f64| v.max(0.0)),
            xt: &qt * x,
            yt: &qt * DVector::from_column_slice(&ds.y),
            n,
            p: 2,
        }
    }

    fn log_lik(&self, log_lambda: f64) -> f64 {
        let lambda = log_lambda.exp();
        let w = self.d.map(|d| 1.0 / (1.0 + lambda * d));
        let xw = DMatrix::from_fn(self.n, self.p, |i, j| self.xt[(i, j)] * w[i]);
        let a = self.xt.transpose() * &xw;
        let beta = a.clone().cholesky().unwrap().solve(&(xw.transpose() * &self.yt));
        let r = &self.yt - &self.xt * beta;
        let q: f64 = (0..self.n).map(|i| w[i] * r[i] * r[i]).sum();
        let dof = (self.n - self.p) as f64;
        let log_det_v: f64 = self.d.iter().map(|d| (1.0 + lambda * d).ln()).sum();
        -0.5 * (dof * (2.0 * std::f64::consts::PI * q / dof).ln() + dof + log_det_v + a.determinant().ln())
    }

    fn grid_argmax(&self, points: usize) -> f64 {
        (0..points)
            .map(|k| -6.0 + 12.0 * k as f64 / (points - 1) as f64)
            .map(|t| (t, self.log_lik(t)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }
}

/// Dense GLS: β = (XᵀV⁻¹X)⁻¹ XᵀV⁻¹y with V = I + λZZᵀ.
fn dense_gls(ds: &Dataset, lambda: f64) -> DVector<f64> {
    let n = ds.y.len();
    let v = DMatrix::from_fn(n, n, |i, j| (i == j) as u8 as f64 + if ds.g[i] == ds.g[j] { lambda } else { 0.0 });
    let vinv = v.try_inverse().unwrap();
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { ds.x[i] });
    let y = DVector::from_column_slice(&ds.y);
    let xtv = x.transpose() * vinv;
    (&xtv * &x).try_inverse().unwrap() * (xtv * y)
}

#[test]
fn lambda_matches_grid_oracle_and_beta_matches_gls() {
    for seed in 0..8u64 {
        let ds = simulate(seed, 10, 12, [0.0, 0.2, 1.0, 3.0][seed as usize % 4]);
        let fit = fit_random_intercept(&ds.y, &ds.g, &ds.x).unwrap();
        let oracle = SpectralOracle::new(&ds);
        let t_grid = oracle.grid_argmax(10_000);
        let rel = (fit.lambda - t_grid.exp()).abs() / t_grid.exp();
        assert!(rel < 0.01, "seed {seed}: {} vs {}", fit.lambda, t_grid.exp());
        assert!(oracle.log_lik(fit.lambda.ln()) >= oracle.log_lik(t_grid) - 1e-9);
        assert!((fit.reml_log_lik - oracle.log_lik(fit.lambda.ln())).abs() < 1e-6);
        let gls = dense_gls(&ds, fit.lambda);
        for k in 0..2 {
            assert!((fit.beta[k] - gls[k]).abs() < 1e-6);
        }
        assert!((fit.sigma_b2 - fit.lambda * fit.sigma_e2).abs() < 1e-12 * fit.sigma_e2.max(1.0));
        let p = statrs::function::erf::erfc(fit.wald_z.abs() / std::f64::consts::SQRT_2);
        assert!((fit.p_value - p).abs() < 1e-12);
    }
}

#[test]
fn shift_and_scale_invariance() {
    let ds = simulate(77, 10, 10, 0.8);
    let base = fit_random_intercept(&ds.y, &ds.g, &ds.x).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);

    let shifted: Vec<f64> = ds.y.iter().map(|v| v + 12.5).collect();
    let f = fit_random_intercept(&shifted, &ds.g, &ds.x).unwrap();
    assert!(close(f.beta[0], base.beta[0] + 12.5));
    assert!(close(f.beta[1], base.beta[1]));
    assert!(close(f.sigma_b2, base.sigma_b2) && close(f.sigma_e2, base.sigma_e2));
    assert!(close(f.wald_z, base.wald_z) && close(f.p_value, base.p_value));

    let s = 3.7;
    let scaled: Vec<f64> = ds.y.iter().map(|v| v * s).collect();
    let f = fit_random_intercept(&scaled, &ds.g, &ds.x).unwrap();
    assert!(close(f.beta[0], s * base.beta[0]) && close(f.beta[1], s * base.beta[1]));
    assert!(close(f.sigma_b2, s * s * base.sigma_b2) && close(f.sigma_e2, s * s * base.sigma_e2));
    assert!(close(f.wald_z, base.wald_z) && close(f.p_value, base.p_value));
}

#[test]
fn group_labels_do_not_matter() {
    let ds = simulate(5, 6, 5, 1.0);
    let a = fit_random_intercept(&ds.y, &ds.g, &ds.x).unwrap();
    let names: Vec<String> = ds.g.iter().map(|g| format!("patient-{}", 100 - g)).collect();
    let b = fit_random_intercept(&ds.y, &names, &ds.x).unwrap();
    for k in 0..2 {
        assert!((a.beta[k] - b.beta[k]).abs() < 1e-12);
    }
    assert!((a.lambda - b.lambda).abs() < 1e-9 * a.lambda);
}
