//! Random-intercept linear mixed model fitted by REML.
//!
//! Model: `y = Xβ + b[group] + ε`, `b ~ N(0, σ_b²)`, `ε ~ N(0, σ_e²)`.
//!
//! With `λ = σ_b²/σ_e²` the marginal covariance is `σ_e²·H(λ)` where `H` is
//! block diagonal with blocks `I + λ·11ᵀ`. Each block has the closed-form
//! inverse `I − w·11ᵀ`, `w = λ/(1 + nλ)`, and determinant `1 + nλ`, so the
//! profiled REML criterion and its derivative only need per-group sums.
//!
//! The criterion is maximised over `t = ln λ ∈ [−6, 6]`: a coarse scan
//! brackets the optimum, golden-section search narrows it to width 1e-8, and
//! a bisection on the analytic score polishes the root so that the estimate
//! does not depend on floating-point noise in the criterion itself.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::two_sided_normal_p;

pub const LOG_LAMBDA_MIN: f64 = -6.0;
pub const LOG_LAMBDA_MAX: f64 = 6.0;
pub const GOLDEN_TOLERANCE: f64 = 1e-8;
const COARSE_POINTS: usize = 121;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MixedModelFit {
    pub beta: Vec<f64>,
    pub beta_se: Vec<f64>,
    pub sigma_b2: f64,
    pub sigma_e2: f64,
    /// σ_b² / σ_e².
    pub lambda: f64,
    pub reml_log_lik: f64,
    /// Wald statistic of the tested coefficient.
    pub wald_z: f64,
    pub p_value: f64,
    /// Index into `beta` of the tested coefficient.
    pub tested: usize,
    /// True when ln λ̂ sits on the search boundary.
    pub at_boundary: bool,
    pub n_obs: usize,
    pub n_groups: usize,
}

/// Fits `y = β0 + β1·x + b[group] + ε` and tests β1.
pub fn fit_random_intercept<G: Ord + Clone>(y: &[f64], group: &[G], x: &[f64]) -> Result<MixedModelFit> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!("x has {} entries, y has {}", x.len(), y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("x contains non-finite values".into()));
    }
    if x.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegenerateDesign("condition vector x is constant".into()));
    }
    let columns = vec![vec![1.0; y.len()], x.to_vec()];
    fit_with_design(y, group, &columns, 1)
}

/// Fits an arbitrary fixed-effect design given as columns and reports the
/// Wald test of column `tested`.
pub fn fit_with_design<G: Ord + Clone>(
    y: &[f64],
    group: &[G],
    columns: &[Vec<f64>],
    tested: usize,
) -> Result<MixedModelFit> {
    let problem = Problem::new(y, group, columns)?;
    if tested >= problem.p {
        return Err(Error::Domain(format!("tested column {tested} out of range")));
    }
    let t_hat = problem.maximize()?;
    problem.fit_at(t_hat, tested)
}

/// Per-group sufficient statistics.
struct GroupStats {
    n: f64,
    members: Vec<usize>,
    /// Column sums of the group's design rows.
    s: DVector<f64>,
    /// Sum of y.
    t: f64,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
}

struct Problem {
    y: Vec<f64>,
    /// Row-major design, n × p.
    x: DMatrix<f64>,
    groups: Vec<GroupStats>,
    n: usize,
    p: usize,
}

struct Evaluation {
    log_lik: f64,
    beta: DVector<f64>,
    rss: f64,
    p_inv: DMatrix<f64>,
    /// Per-group residual sums.
    r_sums: Vec<f64>,
}

impl Problem {
    fn new<G: Ord + Clone>(y: &[f64], group: &[G], columns: &[Vec<f64>]) -> Result<Self> {
        let n = y.len();
        let p = columns.len();
        if group.len() != n || columns.iter().any(|c| c.len() != n) {
            return Err(Error::Domain("y, group and design lengths differ".into()));
        }
        if n < 3 {
            return Err(Error::Domain(format!("need at least 3 observations, got {n}")));
        }
        if p == 0 || n <= p {
            return Err(Error::DegenerateDesign(format!("{n} observations for {p} coefficients")));
        }
        if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite input".into()));
        }

        let mut index: BTreeMap<&G, Vec<usize>> = BTreeMap::new();
        for (i, g) in group.iter().enumerate() {
            index.entry(g).or_default().push(i);
        }
        if index.len() < 2 {
            return Err(Error::Domain("need at least 2 distinct groups".into()));
        }

        let x = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
        let groups = index
            .into_values()
            .map(|members| {
                let mut s = DVector::zeros(p);
                let mut xtx = DMatrix::zeros(p, p);
                let mut xty = DVector::zeros(p);
                let mut t = 0.0;
                for &i in &members {
                    let row = x.row(i).transpose();
                    s += &row;
                    xtx += &row * row.transpose();
                    xty += &row * y[i];
                    t += y[i];
                }
                GroupStats {
                    n: members.len() as f64,
                    members,
                    s,
                    t,
                    xtx,
                    xty,
                }
            })
            .collect();

        let problem = Problem {
            y: y.to_vec(),
            x,
            groups,
            n,
            p,
        };
        // Rank check on the ordinary least-squares cross product.
        let xtx = problem.x.transpose() * &problem.x;
        if xtx.clone().cholesky().is_none() || xtx.determinant().abs() < 1e-12 * xtx.norm().powi(p as i32) {
            return Err(Error::DegenerateDesign("design matrix is rank deficient".into()));
        }
        Ok(problem)
    }

    fn evaluate(&self, log_lambda: f64) -> Result<Evaluation> {
        let lambda = log_lambda.exp();
        let mut xhx = DMatrix::zeros(self.p, self.p);
        let mut xhy = DVector::zeros(self.p);
        let mut log_det_h = 0.0;
        for g in &self.groups {
            let w = lambda / (1.0 + g.n * lambda);
            xhx += &g.xtx - &g.s * g.s.transpose() * w;
            xhy += &g.xty - &g.s * (w * g.t);
            log_det_h += (g.n * lambda).ln_1p();
        }
        let chol = xhx
            .clone()
            .cholesky()
            .ok_or_else(|| Error::DegenerateDesign("XᵀH⁻¹X is not positive definite".into()))?;
        let beta = chol.solve(&xhy);
        let p_inv = chol.inverse();
        let log_det_p = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();

        let fitted = &self.x * &beta;
        let mut rss = 0.0;
        let mut r_sums = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let w = lambda / (1.0 + g.n * lambda);
            let mut sum = 0.0;
            let mut sq = 0.0;
            for &i in &g.members {
                let r = self.y[i] - fitted[i];
                sum += r;
                sq += r * r;
            }
            rss += sq - w * sum * sum;
            r_sums.push(sum);
        }
        let dof = (self.n - self.p) as f64;
        let rss = rss.max(f64::MIN_POSITIVE);
        let log_lik = -0.5
            * (dof * (1.0 + (2.0 * std::f64::consts::PI * rss / dof).ln()) + log_det_h + log_det_p);
        Ok(Evaluation {
            log_lik,
            beta,
            rss,
            p_inv,
            r_sums,
        })
    }

    /// d(REML)/d(ln λ).
    fn score(&self, log_lambda: f64) -> Result<f64> {
        let lambda = log_lambda.exp();
        let e = self.evaluate(log_lambda)?;
        let dof = (self.n - self.p) as f64;
        let mut d_rss_term = 0.0;
        let mut d_det_h = 0.0;
        let mut d_det_p = 0.0;
        for (g, r_sum) in self.groups.iter().zip(&e.r_sums) {
            let c = 1.0 / (1.0 + g.n * lambda).powi(2);
            d_rss_term += c * r_sum * r_sum;
            d_det_h += g.n / (1.0 + g.n * lambda);
            d_det_p += c * (g.s.transpose() * &e.p_inv * &g.s)[(0, 0)];
        }
        let d_lambda = -0.5 * (-dof * d_rss_term / e.rss + d_det_h - d_det_p);
        Ok(lambda * d_lambda)
    }

    fn objective(&self, t: f64) -> Result<f64> {
        self.evaluate(t).map(|e| e.log_lik)
    }

    fn maximize(&self) -> Result<f64> {
        let step = (LOG_LAMBDA_MAX - LOG_LAMBDA_MIN) / (COARSE_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..COARSE_POINTS)
            .map(|k| LOG_LAMBDA_MIN + step * k as f64)
            .collect();
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (k, &t) in grid.iter().enumerate() {
            let v = self.objective(t)?;
            if v > best_val {
                best_val = v;
                best = k;
            }
        }
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(COARSE_POINTS - 1)];
        let t_golden = self.golden_section(lo, hi)?;
        self.polish(t_golden)
    }

    fn golden_section(&self, mut a: f64, mut b: f64) -> Result<f64> {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = self.objective(c)?;
        let mut fd = self.objective(d)?;
        while b - a > GOLDEN_TOLERANCE {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.objective(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.objective(d)?;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Refines a golden-section estimate by bisection on the score, and
    /// snaps estimates that hit the search boundary onto it.
    fn polish(&self, t: f64) -> Result<f64> {
        const HALF_WIDTH: f64 = 1e-3;
        if t - LOG_LAMBDA_MIN < HALF_WIDTH && self.score(LOG_LAMBDA_MIN)? <= 0.0 {
            return Ok(LOG_LAMBDA_MIN);
        }
        if LOG_LAMBDA_MAX - t < HALF_WIDTH && self.score(LOG_LAMBDA_MAX)? >= 0.0 {
            return Ok(LOG_LAMBDA_MAX);
        }
        let mut a = (t - HALF_WIDTH).max(LOG_LAMBDA_MIN);
        let mut b = (t + HALF_WIDTH).min(LOG_LAMBDA_MAX);
        if !(self.score(a)? > 0.0 && self.score(b)? < 0.0) {
            return Ok(t);
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let s = self.score(mid)?;
            if s > 0.0 {
                a = mid;
            } else if s < 0.0 {
                b = mid;
            } else {
                return Ok(mid);
            }
        }
        Ok(0.5 * (a + b))
    }

    fn fit_at(&self, t: f64, tested: usize) -> Result<MixedModelFit> {
        let e = self.evaluate(t)?;
        let dof = (self.n - self.p) as f64;
        let sigma_e2 = e.rss / dof;
        let lambda = t.exp();
        let beta_se: Vec<f64> = (0..self.p)
            .map(|j| (sigma_e2 * e.p_inv[(j, j)]).sqrt())
            .collect();
        let wald_z = e.beta[tested] / beta_se[tested];
        Ok(MixedModelFit {
            beta: e.beta.iter().copied().collect(),
            beta_se,
            sigma_b2: lambda * sigma_e2,
            sigma_e2,
            lambda,
            reml_log_lik: e.log_lik,
            wald_z,
            p_value: two_sided_normal_p(wald_z),
            tested,
            at_boundary: t <= LOG_LAMBDA_MIN || t >= LOG_LAMBDA_MAX,
            n_obs: self.n,
            n_groups: self.groups.len(),
        })
    }
}

/// Profiled REML log-likelihood at a given ln λ; exposed for diagnostics.
pub fn profiled_reml<G: Ord + Clone>(
    y: &[f64],
    group: &[G],
    columns: &[Vec<f64>],
    log_lambda: f64,
) -> Result<f64> {
    Problem::new(y, group, columns)?.objective(log_lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_intercept_only_mean() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let g = ["A", "A", "B", "B"];
        let fit = fit_with_design(&y, &g, &[vec![1.0; 4]], 0).unwrap();
        assert!((fit.beta[0] - 2.5).abs() < 1e-12);
        for t in [-6.0, -1.0, 0.0, 3.0, 6.0] {
            let p = Problem::new(&y, &g, &[vec![1.0; 4]]).unwrap();
            assert!((p.evaluate(t).unwrap().beta[0] - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_between_group_variance_reduces_to_ols() {
        // Residuals sum to zero within every group and every x class, so REML drives
        // λ to the lower boundary and GLS coincides with OLS.
        let x = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let e = [0.3, -0.3, -0.5, 0.5, 0.2, -0.2, 0.7, -0.7, -0.1, 0.1, -0.6, 0.6];
        let y: Vec<f64> = x.iter().zip(e).map(|(x, e)| 1.0 + 2.0 * x + e).collect();
        let g = [0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5];
        let fit = fit_random_intercept(&y, &g, &x).unwrap();
        assert!(fit.at_boundary);
        assert_eq!(fit.lambda, LOG_LAMBDA_MIN.exp());
        // OLS: β0 = mean(y | x=0), β1 = difference of means.
        let m0: f64 = y.iter().step_by(2).sum::<f64>() / 6.0;
        let m1: f64 = y.iter().skip(1).step_by(2).sum::<f64>() / 6.0;
        assert!(((fit.beta[0] - m0) / m0).abs() < 1e-4);
        assert!(((fit.beta[1] - (m1 - m0)) / (m1 - m0)).abs() < 1e-4);
        let ols_rss: f64 = e.iter().map(|v| v * v).sum();
        assert!(((fit.sigma_e2 - ols_rss / 10.0) / fit.sigma_e2).abs() < 1e-4);
    }

    #[test]
    fn degenerate_inputs() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let g = [0, 0, 1, 1];
        assert!(matches!(
            fit_random_intercept(&y, &g, &[1.0; 4]),
            Err(Error::DegenerateDesign(_))
        ));
        assert!(matches!(
            fit_random_intercept(&[1.0, f64::NAN, 3.0, 4.0], &g, &[0.0, 1.0, 0.0, 1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fit_random_intercept(&y, &[0, 0, 0, 0], &[0.0, 1.0, 0.0, 1.0]),
            Err(Error::Domain(_))
        ));
        assert!(fit_random_intercept(&y[..2], &g[..2], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn score_matches_finite_difference() {
        let y = [1.0, 2.5, 0.3, 4.0, 3.2, 5.1, 0.9, 2.2, 2.8, 4.4];
        let x = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let g = [0, 0, 0, 1, 1, 1, 2, 2, 3, 3];
        let p = Problem::new(&y, &g, &[vec![1.0; 10], x.to_vec()]).unwrap();
        for t in [-3.0, -0.5, 0.0, 1.0, 2.5] {
            let h = 1e-5;
            let fd = (p.objective(t + h).unwrap() - p.objective(t - h).unwrap()) / (2.0 * h);
            let s = p.score(t).unwrap();
            assert!((fd - s).abs() < 1e-6 * (1.0 + s.abs()), "t={t}: fd={fd} score={s}");
        }
    }

    #[test]
    fn p_value_consistent_with_z() {
        let y = [1.0, 2.5, 0.3, 4.0, 3.2, 5.1, 0.9, 2.2, 2.8, 4.4];
        let x = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let g = [0, 0, 0, 1, 1, 1, 2, 2, 3, 3];
        let fit = fit_random_intercept(&y, &g, &x).unwrap();
        assert!(fit.sigma_b2 >= 0.0 && fit.sigma_e2 > 0.0);
        assert!((0.0..=1.0).contains(&fit.p_value));
        assert!((fit.p_value - two_sided_normal_p(fit.wald_z)).abs() < 1e-15);
    }
}
