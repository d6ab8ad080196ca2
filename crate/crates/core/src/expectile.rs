//! Asymmetric least squares and kernel expectile regression.
//!
//! The kernel estimator minimizes
//! `Σ φ_τ(y_i − α₀ − (Kα)_i) + λ αᵀKα` over the intercept `α₀` and the
//! coefficient vector `α`, with `K` a Gaussian RBF Gram matrix. The loss is
//! convex and piecewise quadratic, so it is solved by iteratively
//! reweighted least squares: for a fixed residual sign pattern the problem
//! is a weighted kernel ridge regression with an unpenalized intercept.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdrError};

pub const DEFAULT_JITTER: f64 = 1e-8;
pub const MAX_IRLS_ITERATIONS: usize = 200;
const STOP_RELATIVE_DECREASE: f64 = 1e-10;
const NO_CONVERGENCE_RELATIVE_CHANGE: f64 = 1e-8;

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(SdrError::TauOutOfRange(tau))
    }
}

#[inline]
fn weight(residual: f64, tau: f64) -> f64 {
    if residual > 0.0 {
        tau
    } else {
        1.0 - tau
    }
}

#[inline]
fn phi_unchecked(c: f64, tau: f64) -> f64 {
    weight(c, tau) * c * c
}

/// The asymmetric squared loss `φ_τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricLoss {
    tau: f64,
}

impl AsymmetricLoss {
    pub fn new(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(AsymmetricLoss { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn loss(&self, c: f64) -> f64 {
        phi_unchecked(c, self.tau)
    }

    pub fn total(&self, residuals: impl IntoIterator<Item = f64>) -> f64 {
        residuals.into_iter().map(|c| self.loss(c)).sum()
    }
}

/// `(1−τ)c²` for `c ≤ 0`, `τc²` otherwise.
pub fn phi_tau(c: f64, tau: f64) -> Result<f64> {
    Ok(AsymmetricLoss::new(tau)?.loss(c))
}

/// Empirical τ-expectile: the minimizer of `Σ φ_τ(v_i − a)`.
///
/// The first-order condition is piecewise linear in `a`, so the root is
/// found exactly by scanning the sorted sample for the segment on which the
/// weighted-mean update is self-consistent.
pub fn sample_expectile(values: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if values.is_empty() {
        return Err(SdrError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SdrError::NonFiniteInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if sorted[0] == sorted[n - 1] {
        return Ok(sorted[0]);
    }
    let total: f64 = sorted.iter().sum();
    let mut lower_sum = 0.0;
    let mut best = (f64::INFINITY, sorted[0]);
    // `s` values at or below the candidate, `n - s` strictly above.
    for s in 0..=n {
        if s > 0 {
            lower_sum += sorted[s - 1];
        }
        let upper_sum = total - lower_sum;
        let lo_w = (1.0 - tau) * s as f64;
        let hi_w = tau * (n - s) as f64;
        let a = ((1.0 - tau) * lower_sum + tau * upper_sum) / (lo_w + hi_w);
        let inside = (s == 0 || sorted[s - 1] <= a) && (s == n || a < sorted[s]);
        if inside {
            return Ok(a);
        }
        let g = expectile_gradient(&sorted, a, tau).abs();
        if g < best.0 {
            best = (g, a);
        }
    }
    // Rounding can push the exact root onto a segment boundary.
    Ok(best.1)
}

/// `τ Σ_{v>a}(v−a) − (1−τ) Σ_{v≤a}(a−v)`.
pub fn expectile_gradient(values: &[f64], a: f64, tau: f64) -> f64 {
    values
        .iter()
        .map(|&v| {
            let c = v - a;
            weight(c, tau) * c
        })
        .sum()
}

fn check_finite_matrix(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        Err(SdrError::NonFiniteInput)
    } else {
        Ok(())
    }
}

fn squared_distance(x: &DMatrix<f64>, i: usize, z: &DMatrix<f64>, j: usize) -> f64 {
    (0..x.ncols()).map(|c| (x[(i, c)] - z[(j, c)]).powi(2)).sum()
}

/// Gaussian RBF Gram matrix `exp(−r‖X_i − X_j‖²)`.
pub fn gram_matrix(x: &DMatrix<f64>, r: f64) -> Result<DMatrix<f64>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(SdrError::InvalidOptions(format!("kernel scale r must be positive, got {r}")));
    }
    check_finite_matrix(x)?;
    let n = x.nrows();
    let mut k = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (-r * squared_distance(x, i, x, j)).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Cross-kernel between new rows and training rows.
pub fn cross_gram(new: &DMatrix<f64>, train: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(new.nrows(), train.nrows(), |i, j| {
        (-r * squared_distance(new, i, train, j)).exp()
    })
}

/// `r = 1/γ²` with `γ` the mean pairwise Euclidean distance between rows.
pub fn bandwidth_heuristic(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(SdrError::DimensionMismatch("bandwidth heuristic needs n >= 2".into()));
    }
    check_finite_matrix(x)?;
    let mut sum = 0.0;
    for i in 0..n - 1 {
        for j in (i + 1)..n {
            sum += squared_distance(x, i, x, j).sqrt();
        }
    }
    let gamma = 2.0 * sum / (n as f64 * (n - 1) as f64);
    if gamma == 0.0 {
        return Err(SdrError::DegenerateSample);
    }
    Ok(1.0 / (gamma * gamma))
}

/// Kernel scale, ridge weight and Gram diagonal jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub r: f64,
    pub lambda: f64,
    pub jitter: f64,
}

impl KernelConfig {
    pub fn new(r: f64, lambda: f64) -> Result<Self> {
        let cfg = KernelConfig {
            r,
            lambda,
            jitter: DEFAULT_JITTER,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(SdrError::InvalidOptions(format!("r must be positive, got {}", self.r)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SdrError::InvalidOptions(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(SdrError::InvalidOptions(format!(
                "jitter must be nonnegative, got {}",
                self.jitter
            )));
        }
        Ok(())
    }
}

/// A fitted RKHS expectile function.
#[derive(Debug, Clone)]
pub struct ExpectileFit {
    pub intercept: f64,
    pub coefficients: DVector<f64>,
    pub train_points: DMatrix<f64>,
    pub tau: f64,
    pub config: KernelConfig,
    pub final_objective: f64,
    pub iterations: usize,
    /// Objective value after the initial constant fit and after each accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    fitted: DVector<f64>,
}

impl ExpectileFit {
    /// Fitted values at the training rows.
    pub fn fitted(&self) -> &DVector<f64> {
        &self.fitted
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.train_points.ncols() {
            return Err(SdrError::DimensionMismatch(format!(
                "model trained on {} columns, got {}",
                self.train_points.ncols(),
                x.ncols()
            )));
        }
        check_finite_matrix(x)?;
        let k = cross_gram(x, &self.train_points, self.config.r);
        Ok((k * &self.coefficients).add_scalar(self.intercept))
    }

    /// Gradient of the weighted quadratic objective at the final sign pattern,
    /// stacked as `(∂/∂α₀, ∂/∂α)`.
    pub fn weighted_gradient(&self, gram: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
        let n = y.len();
        let wr = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let r = y[i] - self.fitted[i];
                weight(r, self.tau) * r
            }),
        );
        let inner = &wr - &self.coefficients * self.config.lambda;
        let g_alpha = gram * inner * -2.0;
        let mut g = DVector::zeros(n + 1);
        g[0] = -2.0 * wr.sum();
        g.rows_mut(1, n).copy_from(&g_alpha);
        g
    }
}

struct Iterate {
    intercept: f64,
    coefficients: DVector<f64>,
    fitted: DVector<f64>,
    objective: f64,
}

fn objective(
    gram: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    lambda: f64,
    intercept: f64,
    coefficients: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let fitted = (gram * coefficients).add_scalar(intercept);
    let loss: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| phi_unchecked(yi - fi, tau))
        .sum();
    let penalty = if lambda > 0.0 {
        lambda * coefficients.dot(&(gram * coefficients))
    } else {
        0.0
    };
    (fitted, loss + penalty)
}

/// Minimizes `Σ w_i (y_i − α₀ − (Kα)_i)² + λ αᵀKα`.
///
/// Stationarity gives `(K + λW⁻¹)α + α₀1 = y` and `1ᵀα = 0`, solved with
/// one Cholesky factorization and two right-hand sides.
fn weighted_ridge_solve(
    gram: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    lambda: f64,
    jitter: f64,
) -> Result<(f64, DVector<f64>)> {
    let n = y.len();
    let yv = DVector::from_column_slice(y);
    let ones = DVector::from_element(n, 1.0);
    let mut extra = jitter;
    for _ in 0..8 {
        let mut a = gram.clone();
        for i in 0..n {
            a[(i, i)] += lambda / weights[i] + extra;
        }
        if let Some(chol) = a.cholesky() {
            let u = chol.solve(&yv);
            let v = chol.solve(&ones);
            let denom = v.sum();
            if denom.is_finite() && denom.abs() > 0.0 {
                let intercept = u.sum() / denom;
                let coefficients = u - v * intercept;
                if intercept.is_finite() && coefficients.iter().all(|c| c.is_finite()) {
                    return Ok((intercept, coefficients));
                }
            }
        }
        extra = if extra == 0.0 { 1e-12 } else { extra * 100.0 };
    }
    Err(SdrError::SolveFailure)
}

/// IRLS fit that always returns the best iterate, flagged by `converged`.
pub fn fit_ker_with_gram(
    gram: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    config: &KernelConfig,
) -> Result<ExpectileFit> {
    check_tau(tau)?;
    config.validate()?;
    let n = y.len();
    if n < 2 || x.nrows() != n || gram.shape() != (n, n) {
        return Err(SdrError::DimensionMismatch(format!(
            "kernel expectile fit needs n >= 2 rows matching the response, got x {}x{}, y {}",
            x.nrows(),
            x.ncols(),
            n
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SdrError::NonFiniteInput);
    }
    let lambda = config.lambda;

    let start = sample_expectile(y, tau)?;
    let zeros = DVector::zeros(n);
    let (fitted, obj) = objective(gram, y, tau, lambda, start, &zeros);
    let mut current = Iterate {
        intercept: start,
        coefficients: zeros,
        fitted,
        objective: obj,
    };
    let mut trace = vec![current.objective];
    let mut weights: Vec<f64> = (0..n).map(|i| weight(y[i] - current.fitted[i], tau)).collect();
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;

    while iterations < MAX_IRLS_ITERATIONS {
        iterations += 1;
        let (b0, alpha) = weighted_ridge_solve(gram, y, &weights, lambda, config.jitter)?;
        let (fitted, obj) = objective(gram, y, tau, lambda, b0, &alpha);
        let mut next = Iterate {
            intercept: b0,
            coefficients: alpha,
            fitted,
            objective: obj,
        };
        if next.objective > current.objective {
            // The full step overshot; the objective is convex along the segment.
            let mut step = 0.5;
            let mut accepted = None;
            for _ in 0..40 {
                let b = current.intercept + step * (next.intercept - current.intercept);
                let a = &current.coefficients + (&next.coefficients - &current.coefficients) * step;
                let (f, o) = objective(gram, y, tau, lambda, b, &a);
                if o < current.objective {
                    accepted = Some(Iterate {
                        intercept: b,
                        coefficients: a,
                        fitted: f,
                        objective: o,
                    });
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                Some(it) => next = it,
                None => {
                    converged = true;
                    last_change = 0.0;
                    break;
                }
            }
        }
        let scale = current.objective.abs().max(f64::MIN_POSITIVE);
        last_change = (current.objective - next.objective) / scale;
        current = next;
        trace.push(current.objective);
        let new_weights: Vec<f64> =
            (0..n).map(|i| weight(y[i] - current.fitted[i], tau)).collect();
        let unchanged = new_weights == weights;
        weights = new_weights;
        if unchanged || last_change < STOP_RELATIVE_DECREASE {
            converged = true;
            break;
        }
    }
    if !converged && last_change < NO_CONVERGENCE_RELATIVE_CHANGE {
        converged = true;
    }
    Ok(ExpectileFit {
        intercept: current.intercept,
        coefficients: current.coefficients,
        train_points: x.clone(),
        tau,
        config: *config,
        final_objective: current.objective,
        iterations,
        objective_trace: trace,
        converged,
        fitted: current.fitted,
    })
}

/// Kernel expectile regression of `y` on the rows of `x` at level `tau`.
pub fn fit_ker(x: &DMatrix<f64>, y: &[f64], tau: f64, config: &KernelConfig) -> Result<ExpectileFit> {
    config.validate()?;
    check_finite_matrix(x)?;
    let gram = gram_matrix(x, config.r)?;
    let fit = fit_ker_with_gram(&gram, x, y, tau, config)?;
    if !fit.converged {
        return Err(SdrError::NoConvergence {
            iterations: fit.iterations,
            relative_change: NO_CONVERGENCE_RELATIVE_CHANGE,
        });
    }
    Ok(fit)
}

/// Levels `ℓ/(k+1)` for `ℓ = 1..k`; `k = 9` gives `0.1, …, 0.9`.
pub fn default_levels(k: usize) -> Vec<f64> {
    (1..=k).map(|l| l as f64 / (k + 1) as f64).collect()
}

/// Fitted expectiles at the training rows, one column per level.
#[derive(Debug, Clone)]
pub struct ExpectileMatrix {
    pub values: DMatrix<f64>,
    pub levels: Vec<f64>,
}

impl ExpectileMatrix {
    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn column(&self, l: usize) -> Vec<f64> {
        self.values.column(l).iter().copied().collect()
    }

    /// Number of (row, adjacent level pair) where the fitted curves cross.
    pub fn crossings(&self) -> usize {
        let mut count = 0;
        for i in 0..self.n() {
            for l in 1..self.k() {
                if self.values[(i, l)] < self.values[(i, l - 1)] {
                    count += 1;
                }
            }
        }
        count
    }
}

pub fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(SdrError::InvalidOptions("at least one expectile level is required".into()));
    }
    for &t in levels {
        check_tau(t)?;
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SdrError::InvalidOptions("expectile levels must be strictly increasing".into()));
    }
    Ok(())
}

/// Same as [`expectile_matrix`] with a precomputed Gram matrix.
pub fn expectile_matrix_with_gram(
    gram: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &[f64],
    levels: &[f64],
    config: &KernelConfig,
) -> Result<ExpectileMatrix> {
    validate_levels(levels)?;
    let fits: Vec<Result<ExpectileFit>> = levels
        .par_iter()
        .map(|&tau| {
            let fit = fit_ker_with_gram(gram, x, y, tau, config)?;
            if !fit.converged {
                return Err(SdrError::NoConvergence {
                    iterations: fit.iterations,
                    relative_change: NO_CONVERGENCE_RELATIVE_CHANGE,
                });
            }
            Ok(fit)
        })
        .collect();
    let n = y.len();
    let mut values = DMatrix::zeros(n, levels.len());
    for (l, fit) in fits.into_iter().enumerate() {
        values.set_column(l, fit?.fitted());
    }
    Ok(ExpectileMatrix {
        values,
        levels: levels.to_vec(),
    })
}

/// One kernel expectile fit per level, sharing a single Gram matrix.
pub fn expectile_matrix(
    x: &DMatrix<f64>,
    y: &[f64],
    levels: &[f64],
    config: &KernelConfig,
) -> Result<ExpectileMatrix> {
    config.validate()?;
    let gram = gram_matrix(x, config.r)?;
    expectile_matrix_with_gram(&gram, x, y, levels, config)
}
