//! Permutation sequential test for the structural dimension.
//!
//! For `m = 0, 1, …` the test statistic `Λ_m = n Σ_{j>m} η̂_j` is compared
//! against its distribution when the trailing principal predictors
//! `Û₂ᵀẐ` are permuted across observations. The estimate `d̂` is the first
//! `m` whose null hypothesis is not rejected.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdrError};
use crate::expectile::{expectile_matrix, ExpectileMatrix, KernelConfig};
use crate::inverse::{build_candidate, FitOptions, LambdaChoice, Prepared, Response};
use crate::numerics::{inv_sqrt_psd, StandardizedSample};
use crate::rng::{derive_seed, substream, tag};
use crate::tuning::select_lambda_prepared;

pub const DEFAULT_PERMUTATIONS: usize = 200;
pub const DEFAULT_ALPHA: f64 = 0.1;

/// `n · Σ_{j=m+1}^{p} η̂_j`.
pub fn lambda_stat(eigenvalues: &[f64], m: usize, n: usize) -> f64 {
    assert!(m <= eigenvalues.len(), "m must not exceed p");
    n as f64 * eigenvalues[m..].iter().sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialTestStep {
    pub m: usize,
    pub statistic: f64,
    pub pvalue: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub d_hat: usize,
    pub steps: Vec<SequentialTestStep>,
    pub alpha: f64,
    pub permutations: usize,
    /// Ridge weight used for the expectile fits, when applicable.
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
    /// Refit the kernel expectiles on every permuted predictor matrix.
    pub refit_expectiles: bool,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            alpha: DEFAULT_ALPHA,
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
            refit_expectiles: false,
        }
    }
}

impl PermutationConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SdrError::InvalidOptions(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.permutations == 0 {
            return Err(SdrError::InvalidOptions("at least one permutation is required".into()));
        }
        Ok(())
    }
}

/// Principal predictors split at `m`.
#[derive(Debug, Clone)]
pub struct PermutationWorkspace {
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
    u1: DMatrix<f64>,
    u2: DMatrix<f64>,
}

impl PermutationWorkspace {
    pub fn new(z: &DMatrix<f64>, vectors: &DMatrix<f64>, m: usize) -> Self {
        let p = vectors.ncols();
        let u1 = vectors.columns(0, m).into_owned();
        let u2 = vectors.columns(m, p - m).into_owned();
        PermutationWorkspace {
            w1: z * &u1,
            w2: z * &u2,
            u1,
            u2,
        }
    }

    /// `Ẑ^{[b]}_i = Û₁Ŵ₁ᵢ + Û₂Ŵ₂_{π(i)}`, stacked as rows.
    pub fn reassemble(&self, perm: &[usize]) -> DMatrix<f64> {
        let n = self.w2.nrows();
        let permuted = DMatrix::from_fn(n, self.w2.ncols(), |i, j| self.w2[(perm[i], j)]);
        &self.w1 * self.u1.transpose() + permuted * self.u2.transpose()
    }
}

/// Everything the test reuses across `m`: whitened data, the fitted
/// expectiles and the observed spectrum.
pub struct OrderContext {
    opts: FitOptions,
    y: Vec<f64>,
    std: StandardizedSample,
    xi: Option<ExpectileMatrix>,
    kernel: Option<KernelConfig>,
    eigenvalues: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl OrderContext {
    /// `opts.d` is only used to score ridge-weight candidates when
    /// `opts.lambda` is automatic.
    pub fn new(x: &DMatrix<f64>, y: &[f64], opts: &FitOptions) -> Result<Self> {
        let prepared = Prepared::new(x, y, opts)?;
        let (xi, kernel) = if opts.flavor.uses_expectiles() {
            let lambda = match &opts.lambda {
                LambdaChoice::Fixed(l) => *l,
                LambdaChoice::Auto(grid) => select_lambda_prepared(&prepared, opts, grid)?.0.chosen,
            };
            let xi = prepared.expectiles(opts, lambda)?;
            let r = prepared.kernel.as_ref().map(|k| k.0).expect("expectile flavor has a kernel");
            (
                Some(xi),
                Some(KernelConfig {
                    r,
                    lambda,
                    jitter: opts.jitter,
                }),
            )
        } else {
            (None, None)
        };
        let std = prepared.std;
        let response = match &xi {
            Some(xi) => Response::Expectiles(xi),
            None => Response::Observed(y),
        };
        let spectrum = build_candidate(&std.whitened, response, opts)?.spectrum();
        Ok(OrderContext {
            opts: opts.clone(),
            y: y.to_vec(),
            std,
            xi,
            kernel,
            eigenvalues: spectrum.values,
            vectors: spectrum.vectors,
        })
    }

    pub fn n(&self) -> usize {
        self.std.n()
    }

    pub fn p(&self) -> usize {
        self.std.p()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn lambda(&self) -> Option<f64> {
        self.kernel.map(|k| k.lambda)
    }

    fn statistic_for(&self, z: &DMatrix<f64>, m: usize, refit: bool) -> Result<f64> {
        let refitted;
        let response = match (&self.xi, refit) {
            (Some(_), true) => {
                // Back to the predictor scale for the kernel.
                let root = inv_sqrt_psd(&self.std.whitener)?;
                let mut x = z * root;
                for mut row in x.row_iter_mut() {
                    row += self.std.mean.transpose();
                }
                let cfg = self.kernel.expect("kernel config present with expectiles");
                refitted = expectile_matrix(&x, &self.y, &self.opts.levels, &cfg)?;
                Response::Expectiles(&refitted)
            }
            (Some(xi), false) => Response::Expectiles(xi),
            (None, _) => Response::Observed(&self.y),
        };
        let spec = build_candidate(z, response, &self.opts)?.spectrum();
        Ok(lambda_stat(spec.values.as_slice(), m, self.n()))
    }

    /// One step of the sequential test at hypothesized dimension `m`.
    pub fn test(&self, m: usize, cfg: &PermutationConfig) -> Result<SequentialTestStep> {
        cfg.validate()?;
        let p = self.p();
        if m >= p {
            return Err(SdrError::InvalidOptions(format!("m must be below p = {p}, got {m}")));
        }
        let n = self.n();
        let observed = lambda_stat(self.eigenvalues.as_slice(), m, n);
        let workspace = PermutationWorkspace::new(&self.std.whitened, &self.vectors, m);
        let step_seed = derive_seed(cfg.seed, tag::ORDER_STEP, m as u64);
        let stats: Vec<Result<f64>> = (0..cfg.permutations)
            .into_par_iter()
            .map(|b| {
                let mut rng = substream(step_seed, tag::PERMUTATION, b as u64);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let z = workspace.reassemble(&perm);
                self.statistic_for(&z, m, cfg.refit_expectiles)
            })
            .collect();
        let mut exceed = 0usize;
        for s in stats {
            if s? > observed {
                exceed += 1;
            }
        }
        let pvalue = exceed as f64 / cfg.permutations as f64;
        Ok(SequentialTestStep {
            m,
            statistic: observed,
            pvalue,
            rejected: pvalue < cfg.alpha,
        })
    }

    pub fn estimate(&self, cfg: &PermutationConfig) -> Result<OrderEstimate> {
        cfg.validate()?;
        let p = self.p();
        let mut steps = Vec::new();
        let mut d_hat = p;
        for m in 0..p {
            let step = self.test(m, cfg)?;
            let accepted = !step.rejected;
            steps.push(step);
            if accepted {
                d_hat = m;
                break;
            }
        }
        Ok(OrderEstimate {
            d_hat,
            steps,
            alpha: cfg.alpha,
            permutations: cfg.permutations,
            lambda: self.lambda(),
        })
    }
}

/// Single permutation test of `H₀: d = m` against `d > m`.
pub fn permutation_test(
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &FitOptions,
    m: usize,
    cfg: &PermutationConfig,
) -> Result<SequentialTestStep> {
    OrderContext::new(x, y, opts)?.test(m, cfg)
}

/// Sequential permutation estimate of the structural dimension.
pub fn estimate_order(
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &FitOptions,
    cfg: &PermutationConfig,
) -> Result<OrderEstimate> {
    OrderContext::new(x, y, opts)?.estimate(cfg)
}
