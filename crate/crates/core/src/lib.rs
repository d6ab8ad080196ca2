//! Expectile-assisted inverse regression for sufficient dimension reduction.
//!
//! Kernel expectile regression turns a scalar response into a vector of
//! fitted conditional expectiles. Projective resampling or pooling over the
//! expectile levels then feeds SIR, SAVE and directional regression
//! candidate matrices, whose leading eigenvectors estimate the central
//! subspace.
//!
//! ```
//! use nalgebra::DMatrix;
//! use rand::SeedableRng;
//! use xsdr::{fit_sdr, FitOptions, Method};
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
//! let x = DMatrix::from_fn(80, 3, |_, _| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng));
//! let y: Vec<f64> = (0..80).map(|i| x[(i, 0)] + 0.1 * x[(i, 1)]).collect();
//! let opts = FitOptions::classical(Method::Sir, 1).with_slices(4);
//! let est = fit_sdr(&x, &y, &opts).unwrap();
//! assert_eq!(est.basis.ncols(), 1);
//! ```

pub mod benchmark;
pub mod error;
pub mod expectile;
pub mod inverse;
pub mod numerics;
pub mod order;
pub mod rng;
pub mod tuning;

pub use error::{Result, SdrError};
pub use expectile::{
    bandwidth_heuristic, expectile_matrix, fit_ker, gram_matrix, phi_tau, sample_expectile,
    AsymmetricLoss, ExpectileFit, ExpectileMatrix, KernelConfig,
};
pub use inverse::{
    estimate_directions, fit_sdr, pooled_marginal, projective_resampling, slice_equal_count,
    slice_moments, univariate_candidate, Bandwidth, CandidateMatrix, FitOptions, Flavor,
    LambdaChoice, Method, SdrEstimate, SliceAssignment, SliceMoments,
};
pub use numerics::{
    inv_sqrt_psd, sample_unit_sphere, standardize, subspace_distance, sym_eig, StandardizedSample,
    SubspaceBasis, SymmetricEigen,
};
pub use tuning::{dcor2, select_lambda, DcorResult, LambdaSelection, DEFAULT_LAMBDA_GRID};
pub use order::{estimate_order, lambda_stat, permutation_test, OrderEstimate, PermutationConfig};
pub use benchmark::{
    gen_model, loocv_delta_tau, run_simulation, run_sweep, BenchRow, DeltaMetric, ModelId, SimConfig,
    SimModel, SweepAxis,
};
