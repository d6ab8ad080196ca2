//! Slicing, inverse-regression candidate matrices and central-subspace
//! estimation.
//!
//! All candidate matrices are built on whitened predictors `Ẑ`; directions
//! are mapped back to the predictor scale by the whitening matrix.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdrError};
use crate::expectile::{
    bandwidth_heuristic, default_levels, expectile_matrix_with_gram, gram_matrix, validate_levels,
    ExpectileMatrix, KernelConfig, DEFAULT_JITTER,
};
use crate::numerics::{sample_unit_sphere, standardize, sym_eig, StandardizedSample, SymmetricEigen};
use crate::rng::{substream, tag};
use crate::tuning::{select_lambda_prepared, DEFAULT_LAMBDA_GRID};

pub const DEFAULT_PROJECTIONS: usize = 1000;
pub const DEFAULT_LEVELS: usize = 9;
pub const DEFAULT_SLICES: usize = 5;
const RANK_EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sir,
    Save,
    Dr,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Sir => "SIR",
            Method::Save => "SAVE",
            Method::Dr => "DR",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How the response enters the candidate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Slice the observed response directly.
    Classical,
    /// Kernel expectiles averaged over random projections.
    Projective,
    /// Kernel expectiles pooled level by level.
    Pooled,
}

impl Flavor {
    pub fn prefix(&self) -> &'static str {
        match self {
            Flavor::Classical => "",
            Flavor::Projective => "EA-",
            Flavor::Pooled => "mEA-",
        }
    }

    pub fn uses_expectiles(&self) -> bool {
        !matches!(self, Flavor::Classical)
    }
}

/// Estimator label such as `EA-DR` or `mEA-SIR`.
pub fn method_label(method: Method, flavor: Flavor) -> String {
    format!("{}{}", flavor.prefix(), method.label())
}

/// Parses `sir`, `ea-save`, `mea-dr` and friends (case-insensitive).
pub fn parse_method_label(s: &str) -> Option<(Method, Flavor)> {
    let lower = s.trim().to_ascii_lowercase();
    let (flavor, rest) = if let Some(r) = lower.strip_prefix("mea-") {
        (Flavor::Pooled, r)
    } else if let Some(r) = lower.strip_prefix("ea-") {
        (Flavor::Projective, r)
    } else {
        (Flavor::Classical, lower.as_str())
    };
    let method = match rest {
        "sir" => Method::Sir,
        "save" => Method::Save,
        "dr" => Method::Dr,
        _ => return None,
    };
    Some((method, flavor))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `1/γ²` with `γ` the mean pairwise distance.
    Heuristic,
    /// The heuristic value times a multiplier.
    Scaled(f64),
    Fixed(f64),
}

impl Bandwidth {
    pub fn resolve(&self, x: &DMatrix<f64>) -> Result<f64> {
        match *self {
            Bandwidth::Heuristic => bandwidth_heuristic(x),
            Bandwidth::Scaled(m) => Ok(m * bandwidth_heuristic(x)?),
            Bandwidth::Fixed(r) => Ok(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed(f64),
    /// Pick the grid value maximizing the distance correlation between the
    /// response and the reduced predictors.
    Auto(Vec<f64>),
}

impl LambdaChoice {
    pub fn auto() -> Self {
        LambdaChoice::Auto(DEFAULT_LAMBDA_GRID.to_vec())
    }
}

/// Resolved settings for [`fit_sdr`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub method: Method,
    pub flavor: Flavor,
    pub slices: usize,
    pub projections: usize,
    pub levels: Vec<f64>,
    pub bandwidth: Bandwidth,
    pub lambda: LambdaChoice,
    pub d: usize,
    pub seed: u64,
    pub jitter: f64,
}

impl FitOptions {
    fn base(method: Method, flavor: Flavor, d: usize) -> Self {
        FitOptions {
            method,
            flavor,
            slices: DEFAULT_SLICES,
            projections: DEFAULT_PROJECTIONS,
            levels: default_levels(DEFAULT_LEVELS),
            bandwidth: Bandwidth::Heuristic,
            lambda: LambdaChoice::auto(),
            d,
            seed: 0,
            jitter: DEFAULT_JITTER,
        }
    }

    pub fn classical(method: Method, d: usize) -> Self {
        Self::base(method, Flavor::Classical, d)
    }

    pub fn expectile(method: Method, d: usize) -> Self {
        Self::base(method, Flavor::Projective, d)
    }

    pub fn pooled(method: Method, d: usize) -> Self {
        Self::base(method, Flavor::Pooled, d)
    }

    pub fn new(method: Method, flavor: Flavor, d: usize) -> Self {
        Self::base(method, flavor, d)
    }

    pub fn with_slices(mut self, h: usize) -> Self {
        self.slices = h;
        self
    }

    pub fn with_projections(mut self, n: usize) -> Self {
        self.projections = n;
        self
    }

    pub fn with_levels(mut self, levels: Vec<f64>) -> Self {
        self.levels = levels;
        self
    }

    pub fn with_k(self, k: usize) -> Self {
        self.with_levels(default_levels(k))
    }

    pub fn with_bandwidth(mut self, b: Bandwidth) -> Self {
        self.bandwidth = b;
        self
    }

    pub fn with_lambda(mut self, lambda: LambdaChoice) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn label(&self) -> String {
        method_label(self.method, self.flavor)
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        let bad = |m: String| Err(SdrError::InvalidOptions(m));
        if self.slices == 0 {
            return bad("number of slices must be positive".into());
        }
        if self.slices > n {
            return Err(SdrError::TooManySlices {
                slices: self.slices,
                n,
            });
        }
        if self.d == 0 || self.d > p {
            return bad(format!("d must be in 1..={p}, got {}", self.d));
        }
        if self.flavor.uses_expectiles() {
            validate_levels(&self.levels)?;
            if self.flavor == Flavor::Projective && self.projections == 0 {
                return bad("number of projections must be positive".into());
            }
            match &self.lambda {
                LambdaChoice::Fixed(l) if !(*l >= 0.0 && l.is_finite()) => {
                    return bad(format!("lambda must be nonnegative, got {l}"))
                }
                LambdaChoice::Auto(grid) if grid.is_empty() => {
                    return bad("lambda grid is empty".into())
                }
                LambdaChoice::Auto(grid) if grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) => {
                    return bad("lambda grid values must be nonnegative".into())
                }
                _ => {}
            }
            match self.bandwidth {
                Bandwidth::Scaled(m) | Bandwidth::Fixed(m) if !(m > 0.0 && m.is_finite()) => {
                    return bad(format!("bandwidth value must be positive, got {m}"))
                }
                _ => {}
            }
            if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
                return bad("jitter must be nonnegative".into());
            }
        }
        Ok(())
    }
}

/// Equal-count partition of a scalar slicing variable.
///
/// Labels are zero-based: slice `h` holds `labels[i] == h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceAssignment {
    pub h: usize,
    pub labels: Vec<usize>,
    pub proportions: Vec<f64>,
    /// Largest value in each slice except the last.
    pub boundaries: Vec<f64>,
}

impl SliceAssignment {
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.h];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

/// Sorts by `(value, index)` and cuts into `h` contiguous groups whose
/// sizes differ by at most one, larger groups first.
pub fn slice_equal_count(v: &[f64], h: usize) -> Result<SliceAssignment> {
    let n = v.len();
    if h == 0 {
        return Err(SdrError::InvalidOptions("number of slices must be positive".into()));
    }
    if h > n {
        return Err(SdrError::TooManySlices { slices: h, n });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SdrError::NonFiniteInput);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let base = n / h;
    let extra = n % h;
    let mut labels = vec![0; n];
    let mut proportions = Vec::with_capacity(h);
    let mut boundaries = Vec::with_capacity(h - 1);
    let mut pos = 0;
    for s in 0..h {
        let size = base + usize::from(s < extra);
        for &i in &order[pos..pos + size] {
            labels[i] = s;
        }
        pos += size;
        if s + 1 < h {
            boundaries.push(v[order[pos - 1]]);
        }
        proportions.push(size as f64 / n as f64);
    }
    Ok(SliceAssignment {
        h,
        labels,
        proportions,
        boundaries,
    })
}

/// Slice proportions, slice means of `Ẑ` and `V̂_h = E_h[ẐẐᵀ] − I`.
#[derive(Debug, Clone)]
pub struct SliceMoments {
    pub proportions: Vec<f64>,
    pub means: DMatrix<f64>,
    pub second: Vec<DMatrix<f64>>,
}

pub fn slice_moments(z: &DMatrix<f64>, slices: &SliceAssignment) -> Result<SliceMoments> {
    let (n, p) = z.shape();
    if slices.labels.len() != n {
        return Err(SdrError::DimensionMismatch(format!(
            "{} slice labels for {n} rows",
            slices.labels.len()
        )));
    }
    let h = slices.h;
    let mut counts = vec![0usize; h];
    let mut means = DMatrix::zeros(h, p);
    let mut second = vec![DMatrix::zeros(p, p); h];
    for (i, &s) in slices.labels.iter().enumerate() {
        counts[s] += 1;
        let row = z.row(i);
        for a in 0..p {
            means[(s, a)] += row[a];
            let m = &mut second[s];
            for b in 0..=a {
                m[(a, b)] += row[a] * row[b];
            }
        }
    }
    for s in 0..h {
        if counts[s] == 0 {
            return Err(SdrError::EmptySlice(s));
        }
        let c = counts[s] as f64;
        means.row_mut(s).scale_mut(1.0 / c);
        let m = &mut second[s];
        for a in 0..p {
            for b in 0..=a {
                let v = m[(a, b)] / c - if a == b { 1.0 } else { 0.0 };
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
    }
    Ok(SliceMoments {
        proportions: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        means,
        second,
    })
}

/// `Σ_h p̂_h μ̂_h μ̂_hᵀ`.
pub fn sir_matrix(m: &SliceMoments) -> DMatrix<f64> {
    let p = m.means.ncols();
    let mut out = DMatrix::zeros(p, p);
    for (h, &ph) in m.proportions.iter().enumerate() {
        let mu = m.means.row(h).transpose();
        out += &mu * mu.transpose() * ph;
    }
    out
}

/// `Σ_h p̂_h (V̂_h − μ̂_h μ̂_hᵀ)²`.
pub fn save_matrix(m: &SliceMoments) -> DMatrix<f64> {
    let p = m.means.ncols();
    let mut out = DMatrix::zeros(p, p);
    for (h, &ph) in m.proportions.iter().enumerate() {
        let mu = m.means.row(h).transpose();
        let a = &m.second[h] - &mu * mu.transpose();
        out += &a * &a * ph;
    }
    out
}

/// `2Σ p̂_h V̂_h² + 2(Σ p̂_h μ̂_h μ̂_hᵀ)² + 2(Σ p̂_h μ̂_hᵀμ̂_h)(Σ p̂_h μ̂_h μ̂_hᵀ)`.
pub fn dr_matrix(m: &SliceMoments) -> DMatrix<f64> {
    let p = m.means.ncols();
    let mut first = DMatrix::zeros(p, p);
    let mut trace_term = 0.0;
    for (h, &ph) in m.proportions.iter().enumerate() {
        first += &m.second[h] * &m.second[h] * ph;
        trace_term += ph * m.means.row(h).norm_squared();
    }
    let sir = sir_matrix(m);
    first * 2.0 + &sir * &sir * 2.0 + sir * (2.0 * trace_term)
}

pub fn method_matrix(method: Method, m: &SliceMoments) -> DMatrix<f64> {
    let raw = match method {
        Method::Sir => sir_matrix(m),
        Method::Save => save_matrix(m),
        Method::Dr => dr_matrix(m),
    };
    crate::numerics::symmetrize(&raw)
}

/// Symmetric PSD kernel matrix of an inverse-regression method in the
/// whitened frame.
///
/// For the pooled flavor `matrix` holds `M̃M̃ᵀ = Σ_ℓ M̂_ℓ²`, whose
/// eigenvectors are the left singular vectors of `M̃ = (M̂₁, …, M̂_k)`.
#[derive(Debug, Clone)]
pub struct CandidateMatrix {
    pub matrix: DMatrix<f64>,
    pub method: Method,
    pub flavor: Flavor,
    pub slices: usize,
    /// Number of matrices averaged (1 for a single scalar response).
    pub projections: usize,
    pub response: String,
}

impl CandidateMatrix {
    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigen-pairs of the candidate, descending. For the pooled flavor the
    /// values are the singular values of `M̃`.
    pub fn spectrum(&self) -> SymmetricEigen {
        let mut eig = sym_eig(&self.matrix);
        if self.flavor == Flavor::Pooled {
            eig.values = eig.values.map(|v| v.max(0.0).sqrt());
        }
        eig
    }
}

/// Candidate matrix obtained by slicing a scalar variable `v` against whitened rows `z`.
pub fn scalar_candidate(
    z: &DMatrix<f64>,
    v: &[f64],
    method: Method,
    h: usize,
) -> Result<DMatrix<f64>> {
    let slices = slice_equal_count(v, h)?;
    let moments = slice_moments(z, &slices)?;
    Ok(method_matrix(method, &moments))
}

/// Classical SIR/SAVE/DR: standardize `x` and slice `y` directly.
pub fn univariate_candidate(
    x: &DMatrix<f64>,
    y: &[f64],
    method: Method,
    h: usize,
) -> Result<CandidateMatrix> {
    let std = standardize(x)?;
    univariate_candidate_std(&std.whitened, y, method, h)
}

fn univariate_candidate_std(
    z: &DMatrix<f64>,
    y: &[f64],
    method: Method,
    h: usize,
) -> Result<CandidateMatrix> {
    if y.len() != z.nrows() {
        return Err(SdrError::DimensionMismatch(format!(
            "{} responses for {} rows",
            y.len(),
            z.nrows()
        )));
    }
    Ok(CandidateMatrix {
        matrix: scalar_candidate(z, y, method, h)?,
        method,
        flavor: Flavor::Classical,
        slices: h,
        projections: 1,
        response: "observed response".into(),
    })
}

/// Averages the method's candidate over `n_proj` random unit projections of
/// the expectile vectors. Projection `j` draws from substream `(seed, j)`
/// and matrices are summed in index order.
pub fn projective_resampling(
    xi: &ExpectileMatrix,
    z: &DMatrix<f64>,
    method: Method,
    h: usize,
    n_proj: usize,
    seed: u64,
) -> Result<CandidateMatrix> {
    if n_proj == 0 {
        return Err(SdrError::InvalidOptions("number of projections must be positive".into()));
    }
    if xi.n() != z.nrows() {
        return Err(SdrError::DimensionMismatch(format!(
            "expectile matrix has {} rows, predictors {}",
            xi.n(),
            z.nrows()
        )));
    }
    let k = xi.k();
    let matrices: Vec<Result<DMatrix<f64>>> = (0..n_proj)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(seed, tag::PROJECTION, j as u64);
            let t = sample_unit_sphere(k, &mut rng);
            let projected = &xi.values * t;
            scalar_candidate(z, projected.as_slice(), method, h)
        })
        .collect();
    let p = z.ncols();
    let mut sum = DMatrix::zeros(p, p);
    for m in matrices {
        sum += m?;
    }
    Ok(CandidateMatrix {
        matrix: sum / n_proj as f64,
        method,
        flavor: Flavor::Projective,
        slices: h,
        projections: n_proj,
        response: format!("{k} expectile levels"),
    })
}

/// `Σ_ℓ M̂_ℓ²` over per-level candidates built by slicing each expectile column.
pub fn pooled_candidate(
    xi: &ExpectileMatrix,
    z: &DMatrix<f64>,
    method: Method,
    h: usize,
) -> Result<CandidateMatrix> {
    if xi.n() != z.nrows() {
        return Err(SdrError::DimensionMismatch(format!(
            "expectile matrix has {} rows, predictors {}",
            xi.n(),
            z.nrows()
        )));
    }
    let per_level: Vec<Result<DMatrix<f64>>> = (0..xi.k())
        .into_par_iter()
        .map(|l| scalar_candidate(z, &xi.column(l), method, h))
        .collect();
    let p = z.ncols();
    let mut gram = DMatrix::zeros(p, p);
    for m in per_level {
        let m = m?;
        gram += &m * m.transpose();
    }
    Ok(CandidateMatrix {
        matrix: crate::numerics::symmetrize(&gram),
        method,
        flavor: Flavor::Pooled,
        slices: h,
        projections: xi.k(),
        response: format!("{} expectile levels (pooled)", xi.k()),
    })
}

/// Estimated central-subspace basis and its provenance.
#[derive(Debug, Clone)]
pub struct SdrEstimate {
    /// `p × d` basis on the predictor scale.
    pub basis: DMatrix<f64>,
    /// Candidate spectrum, descending.
    pub eigenvalues: DVector<f64>,
    /// All eigenvectors of the candidate in the whitened frame.
    pub whitened_vectors: DMatrix<f64>,
    pub method: Method,
    pub flavor: Flavor,
    /// Options with `lambda` and `bandwidth` resolved to the values used.
    pub options: Option<FitOptions>,
    pub rank_deficient: bool,
    pub expectile_crossings: Option<usize>,
    pub lambda_selection: Option<crate::tuning::LambdaSelection>,
}

impl SdrEstimate {
    pub fn d(&self) -> usize {
        self.basis.ncols()
    }

    /// Reduced predictors `X B̂`.
    pub fn reduce(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * &self.basis
    }
}

/// Leading `d` eigenvectors of the candidate, mapped to the predictor scale.
pub fn estimate_directions(
    c: &CandidateMatrix,
    whitener: &DMatrix<f64>,
    d: usize,
) -> Result<SdrEstimate> {
    let p = c.p();
    if d == 0 || d > p {
        return Err(SdrError::InvalidOptions(format!("d must be in 1..={p}, got {d}")));
    }
    if whitener.shape() != (p, p) {
        return Err(SdrError::DimensionMismatch("whitener does not match candidate".into()));
    }
    let eig = c.spectrum();
    let positive = eig.values.iter().filter(|&&v| v > RANK_EIGEN_FLOOR).count();
    let rank_deficient = positive < d;
    if rank_deficient {
        log::warn!(
            "{}: only {positive} candidate eigenvalues exceed {RANK_EIGEN_FLOOR:e}, requested d = {d}",
            method_label(c.method, c.flavor)
        );
    }
    let basis = whitener * eig.leading(d);
    Ok(SdrEstimate {
        basis,
        eigenvalues: eig.values,
        whitened_vectors: eig.vectors,
        method: c.method,
        flavor: c.flavor,
        options: None,
        rank_deficient,
        expectile_crossings: None,
        lambda_selection: None,
    })
}

/// Pooled marginal estimator: leading left singular vectors of
/// `(M̂₁, …, M̂_k)` mapped through the whitener.
pub fn pooled_marginal(
    xi: &ExpectileMatrix,
    std: &StandardizedSample,
    method: Method,
    h: usize,
    d: usize,
) -> Result<SdrEstimate> {
    let c = pooled_candidate(xi, &std.whitened, method, h)?;
    estimate_directions(&c, &std.whitener, d)
}

/// What the candidate matrix slices on.
#[derive(Debug, Clone, Copy)]
pub enum Response<'a> {
    Observed(&'a [f64]),
    Expectiles(&'a ExpectileMatrix),
}

/// Builds the configured candidate on the whitened rows `z`.
pub fn build_candidate(
    z: &DMatrix<f64>,
    response: Response<'_>,
    opts: &FitOptions,
) -> Result<CandidateMatrix> {
    match (opts.flavor, response) {
        (Flavor::Classical, Response::Observed(y)) => {
            univariate_candidate_std(z, y, opts.method, opts.slices)
        }
        (Flavor::Projective, Response::Expectiles(xi)) => {
            projective_resampling(xi, z, opts.method, opts.slices, opts.projections, opts.seed)
        }
        (Flavor::Pooled, Response::Expectiles(xi)) => {
            pooled_candidate(xi, z, opts.method, opts.slices)
        }
        _ => Err(SdrError::InvalidOptions(
            "response kind does not match the estimator flavor".into(),
        )),
    }
}

/// Data shared by every candidate ridge weight: standardized predictors and
/// the Gram matrix.
pub(crate) struct Prepared<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub std: StandardizedSample,
    pub kernel: Option<(f64, DMatrix<f64>)>,
}

impl<'a> Prepared<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a [f64], opts: &FitOptions) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(SdrError::DimensionMismatch(format!("{} responses for {n} rows", y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SdrError::NonFiniteInput);
        }
        opts.validate(n, p)?;
        let std = standardize(x)?;
        let kernel = if opts.flavor.uses_expectiles() {
            let r = opts.bandwidth.resolve(x)?;
            Some((r, gram_matrix(x, r)?))
        } else {
            None
        };
        Ok(Prepared { x, y, std, kernel })
    }

    pub fn expectiles(&self, opts: &FitOptions, lambda: f64) -> Result<ExpectileMatrix> {
        let (r, gram) = self
            .kernel
            .as_ref()
            .ok_or_else(|| SdrError::InvalidOptions("classical flavor has no kernel".into()))?;
        let cfg = KernelConfig {
            r: *r,
            lambda,
            jitter: opts.jitter,
        };
        cfg.validate()?;
        expectile_matrix_with_gram(gram, self.x, self.y, &opts.levels, &cfg)
    }

    /// Full estimate at a fixed ridge weight (ignored for the classical flavor).
    pub fn fit_at(&self, opts: &FitOptions, lambda: f64) -> Result<SdrEstimate> {
        let mut resolved = opts.clone();
        let (candidate, crossings) = if opts.flavor.uses_expectiles() {
            let xi = self.expectiles(opts, lambda)?;
            resolved.lambda = LambdaChoice::Fixed(lambda);
            resolved.bandwidth = Bandwidth::Fixed(self.kernel.as_ref().map(|k| k.0).unwrap_or(0.0));
            (
                build_candidate(&self.std.whitened, Response::Expectiles(&xi), opts)?,
                Some(xi.crossings()),
            )
        } else {
            (
                build_candidate(&self.std.whitened, Response::Observed(self.y), opts)?,
                None,
            )
        };
        let mut est = estimate_directions(&candidate, &self.std.whitener, opts.d)?;
        est.options = Some(resolved);
        est.expectile_crossings = crossings;
        Ok(est)
    }
}

/// Standardize, optionally fit kernel expectiles, build the candidate and
/// extract `d` directions.
pub fn fit_sdr(x: &DMatrix<f64>, y: &[f64], opts: &FitOptions) -> Result<SdrEstimate> {
    let prepared = Prepared::new(x, y, opts)?;
    if !opts.flavor.uses_expectiles() {
        return prepared.fit_at(opts, 0.0);
    }
    match &opts.lambda {
        LambdaChoice::Fixed(l) => prepared.fit_at(opts, *l),
        LambdaChoice::Auto(grid) => {
            let (selection, best) = select_lambda_prepared(&prepared, opts, grid)?;
            let mut est = best;
            est.lambda_selection = Some(selection);
            Ok(est)
        }
    }
}
