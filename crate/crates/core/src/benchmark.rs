//! Synthetic regression models, Monte-Carlo accuracy tables, parameter
//! sweeps and leave-one-out asymmetric-loss evaluation.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdrError};
use crate::expectile::{bandwidth_heuristic, default_levels, fit_ker, phi_tau, KernelConfig};
use crate::inverse::{fit_sdr, Bandwidth, FitOptions, Flavor, LambdaChoice, SdrEstimate};
use crate::numerics::{subspace_distance, SubspaceBasis};
use crate::rng::{derive_seed, substream, tag};

pub const DEFAULT_SIGMA: f64 = 0.2;
/// Ridge weight for the expectile curves fitted on reduced predictors.
pub const DEFAULT_CURVE_LAMBDA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    I,
    II,
    III,
    IV,
    V,
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [ModelId::I, ModelId::II, ModelId::III, ModelId::IV, ModelId::V];

    /// Dimension of the true central subspace.
    pub fn true_dim(&self) -> usize {
        match self {
            ModelId::V => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelId::I => "I",
            ModelId::II => "II",
            ModelId::III => "III",
            ModelId::IV => "IV",
            ModelId::V => "V",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelId {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ModelId::I),
            "II" | "2" => Ok(ModelId::II),
            "III" | "3" => Ok(ModelId::III),
            "IV" | "4" => Ok(ModelId::IV),
            "V" | "5" => Ok(ModelId::V),
            other => Err(SdrError::InvalidOptions(format!("unknown model '{other}'"))),
        }
    }
}

/// One of the five benchmark regressions with its index vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    pub id: ModelId,
    pub beta1: DVector<f64>,
    pub beta2: DVector<f64>,
    pub sigma: f64,
}

impl SimModel {
    pub fn new(id: ModelId, p: usize) -> Result<Self> {
        if p < 6 {
            return Err(SdrError::InvalidP(p));
        }
        let mut beta1 = DVector::zeros(p);
        let mut beta2 = DVector::zeros(p);
        beta1.rows_mut(0, 6).copy_from_slice(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        beta2.rows_mut(0, 6).copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 3.0]);
        Ok(SimModel {
            id,
            beta1,
            beta2,
            sigma: DEFAULT_SIGMA,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn p(&self) -> usize {
        self.beta1.len()
    }

    /// Basis of the true central subspace.
    pub fn true_basis(&self) -> DMatrix<f64> {
        match self.id {
            ModelId::V => DMatrix::from_column_slice(self.p(), 1, self.beta1.as_slice()),
            _ => DMatrix::from_columns(&[self.beta1.clone(), self.beta2.clone()]),
        }
    }

    /// Response for predictor row `x` and noise draw `eps`.
    pub fn response(&self, x: &[f64], eps: f64) -> f64 {
        let dot = |b: &DVector<f64>| b.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
        let u1 = dot(&self.beta1);
        let u2 = dot(&self.beta2);
        let s = self.sigma;
        match self.id {
            ModelId::I => 0.4 * u1 * u1 + 3.0 * (u2 / 4.0).sin() + s * eps,
            ModelId::II => 3.0 * (u1 / 4.0).sin() + 3.0 * (u2 / 4.0).sin() + s * eps,
            ModelId::III => 0.4 * u1 * u1 + u2.abs().sqrt() + s * eps,
            ModelId::IV => 3.0 * (u2 / 4.0).sin() + (1.0 + u1 * u1) * s * eps,
            ModelId::V => u1 * eps,
        }
    }
}

/// Standard normal predictors and the model response with independent
/// standard normal noise.
pub fn gen_model<R: Rng + ?Sized>(
    model: &SimModel,
    n: usize,
    rng: &mut R,
) -> (DMatrix<f64>, Vec<f64>) {
    let p = model.p();
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = (0..n)
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            model.response(&row, rng.sample(StandardNormal))
        })
        .collect();
    (x, y)
}

/// How per-replicate Δ values are summarized in a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMetric {
    /// `‖P_B − P_B̂‖_F`.
    #[default]
    Frobenius,
    /// `‖P_B − P_B̂‖²_F`.
    SquaredFrobenius,
}

impl DeltaMetric {
    pub fn apply(&self, delta: f64) -> f64 {
        match self {
            DeltaMetric::Frobenius => delta,
            DeltaMetric::SquaredFrobenius => delta * delta,
        }
    }
}

impl FromStr for DeltaMetric {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "frobenius" | "f" => Ok(DeltaMetric::Frobenius),
            "squared" | "squared-frobenius" | "f2" => Ok(DeltaMetric::SquaredFrobenius),
            other => Err(SdrError::InvalidOptions(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelId,
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub reps: usize,
    pub seed: u64,
    pub metric: DeltaMetric,
    /// One entry per estimator; `seed` fields are overwritten per replicate.
    pub estimators: Vec<FitOptions>,
}

impl SimConfig {
    pub fn new(model: ModelId, n: usize, p: usize, reps: usize, seed: u64) -> Self {
        SimConfig {
            model,
            n,
            p,
            sigma: DEFAULT_SIGMA,
            reps,
            seed,
            metric: DeltaMetric::Frobenius,
            estimators: Vec::new(),
        }
    }

    pub fn with_metric(mut self, metric: DeltaMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_estimator(mut self, opts: FitOptions) -> Self {
        self.estimators.push(opts);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(SdrError::InvalidOptions("reps must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(SdrError::InvalidOptions("no estimators configured".into()));
        }
        if self.p < 6 {
            return Err(SdrError::InvalidP(self.p));
        }
        for e in &self.estimators {
            e.validate(self.n, self.p)?;
        }
        Ok(())
    }
}

/// Mean and standard error of Δ for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub method: String,
    pub flavor: Flavor,
    pub n: usize,
    pub p: usize,
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "N")]
    pub n_proj: usize,
    pub k: usize,
    pub d: usize,
    pub mean_delta: f64,
    pub se_delta: f64,
    /// Replicates that produced an estimate.
    pub reps: usize,
    pub seconds: f64,
    pub failed: usize,
    pub metric: DeltaMetric,
    /// Per-replicate Δ in replicate order (failed replicates omitted),
    /// always on the unsquared scale.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub deltas: Vec<f64>,
}

/// Sample mean and `sd/√n`.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Δ between an estimate and a reference basis.
pub fn estimate_delta(truth: &SubspaceBasis, est: &SdrEstimate) -> Result<f64> {
    let b = SubspaceBasis::new(est.basis.clone())?;
    subspace_distance(truth, &b)
}

/// Runs every estimator on `reps` independent datasets. Replicate `r` uses
/// substream `(seed, r)`; within it data and each estimator's projections
/// draw from disjoint derived seeds.
pub fn run_simulation(config: &SimConfig) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let model = SimModel::new(config.model, config.p)?.with_sigma(config.sigma);
    let truth = SubspaceBasis::new(model.true_basis())?;
    let n_est = config.estimators.len();

    let per_rep: Vec<Vec<(Option<f64>, f64)>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(config.seed, tag::REPLICATE, rep as u64);
            let mut data_rng = substream(rep_seed, tag::DATA, 0);
            let (x, y) = gen_model(&model, config.n, &mut data_rng);
            config
                .estimators
                .iter()
                .enumerate()
                .map(|(e, opts)| {
                    let start = Instant::now();
                    let opts = opts.clone().with_seed(derive_seed(rep_seed, tag::METHOD, e as u64));
                    let delta = match fit_sdr(&x, &y, &opts).and_then(|est| estimate_delta(&truth, &est)) {
                        Ok(d) => Some(d),
                        Err(err) => {
                            log::warn!("replicate {rep}, {}: {err}", opts.label());
                            None
                        }
                    };
                    (delta, start.elapsed().as_secs_f64())
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(n_est);
    for (e, opts) in config.estimators.iter().enumerate() {
        let deltas: Vec<f64> = per_rep.iter().filter_map(|r| r[e].0).collect();
        let seconds: f64 = per_rep.iter().map(|r| r[e].1).sum();
        let failed = config.reps - deltas.len();
        if failed > 0 {
            log::warn!("{}: {failed} of {} replicates failed", opts.label(), config.reps);
        }
        let summarized: Vec<f64> = deltas.iter().map(|&d| config.metric.apply(d)).collect();
        let (mean_delta, se_delta) = mean_se(&summarized);
        rows.push(BenchRow {
            model: config.model.to_string(),
            method: opts.label(),
            flavor: opts.flavor,
            n: config.n,
            p: config.p,
            h: opts.slices,
            n_proj: if opts.flavor == Flavor::Projective { opts.projections } else { 0 },
            k: if opts.flavor.uses_expectiles() { opts.levels.len() } else { 0 },
            d: opts.d,
            mean_delta,
            se_delta,
            reps: deltas.len(),
            seconds,
            failed,
            metric: config.metric,
            deltas,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    H,
    N,
    K,
    RMultiplier,
    Lambda,
}

impl FromStr for SweepAxis {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "h" | "slices" => Ok(SweepAxis::H),
            "n" | "projections" => Ok(SweepAxis::N),
            "k" | "levels" => Ok(SweepAxis::K),
            "r" | "r-multiplier" | "r_multiplier" => Ok(SweepAxis::RMultiplier),
            "lambda" => Ok(SweepAxis::Lambda),
            other => Err(SdrError::InvalidOptions(format!("unknown sweep axis '{other}'"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::H => "H",
            SweepAxis::N => "N",
            SweepAxis::K => "k",
            SweepAxis::RMultiplier => "r-multiplier",
            SweepAxis::Lambda => "lambda",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    #[serde(flatten)]
    pub row: BenchRow,
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(SdrError::InvalidOptions(format!("{axis} values must be positive integers, got {v}")))
    }
}

/// Applies one sweep value to an estimator's options.
pub fn apply_axis(opts: &FitOptions, axis: SweepAxis, value: f64) -> Result<FitOptions> {
    let o = opts.clone();
    Ok(match axis {
        SweepAxis::H => o.with_slices(as_count(axis, value)?),
        SweepAxis::N => o.with_projections(as_count(axis, value)?),
        SweepAxis::K => o.with_levels(default_levels(as_count(axis, value)?)),
        SweepAxis::RMultiplier => {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SdrError::InvalidOptions(format!("r multiplier must be positive, got {value}")));
            }
            o.with_bandwidth(Bandwidth::Scaled(value))
        }
        SweepAxis::Lambda => {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(SdrError::InvalidOptions(format!("lambda must be nonnegative, got {value}")));
            }
            o.with_lambda(LambdaChoice::Fixed(value))
        }
    })
}

/// Repeats [`run_simulation`] for each axis value with everything else,
/// including the seed, held fixed.
pub fn run_sweep(config: &SimConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(SdrError::InvalidOptions("sweep needs at least one value".into()));
    }
    let mut out = Vec::new();
    for &v in values {
        let mut cfg = config.clone();
        cfg.estimators = config
            .estimators
            .iter()
            .map(|e| apply_axis(e, axis, v))
            .collect::<Result<_>>()?;
        for row in run_simulation(&cfg)? {
            out.push(SweepRow { axis, value: v, row });
        }
    }
    Ok(out)
}

fn drop_row(x: &DMatrix<f64>, y: &[f64], i: usize) -> (DMatrix<f64>, Vec<f64>) {
    let xr = x.clone().remove_row(i);
    let yr = y.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
    (xr, yr)
}

/// Fits kernel expectile curves of `y` on reduced predictors `u`.
pub fn fit_reduced_curves(
    u: &DMatrix<f64>,
    y: &[f64],
    taus: &[f64],
    lambda: f64,
) -> Result<Vec<crate::expectile::ExpectileFit>> {
    let r = match bandwidth_heuristic(u) {
        Ok(r) => r,
        // All reduced predictors equal: any scale gives a constant fit.
        Err(SdrError::DegenerateSample) => 1.0,
        Err(e) => return Err(e),
    };
    let cfg = KernelConfig::new(r, lambda)?;
    taus.iter().map(|&t| fit_ker(u, y, t, &cfg)).collect()
}

/// Leave-one-out average asymmetric loss.
///
/// For each held-out row the SDR estimator is refit on the rest, a kernel
/// expectile curve is fit on the reduced predictors `X B̂`, and the held-out
/// response is scored by `φ_τ`. Returns `(τ, δ_τ)` pairs.
pub fn loocv_delta_tau(
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &FitOptions,
    taus: &[f64],
    curve_lambda: f64,
) -> Result<Vec<(f64, f64)>> {
    let n = x.nrows();
    if n < 3 {
        return Err(SdrError::DimensionMismatch(format!("leave-one-out needs n >= 3, got {n}")));
    }
    if y.len() != n {
        return Err(SdrError::DimensionMismatch(format!("{} responses for {n} rows", y.len())));
    }
    for &t in taus {
        phi_tau(0.0, t)?;
    }
    let losses: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xr, yr) = drop_row(x, y, i);
            let est = fit_sdr(&xr, &yr, opts)?;
            let u = est.reduce(&xr);
            let held = est.reduce(&x.rows(i, 1).into_owned());
            let fits = fit_reduced_curves(&u, &yr, taus, curve_lambda)?;
            fits.iter()
                .map(|f| {
                    let pred = f.predict(&held)?[0];
                    phi_tau(y[i] - pred, f.tau)
                })
                .collect()
        })
        .collect();
    let mut sums = vec![0.0; taus.len()];
    for l in losses {
        for (s, v) in sums.iter_mut().zip(l?) {
            *s += v;
        }
    }
    Ok(taus.iter().zip(sums).map(|(&t, s)| (t, s / n as f64)).collect())
}

/// Rows sorted by the first reduced predictor with fitted expectile curves.
#[derive(Debug, Clone)]
pub struct CurveTable {
    pub taus: Vec<f64>,
    /// Original row index.
    pub index: Vec<usize>,
    pub reduced: Vec<f64>,
    pub response: Vec<f64>,
    /// `curves[t][row]`.
    pub curves: Vec<Vec<f64>>,
}

/// Expectile curves of `y` along the first estimated direction, sorted by
/// `b̂₁ᵀx` (ties by row index).
pub fn expectile_curves(
    x: &DMatrix<f64>,
    y: &[f64],
    est: &SdrEstimate,
    taus: &[f64],
    lambda: f64,
) -> Result<CurveTable> {
    let u = x * est.basis.column(0);
    let u = DMatrix::from_column_slice(u.len(), 1, u.as_slice());
    let fits = fit_reduced_curves(&u, y, taus, lambda)?;
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| u[(a, 0)].total_cmp(&u[(b, 0)]).then(a.cmp(&b)));
    Ok(CurveTable {
        taus: taus.to_vec(),
        reduced: order.iter().map(|&i| u[(i, 0)]).collect(),
        response: order.iter().map(|&i| y[i]).collect(),
        curves: fits
            .iter()
            .map(|f| order.iter().map(|&i| f.fitted()[i]).collect())
            .collect(),
        index: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse::Method;
    use crate::rng::from_seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn model_vectors_and_errors() {
        let m = SimModel::new(ModelId::I, 20).unwrap();
        assert_eq!(&m.beta1.as_slice()[..6], &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(&m.beta2.as_slice()[..6], &[1.0, 0.0, 0.0, 0.0, 1.0, 3.0]);
        assert!(m.beta1.as_slice()[6..].iter().all(|&v| v == 0.0));
        assert_eq!(m.sigma, 0.2);
        assert_eq!(SimModel::new(ModelId::II, 5).unwrap_err(), SdrError::InvalidP(5));
        assert_eq!(m.true_basis().ncols(), 2);
        assert_eq!(SimModel::new(ModelId::V, 6).unwrap().true_basis().ncols(), 1);
    }

    #[test]
    fn model_formulas() {
        let x = [0.5, -1.0, 2.0, 0.3, 1.5, -0.4];
        let u1 = 0.5 - 1.0 + 2.0;
        let u2 = 0.5 + 1.5 - 1.2;
        let eps = 0.7;
        let get = |id| SimModel::new(id, 6).unwrap().response(&x, eps);
        assert_abs_diff_eq!(get(ModelId::I), 0.4 * u1 * u1 + 3.0 * (u2 / 4.0f64).sin() + 0.2 * eps, epsilon = 1e-14);
        assert_abs_diff_eq!(get(ModelId::II), 3.0 * (u1 / 4.0f64).sin() + 3.0 * (u2 / 4.0f64).sin() + 0.2 * eps, epsilon = 1e-14);
        assert_abs_diff_eq!(get(ModelId::III), 0.4 * u1 * u1 + f64::sqrt(u2.abs()) + 0.2 * eps, epsilon = 1e-14);
        assert_abs_diff_eq!(get(ModelId::IV), 3.0 * (u2 / 4.0f64).sin() + (1.0 + u1 * u1) * 0.2 * eps, epsilon = 1e-14);
        // ε = 1 makes model V the linear index itself.
        assert_abs_diff_eq!(SimModel::new(ModelId::V, 6).unwrap().response(&x, 1.0), u1, epsilon = 1e-14);
    }

    #[test]
    fn generation_is_deterministic() {
        let m = SimModel::new(ModelId::I, 6).unwrap();
        let a = gen_model(&m, 30, &mut from_seed(4));
        let b = gen_model(&m, 30, &mut from_seed(4));
        assert_eq!(a, b);
    }

    #[test]
    fn generated_predictor_moments() {
        let m = SimModel::new(ModelId::II, 6).unwrap();
        let (x, _) = gen_model(&m, 100_000, &mut from_seed(77));
        for c in x.column_iter() {
            let mean = c.mean();
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (c.len() - 1) as f64;
            assert!(mean.abs() < 0.02);
            assert!((var - 1.0).abs() < 0.03);
        }
    }

    #[test]
    fn mean_se_formula() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5);
        assert_abs_diff_eq!(se, (5.0f64 / 3.0).sqrt() / 2.0, epsilon = 1e-15);
        assert_eq!(mean_se(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn easy_recovery_single_rep() {
        // Model V with ε ≡ 1 is y = β₁ᵀX; emulate via a custom estimator run.
        let model = SimModel::new(ModelId::V, 6).unwrap();
        let mut rng = from_seed(5);
        let x = DMatrix::from_fn(500, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = (0..500)
            .map(|i| model.response(x.row(i).iter().copied().collect::<Vec<_>>().as_slice(), 1.0))
            .collect();
        let est = fit_sdr(&x, &y, &FitOptions::classical(Method::Sir, 1).with_slices(5)).unwrap();
        let truth = SubspaceBasis::new(model.true_basis()).unwrap();
        let delta = estimate_delta(&truth, &est).unwrap();
        assert!(delta < 0.1, "delta {delta}");
    }

    #[test]
    fn simulation_is_reproducible_and_bounded() {
        let cfg = SimConfig::new(ModelId::I, 60, 6, 4, 11)
            .with_estimator(FitOptions::classical(Method::Dr, 2).with_slices(5))
            .with_estimator(
                FitOptions::expectile(Method::Sir, 2)
                    .with_slices(5)
                    .with_projections(20)
                    .with_lambda(LambdaChoice::Fixed(0.1)),
            );
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(a.len(), 2);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.deltas, rb.deltas);
            assert_eq!(ra.mean_delta.to_bits(), rb.mean_delta.to_bits());
            assert_eq!(ra.se_delta.to_bits(), rb.se_delta.to_bits());
            assert_eq!(ra.failed, 0);
            assert!(ra.deltas.iter().all(|&d| (0.0..=2.0 + 1e-12).contains(&d)));
        }
        assert_eq!(a[1].method, "EA-SIR");
        assert_eq!(a[1].n_proj, 20);
        assert_eq!(a[1].k, 9);
        assert!(run_simulation(&SimConfig::new(ModelId::I, 60, 6, 0, 1)).is_err());

        let sq = run_simulation(&cfg.clone().with_metric(DeltaMetric::SquaredFrobenius)).unwrap();
        let expect: Vec<f64> = a[0].deltas.iter().map(|d| d * d).collect();
        assert_eq!(sq[0].deltas, a[0].deltas);
        assert_abs_diff_eq!(sq[0].mean_delta, mean_se(&expect).0, epsilon = 1e-15);
    }

    #[test]
    fn sweep_applies_axis_values() {
        let base = SimConfig::new(ModelId::II, 50, 6, 2, 3)
            .with_estimator(FitOptions::classical(Method::Sir, 2));
        let rows = run_sweep(&base, SweepAxis::H, &[2.0, 4.0]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].row.h, 2);
        assert_eq!(rows[1].row.h, 4);
        assert!(run_sweep(&base, SweepAxis::H, &[2.5]).is_err());
        let opts = FitOptions::expectile(Method::Dr, 2);
        assert_eq!(apply_axis(&opts, SweepAxis::K, 4.0).unwrap().levels, vec![0.2, 0.4, 0.6, 0.8]);
        assert_eq!(
            apply_axis(&opts, SweepAxis::RMultiplier, 0.25).unwrap().bandwidth,
            Bandwidth::Scaled(0.25)
        );
        assert_eq!(
            apply_axis(&opts, SweepAxis::Lambda, 10.0).unwrap().lambda,
            LambdaChoice::Fixed(10.0)
        );
        assert_eq!(apply_axis(&opts, SweepAxis::N, 100.0).unwrap().projections, 100);
    }

    #[test]
    fn loocv_constant_response_is_zero() {
        let mut rng = from_seed(1);
        let x = DMatrix::from_fn(12, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = vec![2.0; 12];
        let out = loocv_delta_tau(
            &x,
            &y,
            &FitOptions::classical(Method::Sir, 1).with_slices(2),
            &[0.2, 0.5, 0.8],
            0.1,
        )
        .unwrap();
        assert_eq!(out.len(), 3);
        for (_, d) in out {
            assert!(d.abs() < 1e-20);
        }
    }

    #[test]
    fn curves_sorted_and_track_mean() {
        let n = 200;
        let mut rng = from_seed(19);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y: Vec<f64> = (0..n)
            .map(|i| x[(i, 0)] + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let est = fit_sdr(&x, &y, &FitOptions::classical(Method::Sir, 1).with_slices(5)).unwrap();
        let table = expectile_curves(&x, &y, &est, &[0.5], DEFAULT_CURVE_LAMBDA).unwrap();
        assert!(table.reduced.windows(2).all(|w| w[0] <= w[1]));
        // Conditional mean along the fitted direction: E[y | b̂ᵀx] ≈ β̂ slope · b̂ᵀx.
        let b = est.basis.column(0);
        let slope = b[0] / b.norm_squared();
        let dev = table
            .reduced
            .iter()
            .zip(&table.curves[0])
            .map(|(u, f)| (f - slope * u).abs())
            .fold(0.0, f64::max);
        assert!(dev < 0.2, "max deviation {dev}");
    }
}
