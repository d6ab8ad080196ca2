//! Distance correlation and data-driven choice of the ridge weight.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdrError};
use crate::inverse::{FitOptions, Prepared, SdrEstimate};

/// Candidate ridge weights scored by [`select_lambda`] when none are given.
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.001, 0.01, 0.1, 1.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcorResult {
    pub dcov2: f64,
    pub dcor2: f64,
    pub n: usize,
}

fn double_centered_distances(u: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (u.row(i) - u.row(j)).norm();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    let row_means: Vec<f64> = (0..n).map(|i| d.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            d[(i, j)] += grand - row_means[i] - row_means[j];
        }
    }
    d
}

fn mean_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows() as f64;
    a.component_mul(b).sum() / (n * n)
}

/// Squared sample distance correlation (V-statistic form).
///
/// Returns `dcor2 = 0` when either sample has zero distance variance.
pub fn dcor2(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DcorResult> {
    let n = u.nrows();
    if n < 2 || v.nrows() != n {
        return Err(SdrError::DimensionMismatch(format!(
            "distance correlation needs two samples of equal size n >= 2, got {} and {}",
            n,
            v.nrows()
        )));
    }
    if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(SdrError::NonFiniteInput);
    }
    let a = double_centered_distances(u);
    let b = double_centered_distances(v);
    let dcov2 = mean_product(&a, &b).max(0.0);
    let vu = mean_product(&a, &a);
    let vv = mean_product(&b, &b);
    let denom = (vu * vv).sqrt();
    let dcor2 = if denom > 0.0 { (dcov2 / denom).min(1.0) } else { 0.0 };
    Ok(DcorResult { dcov2, dcor2, n })
}

/// Scores for each grid value and the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub grid: Vec<f64>,
    /// `-inf` marks a candidate whose fit failed.
    pub scores: Vec<f64>,
    pub chosen: f64,
}

pub(crate) fn select_lambda_prepared(
    prepared: &Prepared<'_>,
    opts: &FitOptions,
    grid: &[f64],
) -> Result<(LambdaSelection, SdrEstimate)> {
    if grid.is_empty() {
        return Err(SdrError::InvalidOptions("lambda grid is empty".into()));
    }
    let y = DMatrix::from_column_slice(prepared.y.len(), 1, prepared.y);
    let fits: Vec<Option<(f64, SdrEstimate)>> = grid
        .par_iter()
        .map(|&lambda| {
            let est = prepared.fit_at(opts, lambda).ok()?;
            let reduced = est.reduce(prepared.x);
            let score = dcor2(&y, &reduced).ok()?.dcor2;
            Some((score, est))
        })
        .collect();
    let scores: Vec<f64> = fits
        .iter()
        .map(|f| f.as_ref().map_or(f64::NEG_INFINITY, |(s, _)| *s))
        .collect();
    // First maximum in grid order; the grid is expected ascending so ties go to the smaller λ.
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > f64::NEG_INFINITY && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| {
        SdrError::InvalidOptions("every lambda candidate failed to produce an estimate".into())
    })?;
    let selection = LambdaSelection {
        grid: grid.to_vec(),
        scores,
        chosen: grid[best],
    };
    let estimate = fits
        .into_iter()
        .nth(best)
        .flatten()
        .map(|(_, e)| e)
        .expect("best candidate has an estimate");
    Ok((selection, estimate))
}

/// Fits the expectile-assisted estimator at each grid value and keeps the
/// one whose reduced predictors have the largest squared distance
/// correlation with `y`.
pub fn select_lambda(
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &FitOptions,
    grid: &[f64],
) -> Result<LambdaSelection> {
    if !opts.flavor.uses_expectiles() {
        return Err(SdrError::InvalidOptions(
            "lambda selection applies to expectile-assisted estimators".into(),
        ));
    }
    let prepared = Prepared::new(x, y, opts)?;
    Ok(select_lambda_prepared(&prepared, opts, grid)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse::{fit_sdr, LambdaChoice, Method};
    use crate::rng::from_seed;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = from_seed(seed);
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn self_correlation_is_one() {
        let u = normals(40, 3, 1);
        assert_abs_diff_eq!(dcor2(&u, &u).unwrap().dcor2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_sample_gives_zero() {
        let u = normals(30, 2, 2);
        let c = DMatrix::from_element(30, 1, 4.0);
        let r = dcor2(&u, &c).unwrap();
        assert_eq!(r.dcor2, 0.0);
        assert_eq!(r.dcov2, 0.0);
    }

    #[test]
    fn independent_normals_near_zero() {
        let u = normals(2000, 1, 3);
        let v = normals(2000, 1, 4);
        assert!(dcor2(&u, &v).unwrap().dcor2 < 0.01);
    }

    #[test]
    fn hand_computed_two_point_value() {
        // n = 2: every double-centered distance matrix is (d/2)·[[−1, 1], [1, −1]],
        // so any two nondegenerate samples have dcor² = 1.
        let u = DMatrix::from_column_slice(2, 1, &[0.0, 3.0]);
        let v = DMatrix::from_column_slice(2, 1, &[5.0, -1.0]);
        let r = dcor2(&u, &v).unwrap();
        assert_abs_diff_eq!(r.dcov2, 3.0 * 6.0 / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.dcor2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invariances() {
        let u = normals(50, 3, 5);
        let mut rng = from_seed(6);
        let v = DMatrix::from_fn(50, 1, |i, _| u[(i, 0)].powi(2) + 0.3 * rng.sample::<f64, _>(StandardNormal));
        let base = dcor2(&u, &v).unwrap().dcor2;
        assert_abs_diff_eq!(dcor2(&v, &u).unwrap().dcor2, base, epsilon = 1e-10);
        let shifted = u.map(|x| x + 7.5);
        assert_abs_diff_eq!(dcor2(&shifted, &v).unwrap().dcor2, base, epsilon = 1e-10);
        let q = normals(3, 3, 7).qr().q();
        assert_abs_diff_eq!(dcor2(&(&u * q), &v).unwrap().dcor2, base, epsilon = 1e-10);
        assert!(base > 0.0 && base <= 1.0);
    }

    #[test]
    fn errors() {
        let u = normals(5, 1, 1);
        assert!(dcor2(&u, &normals(4, 1, 2)).is_err());
        let mut bad = u.clone();
        bad[(1, 0)] = f64::NAN;
        assert_eq!(dcor2(&bad, &u).unwrap_err(), SdrError::NonFiniteInput);
    }

    fn model_data(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let x = normals(n, 4, seed);
        let mut rng = from_seed(seed + 1);
        let y = (0..n)
            .map(|i| x[(i, 0)] * (1.0 + 0.5 * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        (x, y)
    }

    #[test]
    fn selection_picks_maximum_score() {
        let (x, y) = model_data(60, 10);
        let opts = FitOptions::expectile(Method::Sir, 1).with_projections(50).with_slices(4);
        let sel = select_lambda(&x, &y, &opts, &DEFAULT_LAMBDA_GRID).unwrap();
        let max = sel.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let chosen_idx = sel.grid.iter().position(|&g| g == sel.chosen).unwrap();
        assert_eq!(sel.scores[chosen_idx], max);
        assert_eq!(sel.scores.len(), 5);

        let single = select_lambda(&x, &y, &opts, &[0.3]).unwrap();
        assert_eq!(single.chosen, 0.3);

        // fit_sdr with an automatic grid reports the same choice.
        let auto = fit_sdr(&x, &y, &opts.clone().with_lambda(LambdaChoice::auto())).unwrap();
        assert_eq!(auto.lambda_selection.unwrap().chosen, sel.chosen);
    }

    #[test]
    fn selection_rejects_classical() {
        let (x, y) = model_data(30, 1);
        assert!(select_lambda(&x, &y, &FitOptions::classical(Method::Sir, 1), &[1.0]).is_err());
    }
}
