//! Dense symmetric linear algebra shared by the estimators: eigensolves,
//! PSD inverse square roots, whitening, sphere sampling and the
//! projection-distance accuracy metric.

use nalgebra::{DMatrix, DVector};
use rand_distr::StandardNormal;

use crate::error::{Result, SdrError};

/// Eigenvalues below this fraction of the largest one are clamped before inversion.
pub const RELATIVE_EIGEN_FLOOR: f64 = 1e-10;
/// If every eigenvalue is below this, the matrix is treated as zero.
pub const ABSOLUTE_EIGEN_FLOOR: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
///
/// Each eigenvector is signed so that its largest-magnitude component is
/// positive (first such component on exact ties).
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }

    /// First `d` eigenvectors as columns.
    pub fn leading(&self, d: usize) -> DMatrix<f64> {
        self.vectors.columns(0, d).into_owned()
    }
}

pub fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

pub fn max_asymmetry(s: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

fn fix_sign(v: &mut [f64]) {
    let mut idx = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Symmetric eigendecomposition of `(S + Sᵀ)/2`.
pub fn sym_eig(s: &DMatrix<f64>) -> SymmetricEigen {
    assert!(s.is_square(), "sym_eig needs a square matrix");
    let p = s.nrows();
    let eig = nalgebra::SymmetricEigen::new(symmetrize(s));
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        fix_sign(&mut col);
        vectors.set_column(dst, &DVector::from_vec(col));
    }
    SymmetricEigen { values, vectors }
}

/// `S^{-1/2}` for a symmetric PSD matrix, with small eigenvalues clamped
/// to `1e-10 × λ_max` before inversion.
pub fn inv_sqrt_psd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !s.is_square() {
        return Err(SdrError::DimensionMismatch("inv_sqrt_psd needs a square matrix".into()));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(SdrError::NonFiniteInput);
    }
    let scale = s.amax().max(1.0);
    let asym = max_asymmetry(s);
    if asym > SYMMETRY_TOL * scale {
        return Err(SdrError::NotSymmetric(asym));
    }
    let eig = sym_eig(s);
    let top = eig.values[0];
    if top < ABSOLUTE_EIGEN_FLOOR {
        return Err(SdrError::AllEigenvaluesBelowFloor);
    }
    let floor = RELATIVE_EIGEN_FLOOR * top;
    let inv_sqrt = eig.values.map(|l| 1.0 / l.max(floor).sqrt());
    let r = &eig.vectors * DMatrix::from_diagonal(&inv_sqrt) * eig.vectors.transpose();
    Ok(symmetrize(&r))
}

/// Predictor matrix together with its sample moments and whitened rows.
#[derive(Debug, Clone)]
pub struct StandardizedSample {
    pub raw: DMatrix<f64>,
    pub mean: DVector<f64>,
    /// Sample covariance with divisor `n`.
    pub covariance: DMatrix<f64>,
    pub whitener: DMatrix<f64>,
    pub whitened: DMatrix<f64>,
}

impl StandardizedSample {
    pub fn n(&self) -> usize {
        self.raw.nrows()
    }

    pub fn p(&self) -> usize {
        self.raw.ncols()
    }
}

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Centers `x` and whitens it with the inverse square root of its
/// divisor-`n` sample covariance.
pub fn standardize(x: &DMatrix<f64>) -> Result<StandardizedSample> {
    let (n, p) = x.shape();
    if n < 2 || p < 1 {
        return Err(SdrError::DimensionMismatch(format!(
            "standardize needs n >= 2 and p >= 1, got {n}x{p}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SdrError::NonFiniteInput);
    }
    let mean = column_means(x);
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let covariance = symmetrize(&(centered.transpose() * &centered / n as f64));
    let whitener = match inv_sqrt_psd(&covariance) {
        Ok(w) => w,
        Err(SdrError::AllEigenvaluesBelowFloor) => return Err(SdrError::SingularCovariance),
        Err(e) => return Err(e),
    };
    let whitened = &centered * &whitener;
    Ok(StandardizedSample {
        raw: x.clone(),
        mean,
        covariance,
        whitener,
        whitened,
    })
}

/// Uniform draw from the unit sphere in `R^k` by normalizing a standard
/// normal vector.
pub fn sample_unit_sphere<R: rand::Rng + ?Sized>(k: usize, rng: &mut R) -> DVector<f64> {
    assert!(k >= 1, "sphere dimension must be positive");
    loop {
        let v = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = v.norm();
        if norm > 0.0 && norm.is_finite() {
            return v / norm;
        }
    }
}

/// A `p × d` matrix of full column rank.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    matrix: DMatrix<f64>,
    orthonormal: DMatrix<f64>,
}

impl SubspaceBasis {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (p, d) = matrix.shape();
        if p == 0 || d == 0 || d > p {
            return Err(SdrError::RankDeficientBasis);
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(SdrError::NonFiniteInput);
        }
        let mut normalized = matrix.clone();
        for mut col in normalized.column_iter_mut() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(SdrError::RankDeficientBasis);
            }
            col /= norm;
        }
        let svd = normalized.clone().svd(true, false);
        if svd.singular_values.min() <= RANK_TOL {
            return Err(SdrError::RankDeficientBasis);
        }
        // Thin QR gives an orthonormal basis of the same column space.
        let orthonormal = normalized.qr().q();
        Ok(SubspaceBasis {
            matrix,
            orthonormal,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.matrix.nrows()
    }

    /// Orthogonal projection onto the column space.
    pub fn projection(&self) -> DMatrix<f64> {
        &self.orthonormal * self.orthonormal.transpose()
    }
}

/// `‖P_B − P_B̂‖_F`, the Frobenius distance between orthogonal projections.
pub fn subspace_distance(b: &SubspaceBasis, bhat: &SubspaceBasis) -> Result<f64> {
    if b.ambient() != bhat.ambient() {
        return Err(SdrError::DimensionMismatch(format!(
            "bases live in R^{} and R^{}",
            b.ambient(),
            bhat.ambient()
        )));
    }
    Ok((b.projection() - bhat.projection()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = from_seed(seed);
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    fn random_rotation(p: usize, seed: u64) -> DMatrix<f64> {
        random_matrix(p, p, seed).qr().q()
    }

    #[test]
    fn standardize_four_point_cross() {
        let x = DMatrix::from_row_slice(4, 2, &[-1.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0]);
        let s = standardize(&x).unwrap();
        assert_abs_diff_eq!(s.mean.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.covariance, DMatrix::from_diagonal_element(2, 2, 0.5), epsilon = 1e-15);
        assert_abs_diff_eq!(s.whitened, x * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn standardize_identity_case() {
        // Build X with zero column means and Xᵀ X / n = I.
        let n = 8;
        let raw = random_matrix(n, 3, 6);
        let mut centered = raw.clone();
        let m = column_means(&raw);
        for mut row in centered.row_iter_mut() {
            row -= m.transpose();
        }
        let w = inv_sqrt_psd(&(centered.transpose() * &centered / n as f64)).unwrap();
        let q = centered * w;
        let s = standardize(&q).unwrap();
        assert_abs_diff_eq!(s.whitened, q, epsilon = 1e-10);
    }

    #[test]
    fn standardize_constant_column() {
        let x = DMatrix::from_element(5, 1, 3.0);
        assert_eq!(standardize(&x).unwrap_err(), SdrError::SingularCovariance);
        // Another informative column keeps the top eigenvalue away from zero;
        // the constant direction is clamped rather than rejected.
        let mut x2 = random_matrix(10, 2, 1);
        x2.column_mut(1).fill(2.0);
        assert!(standardize(&x2).is_ok());
        let mut bad = random_matrix(5, 2, 1);
        bad[(2, 1)] = f64::NAN;
        assert_eq!(standardize(&bad).unwrap_err(), SdrError::NonFiniteInput);
    }

    #[test]
    fn standardized_invariants_on_random_data() {
        let x = random_matrix(60, 5, 11) * random_matrix(5, 5, 12);
        let s = standardize(&x).unwrap();
        let means = column_means(&s.whitened);
        assert!(means.amax() < 1e-10);
        let cov = s.whitened.transpose() * &s.whitened / 60.0;
        assert!((cov - DMatrix::identity(5, 5)).norm() < 1e-8);
        let wcw = &s.whitener * &s.covariance * &s.whitener;
        assert!((wcw - DMatrix::identity(5, 5)).amax() < 1e-8);
    }

    #[test]
    fn inv_sqrt_examples() {
        assert_abs_diff_eq!(
            inv_sqrt_psd(&DMatrix::identity(3, 3)).unwrap(),
            DMatrix::identity(3, 3),
            epsilon = 1e-14
        );
        let r = inv_sqrt_psd(&DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        assert_abs_diff_eq!(
            r,
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0 / 3.0])),
            epsilon = 1e-14
        );
    }

    #[test]
    fn inv_sqrt_floors_tiny_eigenvalue() {
        let q = random_rotation(2, 3);
        let s = &q * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-16])) * q.transpose();
        let s = symmetrize(&s);
        let r = inv_sqrt_psd(&s).unwrap();
        // Oracle: with the floor 1e-10 the second eigen-direction maps to 1e-16/1e-10.
        let u = q.column(0).into_owned();
        let rank_one = &u * u.transpose();
        let rsr = &r * &s * &r;
        assert!((rsr - rank_one).amax() < 1e-5);
        assert_abs_diff_eq!(max_asymmetry(&r), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn inv_sqrt_errors() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(inv_sqrt_psd(&s), Err(SdrError::NotSymmetric(_))));
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(inv_sqrt_psd(&z).unwrap_err(), SdrError::AllEigenvaluesBelowFloor);
    }

    #[test]
    fn sym_eig_reconstructs_up_to_p50() {
        for (p, seed) in [(1, 1), (5, 2), (20, 3), (50, 4)] {
            let a = random_matrix(p, p, seed);
            let s = symmetrize(&a);
            let e = sym_eig(&s);
            let rel = (e.reconstruct() - &s).norm() / s.norm();
            assert!(rel < 1e-10, "p={p} rel={rel}");
            let vtv = e.vectors.transpose() * &e.vectors;
            assert!((vtv - DMatrix::identity(p, p)).amax() < 1e-10);
            for w in e.values.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
            for col in e.vectors.column_iter() {
                let (i, _) = col.iamax_full();
                assert!(col[i] > 0.0);
            }
        }
    }

    #[test]
    fn sphere_samples() {
        let mut rng = from_seed(9);
        for _ in 0..50 {
            let t = sample_unit_sphere(1, &mut rng);
            assert!(t[0] == 1.0 || t[0] == -1.0);
        }
        for k in [2, 3, 9] {
            for _ in 0..100 {
                assert_abs_diff_eq!(sample_unit_sphere(k, &mut rng).norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sphere_moments_monte_carlo() {
        let mut rng = from_seed(2024);
        let draws = 100_000;
        let k = 3;
        let mut mean = DVector::<f64>::zeros(k);
        let mut sq = Vec::with_capacity(draws);
        for _ in 0..draws {
            let t = sample_unit_sphere(k, &mut rng);
            mean += &t;
            sq.push(t[0] * t[0]);
        }
        mean /= draws as f64;
        assert!(mean.amax() < 0.02);
        let m = sq.iter().sum::<f64>() / draws as f64;
        let var = sq.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((m - 1.0 / k as f64).abs() < 3.0 * se, "m={m} se={se}");
    }

    #[test]
    fn distance_examples() {
        let b = SubspaceBasis::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let c = SubspaceBasis::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(subspace_distance(&b, &b).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(subspace_distance(&b, &c).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        let m = random_matrix(5, 2, 4);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -0.5, 3.0]);
        let bm = SubspaceBasis::new(m.clone()).unwrap();
        let ba = SubspaceBasis::new(&m * a).unwrap();
        let target = SubspaceBasis::new(random_matrix(5, 2, 5)).unwrap();
        assert_abs_diff_eq!(
            subspace_distance(&target, &bm).unwrap(),
            subspace_distance(&target, &ba).unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(subspace_distance(&bm, &ba).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn rank_deficient_basis_rejected() {
        let m = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(SubspaceBasis::new(m).unwrap_err(), SdrError::RankDeficientBasis);
        let b = SubspaceBasis::new(DMatrix::identity(3, 1)).unwrap();
        let c = SubspaceBasis::new(DMatrix::identity(4, 1)).unwrap();
        assert!(subspace_distance(&b, &c).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn distance_metric_properties(seed in 0u64..10_000, p in 2usize..7, d1 in 1usize..3, d2 in 1usize..3) {
                prop_assume!(d1 <= p && d2 <= p);
                let a = SubspaceBasis::new(random_matrix(p, d1, seed)).unwrap();
                let b = SubspaceBasis::new(random_matrix(p, d2, seed + 1)).unwrap();
                let ab = subspace_distance(&a, &b).unwrap();
                let ba = subspace_distance(&b, &a).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!(ab >= 0.0);
                prop_assert!(ab <= ((d1 + d2) as f64).sqrt() + 1e-12);
                prop_assert!(subspace_distance(&a, &a).unwrap() < 1e-10);
            }
        }
    }
}
