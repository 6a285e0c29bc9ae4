//! Diagonalization of the linear part `A`: eigenvalues, eigenprojections and
//! the inverse operator used by every recursion.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Imaginary parts below `IMAG_TOL * (1 + spectral radius)` count as real.
pub const IMAG_TOL: f64 = 1e-9;
/// Largest accepted condition number of the eigenvector matrix.
pub const MAX_CONDITION: f64 = 1e8;
/// Eigenvalues within `CLUSTER_TOL * (1 + |λ|)` are merged.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralDecomposition {
    pub dimension: usize,
    pub matrix_a: Matrix<f64>,
    /// All eigenvalues with multiplicity, ascending.
    pub eigenvalues_full: Vec<f64>,
    /// Distinct eigenvalues, strictly ascending.
    pub eigenvalues_distinct: Vec<f64>,
    /// `S` with `A = S^{-1} diag(Λ) S`.
    pub transform: Matrix<f64>,
    pub transform_inverse: Matrix<f64>,
    /// `projections[j]` projects onto the eigenspace of `eigenvalues_distinct[j]`.
    pub projections: Vec<Matrix<f64>>,
    /// 2-norm condition number of `S`.
    pub condition: f64,
}

fn to_dmatrix(m: &Matrix<f64>) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}

fn from_dmatrix(m: &DMatrix<f64>) -> Matrix<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Groups sorted eigenvalues into clusters; returns (representative, members).
fn cluster(sorted: &[(f64, usize)]) -> Vec<(f64, Vec<usize>)> {
    let mut out: Vec<(f64, Vec<usize>, f64)> = Vec::new();
    for &(lam, idx) in sorted {
        match out.last_mut() {
            Some((_, members, sum))
                if (lam - *sum / members.len() as f64).abs()
                    < CLUSTER_TOL * (1.0 + lam.abs()) =>
            {
                members.push(idx);
                *sum += lam;
            }
            _ => out.push((lam, vec![idx], lam)),
        }
    }
    out.into_iter()
        .map(|(_, m, sum)| (sum / m.len() as f64, m))
        .collect()
}

/// Diagonalizes `matrix`, rejecting complex, defective or non-positive spectra.
pub fn decompose(matrix: &Matrix<f64>) -> Result<SpectralDecomposition> {
    let n = matrix.len();
    if n == 0 || !linalg::is_square(matrix) {
        return Err(Error::Validation("matrix A must be square and non-empty".into()));
    }
    if matrix.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Validation("matrix A has non-finite entries".into()));
    }
    let a = to_dmatrix(matrix);
    let scale = a.amax();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == 0.0));
    let symmetric = (0..n).all(|i| (0..n).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= 1e-14 * scale));

    // Columns of `vecs` are right eigenvectors; `vals[i]` pairs with column i.
    let (vals, vecs): (Vec<f64>, DMatrix<f64>) = if diagonal {
        ((0..n).map(|i| a[(i, i)]).collect(), DMatrix::identity(n, n))
    } else if symmetric {
        let sym = (&a + a.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    } else {
        general_eigenvectors(&a)?
    };

    let mut order: Vec<(f64, usize)> = vals.iter().copied().zip(0..n).collect();
    order.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let clusters = cluster(&order);
    let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let smallest = order[0].0;
    if smallest <= 1e-12 * (1.0 + radius) {
        return Err(Error::NonPositiveSpectrum(smallest));
    }

    // Reorder eigenvector columns cluster by cluster.
    let columns: Vec<usize> = clusters.iter().flat_map(|(_, m)| m.iter().copied()).collect();
    let v = DMatrix::from_fn(n, n, |i, j| vecs[(i, columns[j])]);
    let condition = condition_number(&v);
    if !(condition < MAX_CONDITION) {
        return Err(Error::NotDiagonalizable(format!(
            "eigenvector condition number {condition:e} exceeds {MAX_CONDITION:e}"
        )));
    }
    // `v` is orthogonal in both cases (a column permutation of I when diagonal)
    let v_inv = if diagonal || symmetric {
        v.transpose()
    } else {
        v.clone()
            .try_inverse()
            .ok_or_else(|| Error::NotDiagonalizable("eigenvector matrix is singular".into()))?
    };

    let mut projections = Vec::with_capacity(clusters.len());
    let mut eigenvalues_full = Vec::with_capacity(n);
    let mut start = 0;
    for (lam, members) in &clusters {
        let k = members.len();
        let block = v.columns(start, k) * v_inv.rows(start, k);
        projections.push(from_dmatrix(&block));
        eigenvalues_full.extend(std::iter::repeat(*lam).take(k));
        start += k;
    }

    Ok(SpectralDecomposition {
        dimension: n,
        matrix_a: matrix.clone(),
        eigenvalues_full,
        eigenvalues_distinct: clusters.iter().map(|c| c.0).collect(),
        transform: from_dmatrix(&v_inv),
        transform_inverse: from_dmatrix(&v),
        projections,
        condition,
    })
}

/// Eigenpairs of a non-symmetric matrix: real Schur eigenvalues, then a
/// kernel basis of `A - λI` for each cluster.
fn general_eigenvectors(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let complex = a.clone().complex_eigenvalues();
    let radius = complex.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if let Some(z) = complex.iter().find(|z| z.im.abs() > IMAG_TOL * (1.0 + radius)) {
        return Err(Error::NotDiagonalizable(format!(
            "complex eigenvalue {} + {}i",
            z.re, z.im
        )));
    }
    let mut order: Vec<(f64, usize)> = complex.iter().map(|z| z.re).zip(0..n).collect();
    order.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let clusters = cluster(&order);
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    let mut col = 0;
    let kernel_tol = 1e-7 * (1.0 + radius);
    for (lam, members) in clusters {
        let k = members.len();
        let shifted = a - DMatrix::identity(n, n) * lam;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
        let worst = svd.singular_values[idx[k - 1]];
        if worst > kernel_tol {
            return Err(Error::NotDiagonalizable(format!(
                "eigenvalue {lam} has multiplicity {k} but a smaller eigenspace"
            )));
        }
        for &i in idx.iter().take(k) {
            let row: DVector<f64> = v_t.row(i).transpose();
            vecs.set_column(col, &row);
            vals.push(lam);
            col += 1;
        }
    }
    Ok((vals, vecs))
}

impl SpectralDecomposition {
    pub fn distinct_count(&self) -> usize {
        self.eigenvalues_distinct.len()
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigenvalues_distinct[0]
    }

    /// `R_{λ_j} v` for a 1-based eigen-index `j`.
    pub fn project(&self, j: usize, v: &[f64]) -> Result<Vec<f64>> {
        if j == 0 || j > self.distinct_count() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.distinct_count(),
            });
        }
        self.check_len(v)?;
        Ok(linalg::mat_vec(&self.projections[j - 1], v))
    }

    /// `A^{-1} v = Σ_j λ_j^{-1} R_{λ_j} v`.
    pub fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        for (lam, r) in self.eigenvalues_distinct.iter().zip(&self.projections) {
            for (o, x) in out.iter_mut().zip(linalg::mat_vec(r, v)) {
                *o += x / lam;
            }
        }
        out
    }

    pub fn inverse_matrix(&self) -> Matrix<f64> {
        let n = self.dimension;
        let mut out = vec![vec![0.0; n]; n];
        for (lam, r) in self.eigenvalues_distinct.iter().zip(&self.projections) {
            for i in 0..n {
                for j in 0..n {
                    out[i][j] += r[i][j] / lam;
                }
            }
        }
        out
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Largest max-norm violation among the projection identities.
    pub fn identity_defect(&self) -> f64 {
        let n = self.dimension;
        let a = &self.matrix_a;
        let max_abs = |m: &Matrix<f64>| m.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let mut worst = 0.0f64;
        let mut sum = linalg::zeros::<f64>(n, n);
        for (j, (lam, r)) in self.eigenvalues_distinct.iter().zip(&self.projections).enumerate() {
            worst = worst.max(max_abs(&linalg::mat_sub(&linalg::mat_mul(r, r), r)));
            let lr = linalg::mat_scale(r, lam);
            worst = worst.max(max_abs(&linalg::mat_sub(&linalg::mat_mul(a, r), &lr)));
            worst = worst.max(max_abs(&linalg::mat_sub(&linalg::mat_mul(r, a), &lr)));
            for (k, other) in self.projections.iter().enumerate() {
                if k != j {
                    worst = worst.max(max_abs(&linalg::mat_mul(r, other)));
                }
            }
            for i in 0..n {
                for c in 0..n {
                    sum[i][c] += r[i][c];
                }
            }
        }
        worst.max(max_abs(&linalg::mat_sub(&sum, &linalg::identity(n))))
    }
}

/// Eigenvalue/projection pairs in the scalar type `S`. Float scalars reuse
/// the numerical decomposition; exact scalars rebuild each projection as a
/// Lagrange product `Π_{i≠j} (A - λ_i) / (λ_j - λ_i)` and check it exactly.
pub fn projectors_in<S: Scalar>(
    a: &Matrix<S>,
    dec: &SpectralDecomposition,
) -> Result<Vec<(S, Matrix<S>)>> {
    if !S::EXACT {
        return dec
            .eigenvalues_distinct
            .iter()
            .zip(&dec.projections)
            .map(|(lam, r)| {
                let conv = |x: f64| S::from_f64(x).expect("float scalar");
                Ok((conv(*lam), r.iter().map(|row| row.iter().map(|&x| conv(x)).collect()).collect()))
            })
            .collect();
    }
    let lams: Vec<S> = dec
        .eigenvalues_distinct
        .iter()
        .map(|&x| {
            S::from_f64(x).ok_or_else(|| Error::ExactUnavailable(format!("eigenvalue {x} is not rational")))
        })
        .collect::<Result<_>>()?;
    let n = a.len();
    let mut out = Vec::with_capacity(lams.len());
    let mut total = linalg::zeros::<S>(n, n);
    for (j, lj) in lams.iter().enumerate() {
        let mut r = linalg::identity::<S>(n);
        for (i, li) in lams.iter().enumerate() {
            if i == j {
                continue;
            }
            let factor = linalg::mat_scale(&linalg::shift_diagonal(a, li), &(S::one() / (lj.clone() - li.clone())));
            r = linalg::mat_mul(&r, &factor);
        }
        if linalg::mat_mul(a, &r) != linalg::mat_scale(&r, lj) {
            return Err(Error::ExactUnavailable(format!(
                "eigenvalue {lj} does not give an exact eigenprojection"
            )));
        }
        total = total
            .iter()
            .zip(&r)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.clone() + q.clone()).collect())
            .collect();
        out.push((lj.clone(), r));
    }
    if total != linalg::identity::<S>(n) {
        return Err(Error::ExactUnavailable("projections do not sum to the identity".into()));
    }
    Ok(out)
}

/// `A^{-1}` in the scalar type `S`.
pub fn inverse_in<S: Scalar>(a: &Matrix<S>, dec: &SpectralDecomposition) -> Result<Matrix<S>> {
    if S::EXACT {
        linalg::invert(a)
    } else {
        Ok(dec
            .inverse_matrix()
            .iter()
            .map(|row| row.iter().map(|&x| S::from_f64(x).expect("float scalar")).collect())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn identity_has_single_projection() {
        let dec = decompose(&vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(dec.eigenvalues_full, vec![1.0, 1.0]);
        assert_eq!(dec.distinct_count(), 1);
        assert_eq!(dec.projections[0], linalg::identity::<f64>(2));
        assert_eq!(dec.project(1, &[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);
    }

    #[test]
    fn diagonal_projections_are_exact() {
        let dec = decompose(&vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(dec.eigenvalues_distinct, vec![1.0, 2.0]);
        assert_eq!(dec.projections[0], vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(dec.projections[1], vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(dec.project(1, &[3.0, 4.0]).unwrap(), vec![3.0, 0.0]);
        assert_eq!(dec.apply_inverse(&[2.0, 2.0]), vec![2.0, 1.0]);
    }

    #[test]
    fn symmetric_two_by_two() {
        let dec = decompose(&vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!(close(&dec.eigenvalues_distinct, &[1.0, 3.0], 1e-12));
        let r1 = &dec.projections[0];
        assert!(close(&r1.concat(), &[0.5, -0.5, -0.5, 0.5], 1e-12));
        let r3 = &dec.projections[1];
        assert!(close(&r3.concat(), &[0.5, 0.5, 0.5, 0.5], 1e-12));
        assert!(close(&dec.project(1, &[1.0, 0.0]).unwrap(), &[0.5, -0.5], 1e-12));
        assert!(close(&dec.apply_inverse(&[1.0, 1.0]), &[1.0 / 3.0, 1.0 / 3.0], 1e-12));
        assert!(dec.identity_defect() < 1e-12);
    }

    #[test]
    fn nonsymmetric_diagonalizable() {
        // eigenvalues 1 and 2
        let dec = decompose(&vec![vec![1.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(close(&dec.eigenvalues_distinct, &[1.0, 2.0], 1e-12));
        assert!(dec.identity_defect() < 1e-10);
        let x = dec.apply_inverse(&[1.0, 1.0]);
        let back = linalg::mat_vec(&dec.matrix_a, &x);
        assert!(close(&back, &[1.0, 1.0], 1e-12));
    }

    #[test]
    fn rejects_assumption_violations() {
        assert!(matches!(
            decompose(&vec![vec![1.0, 1.0], vec![0.0, 1.0]]),
            Err(Error::NotDiagonalizable(_))
        ));
        assert!(matches!(
            decompose(&vec![vec![0.0, -1.0], vec![1.0, 0.0]]),
            Err(Error::NotDiagonalizable(_))
        ));
        assert!(matches!(
            decompose(&vec![vec![1.0, 0.0], vec![0.0, -1.0]]),
            Err(Error::NonPositiveSpectrum(_))
        ));
        assert!(matches!(decompose(&vec![vec![1.0, 0.0]]), Err(Error::Validation(_))));
    }

    #[test]
    fn project_index_checked() {
        let dec = decompose(&vec![vec![1.0]]).unwrap();
        assert!(matches!(dec.project(2, &[1.0]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(dec.project(0, &[1.0]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn exact_projectors_via_lagrange() {
        let a: Matrix<Rational> = vec![
            vec![Rational::from_i64(2), Rational::from_i64(1)],
            vec![Rational::from_i64(1), Rational::from_i64(2)],
        ];
        let dec = decompose(&vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let proj = projectors_in(&a, &dec).unwrap();
        assert_eq!(proj[0].0, Rational::from_i64(1));
        assert_eq!(proj[0].1[0][1], Rational::from_ratio(-1, 2));
        assert_eq!(proj[1].1[1][1], Rational::from_ratio(1, 2));
    }

    #[test]
    fn exact_projectors_reject_irrational_spectrum() {
        let a: Matrix<Rational> = vec![
            vec![Rational::from_i64(2), Rational::from_i64(1)],
            vec![Rational::from_i64(1), Rational::from_i64(3)],
        ];
        let dec = decompose(&vec![vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert!(matches!(projectors_in(&a, &dec), Err(Error::ExactUnavailable(_))));
    }
}
