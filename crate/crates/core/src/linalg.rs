//! Small dense matrices over any [`Scalar`], stored row-major.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Matrix<S> = Vec<Vec<S>>;

pub fn identity<S: Scalar>(n: usize) -> Matrix<S> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect())
        .collect()
}

pub fn zeros<S: Scalar>(rows: usize, cols: usize) -> Matrix<S> {
    vec![vec![S::zero(); cols]; rows]
}

pub fn mat_vec<S: Scalar>(m: &Matrix<S>, v: &[S]) -> Vec<S> {
    m.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
        })
        .collect()
}

pub fn mat_mul<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    row.iter()
                        .zip(b)
                        .fold(S::zero(), |acc, (x, brow)| acc + x.clone() * brow[j].clone())
                })
                .collect()
        })
        .collect()
}

pub fn mat_sub<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.clone() - y.clone()).collect())
        .collect()
}

pub fn mat_scale<S: Scalar>(a: &Matrix<S>, s: &S) -> Matrix<S> {
    a.iter()
        .map(|r| r.iter().map(|x| x.clone() * s.clone()).collect())
        .collect()
}

pub fn shift_diagonal<S: Scalar>(a: &Matrix<S>, s: &S) -> Matrix<S> {
    let mut out = a.clone();
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = row[i].clone() - s.clone();
    }
    out
}

pub fn is_square<S>(m: &Matrix<S>) -> bool {
    let n = m.len();
    m.iter().all(|r| r.len() == n)
}

/// Inverse by Gauss-Jordan elimination with pivoting on the largest magnitude.
pub fn invert<S: Scalar>(a: &Matrix<S>) -> Result<Matrix<S>> {
    let n = a.len();
    let mut work: Vec<Vec<S>> = a
        .iter()
        .zip(identity::<S>(n))
        .map(|(row, id)| row.iter().cloned().chain(id).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                work[i][col]
                    .to_f64()
                    .abs()
                    .partial_cmp(&work[j][col].to_f64().abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::Validation("empty matrix".into()))?;
        if work[pivot][col].is_zero() {
            return Err(Error::Validation("matrix is singular".into()));
        }
        work.swap(col, pivot);
        let p = work[col][col].clone();
        for x in work[col].iter_mut() {
            *x = x.clone() / p.clone();
        }
        for r in 0..n {
            if r == col || work[r][col].is_zero() {
                continue;
            }
            let factor = work[r][col].clone();
            for c in 0..2 * n {
                let v = work[col][c].clone();
                work[r][c] = work[r][c].clone() - factor.clone() * v;
            }
        }
    }
    Ok(work.into_iter().map(|row| row[n..].to_vec()).collect())
}
