//! Small dense helpers. Everything here works on plain slices; the problem
//! sizes (a few hundred coordinates) never justify a matrix library.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(norm_sq(a))
}

/// Euclidean distance between two equally sized slices.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

/// Lower-triangular factor `L` with `L Lᵀ = a` for a row-major symmetric
/// positive semidefinite `a`. Zero pivots (rank deficiency) produce zero
/// columns; a clearly negative pivot is rejected.
pub fn cholesky_psd(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: a.len() });
    }
    let scale = (0..n).map(|i| libm::fabs(a[i * n + i])).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale;
    for i in 0..n {
        for j in 0..i {
            if libm::fabs(a[i * n + j] - a[j * n + i]) > 1e-9 * scale {
                return Err(Error::InvalidCovariance);
            }
        }
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut pivot = a[j * n + j];
        for k in 0..j {
            pivot -= l[j * n + k] * l[j * n + k];
        }
        if pivot < -tol {
            return Err(Error::InvalidCovariance);
        }
        if pivot <= tol {
            // Semidefinite direction: the column stays zero, but the rest of
            // the column must then be consistent with a zero pivot.
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if libm::fabs(s) > 1e-9 * scale {
                    return Err(Error::InvalidCovariance);
                }
            }
            continue;
        }
        let d = libm::sqrt(pivot);
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// Solves the symmetric system `a x = b` with a small ridge added to the
/// diagonal, by Gaussian elimination with partial pivoting.
pub fn solve_ridge(a: &[f64], b: &[f64], n: usize, ridge: f64) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for i in 0..n {
        m[i * n + i] += ridge;
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| libm::fabs(m[i * n + col]).total_cmp(&libm::fabs(m[j * n + col])))
            .unwrap_or(col);
        if m[pivot_row * n + col] == 0.0 {
            return Err(Error::NonFinite("singular normal equations"));
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            rhs.swap(col, pivot_row);
        }
        let p = m[col * n + col];
        for row in (col + 1)..n {
            let f = m[row * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in (row + 1)..n {
            s -= m[row * n + k] * x[k];
        }
        x[row] = s / m[row * n + row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::NonFinite("least-squares solve"))
    }
}
