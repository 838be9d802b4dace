//! Minimal dense helpers for the small symmetric matrices (D ≤ a few dozen)
//! that appear in covariance estimation and Gaussian sampling.
//!
//! Matrices are row-major `&[f64]` of length `d * d`.

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// aᵀ M a for a d-vector and a d×d matrix.
pub(crate) fn quadratic_form(a: &[f64], m: &[f64], d: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += m[i * d + j] * a[j];
        }
        acc += a[i] * row;
    }
    acc
}

pub(crate) fn max_asymmetry(m: &[f64], d: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in (i + 1)..d {
            worst = worst.max((m[i * d + j] - m[j * d + i]).abs());
        }
    }
    worst
}

pub(crate) fn trace(m: &[f64], d: usize) -> f64 {
    (0..d).map(|i| m[i * d + i]).sum()
}

/// Lower-triangular Cholesky factor of a positive *semi*definite matrix.
///
/// Pivots below `1e-12` are treated as exactly zero and their column is
/// zeroed, so rank-deficient covariances (constant windows, the zero
/// matrix) factor without noise leaking into null directions. Returns
/// `None` when a pivot is negative beyond the PSD tolerance.
pub(crate) fn cholesky_psd(m: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut pivot = m[j * d + j];
        for k in 0..j {
            pivot -= l[j * d + k] * l[j * d + k];
        }
        if pivot < -1e-10 {
            return None;
        }
        if pivot <= 1e-12 {
            // semidefinite direction: no mass, column stays zero
            continue;
        }
        let root = pivot.sqrt();
        l[j * d + j] = root;
        for i in (j + 1)..d {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = s / root;
        }
    }
    Some(l)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub(crate) fn sym_eigenvalues(m: &[f64], d: usize) -> Vec<f64> {
    let mut a = m.to_vec();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a[i * d + j] * a[i * d + j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}
