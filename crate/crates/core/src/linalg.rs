//! Small dense helpers on top of nalgebra used for system-sized matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Largest |m_ij - m_ji|.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Rejects matrices with an eigenvalue below `-tol * max(1, |m|_max)`.
pub(crate) fn ensure_psd(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if m.nrows() == 0 {
        return Ok(());
    }
    let scale = max_abs(m).max(1.0);
    let eig = SymmetricEigen::new(m.clone());
    let (index, eigenvalue) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    if eigenvalue < -tol * scale {
        return Err(Error::NotPositiveSemidefinite { eigenvalue, index });
    }
    Ok(())
}

/// Pivoted Cholesky factor of a positive semidefinite matrix.
///
/// Returns `L` with `n` rows and one column per numerically nonzero pivot so that
/// `L * L^T` reproduces `m`. Rows stay in the original ordering; ties in the pivot
/// search go to the lowest index.
pub(crate) fn pivoted_cholesky(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let max_diag = diag.iter().fold(0.0_f64, |a, &d| a.max(d));
    let mut used = vec![false; n];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if max_diag <= 0.0 {
        return DMatrix::zeros(n, 0);
    }
    for _ in 0..n {
        let mut pivot = None;
        for i in 0..n {
            if used[i] {
                continue;
            }
            match pivot {
                None => pivot = Some(i),
                Some(p) if diag[i] > diag[p] => pivot = Some(i),
                _ => {}
            }
        }
        let Some(p) = pivot else { break };
        if diag[p] <= rel_tol * max_diag {
            break;
        }
        used[p] = true;
        let lpp = diag[p].sqrt();
        let mut col = vec![0.0; n];
        col[p] = lpp;
        for k in 0..n {
            if used[k] {
                continue;
            }
            let mut s = m[(k, p)];
            for c in &cols {
                s -= c[k] * c[p];
            }
            col[k] = s / lpp;
            diag[k] -= col[k] * col[k];
        }
        cols.push(col);
    }
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}
