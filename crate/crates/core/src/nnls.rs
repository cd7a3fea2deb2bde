//! Lawson–Hanson active-set non-negative least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solution of `min ||A x - b||₂ s.t. x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// Euclidean norm of `A x - b`.
    pub residual: f64,
}

/// Solves the NNLS problem for a row-major `design` (m rows of k columns).
pub fn nnls(design: &[Vec<f64>], target: &[f64]) -> Result<NnlsSolution> {
    let m = design.len();
    if m == 0 {
        return Err(Error::Dimension("design matrix has no rows".into()));
    }
    let k = design[0].len();
    if k == 0 || m < k {
        return Err(Error::Dimension(format!("need m >= k >= 1, got m={m}, k={k}")));
    }
    if design.iter().any(|r| r.len() != k) {
        return Err(Error::Dimension("ragged design matrix".into()));
    }
    if target.len() != m {
        return Err(Error::Dimension(format!("target has {} entries, expected {m}", target.len())));
    }
    if design.iter().flatten().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in NNLS input".into()));
    }

    let a = DMatrix::from_fn(m, k, |i, j| design[i][j]);
    let b = DVector::from_column_slice(target);
    let x = lawson_hanson(&a, &b);
    let residual = (&a * &x - &b).norm();
    Ok(NnlsSolution {
        x: x.iter().copied().collect(),
        residual,
    })
}

fn lawson_hanson(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    let scale = a.amax().max(f64::MIN_POSITIVE) * b.amax().max(1.0);
    let tol = 10.0 * f64::EPSILON * scale * (a.nrows().max(k) as f64);

    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let max_outer = 3 * k + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..k)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let j = match candidate {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        passive[j] = true;

        loop {
            let s = passive_solve(a, b, &passive);
            let blocking: Vec<usize> = (0..k).filter(|&i| passive[i] && s[i] <= tol).collect();
            if blocking.is_empty() {
                x = s;
                break;
            }
            let alpha = blocking
                .iter()
                .map(|&i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            x += alpha * (&s - &x);
            for i in 0..k {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x.apply(|v| *v = v.max(0.0));
    x
}

/// Unconstrained least squares restricted to the passive columns; zeros elsewhere.
fn passive_solve(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let sub = a.select_columns(&cols);
    let svd = sub.svd(true, true);
    let z = svd
        .solve(b, 1e-14 * svd.singular_values.max())
        .unwrap_or_else(|_| DVector::zeros(cols.len()));
    let mut full = DVector::zeros(passive.len());
    for (pos, &j) in cols.iter().enumerate() {
        full[j] = z[pos];
    }
    full
}

/// KKT residuals `(max primal violation, max dual violation, max complementarity)`
/// where the gradient is `Aᵀ(Ax − b)`.
pub fn kkt_residuals(design: &[Vec<f64>], target: &[f64], x: &[f64]) -> (f64, f64, f64) {
    let k = x.len();
    let r: Vec<f64> = design
        .iter()
        .zip(target)
        .map(|(row, t)| row.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() - t)
        .collect();
    let grad: Vec<f64> = (0..k)
        .map(|j| design.iter().zip(&r).map(|(row, ri)| row[j] * ri).sum())
        .collect();
    let primal = x.iter().fold(0.0_f64, |m, &v| m.max(-v));
    let dual = grad.iter().fold(0.0_f64, |m, &g| m.max(-g));
    let comp = x.iter().zip(&grad).fold(0.0_f64, |m, (xi, g)| m.max((xi * g).abs()));
    (primal, dual, comp)
}
