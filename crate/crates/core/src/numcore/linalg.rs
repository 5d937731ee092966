//! Small dense solvers: Cholesky, ridge-stabilized least squares, symmetric
//! eigenvalues (cyclic Jacobi) for the d ≤ 10 matrices the DGPs produce.

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Relative ridge added to Gram diagonals, scaled by `trace / p`.
pub const RIDGE: f64 = 1e-10;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::ShapeMismatch(format!("cholesky of {}x{}", n, a.cols())));
    }
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::DegenerateDesign);
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ X = B` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    assert_eq!(b.rows(), n, "cholesky_solve row mismatch");
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// `DᵀD` plus the trace-scaled ridge, factored.
fn ridged_gram_factor(design: &DenseMatrix) -> Result<DenseMatrix> {
    let mut gram = design.matmul_tn(design);
    let p = gram.rows();
    let ridge = RIDGE * gram.trace() / p as f64;
    for i in 0..p {
        gram[(i, i)] += ridge;
    }
    cholesky(&gram)
}

#[derive(Clone, Debug)]
pub struct LeastSquares {
    /// (k+1)×d; row 0 holds the intercepts when the design has a ones column.
    pub coefficients: DenseMatrix,
    pub residuals: DenseMatrix,
}

/// Normal-equation least squares of `targets` on `design`.
pub fn least_squares_fit(design: &DenseMatrix, targets: &DenseMatrix) -> Result<LeastSquares> {
    let (n, p) = design.shape();
    if targets.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "design has {n} rows, targets have {}",
            targets.rows()
        )));
    }
    if n <= p {
        return Err(Error::TooFewSamples { needed: p + 1, got: n });
    }
    let l = ridged_gram_factor(design)?;
    let coefficients = cholesky_solve(&l, &design.matmul_tn(targets));
    let residuals = targets.sub(&design.matmul(&coefficients));
    Ok(LeastSquares { coefficients, residuals })
}

/// Annihilator `Π = I − D(DᵀD + ridge)⁻¹Dᵀ`, mapping targets to OLS residuals.
pub fn annihilator(design: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, p) = design.shape();
    if n <= p {
        return Err(Error::TooFewSamples { needed: p + 1, got: n });
    }
    let l = ridged_gram_factor(design)?;
    // (DᵀD)⁻¹Dᵀ, p×n
    let coef = cholesky_solve(&l, &design.transpose());
    let mut pi = design.matmul(&coef).scale(-1.0);
    for i in 0..n {
        pi[(i, i)] += 1.0;
    }
    Ok(pi)
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "symmetric_eigenvalues needs a square matrix");
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 * (1.0 + m.frobenius_sq()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest singular value of a wide or square matrix `m` (rows ≤ cols).
pub fn min_singular_value(m: &DenseMatrix) -> f64 {
    let gram = m.matmul_nt(m);
    symmetric_eigenvalues(&gram)[0].max(0.0).sqrt()
}
