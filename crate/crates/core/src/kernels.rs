//! Gaussian kernels on the action sample and the empirical maximum-moment
//! statistic on regression residuals.
//!
//! For residuals `R` (n×d) and a Gram matrix `K` on the actions, the plug-in
//! V-statistic is
//!
//! ```text
//! Q̂ = (1/n²) Σ_{i,j} K_ij ⟨r_i, r_j⟩ = (1/n²) Σ_c r_cᵀ K r_c
//! ```
//!
//! which is the squared RKHS norm of the empirical residual embedding and so
//! never negative for a positive semidefinite `K`.

use crate::error::{Error, Result};
use crate::numcore::{DenseMatrix, RngStream};
use serde::{Deserialize, Serialize};

/// Rows beyond which the median heuristic subsamples.
pub const MEDIAN_SUBSAMPLE: usize = 2000;

/// Gaussian kernel `k(a, a') = exp(−‖a − a'‖² / (2σ²))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidConfig(format!("kernel bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    #[inline]
    pub fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        (-sq_dist / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

/// Symmetric kernel matrix on a sample of actions.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(DenseMatrix);

impl GramMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median pairwise Euclidean distance between rows of `a`.
///
/// Above [`MEDIAN_SUBSAMPLE`] rows a subsample without replacement is drawn
/// from `stream`; otherwise `stream` is untouched.
pub fn median_heuristic(a: &DenseMatrix, stream: &mut RngStream) -> Result<f64> {
    let n = a.rows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let rows: Vec<usize> = if n > MEDIAN_SUBSAMPLE {
        let mut idx = stream.sample_indices(n, MEDIAN_SUBSAMPLE);
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (p, &i) in rows.iter().enumerate() {
        for &j in &rows[p + 1..] {
            dists.push(sq_dist(a.row(i), a.row(j)).sqrt());
        }
    }
    let m = dists.len();
    let mid = m / 2;
    let (_, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if m % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if !(median > 0.0) {
        return Err(Error::DegenerateSample);
    }
    Ok(median)
}

pub fn gram(a: &DenseMatrix, spec: &KernelSpec) -> GramMatrix {
    let n = a.rows();
    let mut k = DenseMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = spec.eval_sq_dist(sq_dist(a.row(i), a.row(j)));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    GramMatrix(k)
}

/// V-statistic `(1/n²) Σ_c r_cᵀ K r_c`.
pub fn mmr_statistic(residuals: &DenseMatrix, k: &GramMatrix) -> f64 {
    let n = residuals.rows();
    assert_eq!(k.len(), n, "residual rows must align with the Gram matrix");
    if n == 0 {
        return 0.0;
    }
    let kr = k.0.matmul(residuals);
    residuals.hadamard(&kr).sum() / (n * n) as f64
}

/// Same value as [`mmr_statistic`] on `gram(a, spec)`, computed pairwise in
/// O(n) memory for samples too large to hold the Gram matrix.
pub fn mmr_statistic_streaming(a: &DenseMatrix, residuals: &DenseMatrix, spec: &KernelSpec) -> f64 {
    let n = residuals.rows();
    assert_eq!(a.rows(), n, "residual rows must align with the actions");
    if n == 0 {
        return 0.0;
    }
    let dot = |i: usize, j: usize| -> f64 { residuals.row(i).iter().zip(residuals.row(j)).map(|(p, q)| p * q).sum() };
    let mut total = 0.0;
    for i in 0..n {
        let mut off = 0.0;
        for j in (i + 1)..n {
            off += spec.eval_sq_dist(sq_dist(a.row(i), a.row(j))) * dot(i, j);
        }
        total += dot(i, i) + 2.0 * off;
    }
    total / (n * n) as f64
}

/// `∂Q̂/∂R = (2/n²) K R`.
pub fn mmr_gradient(residuals: &DenseMatrix, k: &GramMatrix) -> DenseMatrix {
    let n = residuals.rows();
    k.0.matmul(residuals).scale(2.0 / (n * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream() -> RngStream {
        RngStream::new(0, 0)
    }

    #[test]
    fn median_of_single_pair() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 0.0]]);
        assert_eq!(median_heuristic(&a, &mut stream()).unwrap(), 3.0);
    }

    #[test]
    fn median_of_collinear_triple() {
        let a = DenseMatrix::column_vector(&[0.0, 1.0, 2.0]);
        assert_eq!(median_heuristic(&a, &mut stream()).unwrap(), 1.0);
    }

    #[test]
    fn median_scales_homogeneously() {
        let a = DenseMatrix::from_fn(40, 2, |r, c| ((r * 13 + c * 7) % 17) as f64 * 0.37);
        let base = median_heuristic(&a, &mut stream()).unwrap();
        let scaled = median_heuristic(&a.scale(2.5), &mut stream()).unwrap();
        assert!((scaled - 2.5 * base).abs() < 1e-12 * scaled);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let a = DenseMatrix::filled(5, 2, 1.5);
        assert!(matches!(median_heuristic(&a, &mut stream()), Err(Error::DegenerateSample)));
    }

    #[test]
    fn large_samples_are_subsampled_deterministically() {
        let mut s = RngStream::new(3, 1);
        let a = s.uniform_matrix(3000, 2, -1.0, 1.0);
        let m1 = median_heuristic(&a, &mut RngStream::new(9, 9)).unwrap();
        let m2 = median_heuristic(&a, &mut RngStream::new(9, 9)).unwrap();
        assert_eq!(m1.to_bits(), m2.to_bits());
        // Mean distance between two uniform points on [-1,1]^2 is ≈ 1.04; median slightly lower.
        assert!(m1 > 0.8 && m1 < 1.2, "median {m1}");
    }

    #[test]
    fn gram_identical_rows_is_all_ones() {
        let a = DenseMatrix::filled(4, 3, 0.7);
        let k = gram(&a, &KernelSpec::gaussian(0.3).unwrap());
        assert!(k.matrix().sub(&DenseMatrix::filled(4, 4, 1.0)).max_abs() == 0.0);
    }

    #[test]
    fn gram_at_sqrt2_bandwidth_is_inv_e() {
        let s = 0.8;
        let a = DenseMatrix::from_rows(&[vec![0.0], vec![s * 2f64.sqrt()]]);
        let k = gram(&a, &KernelSpec::gaussian(s).unwrap());
        assert!((k.matrix()[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn two_point_statistic() {
        let q = 0.3;
        let k = GramMatrix(DenseMatrix::from_rows(&[vec![1.0, q], vec![q, 1.0]]));
        let r = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert!((mmr_statistic(&r, &k) - (2.0 + 2.0 * q) / 4.0).abs() < 1e-15);
        assert_eq!(mmr_statistic(&DenseMatrix::zeros(2, 2), &k), 0.0);
    }

    #[test]
    fn streaming_matches_dense() {
        let mut s = RngStream::new(4, 4);
        let a = s.uniform_matrix(50, 2, -1.0, 1.0);
        let r = s.normal_matrix(50, 3);
        let spec = KernelSpec::gaussian(0.7).unwrap();
        let dense = mmr_statistic(&r, &gram(&a, &spec));
        let stream = mmr_statistic_streaming(&a, &r, &spec);
        assert!((dense - stream).abs() < 1e-13 * dense.abs().max(1.0));
    }

    #[test]
    fn bandwidth_must_be_positive() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
    }
}
