//! The true latent, seen through any invertible affine map, is a perfect
//! representation: its R² is one and its MMR statistic vanishes as n grows.

use rep4ex::kernels::{median_heuristic, mmr_statistic_streaming, KernelSpec};
use rep4ex::models::residual_projection;
use rep4ex::pipeline::r_squared_affine;
use rep4ex::scm::{sample_unmix, ScmUnmixConfig};
use rep4ex::{DenseMatrix, RngStream};

fn oracle_stats(n: usize, seed: u64) -> (f64, f64) {
    let cfg = ScmUnmixConfig::random(2, 10, 2.0, seed);
    let ds = sample_unmix(&cfg, n, 0);
    let z = &ds.hidden().z;
    let mut s = RngStream::new(seed, 0xAF);
    let h = DenseMatrix::identity(2).add(&s.uniform_matrix(2, 2, -0.4, 0.4));
    let c = s.uniform_matrix(1, 2, -3.0, 3.0);
    let phi = z.matmul_nt(&h).add_row(&c);
    let r2 = r_squared_affine(&phi, z).unwrap().r_squared;
    let (_, res) = residual_projection(&phi, ds.a()).unwrap();
    let bw = median_heuristic(ds.a(), &mut RngStream::new(seed, 1)).unwrap();
    let q = mmr_statistic_streaming(ds.a(), &res, &KernelSpec::gaussian(bw).unwrap());
    (r2, q)
}

#[test]
fn oracle_representation_is_perfect_and_its_mmr_decays() {
    let mut small = Vec::new();
    let mut large = Vec::new();
    for seed in 0..10 {
        let (r2a, qa) = oracle_stats(200, seed);
        let (r2b, qb) = oracle_stats(2000, seed);
        assert!((r2a - 1.0).abs() < 1e-10 && (r2b - 1.0).abs() < 1e-10);
        assert!(qa >= 0.0 && qb >= 0.0);
        small.push(qa);
        large.push(qb);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    // Q̂ is a V-statistic of a centered quantity, so it shrinks like 1/n.
    let ratio = mean(&large) / mean(&small);
    assert!(ratio < 0.25, "ratio {ratio}: {small:?} vs {large:?}");
}
