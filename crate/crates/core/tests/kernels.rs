use nalgebra::DMatrix;
use proptest::prelude::*;
use rep4ex::kernels::{gram, median_heuristic, mmr_gradient, mmr_statistic, mmr_statistic_streaming, KernelSpec};
use rep4ex::{DenseMatrix, Graph, RngStream};

/// Literal `(1/n²) Σ_i Σ_j k(a_i, a_j) Σ_c r_ic r_jc` with the kernel
/// evaluated from its formula.
fn brute_force(a: &DenseMatrix, r: &DenseMatrix, sigma: f64) -> f64 {
    let n = a.rows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut sq = 0.0;
            for c in 0..a.cols() {
                sq += (a[(i, c)] - a[(j, c)]).powi(2);
            }
            let k = (-sq / (2.0 * sigma * sigma)).exp();
            let mut dot = 0.0;
            for c in 0..r.cols() {
                dot += r[(i, c)] * r[(j, c)];
            }
            total += k * dot;
        }
    }
    total / (n * n) as f64
}

fn instance(seed: u64) -> (DenseMatrix, DenseMatrix, f64) {
    let mut s = RngStream::new(seed, 77);
    let n = 2 + (s.next_u64() % 60) as usize;
    let k = 1 + (s.next_u64() % 4) as usize;
    let d = 1 + (s.next_u64() % 4) as usize;
    let a = s.uniform_matrix(n, k, -2.0, 2.0);
    let r = s.normal_matrix(n, d);
    (a, r, s.uniform(0.2, 3.0))
}

#[test]
fn statistic_matches_brute_force_on_fifty_instances() {
    for seed in 0..50 {
        let (a, r, sigma) = instance(seed);
        let spec = KernelSpec::gaussian(sigma).unwrap();
        let fast = mmr_statistic(&r, &gram(&a, &spec));
        let slow = brute_force(&a, &r, sigma);
        assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "seed {seed}: {fast} vs {slow}");
        let streamed = mmr_statistic_streaming(&a, &r, &spec);
        assert!((streamed - slow).abs() <= 1e-12 * slow.abs().max(1.0));
    }
}

#[test]
fn gradient_is_two_over_n_squared_k_r() {
    for seed in 0..20 {
        let (a, r, sigma) = instance(seed);
        let n = a.rows();
        let k = gram(&a, &KernelSpec::gaussian(sigma).unwrap());
        let g = mmr_gradient(&r, &k);
        // Oracle: explicit (2/n²) K R by loops.
        for i in 0..n {
            for c in 0..r.cols() {
                let want: f64 = (0..n).map(|j| k.matrix()[(i, j)] * r[(j, c)]).sum::<f64>() * 2.0 / (n * n) as f64;
                assert!((g[(i, c)] - want).abs() < 1e-8 * want.abs().max(1.0));
            }
        }
        // Finite differences of the statistic itself.
        let h = 1e-6;
        let mut rp = r.clone();
        for e in [0, r.as_slice().len() / 2, r.as_slice().len() - 1] {
            let orig = rp.as_slice()[e];
            rp.as_mut_slice()[e] = orig + h;
            let up = mmr_statistic(&rp, &k);
            rp.as_mut_slice()[e] = orig - h;
            let down = mmr_statistic(&rp, &k);
            rp.as_mut_slice()[e] = orig;
            let num = (up - down) / (2.0 * h);
            assert!((num - g.as_slice()[e]).abs() < 1e-8, "seed {seed} entry {e}");
        }
        // The graph's reverse sweep through quad_form agrees.
        let mut gr = Graph::new();
        let rn = gr.parameter(r.clone());
        let kn = gr.constant(k.matrix().clone());
        let q = gr.quad_form(rn, kn);
        let l = gr.scale(q, 1.0 / (n * n) as f64);
        let adj = gr.backward(l).unwrap();
        assert!(adj.get(rn).unwrap().sub(&g).max_abs() < 1e-12);
    }
}

#[test]
fn gram_of_fifty_random_points_is_psd() {
    let mut s = RngStream::new(5, 5);
    for trial in 0..5 {
        let a = s.uniform_matrix(50, 1 + trial % 3, -1.0, 1.0);
        let bw = median_heuristic(&a, &mut s).unwrap();
        let k = gram(&a, &KernelSpec::gaussian(bw).unwrap());
        let m = DMatrix::from_row_slice(50, 50, k.matrix().as_slice());
        let min = m.symmetric_eigen().eigenvalues.min();
        assert!(min >= -1e-10, "trial {trial}: min eigenvalue {min}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn statistic_is_never_negative(seed in any::<u64>(), sigma in 0.05f64..5.0, scale in 1e-3f64..1e3) {
        let mut s = RngStream::new(seed, 1);
        let n = 2 + (seed % 40) as usize;
        let a = s.uniform_matrix(n, 2, -1.0, 1.0);
        let r = s.normal_matrix(n, 3).scale(scale);
        let q = mmr_statistic(&r, &gram(&a, &KernelSpec::gaussian(sigma).unwrap()));
        prop_assert!(q >= -1e-12 * scale * scale);
    }

    #[test]
    fn statistic_is_quadratic_in_residuals(seed in any::<u64>(), c in -10.0f64..10.0) {
        let mut s = RngStream::new(seed, 2);
        let a = s.uniform_matrix(12, 1, -1.0, 1.0);
        let r = s.normal_matrix(12, 2);
        let k = gram(&a, &KernelSpec::gaussian(0.5).unwrap());
        let q = mmr_statistic(&r, &k);
        let qc = mmr_statistic(&r.scale(c), &k);
        prop_assert!((qc - c * c * q).abs() <= 1e-10 * (1.0 + qc.abs()));
    }

    #[test]
    fn median_heuristic_is_translation_invariant(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mut s = RngStream::new(seed, 3);
        let a = s.uniform_matrix(30, 2, -1.0, 1.0);
        let b = a.map(|x| x + shift);
        let m1 = median_heuristic(&a, &mut RngStream::new(0, 0)).unwrap();
        let m2 = median_heuristic(&b, &mut RngStream::new(0, 0)).unwrap();
        prop_assert!((m1 - m2).abs() < 1e-9 * m1.max(1.0) * (1.0 + shift.abs()));
    }
}
