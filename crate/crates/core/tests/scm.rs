use rep4ex::numcore::least_squares_fit;
use rep4ex::scm::{sample_extrap, sample_unmix, true_do_mean, ScmExtrapConfig, ScmUnmixConfig};
use rep4ex::{DenseMatrix, RngStream};

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn least_squares_recovers_slopes_within_three_standard_errors() {
    let n = 10_000;
    let mut s = RngStream::new(3, 3);
    let a = s.uniform_matrix(n, 2, -1.0, 1.0);
    let noise = s.normal_matrix(n, 1);
    let t = DenseMatrix::from_fn(n, 1, |i, _| 0.5 + 2.0 * a[(i, 0)] - a[(i, 1)] + noise[(i, 0)]);
    let fit = least_squares_fit(&a.with_intercept(), &t).unwrap();
    // Var(Unif(-1,1)) = 1/3, so SE ≈ σ / sqrt(n/3).
    let se = (3.0 / n as f64).sqrt();
    for (j, want) in [(1, 2.0), (2, -1.0)] {
        let got = fit.coefficients[(j, 0)];
        assert!((got - want).abs() < 3.0 * se, "slope {j}: {got}");
    }
}

#[test]
fn unmix_actions_are_exogenous_and_noise_is_centered() {
    let n = 20_000;
    let cfg = ScmUnmixConfig::random(2, 10, 2.0, 4);
    let ds = sample_unmix(&cfg, n, 0);
    let v = &ds.hidden().v;
    for i in 0..2 {
        for j in 0..2 {
            let r = corr(&ds.a().column(i), &v.column(j));
            assert!(r.abs() < 5.0 / (n as f64).sqrt(), "corr(A{i}, V{j}) = {r}");
        }
        let (m, _) = mean_sd(&v.column(i));
        let sd = cfg.sigma_v[(i, i)].sqrt();
        assert!(m.abs() < 4.0 * sd / (n as f64).sqrt());
    }
}

#[test]
fn unmix_latent_is_linear_in_actions() {
    let n = 20_000;
    let cfg = ScmUnmixConfig::random(2, 10, 1.5, 6);
    let ds = sample_unmix(&cfg, n, 0);
    let fit = least_squares_fit(&ds.a().with_intercept(), &ds.hidden().z).unwrap();
    for r in 0..2 {
        for c in 0..2 {
            let want = cfg.alpha * cfg.m0[(r, c)];
            let got = fit.coefficients[(c + 1, r)];
            let se = 4.0 * (3.0 * cfg.sigma_v[(r, r)] / n as f64).sqrt();
            assert!((got - want).abs() < se, "coef ({r},{c}): {got} vs {want}");
        }
    }
    // Binned conditional means of Z₁ track α·M₀·a along A₁ with A₂ near 0.
    let a = ds.a();
    let z = &ds.hidden().z;
    for b in 0..4 {
        let lo = -1.0 + 0.5 * b as f64;
        let rows: Vec<usize> = (0..n).filter(|&i| a[(i, 0)] >= lo && a[(i, 0)] < lo + 0.5).collect();
        let got = rows.iter().map(|&i| z[(i, 0)]).sum::<f64>() / rows.len() as f64;
        let want = rows.iter().map(|&i| cfg.alpha * (cfg.m0[(0, 0)] * a[(i, 0)] + cfg.m0[(0, 1)] * a[(i, 1)])).sum::<f64>()
            / rows.len() as f64;
        let sd = cfg.sigma_v[(0, 0)].sqrt();
        assert!((got - want).abs() < 4.0 * sd / (rows.len() as f64).sqrt(), "bin {b}");
    }
}

#[test]
fn zero_alpha_decouples_actions_and_latent() {
    let ds = sample_unmix(&ScmUnmixConfig::random(2, 10, 0.0, 1), 5_000, 0);
    let z = &ds.hidden().z;
    for i in 0..2 {
        for j in 0..2 {
            assert!(corr(&ds.a().column(i), &z.column(j)).abs() < 0.05);
        }
    }
}

#[test]
fn mixing_is_injective_on_a_sample() {
    let cfg = ScmUnmixConfig::random(2, 10, 1.0, 2);
    let ds = sample_unmix(&cfg, 400, 0);
    let (x, z) = (ds.x(), &ds.hidden().z);
    for i in 0..400 {
        for j in 0..i {
            let dz: f64 = (0..2).map(|c| (z[(i, c)] - z[(j, c)]).powi(2)).sum();
            let dx: f64 = (0..10).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum();
            if dz > 1e-12 {
                assert!(dx > 0.0, "rows {i} and {j} collide");
            }
        }
    }
}

#[test]
fn samples_are_bit_identical_per_seed_and_draw() {
    let cfg = ScmExtrapConfig::one_dim(1.2, 9);
    let a = sample_extrap(&cfg, 300, 0).unwrap();
    let b = sample_extrap(&ScmExtrapConfig::one_dim(1.2, 9), 300, 0).unwrap();
    assert_eq!(a, b);
    assert_ne!(sample_extrap(&cfg, 300, 1).unwrap().x(), a.x());
    let u1 = sample_unmix(&ScmUnmixConfig::random(4, 10, 2.0, 5), 200, 0);
    let u2 = sample_unmix(&ScmUnmixConfig::random(4, 10, 2.0, 5), 200, 0);
    assert_eq!(u1, u2);
}

#[test]
fn confounding_mode_has_requested_correlation() {
    let n = 20_000;
    for rho in [0.0, 0.5, 0.9] {
        let ds = sample_extrap(&ScmExtrapConfig::one_dim(1.0, 3).with_confounding(rho), n, 0).unwrap();
        let h = ds.hidden();
        let r = corr(&h.u.as_ref().unwrap().column(0), &h.v.column(0));
        assert!((r - rho).abs() < 0.03, "rho {rho}: {r}");
    }
}

#[test]
fn outcome_noise_is_centered() {
    for cfg in [ScmExtrapConfig::one_dim(1.0, 1), ScmExtrapConfig::multi_dim(4, 1)] {
        let n = 20_000;
        let ds = sample_extrap(&cfg, n, 0).unwrap();
        let (m, sd) = mean_sd(&ds.hidden().u.as_ref().unwrap().column(0));
        assert!(m.abs() < 4.0 * sd / (n as f64).sqrt(), "d={} mean U {m}", cfg.d);
    }
}

#[test]
fn do_mean_matches_closed_form() {
    let cfg = ScmExtrapConfig::one_dim(1.2, 11);
    let s2 = cfg.sigma_v[(0, 0)];
    let zero = true_do_mean(&cfg, &[0.0], 100_000, 0).unwrap();
    // ℓ is odd and V is symmetric, so E[ℓ(V)] = 0.
    assert!(zero.mean.abs() < 3.0 * zero.std_error, "{zero:?}");
    for a_star in [-3.0, -1.0, 0.7, 2.5] {
        let mu = cfg.m0[(0, 0)] * a_star;
        let exact = -2.0 * mu + 10.0 * mu.sin() * (-s2 / 2.0).exp();
        let est = true_do_mean(&cfg, &[a_star], 100_000, 0).unwrap();
        assert!((est.mean - exact).abs() < 3.0 * est.std_error, "a*={a_star}: {} vs {exact}", est.mean);
    }
}
