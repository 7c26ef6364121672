mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rssc::linalg::{orthonormality_deviation, seeded_rng};
use rssc::model::*;
use rssc::SscError;

fn config(n: usize, dims: &[usize], rho: f64, sigma: f64, seed: u64) -> ModelConfig {
    ModelConfig {
        ambient_dim: n,
        subspaces: dims.iter().map(|&d| SubspaceSpec::new(d, rho)).collect(),
        noise_sigma: sigma,
        seed, orthogonal: false
    }
}

#[test]
fn noiseless_columns_are_unit() {
    let g = generate(&config(20, &[3, 5], 4.0, 0.0, 1)).unwrap();
    assert_eq!(g.data.y, *g.data.clean.as_ref().unwrap());
    for c in g.data.y.column_iter() {
        assert!((c.norm() - 1.0).abs() < 1e-12);
    }
    for s in &g.subspaces {
        assert!(orthonormality_deviation(s.basis()) < 1e-10);
    }
}

#[test]
fn generation_is_deterministic() {
    let cfg = config(30, &[4, 6], 5.0, 0.3, 77);
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert_eq!(a.data.y, b.data.y);
    let c = generate(&ModelConfig { seed: 78, ..cfg }).unwrap();
    assert_ne!(a.data.y, c.data.y);
}

#[test]
fn large_configuration_counts() {
    let mut dims = Vec::new();
    for (d, k) in [(200, 5), (150, 4), (100, 3), (50, 4), (20, 4), (10, 2)] {
        dims.extend(std::iter::repeat_n(d, k));
    }
    let cfg = config(2000, &dims, 5.0, 0.3, 0);
    cfg.validate().unwrap();
    assert_eq!(cfg.num_points(), 11000);
    assert_eq!(cfg.dims().iter().sum::<usize>(), 2200);
}

#[test]
fn invalid_configs_rejected() {
    assert!(matches!(generate(&config(5, &[6], 2.0, 0.0, 0)), Err(SscError::InvalidConfig(_))));
    assert!(config(5, &[2], 0.5, 0.0, 0).validate().is_err());
    assert!(config(5, &[2], 2.0, -0.1, 0).validate().is_err());
}

#[test]
fn noise_energy_matches_sigma() {
    let sigma = 0.4;
    let g = generate(&config(50, &[5], 2000.0, sigma, 3)).unwrap();
    let z = g.data.noise().unwrap();
    assert!(z.ncols() >= 10_000);
    let mean: f64 = z.column_iter().map(|c| c.norm_squared()).sum::<f64>() / z.ncols() as f64;
    assert!((mean / (sigma * sigma) - 1.0).abs() < 0.05, "{mean}");
}

#[test]
fn density_bookkeeping() {
    for &(d, rho) in &[(7usize, 3.3f64), (10, 2.5), (13, 4.75)] {
        let s = SubspaceSpec::new(d, rho);
        assert!((s.num_points() as f64 / d as f64 - rho).abs() <= 1.0 / d as f64);
    }
    // ties round to even
    assert_eq!(SubspaceSpec::new(2, 1.25).num_points(), 2);
    assert_eq!(SubspaceSpec::new(2, 1.75).num_points(), 4);
}

#[test]
fn normalize_examples() {
    let mut y = DMatrix::zeros(4, 2);
    y[(0, 0)] = 3.0;
    y[(1, 0)] = 4.0;
    y[(2, 1)] = 1.0;
    let out = normalize_columns(&DataMatrix::new(y.clone())).unwrap();
    assert!((out.y[(0, 0)] - 0.6).abs() < 1e-15 && (out.y[(1, 0)] - 0.8).abs() < 1e-15);
    assert_eq!(out.y.column(1), y.column(1));
    let mut rng = seeded_rng(1, 0);
    let r = common::random_matrix(&mut rng, 7, 9);
    for c in normalize_columns(&DataMatrix::new(r)).unwrap().y.column_iter() {
        assert!((c.norm() - 1.0).abs() < 1e-12);
    }
    y.column_mut(1).fill(0.0);
    assert!(matches!(normalize_columns(&DataMatrix::new(y)), Err(SscError::ZeroColumn(1))));
}

fn axes(n: usize, idx: &[usize]) -> Subspace {
    let mut b = DMatrix::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        b[(i, c)] = 1.0;
    }
    Subspace::new(b).unwrap()
}

#[test]
fn principal_angle_examples() {
    let mut rng = seeded_rng(4, 0);
    let a = random_subspace(10, 4, &mut rng).unwrap();
    let same = principal_angles(&a, &a).unwrap();
    assert!(same.cos_angles.iter().all(|&c| (c - 1.0).abs() < 1e-12));
    assert!((same.affinity - 1.0).abs() < 1e-12);

    let orth = principal_angles(&axes(8, &[0, 1, 2]), &axes(8, &[3, 4, 5])).unwrap();
    assert!(orth.cos_angles.iter().all(|&c| c.abs() < 1e-15) && orth.affinity == 0.0);

    // shared 2-dimensional intersection of two 5-dimensional subspaces
    let g = principal_angles(&axes(12, &[0, 1, 2, 3, 4]), &axes(12, &[0, 1, 5, 6, 7])).unwrap();
    assert!((g.affinity - (2.0f64 / 5.0).sqrt()).abs() < 1e-12);
    let k = g.cos_angles.len() as f64;
    assert!((g.affinity.powi(2) * k - g.cos_angles.iter().map(|c| c * c).sum::<f64>()).abs() < 1e-10);

    let bad = DMatrix::from_element(3, 1, 1.0);
    assert!(matches!(Subspace::new(bad), Err(SscError::InvalidBasis { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn affinity_symmetric_and_rotation_invariant(seed in 0u64..1000, d1 in 1usize..5, d2 in 1usize..5) {
        let mut rng = seeded_rng(seed, 0);
        let a = random_subspace(9, d1, &mut rng).unwrap();
        let b = random_subspace(9, d2, &mut rng).unwrap();
        let ab = principal_angles(&a, &b).unwrap();
        let ba = principal_angles(&b, &a).unwrap();
        prop_assert!((ab.affinity - ba.affinity).abs() < 1e-12);
        prop_assert!(ab.cos_angles.windows(2).all(|w| w[0] >= w[1]));
        let q = random_subspace(9, 9, &mut rng).unwrap();
        let ra = Subspace::new(q.basis() * a.basis()).unwrap();
        let rb = Subspace::new(q.basis() * b.basis()).unwrap();
        let rot = principal_angles(&ra, &rb).unwrap();
        for (x, y) in ab.cos_angles.iter().zip(&rot.cos_angles) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn pca_examples() {
    let g = generate(&config(15, &[3], 4.0, 0.0, 5)).unwrap();
    let fit = fit_subspace_pca(&g.data.y, DimRule::Energy(0.9)).unwrap();
    assert_eq!(fit.dim(), 3);
    let full = fit_subspace_pca(&g.data.y, DimRule::Energy(1.0)).unwrap();
    assert_eq!(full.dim(), 3);
    let u = full.basis();
    assert!((u * (u.transpose() * &g.data.y) - &g.data.y).norm() < 1e-9);

    let p = DMatrix::from_column_slice(3, 1, &[0.0, 3.0, 4.0]);
    let one = fit_subspace_pca(&p, DimRule::Energy(0.5)).unwrap();
    assert_eq!(one.dim(), 1);
    assert!((one.basis()[(1, 0)].abs() - 0.6).abs() < 1e-12);

    assert!(fit_subspace_pca(&DMatrix::zeros(3, 0), DimRule::Fixed(1)).is_err());
}

#[test]
fn pca_matches_independent_projection() {
    let g = generate(&config(25, &[4], 10.0, 0.2, 6)).unwrap();
    let y = &g.data.y;
    let fit = fit_subspace_pca(y, DimRule::Fixed(4)).unwrap();
    // independent oracle: top eigenvectors of Y Yᵀ
    let eig = (y * y.transpose()).symmetric_eigen();
    let mut order: Vec<usize> = (0..25).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let v = DMatrix::from_fn(25, 4, |r, c| eig.eigenvectors[(r, order[c])]);
    let p_fit = fit.basis() * fit.basis().transpose();
    let p_ref = &v * v.transpose();
    assert!((p_fit - p_ref).norm() < 1e-9);
    let residual = (y - fit.basis() * (fit.basis().transpose() * y)).norm_squared();
    let noise = g.data.noise().unwrap().norm_squared();
    assert!(residual <= noise);
}

#[test]
fn energy_rule_is_smallest_dimension() {
    let mut rng = seeded_rng(9, 0);
    let y = common::random_matrix(&mut rng, 6, 10);
    let svd = (&y * y.transpose()).symmetric_eigen();
    let mut s: Vec<f64> = svd.eigenvalues.iter().map(|e| e.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = s.iter().sum();
    for &e in &[0.3, 0.6, 0.9, 0.99] {
        let mut acc = 0.0;
        let expected = s.iter().position(|v| { acc += v; acc >= e * total }).unwrap() + 1;
        assert_eq!(fit_subspace_pca(&y, DimRule::Energy(e)).unwrap().dim(), expected);
    }
}

#[test]
fn diagnostics_examples() {
    let cfg = config(12, &[3, 3], 5.0, 1.5, 0);
    let subs = vec![axes(12, &[0, 1, 2]), axes(12, &[3, 4, 5])];
    let c = TheoryConstants { kappa0: 0.01, ..Default::default() };
    let diag = diagnostics(&cfg, &subs, &c).unwrap();
    assert_eq!(diag.max_affinity_per_subspace, vec![0.0, 0.0]);
    assert!(diag.affinity_ok.iter().all(|&b| b));
    assert!(diag.density_ok.iter().all(|&b| b));
    assert!(!diag.noise_ok);
    let low = config(12, &[3, 3], 2.0, 0.5, 0);
    let diag = diagnostics(&low, &subs, &TheoryConstants::default()).unwrap();
    assert!(diag.density_ok.iter().all(|&b| !b));
    assert!(diag.noise_ok);
}
