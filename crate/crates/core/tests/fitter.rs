use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reggkm::coxlik::LambdaTriple;
use reggkm::fitter::{fit, fit_lasso_cox, fit_linear_lasso_cox_x, predict_risk, FitConfig, FitDiagnostics, FittedModel, RiskModel};
use reggkm::kernel::{gram, GarroteKernelSpec, KernelFamily};
use reggkm::simgen::{generate, SettingSpec};
use reggkm::{Error, SurvivalDataset};

fn setting(id: u8, seed: u64) -> SurvivalDataset {
    generate(&SettingSpec::builtin(id, 0.0, seed).unwrap()).unwrap().standardize().unwrap()
}

fn small_lambda() -> LambdaTriple {
    LambdaTriple::new(0.01, 0.05, 0.05).unwrap()
}

#[test]
fn prediction_matches_augmented_gram_oracle() {
    let ds = setting(1, 11);
    let m = fit(&ds, &small_lambda(), &FitConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scaling = ds.standardization().unwrap();
    for _ in 0..5 {
        let x_new = [rng.random_range(-0.01..0.01)];
        let z_new: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..3.0)).collect();
        let got = predict_risk(&m, &x_new, &z_new).unwrap();

        // append the standardized new row to the training rows and read the
        // last row of the full Gram matrix
        let zs = scaling.apply_z(&DMatrix::from_row_slice(1, 5, &z_new)).unwrap();
        let xs = scaling.apply_x(&DMatrix::from_row_slice(1, 1, &x_new)).unwrap();
        let n = ds.n();
        let mut aug = DMatrix::zeros(n + 1, 5);
        aug.rows_mut(0, n).copy_from(ds.z());
        aug.row_mut(n).copy_from(&zs.row(0));
        let spec = GarroteKernelSpec::new(KernelFamily::GaussianGarrote, m.delta.clone()).unwrap();
        let k = gram(&spec, &aug).unwrap();
        let want: f64 = (0..n).map(|j| k[(n, j)] * m.alpha[j]).sum::<f64>() + xs[(0, 0)] * m.beta[0];
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn degenerate_model_scores_are_constant() {
    let ds = setting(1, 12);
    let mut m = fit(&ds, &small_lambda(), &FitConfig { max_outer_cycles: 2, ..FitConfig::default() }).unwrap();
    m.beta.fill(0.0);
    m.delta.iter_mut().for_each(|d| *d = 0.0);
    let total: f64 = m.alpha.iter().sum();
    for z in [[0.0, 1.0, 2.0, 3.0, 0.5], [2.9, 0.1, 0.1, 1.7, 2.2]] {
        let s = predict_risk(&m, &[0.004], &z).unwrap();
        assert!((s - total).abs() < 1e-12);
    }
}

#[test]
fn prediction_rejects_wrong_width() {
    let ds = setting(1, 13);
    let m = fit(&ds, &small_lambda(), &FitConfig { max_outer_cycles: 2, ..FitConfig::default() }).unwrap();
    assert!(matches!(predict_risk(&m, &[0.0], &[1.0, 2.0]), Err(Error::DimensionMismatch(_))));
}

#[test]
fn recorded_objective_matches_fresh_evaluation() {
    let ds = setting(2, 14);
    let m = fit(&ds, &small_lambda(), &FitConfig::default()).unwrap();
    let d: &FitDiagnostics = &m.diagnostics;
    assert_eq!(d.trace.last().unwrap().objective, d.final_objective);
    let fresh = m.objective_on(&ds).unwrap();
    assert!((fresh - d.final_objective).abs() < 1e-6, "{fresh} vs {}", d.final_objective);
    assert!(m.delta.iter().all(|v| *v >= 0.0));
    assert!(d.flagged_cycles.is_empty(), "cycles lost objective: {:?}", d.flagged_cycles);
    // blocks never lower the objective
    for w in d.trace.windows(2) {
        assert!(w[1].objective >= w[0].objective - 1e-12, "{:?} -> {:?}", w[0], w[1]);
    }
}

#[test]
fn permuting_subjects_leaves_the_fit_unchanged() {
    let ds = setting(1, 15);
    let n = ds.n();
    let perm: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
    let raw = ds.destandardize().unwrap();
    let pds = raw.subset(&perm).standardize().unwrap();
    let cfg = FitConfig { tol: 1e-10, max_outer_cycles: 200, ..FitConfig::default() };
    let a = fit(&ds, &small_lambda(), &cfg).unwrap();
    let b = fit(&pds, &small_lambda(), &cfg).unwrap();
    assert!(
        (a.diagnostics.final_objective - b.diagnostics.final_objective).abs() < 1e-6,
        "{} vs {}",
        a.diagnostics.final_objective,
        b.diagnostics.final_objective
    );
    let new = setting(1, 99).destandardize().unwrap();
    let sa = a.predict(new.x(), new.z()).unwrap();
    let sb = b.predict(new.x(), new.z()).unwrap();
    for (u, v) in sa.iter().zip(&sb) {
        assert!((u - v).abs() < 1e-6, "{u} vs {v}");
    }
}

#[test]
fn null_data_gives_penalty_only_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let n = 30;
    let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
    let z = DMatrix::from_fn(n, 3, |_, _| rng.random_range(0.0..3.0));
    let time = (0..n).map(|i| 1.0 + i as f64).collect();
    let ds = SurvivalDataset::new(time, vec![false; n], x, z).unwrap().standardize().unwrap();
    let lam = LambdaTriple::new(0.1, 0.1, 0.1).unwrap();
    let m = fit(&ds, &lam, &FitConfig::default()).unwrap();
    assert!(m.beta.iter().all(|b| *b == 0.0));
    assert!(m.alpha.amax() < 1e-4, "alpha {}", m.alpha.amax());
    let k_alpha = m.alpha.dot(&(&m.train_eta - ds.x() * &m.beta));
    let penalties = lam.lambda2 * m.delta.iter().sum::<f64>() + 0.5 * lam.lambda3 * k_alpha;
    assert!((m.diagnostics.final_objective + penalties).abs() < 1e-12);
}

#[test]
fn model_file_round_trip_preserves_predictions() {
    let ds = setting(1, 17);
    let m = fit(&ds, &small_lambda(), &FitConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let back = FittedModel::load(&path).unwrap();
    let raw = ds.destandardize().unwrap();
    assert_eq!(m.predict(raw.x(), raw.z()).unwrap(), back.predict(raw.x(), raw.z()).unwrap());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"version\": 1"));
    let tampered = text.replacen("\"delta\": [", "\"delta\": [-1.0, ", 1);
    assert!(FittedModel::from_json(&tampered).is_err());
}

#[test]
fn lasso_cox_without_kernel_block_is_linear_lasso() {
    let ds = setting(2, 18);
    let raw = ds.destandardize().unwrap();
    let no_z = SurvivalDataset::new(raw.time().to_vec(), raw.status().to_vec(), raw.x().clone(), DMatrix::zeros(ds.n(), 0))
        .unwrap()
        .standardize()
        .unwrap();
    let joint = fit_lasso_cox(&no_z, 0.02).unwrap();
    let (lin, _) = fit_linear_lasso_cox_x(&no_z, 0.02, &FitConfig::default()).unwrap();
    assert_eq!(joint.beta, lin.iter().copied().collect::<Vec<_>>());
    assert!(joint.z_coefficients().is_empty());
}

#[test]
fn lasso_cox_recovers_a_linear_effect() {
    // n = 60, h = 0, beta = (1, 0, 0) on unit-variance covariates
    let mut hits = 0;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let s3 = 3f64.sqrt();
        let x = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-s3..s3));
        let z = DMatrix::from_fn(n, 2, |_, _| rng.random_range(0.0..3.0));
        let time = (0..n).map(|i| -(1.0 - rng.random::<f64>()).ln() / x[(i, 0)].exp()).collect();
        let ds = SurvivalDataset::new(time, vec![true; n], x, z).unwrap().standardize().unwrap();
        let m = fit_lasso_cox(&ds, 0.01).unwrap();
        let b1 = m.x_coefficients()[0];
        if b1 > 0.5 && b1 < 1.6 {
            hits += 1;
        }
    }
    assert!(hits >= 45, "recovered in {hits}/50 seeds");
}

#[test]
fn large_garrote_penalty_gives_linear_cox() {
    let ds = setting(2, 19);
    let lam = LambdaTriple::new(0.02, 50.0, 0.5).unwrap();
    let m = fit(&ds, &lam, &FitConfig::default()).unwrap();
    assert!(m.delta.iter().all(|d| *d == 0.0));
    let (lin, _) = fit_linear_lasso_cox_x(&ds, lam.lambda1, &FitConfig::default()).unwrap();
    assert!((&m.beta - lin).amax() < 1e-4);
    let first = m.train_eta[0] - (ds.x().row(0) * &m.beta)[0];
    for i in 0..ds.n() {
        let h = m.train_eta[i] - (ds.x().row(i) * &m.beta)[0];
        assert!((h - first).abs() < 1e-12);
    }
}

#[test]
fn polynomial_kernel_fits() {
    let ds = setting(1, 20);
    let cfg = FitConfig { kernel: KernelFamily::PolynomialGarrote { degree: 2, offset: 1.0 }, ..FitConfig::default() };
    let m = fit(&ds, &small_lambda(), &cfg).unwrap();
    assert!(m.diagnostics.final_objective.is_finite());
    let raw = ds.destandardize().unwrap();
    let s = m.predict(raw.x(), raw.z()).unwrap();
    for (a, b) in s.iter().zip(m.train_eta.iter()) {
        assert!((a - b).abs() < 1e-10);
    }
}
