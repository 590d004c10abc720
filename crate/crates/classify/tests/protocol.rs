use dlp2c_classify::mlp::{gradient_check_sample, Activation, Mlp};
use dlp2c_classify::synthetic::{gaussian_classes, one_hot_like, xor};
use dlp2c_classify::{evaluate, train, Algorithm, FeatureDataset, LrSpec, Model, MlpSpec};
use dlp2c_core::rng::Rng;
use ndarray::Array2;

fn mlp(hidden: Vec<usize>) -> Algorithm {
    Algorithm::Mlp(MlpSpec { hidden, ..MlpSpec::default() })
}

#[test]
fn xor_needs_a_hidden_layer() {
    let ds = xor(1000, 3);
    let lr = evaluate(&train(&ds, &Algorithm::LogisticRegression(LrSpec::default())).unwrap(), &ds).unwrap();
    assert!((lr.test_accuracy - 0.5).abs() <= 0.1, "{}", lr.test_accuracy);
    let spec = MlpSpec { epochs: 100, patience: 20, ..MlpSpec::default() };
    let m = evaluate(&train(&ds, &Algorithm::Mlp(spec)).unwrap(), &ds).unwrap();
    assert!(m.test_accuracy >= 0.95, "{}", m.test_accuracy);
}

#[test]
fn separable_gaussians_every_algorithm() {
    let ds = gaussian_classes(1000, 512, 2, 8.0, 11);
    for alg in [Algorithm::NaiveBayes, Algorithm::LogisticRegression(LrSpec::default()), mlp(vec![128, 32])] {
        let e = evaluate(&train(&ds, &alg).unwrap(), &ds).unwrap();
        assert!(e.test_accuracy >= 0.99, "{}: {}", alg.name(), e.test_accuracy);
        let rows: Vec<u64> = e.confusion.counts.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(rows.iter().sum::<u64>() as usize, ds.split.test.len());
    }
}

#[test]
fn five_classes() {
    let ds = one_hot_like(60, 5, 40, 4);
    for alg in [Algorithm::NaiveBayes, Algorithm::LogisticRegression(LrSpec::default()), mlp(vec![32])] {
        let e = evaluate(&train(&ds, &alg).unwrap(), &ds).unwrap();
        assert_eq!(e.test_accuracy, 1.0, "{}", alg.name());
    }
}

#[test]
fn same_seed_same_model() {
    let ds = gaussian_classes(200, 20, 3, 3.0, 8);
    for alg in [Algorithm::NaiveBayes, Algorithm::LogisticRegression(LrSpec { init_scale: 0.1, ..LrSpec::default() }), mlp(vec![16, 8])] {
        assert_eq!(train(&ds, &alg).unwrap(), train(&ds, &alg).unwrap(), "{}", alg.name());
    }
    let a = train(&ds, &mlp(vec![16])).unwrap();
    let b = train(&ds, &Algorithm::Mlp(MlpSpec { hidden: vec![16], seed: 1, ..MlpSpec::default() })).unwrap();
    assert_ne!(a, b);
}

#[test]
fn saved_models_predict_the_same() {
    let dir = tempfile::tempdir().unwrap();
    let ds = gaussian_classes(120, 6, 2, 4.0, 2);
    for alg in [Algorithm::NaiveBayes, Algorithm::LogisticRegression(LrSpec::default()), mlp(vec![8])] {
        let m = train(&ds, &alg).unwrap();
        let p = dir.path().join(format!("{}.json", alg.name()));
        m.save(&p).unwrap();
        let back = Model::load(&p).unwrap();
        assert_eq!(back.predict(ds.view()).unwrap(), m.predict(ds.view()).unwrap());
    }
}

#[test]
fn dataset_files_train_the_same() {
    let dir = tempfile::tempdir().unwrap();
    let ds = gaussian_classes(90, 5, 3, 5.0, 6);
    let bin = dir.path().join("f.dlpf");
    ds.save(&bin).unwrap();
    let csv = dir.path().join("f.csv");
    std::fs::write(&csv, dlp2c_classify::dataset::to_csv(&ds)).unwrap();
    let a = FeatureDataset::load(&bin, 6).unwrap();
    let b = FeatureDataset::load(&csv, 6).unwrap();
    assert_eq!(a.labels, b.labels);
    assert!((&a.vectors - &b.vectors).iter().all(|d| d.abs() < 1e-6));
    assert_eq!(a.split, ds.split);
}

#[test]
fn wide_network_gradients() {
    let mut rng = Rng::seed_from_u64(21);
    let x = Array2::from_shape_fn((10, 16), |_| rng.normal());
    let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
    let net = Mlp::init(16, 2, &[1024, 256], Activation::Relu, 3);
    let err = gradient_check_sample(&net, x.view(), &y, 400, 5, 1e-6, 1e-7);
    assert!(err < 1e-4, "{err}");
}
