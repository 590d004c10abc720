use dlp2c_classify::features::cosine;
use dlp2c_classify::synthetic::chart_figure;
use dlp2c_classify::{cheap_features, evaluate, train, Algorithm, Cascade, CoarseLabel, FeatureDataset, MlpSpec, FEATURE_DIM};
use dlp2c_core::simulator::{dataset_model, SimConfig};
use dlp2c_vision::{render, RenderStyle};
use image::DynamicImage;
use ndarray::Array2;

fn graph(i: usize) -> dlp2c_core::graph::CompGraph {
    dataset_model(&SimConfig { seed: 42, ..SimConfig::default() }, 5 + i % 36, i).unwrap()
}

fn dataset(rows: Vec<(Vec<f64>, usize)>, names: &[&str]) -> FeatureDataset {
    let n = rows.len();
    let flat: Vec<f64> = rows.iter().flat_map(|(f, _)| f.iter().copied()).collect();
    let labels = rows.iter().map(|(_, l)| *l).collect();
    let x = Array2::from_shape_vec((n, FEATURE_DIM), flat).unwrap();
    FeatureDataset::new(x, labels, names.iter().map(|s| s.to_string()).collect(), 42).unwrap()
}

#[test]
fn styles_differ_in_feature_space() {
    let g = graph(17);
    let k = cheap_features(&render(&g, RenderStyle::StyleK, 1).unwrap().image);
    let c = cheap_features(&render(&g, RenderStyle::StyleC, 1).unwrap().image);
    assert!(cosine(&k, &c) < 0.99, "{}", cosine(&k, &c));
}

#[test]
fn style_discrimination() {
    let mut rows = Vec::new();
    for i in 0..100 {
        let g = graph(i);
        for (label, style) in RenderStyle::ALL.into_iter().enumerate() {
            rows.push((cheap_features(&render(&g, style, 1).unwrap().image), label));
        }
    }
    let ds = dataset(rows, &["StyleK", "StyleC"]);
    let e = evaluate(&train(&ds, &Algorithm::Mlp(MlpSpec::default())).unwrap(), &ds).unwrap();
    assert!(e.test_accuracy >= 0.95, "{}", e.test_accuracy);
}

#[test]
fn diagrams_pass_the_coarse_stage() {
    let mut rows = Vec::new();
    for i in 0..60 {
        let style = RenderStyle::ALL[i % 2];
        rows.push((cheap_features(&render(&graph(i), style, 1).unwrap().image), 1));
        rows.push((cheap_features(&DynamicImage::ImageRgb8(chart_figure(i as u64))), 0));
    }
    let ds = dataset(rows, &["other", "design_flow"]);
    let coarse = train(&ds, &Algorithm::Mlp(MlpSpec { hidden: vec![64], ..MlpSpec::default() })).unwrap();
    let cascade = Cascade::new(Some(coarse), None);
    let probe = render(&graph(500), RenderStyle::StyleK, 1).unwrap().image;
    assert_eq!(cascade.coarse_classify(&cheap_features(&probe)).unwrap(), CoarseLabel::DesignFlow);
    let chart = DynamicImage::ImageRgb8(chart_figure(999));
    assert_eq!(cascade.coarse_classify(&cheap_features(&chart)).unwrap(), CoarseLabel::Other);
}
