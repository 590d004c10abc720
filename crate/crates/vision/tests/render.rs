use dlp2c_core::artifact::GroundTruthSidecar;
use dlp2c_core::graph::{CompGraph, LayerKind, Node};
use dlp2c_core::simulator::{dataset_model, generate_dataset, SimConfig};
use dlp2c_vision::{render, sidecar_path, RenderError, RenderSink, RenderStyle};
use image::GenericImageView;

fn mean_and_colour(img: &image::DynamicImage) -> (f64, f64) {
    let (mut lum, mut chroma, mut n) = (0.0, 0.0, 0.0);
    for (_, _, p) in img.pixels() {
        let [r, g, b, _] = p.0.map(f64::from);
        lum += (r + g + b) / 3.0;
        chroma += (r - g).abs() + (g - b).abs();
        n += 1.0;
    }
    (lum / n, chroma / n)
}

#[test]
fn styles_are_visibly_different() {
    let g = dataset_model(&SimConfig { seed: 42, ..SimConfig::default() }, 15, 2).unwrap();
    let k = render(&g, RenderStyle::StyleK, 1).unwrap();
    let c = render(&g, RenderStyle::StyleC, 1).unwrap();
    let (lk, ck) = mean_and_colour(&k.image);
    let (lc, cc) = mean_and_colour(&c.image);
    assert_eq!(ck, 0.0);
    assert!(cc > 1.0, "{cc}");
    assert!(lc < lk);
    assert_eq!(k.sidecar.style, "StyleK");
    assert_eq!(c.sidecar.style, "StyleC");
    assert_ne!(k.sidecar.nodes[1].label, c.sidecar.nodes[1].label);
}

#[test]
fn invalid_graphs_are_refused() {
    let mut g = CompGraph::new("bad");
    g.add_node(Node::bare("a", LayerKind::InputMnist));
    g.add_node(Node::bare("b", LayerKind::Flatten));
    g.add_edge("a", "b");
    assert!(matches!(render(&g, RenderStyle::StyleK, 1), Err(RenderError::InvalidGraph(_))));
    let good = dataset_model(&SimConfig::default(), 5, 0).unwrap();
    assert!(matches!(render(&good, RenderStyle::StyleC, 0), Err(RenderError::BadScale)));
}

#[test]
fn rendering_is_deterministic() {
    let g = dataset_model(&SimConfig::default(), 20, 4).unwrap();
    for style in RenderStyle::ALL {
        let a = render(&g, style, 1).unwrap();
        let b = render(&g, style, 1).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.sidecar, b.sidecar);
    }
}

#[test]
fn dataset_with_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig {
        depth_min: 5,
        depth_max: 6,
        models_per_depth: 2,
        seed: 1,
        ..SimConfig::default()
    };
    let m = generate_dataset(&cfg, dir.path(), Some(&RenderSink::default())).unwrap();
    assert_eq!(m.total_models, 4);
    assert_eq!(m.total_images, 8);
    let png = dir.path().join("d05/d05_m00000_k.png");
    let img = image::open(&png).unwrap();
    let side: GroundTruthSidecar =
        GroundTruthSidecar::from_json(&std::fs::read_to_string(sidecar_path(&png)).unwrap()).unwrap();
    assert_eq!((img.width(), img.height()), (side.width, side.height));
    assert_eq!(side.model_id, "d05_m00000");
    let model = dlp2c_core::graph::from_json(&std::fs::read_to_string(dir.path().join("d05/d05_m00000.dlg.json")).unwrap()).unwrap();
    assert_eq!(side.nodes.len(), model.len());
    assert!(dir.path().join("d06/d06_m00001_c.gt.json").exists());
    assert!(m.files.iter().all(|f| dir.path().join(f).exists()));
}
