use dlp2c_core::eval::{graph_equivalent, score_extraction};
use dlp2c_core::simulator::{dataset_model, SimConfig};
use dlp2c_vision::{extract, render, salt_and_pepper, ExtractorConfig, RenderStyle};
use image::DynamicImage;

fn config() -> SimConfig {
    SimConfig { seed: 42, ..SimConfig::default() }
}

fn sample(n: usize) -> Vec<dlp2c_core::graph::CompGraph> {
    (0..n).map(|i| dataset_model(&config(), 5 + (i * 11) % 36, i).unwrap()).collect()
}

#[test]
fn extracted_graphs_are_equivalent() {
    let graphs = sample(40);
    for style in RenderStyle::ALL {
        let params = style == RenderStyle::StyleK;
        let mut ok = 0;
        for g in &graphs {
            let r = render(g, style, 1).unwrap();
            let out = extract(&r.image, &ExtractorConfig::default()).unwrap();
            if graph_equivalent(g, &out.graph, params).unwrap() {
                ok += 1;
            }
        }
        assert!(ok >= graphs.len() - 1, "{style:?}: {ok}/{}", graphs.len());
    }
}

#[test]
fn accuracy_on_sample() {
    for style in RenderStyle::ALL {
        let mut blob = 0.0;
        let mut edge = 0.0;
        let graphs = sample(30);
        for g in &graphs {
            let r = render(g, style, 1).unwrap();
            let out = extract(&r.image, &ExtractorConfig::default()).unwrap();
            let rec = score_extraction(&g.name, &out, &r.sidecar);
            blob += rec.blob_accuracy;
            edge += rec.edge_accuracy;
        }
        let n = graphs.len() as f64;
        assert!(blob / n >= 99.0 && edge / n >= 93.0, "{style:?} {} {}", blob / n, edge / n);
    }
}

#[test]
fn doubling_the_scale_doubles_the_boxes() {
    let g = dataset_model(&config(), 12, 3).unwrap();
    for style in RenderStyle::ALL {
        let one = render(&g, style, 1).unwrap();
        let two = render(&g, style, 2).unwrap();
        for (a, b) in one.sidecar.nodes.iter().zip(&two.sidecar.nodes) {
            assert_eq!(a.bbox.scaled(2), b.bbox);
        }
        assert_eq!((two.image.width(), two.image.height()), (2 * one.image.width(), 2 * one.image.height()));
        let base = ExtractorConfig::default();
        let scaled = ExtractorConfig { min_node_area_px: 4.0 * base.min_node_area_px, ..base.clone() };
        let e1 = extract(&one.image, &base).unwrap();
        let e2 = extract(&two.image, &scaled).unwrap();
        assert_eq!(e1.blobs.len(), e2.blobs.len());
        for (a, b) in e1.blobs.iter().zip(&e2.blobs) {
            assert!(a.bbox.scaled(2).iou(&b.bbox) >= 0.9, "{:?} {:?}", a.bbox, b.bbox);
            assert_eq!(a.kind, b.kind);
        }
        assert_eq!(e1.arrows.len(), e2.arrows.len());
    }
}

#[test]
fn light_noise_costs_at_most_one_blob() {
    let g = dataset_model(&config(), 10, 0).unwrap();
    let r = render(&g, RenderStyle::StyleK, 1).unwrap();
    let noisy = DynamicImage::ImageLuma8(salt_and_pepper(&r.image.to_luma8(), 0.005, 9));
    let out = extract(&noisy, &ExtractorConfig::default()).unwrap();
    let rec = score_extraction(&g.name, &out, &r.sidecar);
    assert!(rec.blobs_missed <= 1, "{rec:?}");
}

#[test]
fn png_bytes_decode_to_the_same_pixels() {
    let g = dataset_model(&config(), 8, 1).unwrap();
    for style in RenderStyle::ALL {
        let r = render(&g, style, 1).unwrap();
        let bytes = dlp2c_vision::render::encode_png(&r.image).unwrap();
        let back = image::load_from_memory(&bytes).unwrap();
        assert_eq!(back, r.image);
        let a = extract(&r.image, &ExtractorConfig::default()).unwrap();
        let b = extract(&back, &ExtractorConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
