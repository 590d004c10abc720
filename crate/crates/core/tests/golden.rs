use std::path::PathBuf;

use dlp2c_core::codegen::prototxt::{prototxt_check, read_graph};
use dlp2c_core::codegen::{generate, Dialect, RuleSet};
use dlp2c_core::eval::graph_equivalent;
use dlp2c_core::graph::from_json;
use dlp2c_core::CompGraph;

const FIXTURES: [&str; 3] = ["lenet", "branch_conv", "text_lstm"];

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn load(name: &str) -> CompGraph {
    from_json(&std::fs::read_to_string(dir().join(format!("{name}.dlg.json"))).unwrap()).unwrap()
}

fn expected(name: &str, ext: &str) -> String {
    std::fs::read_to_string(dir().join(format!("{name}.{ext}"))).unwrap()
}

#[test]
fn keras_output_matches_golden_bytes() {
    for name in FIXTURES {
        let code = generate(&load(name), Dialect::KerasFunctional).unwrap();
        assert_eq!(code, expected(name, "py"), "{name}");
    }
}

#[test]
fn caffe_output_matches_golden_bytes() {
    for name in FIXTURES {
        let code = generate(&load(name), Dialect::CaffePrototxt).unwrap();
        assert_eq!(code, expected(name, "prototxt"), "{name}");
        assert!(prototxt_check(&code), "{name}");
    }
}

#[test]
fn prototxt_reads_back_to_the_same_graph() {
    for name in FIXTURES {
        let g = load(name);
        let back = read_graph(&expected(name, "prototxt"), RuleSet::builtin()).unwrap();
        assert!(graph_equivalent(&g, &back, true).unwrap(), "{name}");
        assert_eq!(back.edges, g.edges, "{name}");
    }
}

#[test]
fn branch_merges_two_inputs_once() {
    let py = expected("branch_conv", "py");
    let concat: Vec<&str> = py.lines().filter(|l| l.contains("layers.Concatenate(")).collect();
    assert_eq!(concat.len(), 1);
    assert!(concat[0].ends_with("([conv_b, conv_a])"), "{}", concat[0]);

    let proto = expected("branch_conv", "prototxt");
    let start = proto.find("type: \"Concat\"").unwrap();
    let block = &proto[start..proto[start..].find("\n}").unwrap() + start];
    assert_eq!(block.matches("bottom:").count(), 2);
    assert_eq!(proto.matches("type: \"Concat\"").count(), 1);
}

#[test]
fn one_construct_per_node_plus_head() {
    for name in FIXTURES {
        let g = load(name);
        let py = expected(name, "py");
        let assigns = py.lines().filter(|l| l.contains(" = layers.") || l.contains(" = keras.Input(")).count();
        assert_eq!(assigns, g.len() + 1, "{name}");
        let proto = expected(name, "prototxt");
        assert_eq!(proto.matches("\nlayer {").count(), g.len() + 1, "{name}");
        assert!(proto.contains("type: \"Softmax\""));
    }
}
