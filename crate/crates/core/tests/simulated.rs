use dlp2c_core::codegen::prototxt::{prototxt_check, read_graph};
use dlp2c_core::codegen::{generate, Dialect, RuleSet};
use dlp2c_core::eval::graph_equivalent;
use dlp2c_core::graph::{from_json, to_json, validate, LayerKind};
use dlp2c_core::rng::Rng;
use dlp2c_core::simulator::{dataset_model, sample_model, SimConfig};
use proptest::prelude::*;

fn config() -> SimConfig {
    SimConfig {
        seed: 42,
        ..SimConfig::default()
    }
}

#[test]
fn simulated_prototxt_checks_and_reads_back() {
    let rules = RuleSet::builtin();
    let cfg = config();
    for i in 0..1000 {
        let depth = 5 + i % 36;
        let g = dataset_model(&cfg, depth, i).unwrap();
        let proto = generate(&g, Dialect::CaffePrototxt).unwrap();
        assert!(prototxt_check(&proto), "{}", g.name);
        let back = read_graph(&proto, rules).unwrap();
        let mut flat = g.clone();
        for n in flat.nodes.values_mut() {
            n.return_seq = false;
        }
        assert!(graph_equivalent(&flat, &back, true).unwrap(), "{}", g.name);
        generate(&g, Dialect::KerasFunctional).unwrap();
    }
}

#[test]
fn keras_code_has_a_line_per_node() {
    let cfg = config();
    for i in 0..100 {
        let g = dataset_model(&cfg, 5 + i % 36, i).unwrap();
        let py = generate(&g, Dialect::KerasFunctional).unwrap();
        let n = py.lines().filter(|l| l.contains(" = layers.") || l.contains(" = keras.Input(")).count();
        assert_eq!(n, g.len() + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_models_are_valid(seed in any::<u64>(), depth in 5usize..=40) {
        let g = sample_model(&config(), depth, &mut Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(validate(&g, true).is_valid());
        let inputs: Vec<_> = g.inputs().collect();
        prop_assert_eq!(inputs.len(), 1);
        let sinks: Vec<_> = g.sinks().collect();
        prop_assert_eq!(sinks.len(), 1);
        prop_assert_eq!(sinks[0].kind, LayerKind::Dense);
        let concats = g.nodes.values().filter(|n| n.kind == LayerKind::Concat).count();
        prop_assert_eq!(g.edges.len(), g.len() - 1 + concats);
        prop_assert_eq!(from_json(&to_json(&g)).unwrap(), g);
    }

    #[test]
    fn dataset_models_are_deterministic(depth in 5usize..=40, index in 0usize..3000) {
        let a = dataset_model(&config(), depth, index).unwrap();
        let b = dataset_model(&config(), depth, index).unwrap();
        prop_assert_eq!(to_json(&a), to_json(&b));
    }
}
