use std::path::PathBuf;

use dlp2c_core::graph::validate;
use dlp2c_core::table::{
    design_corpus, extract_table_graph, is_design_table, orientation, results_corpus, BowModel, CellGrid, Orientation,
};
use dlp2c_core::{HyperParams, LayerKind};

fn fixture(name: &str) -> CellGrid {
    CellGrid::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}

fn chain(grid: &CellGrid) -> Vec<(LayerKind, Option<HyperParams>)> {
    let out = extract_table_graph(grid, orientation(grid)).unwrap();
    out.graph.nodes.values().map(|n| (n.kind, n.params)).collect()
}

#[test]
fn row_and_column_major_files_give_the_same_chain() {
    let row = fixture("table_row_major.csv");
    let col = fixture("table_column_major.csv");
    assert_eq!(col, row.transpose());
    assert_eq!(orientation(&row), Orientation::RowMajor);
    assert_eq!(orientation(&col), Orientation::ColumnMajor);
    let want = vec![
        (LayerKind::Conv2D, Some(HyperParams::Conv2D { filters: 64, filter_size: 3 })),
        (LayerKind::MaxPool2D, Some(HyperParams::Pool { stride: 2, filter_size: 2 })),
        (LayerKind::Dense, Some(HyperParams::Dense { nodes: 4096 })),
    ];
    assert_eq!(chain(&row), want);
    assert_eq!(chain(&col), want);
    let skipped = extract_table_graph(&row, Orientation::RowMajor).unwrap().skipped;
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0].text, "relu");
}

#[test]
fn column_table_with_input_is_a_valid_design() {
    let g = fixture("table_vgg_columns.json");
    assert!(is_design_table(&g, BowModel::builtin()).is_design);
    assert_eq!(orientation(&g), Orientation::ColumnMajor);
    let out = extract_table_graph(&g, Orientation::ColumnMajor).unwrap();
    let kinds: Vec<LayerKind> = out.graph.nodes.values().map(|n| n.kind).collect();
    use LayerKind::*;
    assert_eq!(kinds, [InputImageNet, Conv2D, MaxPool2D, Conv2D, MaxPool2D, Flatten, Dense, Dropout, Dense]);
    assert_eq!(out.graph.nodes["t08"].params, Some(HyperParams::Dropout { probability: 0.5 }));
    assert!(validate(&out.graph, false).is_valid(), "{:?}", validate(&out.graph, false));
}

#[test]
fn results_file_is_not_a_design() {
    let g = fixture("table_results.csv");
    assert!(!is_design_table(&g, BowModel::builtin()).is_design);
}

#[test]
fn corpora_separate_without_errors() {
    let m = BowModel::builtin();
    let errors = design_corpus().iter().filter(|g| !is_design_table(g, m).is_design).count()
        + results_corpus().iter().filter(|g| is_design_table(g, m).is_design).count();
    assert_eq!(errors, 0);
    assert_eq!((design_corpus().len(), results_corpus().len()), (20, 20));
}
