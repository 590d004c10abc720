pub mod artifact;
pub mod codegen;
pub mod eval;
pub mod graph;
pub mod lexicon;
pub mod rng;
pub mod simulator;
pub mod table;

pub use graph::{CompGraph, Edge, HyperParams, LayerKind, Node, Provenance};
