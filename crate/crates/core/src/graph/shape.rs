//! Tensor shapes and per-layer shape inference.
//!
//! Conventions: Conv2D uses same padding with stride 1; pooling uses valid
//! padding, so an `h × w` map pooled with kernel `k` and stride `s` becomes
//! `⌊(h−k)/s⌋+1` on each side.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{CompGraph, HyperParams, LayerKind};

/// Token sequence length of the text input.
pub const IMDB_SEQ_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TensorShape {
    Vec { n: usize },
    Map3D { h: usize, w: usize, c: usize },
    Seq { t: usize, d: usize },
    TokenSeq { t: usize },
}

impl TensorShape {
    pub fn rank_name(&self) -> &'static str {
        match self {
            TensorShape::Vec { .. } => "vector",
            TensorShape::Map3D { .. } => "feature map",
            TensorShape::Seq { .. } => "sequence",
            TensorShape::TokenSeq { .. } => "token sequence",
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            TensorShape::Vec { n } => vec![n],
            TensorShape::Map3D { h, w, c } => vec![h, w, c],
            TensorShape::Seq { t, d } => vec![t, d],
            TensorShape::TokenSeq { t } => vec![t],
        }
    }

    /// Two shapes can be concatenated along their last axis.
    pub fn concat_compatible(&self, other: &TensorShape) -> bool {
        match (self, other) {
            (TensorShape::Vec { .. }, TensorShape::Vec { .. }) => true,
            (TensorShape::Map3D { h, w, .. }, TensorShape::Map3D { h: h2, w: w2, .. }) => {
                h == h2 && w == w2
            }
            (TensorShape::Seq { t, .. }, TensorShape::Seq { t: t2, .. }) => t == t2,
            _ => false,
        }
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TensorShape::Vec { n } => write!(f, "Vec({n})"),
            TensorShape::Map3D { h, w, c } => write!(f, "Map3D({h},{w},{c})"),
            TensorShape::Seq { t, d } => write!(f, "Seq({t},{d})"),
            TensorShape::TokenSeq { t } => write!(f, "TokenSeq({t})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("{kind} cannot consume a {got} input")]
    RankMismatch { kind: LayerKind, got: &'static str },
    #[error("{kind} output would be empty ({detail})")]
    ShapeUnderflow { kind: LayerKind, detail: String },
    #[error("concat inputs are incompatible: {0}")]
    ConcatIncompatible(String),
    #[error("{kind} expects {expected} input(s), got {got}")]
    Arity { kind: LayerKind, expected: &'static str, got: usize },
    #[error("{kind} has missing or mismatched parameters")]
    Params { kind: LayerKind },
    #[error("unknown layer kind has no shape")]
    Unknown,
}

/// Output shape of one layer given its input shapes.
pub fn infer_shape(
    kind: LayerKind,
    return_seq: bool,
    params: &HyperParams,
    inputs: &[TensorShape],
) -> Result<TensorShape, ShapeError> {
    use TensorShape as T;
    if kind == LayerKind::Unknown {
        return Err(ShapeError::Unknown);
    }
    if !params.fits(kind) {
        return Err(ShapeError::Params { kind });
    }
    if kind.is_input() {
        if !inputs.is_empty() {
            return Err(ShapeError::Arity { kind, expected: "0", got: inputs.len() });
        }
        return Ok(match kind {
            LayerKind::InputMnist => T::Map3D { h: 28, w: 28, c: 1 },
            LayerKind::InputCifar10 => T::Map3D { h: 32, w: 32, c: 3 },
            LayerKind::InputImageNet => T::Map3D { h: 224, w: 224, c: 3 },
            _ => T::TokenSeq { t: IMDB_SEQ_LEN },
        });
    }
    if kind == LayerKind::Concat {
        return concat(inputs);
    }
    let input = match inputs {
        [one] => *one,
        _ => return Err(ShapeError::Arity { kind, expected: "1", got: inputs.len() }),
    };
    let mismatch = || ShapeError::RankMismatch { kind, got: input.rank_name() };
    match (kind, *params, input) {
        (LayerKind::Dense, HyperParams::Dense { nodes }, T::Vec { .. }) => {
            Ok(T::Vec { n: nodes as usize })
        }
        (LayerKind::Conv2D, HyperParams::Conv2D { filters, .. }, T::Map3D { h, w, .. }) => {
            Ok(T::Map3D { h, w, c: filters as usize })
        }
        (
            LayerKind::MaxPool2D | LayerKind::AvgPool2D,
            HyperParams::Pool { stride, filter_size },
            T::Map3D { h, w, c },
        ) => {
            let (k, s) = (filter_size as usize, stride as usize);
            if k == 0 || s == 0 || k > h || k > w {
                return Err(ShapeError::ShapeUnderflow {
                    kind,
                    detail: format!("kernel {k} stride {s} on {h}x{w}"),
                });
            }
            Ok(T::Map3D { h: (h - k) / s + 1, w: (w - k) / s + 1, c })
        }
        (LayerKind::Flatten, _, T::Map3D { h, w, c }) => Ok(T::Vec { n: h * w * c }),
        (LayerKind::Flatten, _, T::Seq { t, d }) => Ok(T::Vec { n: t * d }),
        (LayerKind::Dropout, _, shape) => Ok(shape),
        (LayerKind::Embed, HyperParams::Embed { embed_size, .. }, T::TokenSeq { t }) => {
            Ok(T::Seq { t, d: embed_size as usize })
        }
        (LayerKind::SimpleRnn, HyperParams::SimpleRnn { units }, T::Seq { t, .. })
        | (LayerKind::Lstm, HyperParams::Lstm { nodes: units }, T::Seq { t, .. }) => {
            let units = units as usize;
            Ok(if return_seq { T::Seq { t, d: units } } else { T::Vec { n: units } })
        }
        _ => Err(mismatch()),
    }
}

fn concat(inputs: &[TensorShape]) -> Result<TensorShape, ShapeError> {
    use TensorShape as T;
    if inputs.len() < 2 {
        return Err(ShapeError::Arity {
            kind: LayerKind::Concat,
            expected: "at least 2",
            got: inputs.len(),
        });
    }
    let first = inputs[0];
    if let Some(bad) = inputs.iter().find(|s| !first.concat_compatible(s)) {
        return Err(ShapeError::ConcatIncompatible(format!("{first} vs {bad}")));
    }
    Ok(match first {
        T::Vec { .. } => T::Vec {
            n: inputs.iter().map(|s| s.dims()[0]).sum(),
        },
        T::Map3D { h, w, .. } => T::Map3D {
            h,
            w,
            c: inputs.iter().map(|s| s.dims()[2]).sum(),
        },
        T::Seq { t, .. } => T::Seq {
            t,
            d: inputs.iter().map(|s| s.dims()[1]).sum(),
        },
        T::TokenSeq { .. } => {
            return Err(ShapeError::ConcatIncompatible("token sequences".into()))
        }
    })
}

/// Shapes of every node whose inputs all resolved, in topological order,
/// together with the first error of each node that failed. Returns `None`
/// for cyclic graphs.
#[allow(clippy::type_complexity)]
pub fn infer_graph_shapes(
    graph: &CompGraph,
) -> Option<(IndexMap<String, TensorShape>, Vec<(String, ShapeError)>)> {
    let order = graph.topo_order()?;
    let mut shapes: IndexMap<String, TensorShape> = IndexMap::new();
    let mut errors = Vec::new();
    for id in order {
        let node = &graph.nodes[id];
        let Some(params) = node.params.as_ref() else { continue };
        let inputs: Option<Vec<TensorShape>> =
            graph.predecessors(id).map(|p| shapes.get(p).copied()).collect();
        let Some(inputs) = inputs else { continue };
        match infer_shape(node.kind, node.return_seq, params, &inputs) {
            Ok(s) => {
                shapes.insert(id.to_string(), s);
            }
            Err(e) => errors.push((id.to_string(), e)),
        }
    }
    Some((shapes, errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Convolution output size for explicit padding: ⌊(n + 2p − k)/s⌋ + 1.
    fn conv_out(n: usize, k: usize, pad: usize, stride: usize) -> usize {
        (n + 2 * pad - k) / stride + 1
    }

    #[test]
    fn conv_same_padding_matches_formula() {
        let out = infer_shape(
            LayerKind::Conv2D,
            false,
            &HyperParams::Conv2D { filters: 32, filter_size: 5 },
            &[TensorShape::Map3D { h: 28, w: 28, c: 1 }],
        )
        .unwrap();
        assert_eq!(out, TensorShape::Map3D { h: 28, w: 28, c: 32 });
        assert_eq!(conv_out(28, 5, (5 - 1) / 2, 1), 28);
    }

    #[test]
    fn pool_flatten_dropout() {
        let pooled = infer_shape(
            LayerKind::MaxPool2D,
            false,
            &HyperParams::Pool { stride: 2, filter_size: 2 },
            &[TensorShape::Map3D { h: 28, w: 28, c: 32 }],
        )
        .unwrap();
        assert_eq!(pooled, TensorShape::Map3D { h: 14, w: 14, c: 32 });
        assert_eq!((28 - 2) / 2 + 1, 14);
        let flat = infer_shape(LayerKind::Flatten, false, &HyperParams::Empty, &[pooled]).unwrap();
        assert_eq!(flat, TensorShape::Vec { n: 6272 });
        assert_eq!(14 * 14 * 32, 6272);
        let v = TensorShape::Vec { n: 100 };
        assert_eq!(
            infer_shape(LayerKind::Dropout, false, &HyperParams::Dropout { probability: 0.5 }, &[v]),
            Ok(v)
        );
    }

    #[test]
    fn errors() {
        let map = TensorShape::Map3D { h: 3, w: 3, c: 8 };
        assert!(matches!(
            infer_shape(LayerKind::Dense, false, &HyperParams::Dense { nodes: 10 }, &[map]),
            Err(ShapeError::RankMismatch { .. })
        ));
        assert!(matches!(
            infer_shape(
                LayerKind::AvgPool2D,
                false,
                &HyperParams::Pool { stride: 2, filter_size: 5 },
                &[map]
            ),
            Err(ShapeError::ShapeUnderflow { .. })
        ));
        assert!(matches!(
            infer_shape(
                LayerKind::Concat,
                false,
                &HyperParams::Empty,
                &[map, TensorShape::Vec { n: 3 }]
            ),
            Err(ShapeError::ConcatIncompatible(_))
        ));
        assert!(matches!(
            infer_shape(
                LayerKind::Concat,
                false,
                &HyperParams::Empty,
                &[map, TensorShape::Map3D { h: 4, w: 3, c: 1 }]
            ),
            Err(ShapeError::ConcatIncompatible(_))
        ));
        assert!(matches!(
            infer_shape(
                LayerKind::Lstm,
                false,
                &HyperParams::Lstm { nodes: 4 },
                &[TensorShape::TokenSeq { t: 100 }]
            ),
            Err(ShapeError::RankMismatch { .. })
        ));
    }

    #[test]
    fn recurrent_and_embed() {
        let tokens = infer_shape(LayerKind::InputImdbText, false, &HyperParams::Empty, &[]).unwrap();
        assert_eq!(tokens, TensorShape::TokenSeq { t: 100 });
        let seq = infer_shape(
            LayerKind::Embed,
            false,
            &HyperParams::Embed { embed_size: 64, vocab: 10_000 },
            &[tokens],
        )
        .unwrap();
        assert_eq!(seq, TensorShape::Seq { t: 100, d: 64 });
        let p = HyperParams::SimpleRnn { units: 7 };
        assert_eq!(
            infer_shape(LayerKind::SimpleRnn, true, &p, &[seq]),
            Ok(TensorShape::Seq { t: 100, d: 7 })
        );
        assert_eq!(
            infer_shape(LayerKind::SimpleRnn, false, &p, &[seq]),
            Ok(TensorShape::Vec { n: 7 })
        );
        assert_eq!(
            infer_shape(
                LayerKind::Concat,
                false,
                &HyperParams::Empty,
                &[seq, TensorShape::Seq { t: 100, d: 7 }]
            ),
            Ok(TensorShape::Seq { t: 100, d: 71 })
        );
    }

    fn any_map() -> impl Strategy<Value = TensorShape> {
        (1usize..300, 1usize..300, 1usize..300).prop_map(|(h, w, c)| TensorShape::Map3D { h, w, c })
    }

    proptest! {
        #[test]
        fn pool_outputs_positive_and_deterministic(
            shape in any_map(),
            stride in 2u32..=5,
            k in prop::sample::select(vec![1u32, 3, 5, 7, 9, 11]),
        ) {
            let p = HyperParams::Pool { stride, filter_size: k };
            let a = infer_shape(LayerKind::MaxPool2D, false, &p, &[shape]);
            let b = infer_shape(LayerKind::MaxPool2D, false, &p, &[shape]);
            prop_assert_eq!(&a, &b);
            if let Ok(out) = a {
                prop_assert!(out.dims().iter().all(|&d| d > 0));
            }
        }

        #[test]
        fn conv_keeps_spatial_dims(shape in any_map(), filters in 1u32..300, k in 1u32..12) {
            let out = infer_shape(
                LayerKind::Conv2D, false,
                &HyperParams::Conv2D { filters, filter_size: k }, &[shape]).unwrap();
            let TensorShape::Map3D { h, w, .. } = shape else { unreachable!() };
            prop_assert_eq!(out, TensorShape::Map3D { h, w, c: filters as usize });
        }
    }
}
