//! Hyper-parameter value domains used for simulation and strict validation.

use super::{HyperParams, LayerKind};

/// A finite set of admissible values. `Range` is inclusive with a step, in
/// the `[start:step:end]` notation of the layer tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Range { start: u32, step: u32, end: u32 },
    Set(&'static [u32]),
    /// Tenths from `0.0` to `1.0`.
    Tenths,
}

pub const DENSE_NODES: Domain = Domain::Range { start: 5, step: 5, end: 500 };
pub const DROPOUT_PROBABILITY: Domain = Domain::Tenths;
pub const CONV_FILTERS: Domain = Domain::Range { start: 16, step: 16, end: 256 };
pub const FILTER_SIZE: Domain = Domain::Range { start: 1, step: 2, end: 11 };
pub const POOL_STRIDE: Domain = Domain::Range { start: 2, step: 1, end: 5 };
pub const EMBED_SIZE: Domain = Domain::Set(&[64, 100, 128, 200]);
pub const EMBED_VOCAB: Domain = Domain::Set(&[10_000, 20_000, 50_000, 75_000]);
pub const RNN_UNITS: Domain = Domain::Range { start: 3, step: 1, end: 25 };
pub const LSTM_NODES: Domain = Domain::Range { start: 3, step: 1, end: 25 };

impl Domain {
    /// Number of values in the domain.
    pub fn len(&self) -> usize {
        match *self {
            Domain::Range { start, step, end } => ((end - start) / step + 1) as usize,
            Domain::Set(v) => v.len(),
            Domain::Tenths => 11,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th value as a float (integer domains convert exactly).
    pub fn value(&self, i: usize) -> f64 {
        match *self {
            Domain::Range { start, step, .. } => (start + step * i as u32) as f64,
            Domain::Set(v) => v[i] as f64,
            Domain::Tenths => i as f64 / 10.0,
        }
    }

    /// The `i`-th value of an integer domain.
    pub fn int(&self, i: usize) -> u32 {
        self.value(i) as u32
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.value(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Domain::Tenths => {
                let t = x * 10.0;
                (0.0..=10.0).contains(&t) && (t - t.round()).abs() < 1e-9
            }
            _ => self.values().any(|v| v == x),
        }
    }

    pub fn midpoint(&self) -> f64 {
        self.value(self.len() / 2)
    }
}

/// Domains of each parameter field of a kind, in [`HyperParams::fields`] order.
pub fn domains_for(kind: LayerKind) -> &'static [(&'static str, Domain)] {
    match kind {
        LayerKind::Dense => &[("nodes", DENSE_NODES)],
        LayerKind::Dropout => &[("probability", DROPOUT_PROBABILITY)],
        LayerKind::Conv2D => &[("filters", CONV_FILTERS), ("filter_size", FILTER_SIZE)],
        LayerKind::MaxPool2D | LayerKind::AvgPool2D => {
            &[("stride", POOL_STRIDE), ("filter_size", FILTER_SIZE)]
        }
        LayerKind::Embed => &[("embed_size", EMBED_SIZE), ("vocab", EMBED_VOCAB)],
        LayerKind::SimpleRnn => &[("units", RNN_UNITS)],
        LayerKind::Lstm => &[("nodes", LSTM_NODES)],
        _ => &[],
    }
}

/// Parameters built from the middle element of every domain of `kind`.
pub fn midpoint_params(kind: LayerKind) -> HyperParams {
    let mid = |d: Domain| d.midpoint() as u32;
    match kind {
        LayerKind::Dense => HyperParams::Dense { nodes: mid(DENSE_NODES) },
        LayerKind::Dropout => HyperParams::Dropout {
            probability: DROPOUT_PROBABILITY.midpoint(),
        },
        LayerKind::Conv2D => HyperParams::Conv2D {
            filters: mid(CONV_FILTERS),
            filter_size: mid(FILTER_SIZE),
        },
        LayerKind::MaxPool2D | LayerKind::AvgPool2D => HyperParams::Pool {
            stride: mid(POOL_STRIDE),
            filter_size: mid(FILTER_SIZE),
        },
        LayerKind::Embed => HyperParams::Embed {
            embed_size: mid(EMBED_SIZE),
            vocab: mid(EMBED_VOCAB),
        },
        LayerKind::SimpleRnn => HyperParams::SimpleRnn { units: mid(RNN_UNITS) },
        LayerKind::Lstm => HyperParams::Lstm { nodes: mid(LSTM_NODES) },
        _ => HyperParams::Empty,
    }
}

/// Builds the parameter record of `kind` from field values given in
/// [`HyperParams::fields`] order. Returns `None` on an arity mismatch.
pub fn params_from_values(kind: LayerKind, values: &[f64]) -> Option<HyperParams> {
    let u = |i: usize| values[i] as u32;
    let want = domains_for(kind).len();
    if values.len() != want {
        return None;
    }
    Some(match kind {
        LayerKind::Dense => HyperParams::Dense { nodes: u(0) },
        LayerKind::Dropout => HyperParams::Dropout { probability: values[0] },
        LayerKind::Conv2D => HyperParams::Conv2D { filters: u(0), filter_size: u(1) },
        LayerKind::MaxPool2D | LayerKind::AvgPool2D => HyperParams::Pool { stride: u(0), filter_size: u(1) },
        LayerKind::Embed => HyperParams::Embed { embed_size: u(0), vocab: u(1) },
        LayerKind::SimpleRnn => HyperParams::SimpleRnn { units: u(0) },
        LayerKind::Lstm => HyperParams::Lstm { nodes: u(0) },
        LayerKind::Unknown => return None,
        _ => HyperParams::Empty,
    })
}
