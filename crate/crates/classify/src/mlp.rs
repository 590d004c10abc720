use dlp2c_core::rng::Rng;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::model::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Derivative expressed through the activation value.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without a better validation accuracy before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec {
            hidden: vec![1024, 256],
            activation: Activation::Relu,
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 30,
            batch_size: 64,
            patience: 5,
            seed: 0,
        }
    }
}

impl MlpSpec {
    pub fn check(&self) -> Result<(), String> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err("hidden sizes must be positive".into());
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err("batch size and epochs must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err("learning rate must be positive and momentum in [0, 1)".into());
        }
        Ok(())
    }
}

/// Fully connected network with a softmax output, trained by mini-batch
/// gradient descent with momentum on the mean cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub scaler: Standardizer,
    pub activation: Activation,
    /// `weights[l]` is `fan_in x fan_out`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.outer_iter_mut() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

impl Mlp {
    /// He-initialised weights, zero biases and an identity scaler.
    pub fn init(dim: usize, classes: usize, hidden: &[usize], activation: Activation, seed: u64) -> Mlp {
        let mut rng = Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = std::iter::once(dim).chain(hidden.iter().copied()).chain([classes]).collect();
        let weights = sizes
            .windows(2)
            .map(|p| {
                let sd = (2.0 / p[0] as f64).sqrt();
                Array2::from_shape_fn((p[0], p[1]), |_| sd * rng.normal())
            })
            .collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Mlp {
            scaler: Standardizer::identity(dim),
            activation,
            weights,
            biases,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn classes(&self) -> usize {
        self.weights.last().expect("at least one layer").ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Layer outputs of standardised input: hidden activations, then logits.
    fn forward(&self, xs: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut out: Vec<Array2<f64>> = Vec::with_capacity(self.weights.len());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = if l == 0 { xs } else { out[l - 1].view() };
            let mut z = input.dot(w) + b;
            if l + 1 < self.weights.len() {
                self.activation.apply(&mut z);
            }
            out.push(z);
        }
        out
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let xs = self.scaler.apply(x);
        let mut z = self.forward(xs.view()).pop().expect("output layer");
        softmax_rows(&mut z);
        z
    }

    /// Mean cross-entropy of standardised input and its gradients.
    pub fn loss_and_gradients(&self, xs: ArrayView2<f64>, y: &[usize]) -> (f64, Gradients) {
        let n = xs.nrows() as f64;
        let acts = self.forward(xs);
        let mut p = acts.last().expect("output layer").clone();
        softmax_rows(&mut p);
        let loss = -y.iter().enumerate().map(|(i, &c)| p[[i, c]].max(1e-300).ln()).sum::<f64>() / n;
        let mut delta = p;
        for (i, &c) in y.iter().enumerate() {
            delta[[i, c]] -= 1.0;
        }
        delta /= n;
        let layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            let input = if l == 0 { xs } else { acts[l - 1].view() };
            gw[l] = input.t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                back.zip_mut_with(&acts[l - 1], |d, &a| *d *= self.activation.derivative(a));
                delta = back;
            }
        }
        (loss, Gradients { weights: gw, biases: gb })
    }

    pub fn loss(&self, xs: ArrayView2<f64>, y: &[usize]) -> f64 {
        let mut p = self.forward(xs).pop().expect("output layer");
        softmax_rows(&mut p);
        -y.iter().enumerate().map(|(i, &c)| p[[i, c]].max(1e-300).ln()).sum::<f64>() / xs.nrows() as f64
    }

    fn accuracy(&self, xs: ArrayView2<f64>, y: &[usize]) -> f64 {
        let z = self.forward(xs).pop().expect("output layer");
        let hits = z
            .outer_iter()
            .zip(y)
            .filter(|(row, &c)| argmax(row.iter().copied()) == c)
            .count();
        hits as f64 / y.len().max(1) as f64
    }

    /// Trains on `x`, keeping the parameters of the epoch with the best
    /// accuracy on `val` when given; stops once that accuracy is perfect or
    /// has not improved for `spec.patience` epochs.
    pub fn fit(x: ArrayView2<f64>, y: &[usize], classes: usize, spec: &MlpSpec, val: Option<(ArrayView2<f64>, &[usize])>) -> Mlp {
        let mut net = Mlp::init(x.ncols(), classes, &spec.hidden, spec.activation, spec.seed);
        net.scaler = Standardizer::fit(x);
        let xs = net.scaler.apply(x);
        let vs = val.map(|(vx, vy)| (net.scaler.apply(vx), vy));
        let mut vw: Vec<Array2<f64>> = net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        let mut vb: Vec<Array1<f64>> = net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect();
        let mut rng = Rng::seed_from_u64(spec.seed ^ 0x6d6c_7021);
        let mut order: Vec<usize> = (0..y.len()).collect();
        let mut best: Option<(f64, Mlp)> = None;
        let mut stale = 0;
        for _ in 0..spec.epochs {
            rng.shuffle(&mut order);
            for chunk in order.chunks(spec.batch_size) {
                let bx = xs.select(Axis(0), chunk);
                let by: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                let (_, g) = net.loss_and_gradients(bx.view(), &by);
                for l in 0..net.weights.len() {
                    vw[l] *= spec.momentum;
                    vw[l].scaled_add(-spec.learning_rate, &g.weights[l]);
                    net.weights[l] += &vw[l];
                    vb[l] *= spec.momentum;
                    vb[l].scaled_add(-spec.learning_rate, &g.biases[l]);
                    net.biases[l] += &vb[l];
                }
            }
            let Some((vx, vy)) = &vs else { continue };
            let acc = net.accuracy(vx.view(), vy);
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, net.clone()));
                stale = 0;
            } else {
                stale += 1;
            }
            if acc >= 1.0 || stale >= spec.patience {
                break;
            }
        }
        best.map_or(net, |(_, m)| m)
    }

    fn parameter_mut(&mut self, mut k: usize) -> &mut f64 {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if k < w.len() {
                let cols = w.ncols();
                return &mut w[[k / cols, k % cols]];
            }
            k -= w.len();
            if k < b.len() {
                return &mut b[k];
            }
            k -= b.len();
        }
        panic!("parameter index out of range")
    }
}

fn flatten(g: &Gradients) -> Vec<f64> {
    g.weights
        .iter()
        .zip(&g.biases)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
        .collect()
}

pub fn argmax(v: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in v.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

/// Largest relative difference between analytic gradients and central
/// differences of the loss, `|a - n| / max(|a|, |n|, floor)`, over every
/// parameter of the network.
pub fn gradient_check(net: &Mlp, xs: ArrayView2<f64>, y: &[usize], eps: f64, floor: f64) -> f64 {
    let all: Vec<usize> = (0..net.parameter_count()).collect();
    gradient_check_at(net, xs, y, &all, eps, floor)
}

/// [`gradient_check`] over `count` parameters drawn without replacement.
pub fn gradient_check_sample(net: &Mlp, xs: ArrayView2<f64>, y: &[usize], count: usize, seed: u64, eps: f64, floor: f64) -> f64 {
    let mut idx: Vec<usize> = (0..net.parameter_count()).collect();
    Rng::seed_from_u64(seed).shuffle(&mut idx);
    idx.truncate(count);
    gradient_check_at(net, xs, y, &idx, eps, floor)
}

fn gradient_check_at(net: &Mlp, xs: ArrayView2<f64>, y: &[usize], params: &[usize], eps: f64, floor: f64) -> f64 {
    let analytic = flatten(&net.loss_and_gradients(xs, y).1);
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for &k in params {
        let a = analytic[k];
        let orig = *probe.parameter_mut(k);
        *probe.parameter_mut(k) = orig + eps;
        let up = probe.loss(xs, y);
        *probe.parameter_mut(k) = orig - eps;
        let down = probe.loss(xs, y);
        *probe.parameter_mut(k) = orig;
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(floor));
    }
    worst
}
