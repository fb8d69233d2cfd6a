//! Fully connected receiver: `N1 → h1 → h2 → 1` with ReLU hidden layers and
//! a sigmoid output, trained on the mean squared error between label bit and
//! output.
//!
//! Parameters live in one flat vector, layer-major with each layer's weight
//! matrix (row-major, `out × in`) followed by its bias. Gradients and
//! Hessian-vector products use the same ordering.

mod checkpoint;
mod network;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use network::{ber_eval, detect, forward, grad, hvp, loss, loss_and_grad, predict, accuracy};
pub use train::{train, train_observed, Optimizer, TrainConfig, TrainReport};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{config, input, Result};

/// Layer sizes and the offsets of every block in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    sizes: Vec<usize>,
    // (weight offset, bias offset) for each computing layer
    blocks: Vec<(usize, usize)>,
    total: usize,
}

impl Layout {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return config("a network needs an input and an output layer");
        }
        if sizes.contains(&0) {
            return config("layer sizes must be positive");
        }
        let mut blocks = Vec::with_capacity(sizes.len() - 1);
        let mut off = 0;
        for w in sizes.windows(2) {
            let wo = off;
            off += w[0] * w[1];
            blocks.push((wo, off));
            off += w[1];
        }
        Ok(Self { sizes: sizes.to_vec(), blocks, total: off })
    }

    /// `[n1, h1, h2, 1]`.
    pub fn receiver(n1: usize, h1: usize, h2: usize) -> Result<Self> {
        Self::new(&[n1, h1, h2, 1])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn num_params(&self) -> usize {
        self.total
    }

    pub(crate) fn num_layers(&self) -> usize {
        self.blocks.len()
    }

    /// Weight matrix of computing layer `l` (0-based) as `out × in`.
    pub(crate) fn weight<'a>(&self, flat: &'a [f64], l: usize) -> ArrayView2<'a, f64> {
        let (wo, bo) = self.blocks[l];
        ArrayView2::from_shape((self.sizes[l + 1], self.sizes[l]), &flat[wo..bo]).expect("layout")
    }

    pub(crate) fn bias<'a>(&self, flat: &'a [f64], l: usize) -> ArrayView1<'a, f64> {
        let (_, bo) = self.blocks[l];
        ArrayView1::from(&flat[bo..bo + self.sizes[l + 1]])
    }

    pub(crate) fn block(&self, l: usize) -> (usize, usize, usize) {
        let (wo, bo) = self.blocks[l];
        (wo, bo, bo + self.sizes[l + 1])
    }
}

/// Receiver weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layout: Layout,
    values: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(layout: Layout) -> Self {
        let values = vec![0.0; layout.num_params()];
        Self { layout, values }
    }

    /// Glorot-uniform weights in `±√(6/(fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng>(layout: Layout, rng: &mut R) -> Self {
        let mut p = Self::zeros(layout);
        for l in 0..p.layout.num_layers() {
            let (wo, bo, _) = p.layout.block(l);
            let (fan_in, fan_out) = (p.layout.sizes[l], p.layout.sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
            for v in &mut p.values[wo..bo] {
                *v = dist.sample(rng);
            }
        }
        p
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.num_params() {
            return input(format!(
                "{} values for a layout with {} parameters",
                values.len(),
                layout.num_params()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return input("parameters must be finite");
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { layout: self.layout.clone(), values }
    }
}

/// Partial derivatives in the canonical parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub flat: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n: usize) -> Self {
        Self { flat: vec![0.0; n] }
    }

    pub fn norm(&self) -> f64 {
        self.flat.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Received symbols (one per row) with their transmitted bits.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    inputs: Array2<f64>,
    labels: Vec<u8>,
}

impl LabeledBatch {
    pub fn new(inputs: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return input(format!(
                "{} input rows but {} labels",
                inputs.nrows(),
                labels.len()
            ));
        }
        if labels.iter().any(|&b| b > 1) {
            return input("labels must be 0 or 1");
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return input("inputs must be finite");
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return input("rows have different lengths");
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let inputs = Array2::from_shape_vec((rows.len(), width), flat)
            .map_err(|e| crate::Error::Input(e.to_string()))?;
        Self::new(inputs, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Rows selected by `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let inputs = self.inputs.select(ndarray::Axis(0), idx);
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self { inputs, labels }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.width() != other.width() && !self.is_empty() && !other.is_empty() {
            return input("batches have different widths");
        }
        let inputs = ndarray::concatenate(ndarray::Axis(0), &[self.inputs.view(), other.inputs.view()])
            .map_err(|e| crate::Error::Input(e.to_string()))?;
        let labels = self.labels.iter().chain(&other.labels).copied().collect();
        Ok(Self { inputs, labels })
    }

    /// Labels flipped 0 ↔ 1.
    pub fn complemented(&self) -> Self {
        Self {
            inputs: self.inputs.clone(),
            labels: self.labels.iter().map(|b| 1 - b).collect(),
        }
    }
}
