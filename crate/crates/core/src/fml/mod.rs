//! Federated meta-learning over scheduled nodes, plus a FedAvg baseline.
//!
//! Nodes are anything implementing [`LocalTask`]; the receiver nodes used by
//! the experiments are [`NodeState`] values wrapping C-DNN train/test splits.

mod federation;
mod schedule;

pub use federation::{evaluate, run_rounds, write_round_csv, Federation, RoundLog, RoundOutcome, RunResult};
pub use schedule::{aggregate, schedule, Aggregate, Schedule};

use serde::{Deserialize, Serialize};

use crate::cdnn::{self, LabeledBatch, Layout, MlpParams};
use crate::error::{Error, Result};

/// Which part of a node's data an objective is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    All,
}

/// A node's local objective over a flat parameter vector.
pub trait LocalTask {
    fn id(&self) -> u64;
    /// |J_i|, the aggregation weight before normalisation.
    fn data_size(&self) -> usize;
    fn num_params(&self) -> usize;
    fn loss_and_grad(&self, theta: &[f64], split: Split) -> Result<(f64, Vec<f64>)>;
    fn hvp(&self, theta: &[f64], split: Split, v: &[f64]) -> Result<Vec<f64>>;

    fn loss(&self, theta: &[f64], split: Split) -> Result<f64> {
        Ok(self.loss_and_grad(theta, split)?.0)
    }

    fn grad(&self, theta: &[f64], split: Split) -> Result<Vec<f64>> {
        Ok(self.loss_and_grad(theta, split)?.1)
    }
}

/// Tasks that can report a detection accuracy in `[0, 1]`.
pub trait Scored: LocalTask {
    /// Returns `(correct, total)` on the given split.
    fn hits(&self, theta: &[f64], split: Split) -> Result<(usize, usize)>;
}

/// One receiver node: a disjoint train/test pair of labelled symbols.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: u64,
    pub train_split: LabeledBatch,
    pub test_split: LabeledBatch,
    layout: Layout,
    all: LabeledBatch,
}

impl NodeState {
    pub fn new(id: u64, layout: Layout, train_split: LabeledBatch, test_split: LabeledBatch) -> Result<Self> {
        if train_split.is_empty() || test_split.is_empty() {
            return Err(Error::Input(format!("node {id}: both splits must be nonempty")));
        }
        if train_split.width() != layout.input_len() || test_split.width() != layout.input_len() {
            return Err(Error::Input(format!(
                "node {id}: sample width does not match network input {}",
                layout.input_len()
            )));
        }
        let all = train_split.concat(&test_split)?;
        Ok(Self { id, train_split, test_split, layout, all })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn batch(&self, split: Split) -> &LabeledBatch {
        match split {
            Split::Train => &self.train_split,
            Split::Test => &self.test_split,
            Split::All => &self.all,
        }
    }

    fn params(&self, theta: &[f64]) -> Result<MlpParams> {
        MlpParams::from_values(self.layout.clone(), theta.to_vec())
    }
}

impl LocalTask for NodeState {
    fn id(&self) -> u64 {
        self.id
    }

    fn data_size(&self) -> usize {
        self.train_split.len() + self.test_split.len()
    }

    fn num_params(&self) -> usize {
        self.layout.num_params()
    }

    fn loss_and_grad(&self, theta: &[f64], split: Split) -> Result<(f64, Vec<f64>)> {
        let (l, g) = cdnn::loss_and_grad(&self.params(theta)?, self.batch(split))?;
        Ok((l, g.flat))
    }

    fn hvp(&self, theta: &[f64], split: Split, v: &[f64]) -> Result<Vec<f64>> {
        let v = cdnn::Gradient { flat: v.to_vec() };
        Ok(cdnn::hvp(&self.params(theta)?, self.batch(split), &v)?.flat)
    }
}

impl Scored for NodeState {
    fn hits(&self, theta: &[f64], split: Split) -> Result<(usize, usize)> {
        let b = self.batch(split);
        let acc = cdnn::accuracy(&self.params(theta)?, b)?;
        Ok(((acc * b.len() as f64).round() as usize, b.len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetaMode {
    /// Differentiates through the inner step with a Hessian-vector product.
    Exact,
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FedMode {
    Fml,
    Fl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmlConfig {
    pub k: usize,
    pub g: f64,
    pub alpha: f64,
    pub beta: f64,
    pub t0: usize,
    pub rounds: usize,
    pub p_decode: f64,
    pub meta_mode: MetaMode,
    /// FedAvg local rate; defaults to `beta` when unset.
    pub fl_lr: Option<f64>,
    pub seed: u64,
}

impl Default for FmlConfig {
    fn default() -> Self {
        Self {
            k: 33,
            g: 0.3,
            alpha: 0.001,
            beta: 0.0001,
            t0: 1,
            rounds: 50,
            p_decode: 1.0,
            meta_mode: MetaMode::Exact,
            fl_lr: None,
            seed: 0,
        }
    }
}

impl FmlConfig {
    /// Scheduled nodes per round, `round(G·K)`.
    pub fn n(&self) -> usize {
        (self.g * self.k as f64).round() as usize
    }

    pub fn fl_rate(&self) -> f64 {
        self.fl_lr.unwrap_or(self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(self.g > 0.0 && self.g <= 1.0) {
            return Err(Error::Config(format!("G must lie in (0, 1], got {}", self.g)));
        }
        if self.n() < 1 {
            return Err(Error::Config(format!("round(G·K) = 0 for G={} K={}", self.g, self.k)));
        }
        let rates = [("alpha", self.alpha), ("beta", self.beta), ("fl_lr", self.fl_rate())];
        for (name, r) in rates {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {r}")));
            }
        }
        if !(0.0..=1.0).contains(&self.p_decode) {
            return Err(Error::Config(format!("p_decode must lie in [0, 1], got {}", self.p_decode)));
        }
        if self.t0 == 0 {
            return Err(Error::Config("T0 must be at least 1".into()));
        }
        Ok(())
    }
}

fn diverged(step: usize, what: &str) -> Error {
    Error::Training { round: None, step, message: format!("non-finite {what}") }
}

/// Gradient of `L(θ − α∇L(θ, train), test)` with respect to `θ`.
pub fn meta_gradient<T: LocalTask + ?Sized>(task: &T, theta: &[f64], alpha: f64, mode: MetaMode) -> Result<Vec<f64>> {
    Ok(meta_loss_and_gradient(task, theta, alpha, mode)?.2)
}

/// Returns `(train loss at θ, test loss at φ, meta-gradient)`.
fn meta_loss_and_gradient<T: LocalTask + ?Sized>(
    task: &T,
    theta: &[f64],
    alpha: f64,
    mode: MetaMode,
) -> Result<(f64, f64, Vec<f64>)> {
    let (l_tr, g_tr) = task.loss_and_grad(theta, Split::Train)?;
    let phi: Vec<f64> = theta.iter().zip(&g_tr).map(|(t, g)| t - alpha * g).collect();
    let (l_te, g_te) = task.loss_and_grad(&phi, Split::Test)?;
    let meta = match mode {
        MetaMode::FirstOrder => g_te,
        MetaMode::Exact => {
            let hv = task.hvp(theta, Split::Train, &g_te)?;
            g_te.iter().zip(&hv).map(|(g, h)| g - alpha * h).collect()
        }
    };
    Ok((l_tr, l_te, meta))
}

/// `T0` MAML updates starting from `theta`; returns the updated parameters
/// and the train loss seen at the start.
pub fn local_maml_step<T: LocalTask + ?Sized>(
    task: &T,
    theta: &[f64],
    alpha: f64,
    beta: f64,
    t0: usize,
    mode: MetaMode,
) -> Result<(Vec<f64>, f64)> {
    let mut th = theta.to_vec();
    let mut first = f64::NAN;
    for s in 0..t0 {
        let (l_tr, l_te, meta) = meta_loss_and_gradient(task, &th, alpha, mode)?;
        if !l_tr.is_finite() || !l_te.is_finite() {
            return Err(diverged(s, "loss"));
        }
        if s == 0 {
            first = l_tr;
        }
        for (w, d) in th.iter_mut().zip(&meta) {
            *w -= beta * d;
        }
        if th.iter().any(|w| !w.is_finite()) {
            return Err(diverged(s, "parameters"));
        }
    }
    Ok((th, first))
}

/// `T0` full-batch gradient steps on all of the node's data.
pub fn local_fedavg_step<T: LocalTask + ?Sized>(task: &T, theta: &[f64], lr: f64, t0: usize) -> Result<(Vec<f64>, f64)> {
    let mut th = theta.to_vec();
    let mut first = f64::NAN;
    for s in 0..t0 {
        let (l, g) = task.loss_and_grad(&th, Split::All)?;
        if !l.is_finite() {
            return Err(diverged(s, "loss"));
        }
        if s == 0 {
            first = l;
        }
        for (w, d) in th.iter_mut().zip(&g) {
            *w -= lr * d;
        }
        if th.iter().any(|w| !w.is_finite()) {
            return Err(diverged(s, "parameters"));
        }
    }
    Ok((th, first))
}

/// Accuracy after one inner step on the task's train split, measured on its test split.
pub fn adapted_hits<T: Scored + ?Sized>(task: &T, theta: &[f64], alpha: f64) -> Result<(usize, usize)> {
    let g = task.grad(theta, Split::Train)?;
    let phi: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t - alpha * d).collect();
    task.hits(&phi, Split::Test)
}
