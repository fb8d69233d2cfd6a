//! Mini-batch training loop for a single receiver.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{loss, loss_and_grad, LabeledBatch, MlpParams};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Self::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Rows per step; `0` means full batch.
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full-data loss after every epoch.
    pub epoch_loss: Vec<f64>,
    pub steps: usize,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Trains `init` on `data`; shuffling is driven by `cfg.seed`.
pub fn train(init: &MlpParams, data: &LabeledBatch, cfg: &TrainConfig) -> Result<(MlpParams, TrainReport)> {
    train_observed(init, data, cfg, |_, _, _| Ok(()))
}

/// [`train`] calling `on_epoch(epoch, params, loss)` after every epoch.
pub fn train_observed<F>(
    init: &MlpParams,
    data: &LabeledBatch,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<(MlpParams, TrainReport)>
where
    F: FnMut(usize, &MlpParams, f64) -> Result<()>,
{
    if data.is_empty() {
        return Err(Error::Input("training data is empty".into()));
    }
    let mut p = init.clone();
    let n = p.values().len();
    let mut adam = AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let bs = if cfg.batch_size == 0 { data.len() } else { cfg.batch_size.min(data.len()) };
    let mut r = rng::stream(cfg.seed, &[0x7452_4149_4e]);
    let mut report = TrainReport { epoch_loss: Vec::with_capacity(cfg.epochs), steps: 0 };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut r);
        for chunk in order.chunks(bs) {
            let batch = if bs == data.len() { data.clone() } else { data.select(chunk) };
            let (l, g) = loss_and_grad(&p, &batch)?;
            if !l.is_finite() {
                return Err(Error::Training {
                    round: None,
                    step: report.steps,
                    message: format!("non-finite loss in epoch {epoch}"),
                });
            }
            step(&mut p, &g.flat, &cfg.optimizer, &mut adam);
            report.steps += 1;
        }
        let l = loss(&p, data)?;
        report.epoch_loss.push(l);
        on_epoch(epoch, &p, l)?;
    }
    Ok((p, report))
}

fn step(p: &mut MlpParams, g: &[f64], opt: &Optimizer, st: &mut AdamState) {
    match *opt {
        Optimizer::Sgd { lr } => {
            for (w, d) in p.values_mut().iter_mut().zip(g) {
                *w -= lr * d;
            }
        }
        Optimizer::Adam { lr, beta1, beta2, eps } => {
            st.t += 1;
            let c1 = 1.0 - beta1.powi(st.t);
            let c2 = 1.0 - beta2.powi(st.t);
            for (((w, d), m), v) in p.values_mut().iter_mut().zip(g).zip(&mut st.m).zip(&mut st.v) {
                *m = beta1 * *m + (1.0 - beta1) * d;
                *v = beta2 * *v + (1.0 - beta2) * d * d;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}
