//! Round loop: broadcast, local updates, scheduling, aggregation.

use std::io::Write;

use super::schedule::{aggregate, schedule, Aggregate};
use super::{adapted_hits, local_fedavg_step, local_maml_step, FedMode, FmlConfig, LocalTask, Scored, Split};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub scheduled: Vec<u64>,
    pub successful: Vec<u64>,
    /// Data-size weighted train loss of the scheduled nodes at the broadcast parameters.
    pub train_loss: f64,
    pub aggregated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub scheduled: Vec<u64>,
    pub successful: Vec<u64>,
    pub train_loss: f64,
    pub test_acc: f64,
    pub adapted_acc: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub logs: Vec<RoundLog>,
    pub theta: Vec<f64>,
}

/// Global state of a federation. Nodes are addressed in ascending id order,
/// so the order of the slice handed in does not matter.
pub struct Federation<'a, T: LocalTask> {
    cfg: FmlConfig,
    nodes: Vec<&'a T>,
    theta: Vec<f64>,
    round: usize,
}

impl<'a, T: LocalTask> Federation<'a, T> {
    pub fn new(cfg: FmlConfig, nodes: &'a [T], init: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if nodes.is_empty() {
            return Err(Error::Config("federation needs at least one node".into()));
        }
        if nodes.len() != cfg.k {
            return Err(Error::Config(format!("K={} but {} nodes were supplied", cfg.k, nodes.len())));
        }
        let mut sorted: Vec<&T> = nodes.iter().collect();
        sorted.sort_by_key(|n| n.id());
        if sorted.windows(2).any(|w| w[0].id() == w[1].id()) {
            return Err(Error::Config("node ids must be unique".into()));
        }
        if sorted.iter().any(|n| n.num_params() != init.len()) {
            return Err(Error::Config("node parameter count differs from the initial parameters".into()));
        }
        Ok(Self { cfg, nodes: sorted, theta: init, round: 0 })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn config(&self) -> &FmlConfig {
        &self.cfg
    }

    /// Runs one communication round.
    pub fn step(&mut self, mode: FedMode) -> Result<RoundOutcome> {
        let cfg = self.cfg;
        let round = self.round;
        let mut r = rng::stream(cfg.seed, &[0x5343_4845_44, round as u64]);
        let sched = schedule(self.nodes.len(), cfg.n(), cfg.p_decode, &mut r)?;
        let mut updates = Vec::with_capacity(sched.scheduled.len());
        let (mut loss_sum, mut size_sum) = (0.0, 0.0);
        for &i in &sched.scheduled {
            let node = self.nodes[i];
            let res = match mode {
                FedMode::Fml => local_maml_step(node, &self.theta, cfg.alpha, cfg.beta, cfg.t0, cfg.meta_mode),
                FedMode::Fl => local_fedavg_step(node, &self.theta, cfg.fl_rate(), cfg.t0),
            };
            let (th, l) = res.map_err(|e| with_round(e, round))?;
            let size = node.data_size();
            loss_sum += l * size as f64;
            size_sum += size as f64;
            updates.push((th, size));
        }
        let view: Vec<(&[f64], usize, bool)> =
            updates.iter().zip(&sched.decoded).map(|((th, s), &u)| (th.as_slice(), *s, u)).collect();
        let aggregated = match aggregate(&view)? {
            Aggregate::Params(p) => {
                self.theta = p;
                true
            }
            Aggregate::Empty => false,
        };
        self.round += 1;
        let ids = |idx: &[usize]| idx.iter().map(|&i| self.nodes[i].id()).collect::<Vec<_>>();
        Ok(RoundOutcome {
            scheduled: ids(&sched.scheduled),
            successful: ids(&sched.successful()),
            train_loss: if size_sum > 0.0 { loss_sum / size_sum } else { f64::NAN },
            aggregated,
        })
    }
}

fn with_round(e: Error, round: usize) -> Error {
    match e {
        Error::Training { step, message, .. } => Error::Training { round: Some(round), step, message },
        other => other,
    }
}

/// Pooled test accuracy of `theta` and pooled accuracy after one inner step.
pub fn evaluate<T: Scored>(tasks: &[T], theta: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let (mut hit, mut tot, mut ahit, mut atot) = (0, 0, 0, 0);
    for t in tasks {
        let (h, n) = t.hits(theta, Split::Test)?;
        hit += h;
        tot += n;
        let (h, n) = adapted_hits(t, theta, alpha)?;
        ahit += h;
        atot += n;
    }
    let frac = |h: usize, n: usize| if n == 0 { 0.0 } else { h as f64 / n as f64 };
    Ok((frac(hit, tot), frac(ahit, atot)))
}

/// Runs `cfg.rounds` rounds from `init`, scoring on `eval` (or on the nodes
/// themselves when `eval` is empty) after every round.
pub fn run_rounds<T: Scored>(cfg: &FmlConfig, nodes: &[T], init: &[f64], mode: FedMode, eval: &[T]) -> Result<RunResult> {
    let mut fed = Federation::new(*cfg, nodes, init.to_vec())?;
    let eval = if eval.is_empty() { nodes } else { eval };
    let mut logs = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let out = fed.step(mode)?;
        let (test_acc, adapted_acc) = evaluate(eval, fed.theta(), cfg.alpha)?;
        logs.push(RoundLog {
            round: fed.round(),
            scheduled: out.scheduled,
            successful: out.successful,
            train_loss: out.train_loss,
            test_acc,
            adapted_acc,
        });
    }
    Ok(RunResult { logs, theta: fed.theta })
}

fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_round_csv<W: Write>(w: &mut W, logs: &[RoundLog]) -> Result<()> {
    writeln!(w, "round,scheduled,successful,train_loss,test_acc,adapted_acc")?;
    for l in logs {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            l.round,
            join_ids(&l.scheduled),
            join_ids(&l.successful),
            l.train_loss,
            l.test_acc,
            l.adapted_acc
        )?;
    }
    Ok(())
}
