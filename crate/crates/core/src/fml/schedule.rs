//! Random N-of-K scheduling and weighted aggregation.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// Scheduled node positions (ascending) and their decode indicators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub scheduled: Vec<usize>,
    pub decoded: Vec<bool>,
}

impl Schedule {
    pub fn successful(&self) -> Vec<usize> {
        self.scheduled.iter().zip(&self.decoded).filter(|(_, &u)| u).map(|(&i, _)| i).collect()
    }

    /// `u_i` for every position `0..k`; unscheduled nodes are 0.
    pub fn indicators(&self, k: usize) -> Vec<u8> {
        let mut u = vec![0u8; k];
        for i in self.successful() {
            u[i] = 1;
        }
        u
    }
}

/// Draws `n` of `k` positions uniformly without replacement, then an
/// independent Bernoulli(`p_decode`) success flag for each.
pub fn schedule<R: Rng + ?Sized>(k: usize, n: usize, p_decode: f64, rng: &mut R) -> Result<Schedule> {
    if n == 0 || n > k {
        return Err(Error::Config(format!("cannot schedule {n} of {k} nodes")));
    }
    if !(0.0..=1.0).contains(&p_decode) {
        return Err(Error::Config(format!("p_decode must lie in [0, 1], got {p_decode}")));
    }
    let mut scheduled = index::sample(rng, k, n).into_vec();
    scheduled.sort_unstable();
    let decoded = scheduled.iter().map(|_| rng.random_bool(p_decode)).collect();
    Ok(Schedule { scheduled, decoded })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Aggregate {
    Params(Vec<f64>),
    /// No update was decoded; the caller keeps the previous global parameters.
    Empty,
}

/// Data-size weighted mean of the successful updates.
///
/// Computed as an offset from the first successful update so that identical
/// inputs reproduce themselves bit for bit.
pub fn aggregate(updates: &[(&[f64], usize, bool)]) -> Result<Aggregate> {
    let ok: Vec<&(&[f64], usize, bool)> = updates.iter().filter(|u| u.2).collect();
    let Some(first) = ok.first() else {
        return Ok(Aggregate::Empty);
    };
    let dim = first.0.len();
    if ok.iter().any(|u| u.0.len() != dim) {
        return Err(Error::Input("updates differ in parameter count".into()));
    }
    let total: f64 = ok.iter().map(|u| u.1 as f64).sum();
    let weights: Vec<f64> = if total > 0.0 {
        ok.iter().map(|u| u.1 as f64 / total).collect()
    } else {
        vec![1.0 / ok.len() as f64; ok.len()]
    };
    let base = first.0;
    let mut out = base.to_vec();
    for (u, w) in ok.iter().zip(&weights).skip(1) {
        for ((o, b), x) in out.iter_mut().zip(base).zip(u.0) {
            *o += w * (x - b);
        }
    }
    Ok(Aggregate::Params(out))
}
