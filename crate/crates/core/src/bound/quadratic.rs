//! Strongly convex quadratic federations with analytically known constants.
//!
//! Every node shares the curvature `A` and owns a centre `c_i`, so its train
//! and test losses are both `½(θ−c_i)ᵀA(θ−c_i)`. The meta objective of node
//! `i` is then `½(θ−c_i)ᵀ S (θ−c_i)` with `S = (I−αA) A (I−αA)`, and the
//! global objective (the sum over nodes) is minimised at the mean centre.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::SmoothnessConstants;
use crate::error::{Error, Result};
use crate::fml::{FedMode, Federation, FmlConfig, LocalTask, Split};
use crate::rng;

#[derive(Debug, Clone)]
pub struct QuadraticNode {
    id: u64,
    a: DMatrix<f64>,
    centre: DVector<f64>,
    size: usize,
}

impl LocalTask for QuadraticNode {
    fn id(&self) -> u64 {
        self.id
    }

    fn data_size(&self) -> usize {
        self.size
    }

    fn num_params(&self) -> usize {
        self.centre.len()
    }

    fn loss_and_grad(&self, theta: &[f64], _split: Split) -> Result<(f64, Vec<f64>)> {
        if theta.len() != self.centre.len() {
            return Err(Error::Input("parameter length mismatch".into()));
        }
        let e = DVector::from_column_slice(theta) - &self.centre;
        let g = &self.a * &e;
        Ok((0.5 * e.dot(&g), g.as_slice().to_vec()))
    }

    fn hvp(&self, _theta: &[f64], _split: Split, v: &[f64]) -> Result<Vec<f64>> {
        Ok((&self.a * DVector::from_column_slice(v)).as_slice().to_vec())
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticFederation {
    a: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    centres: Vec<DVector<f64>>,
    alpha: f64,
}

impl QuadraticFederation {
    /// `A = Q·diag(eigenvalues)·Qᵀ` with `Q` orthogonal.
    pub fn new(q: &DMatrix<f64>, eigenvalues: &[f64], centres: Vec<DVector<f64>>, alpha: f64) -> Result<Self> {
        let d = eigenvalues.len();
        if q.shape() != (d, d) || centres.is_empty() || centres.iter().any(|c| c.len() != d) {
            return Err(Error::Config("inconsistent quadratic federation dimensions".into()));
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("curvature must be positive definite".into()));
        }
        if (q.transpose() * q - DMatrix::identity(d, d)).amax() > 1e-9 {
            return Err(Error::Config("Q is not orthogonal".into()));
        }
        let a = q * DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues)) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        Ok(Self { a, eigenvalues: eigenvalues.to_vec(), centres, alpha })
    }

    /// Random instance: eigenvalues spread over `[mu, h]` with both ends
    /// attained, Haar-like rotation, centres drawn as `spread·N(0, I)`.
    pub fn random(dim: usize, k: usize, mu: f64, h: f64, spread: f64, alpha: f64, seed: u64) -> Result<Self> {
        if dim < 2 || k == 0 || !(mu > 0.0 && mu <= h) {
            return Err(Error::Config("need dim ≥ 2, k ≥ 1 and 0 < mu ≤ h".into()));
        }
        let mut r = rng::stream(seed, &[0x5155_4144]);
        let mut eig: Vec<f64> = (0..dim).map(|_| r.random_range(mu..=h)).collect();
        eig[0] = mu;
        eig[dim - 1] = h;
        let g = DMatrix::from_fn(dim, dim, |_, _| r.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let centres =
            (0..k).map(|_| DVector::from_fn(dim, |_, _| spread * r.sample::<f64, _>(StandardNormal))).collect();
        Self::new(&q, &eig, centres, alpha)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn nodes(&self) -> Vec<QuadraticNode> {
        self.centres
            .iter()
            .enumerate()
            .map(|(i, c)| QuadraticNode { id: i as u64, a: self.a.clone(), centre: c.clone(), size: 1 })
            .collect()
    }

    fn meta_curvature(&self) -> DMatrix<f64> {
        let m = DMatrix::identity(self.dim(), self.dim()) - &self.a * self.alpha;
        &m * &self.a * &m
    }

    pub fn optimum(&self) -> Vec<f64> {
        let mut mean = DVector::zeros(self.dim());
        for c in &self.centres {
            mean += c;
        }
        (mean / self.centres.len() as f64).as_slice().to_vec()
    }

    /// Sum over nodes of `L_i(θ − α∇L_i(θ))`.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        let s = self.meta_curvature();
        let th = DVector::from_column_slice(theta);
        self.centres
            .iter()
            .map(|c| {
                let e = &th - c;
                0.5 * e.dot(&(&s * &e))
            })
            .sum()
    }

    pub fn gap(&self, theta: &[f64]) -> f64 {
        self.objective(theta) - self.objective(&self.optimum())
    }

    /// Constants for the bound: ρ = σ = 0 because the curvature is shared;
    /// `B` only enters through ρB and is set to 1.
    pub fn constants(&self, beta: f64, t0: usize, theta0: &[f64], epsilon: f64) -> SmoothnessConstants {
        let mean = DVector::from_column_slice(&self.optimum());
        let delta = self.centres.iter().map(|c| (&self.a * (c - &mean)).norm()).fold(0.0, f64::max);
        let mu = self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let h = self.eigenvalues.iter().copied().fold(0.0, f64::max);
        SmoothnessConstants {
            mu,
            h,
            rho: 0.0,
            b: 1.0,
            delta,
            sigma: 0.0,
            alpha: self.alpha,
            beta,
            c: 0.0,
            tau: 0.0,
            n_nodes: self.centres.len(),
            t0,
            n: self.gap(theta0),
            epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRounds {
    /// First round whose gap is at most ε (or the cap).
    pub rounds: usize,
    pub capped: bool,
    /// Gap before round 1, after round 1, ...
    pub gaps: Vec<f64>,
}

/// Runs exact-mode federated meta-learning on `fed` until the optimality gap
/// drops to `epsilon` or `cap` rounds have passed.
pub fn empirical_rounds_to_gap(
    fed: &QuadraticFederation,
    cfg: &FmlConfig,
    theta0: &[f64],
    epsilon: f64,
    cap: usize,
) -> Result<EmpiricalRounds> {
    let nodes = fed.nodes();
    let cfg = FmlConfig { k: nodes.len(), alpha: fed.alpha, ..*cfg };
    let mut run = Federation::new(cfg, &nodes, theta0.to_vec())?;
    let mut gaps = vec![fed.gap(theta0)];
    while gaps[gaps.len() - 1] > epsilon {
        if run.round() >= cap {
            return Ok(EmpiricalRounds { rounds: cap, capped: true, gaps });
        }
        run.step(FedMode::Fml)?;
        gaps.push(fed.gap(run.theta()));
    }
    Ok(EmpiricalRounds { rounds: gaps.len() - 1, capped: false, gaps })
}
