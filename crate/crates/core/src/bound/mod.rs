//! Closed-form convergence constants and the round-complexity bound for
//! federated meta-learning, with a quadratic harness to check them.

mod quadratic;

pub use quadratic::{empirical_rounds_to_gap, EmpiricalRounds, QuadraticFederation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    pub mu: f64,
    pub h: f64,
    pub rho: f64,
    pub b: f64,
    pub delta: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Auxiliary constants of the dissimilarity term; 0 collapses α′ to βδ.
    pub c: f64,
    pub tau: f64,
    pub n_nodes: usize,
    pub t0: usize,
    /// Bound on the initial optimality gap.
    pub n: f64,
    pub epsilon: f64,
}

impl SmoothnessConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [("mu", self.mu), ("H", self.h), ("B", self.b), ("n", self.n), ("epsilon", self.epsilon)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let nonneg = [
            ("rho", self.rho),
            ("delta", self.delta),
            ("sigma", self.sigma),
            ("C", self.c),
            ("tau", self.tau),
            ("alpha", self.alpha),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative and finite, got {v}")));
            }
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.mu > self.h {
            return Err(Error::Config(format!("mu ({}) exceeds H ({})", self.mu, self.h)));
        }
        if self.n_nodes == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum XiVariant {
    /// `1 − 2H″β(1 + μ″β/2)` as printed in the theorem statement.
    Theorem,
    /// `1 − 2H″β(1 + H″β/2)` as derived in the proof.
    #[default]
    Proof,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub mu_p: f64,
    pub h_p: f64,
    pub mu_pp: f64,
    pub h_pp: f64,
    pub alpha_p: f64,
    pub xi: f64,
    pub beta: f64,
    pub mu_p_positive: bool,
    pub xi_in_unit: bool,
}

impl DerivedConstants {
    pub fn is_valid(&self) -> bool {
        self.mu_p_positive && self.xi_in_unit
    }

    /// Names of the validity conditions that fail.
    pub fn failed_flags(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.mu_p_positive {
            out.push("mu_p<=0");
        }
        if !self.xi_in_unit {
            out.push("xi_outside_unit_interval");
        }
        out
    }
}

pub fn derive_constants(c: &SmoothnessConstants, variant: XiVariant) -> DerivedConstants {
    let a = c.alpha;
    let mu_p = c.mu * (1.0 - a * c.h).powi(2) - a * c.rho * c.b;
    let h_p = c.h * (1.0 - a * c.mu).powi(2) + a * c.rho * c.b;
    let n = c.n_nodes as f64;
    let (mu_pp, h_pp) = (n * mu_p, n * h_p);
    let alpha_p = c.beta * (c.delta + a * c.c * (c.h * c.delta + c.b * c.sigma + c.tau));
    let xi = match variant {
        XiVariant::Theorem => 1.0 - 2.0 * h_pp * c.beta * (1.0 + mu_pp * c.beta / 2.0),
        XiVariant::Proof => 1.0 - 2.0 * h_pp * c.beta * (1.0 + h_pp * c.beta / 2.0),
    };
    DerivedConstants {
        mu_p,
        h_p,
        mu_pp,
        h_pp,
        alpha_p,
        xi,
        beta: c.beta,
        mu_p_positive: mu_p > 0.0,
        xi_in_unit: xi > 0.0 && xi < 1.0,
    }
}

const SUM_LIMIT: u32 = 1 << 16;

/// `m(T) = α′T − α′/(βH′)·[1 − (1 − βH′)^T]`.
pub fn m_of_t(d: &DerivedConstants, t: u32) -> Result<f64> {
    let bh = d.beta * d.h_p;
    if !(bh > 0.0 && bh < 1.0) {
        return Err(Error::Validity(format!("beta*H' = {bh} lies outside (0, 1)")));
    }
    let l = (-bh).ln_1p();
    if t <= SUM_LIMIT {
        // Summing the non-negative terms avoids cancellation at small t.
        let s: f64 = (1..t).map(|j| -(j as f64 * l).exp_m1()).sum();
        return Ok(d.alpha_p * s);
    }
    let geom = -(t as f64 * l).exp_m1();
    Ok(d.alpha_p * t as f64 - d.alpha_p / bh * geom)
}

fn check(d: &DerivedConstants) -> Result<()> {
    if !d.mu_p_positive {
        return Err(Error::Validity(format!("mu' = {} is not positive", d.mu_p)));
    }
    if !d.xi_in_unit {
        return Err(Error::Validity(format!("xi = {} lies outside (0, 1)", d.xi)));
    }
    Ok(())
}

/// `K·m(T0)` with `K = μ″/(1 − ξ^T0)`.
pub fn heterogeneity_term(c: &SmoothnessConstants, variant: XiVariant) -> Result<f64> {
    c.validate()?;
    let d = derive_constants(c, variant);
    check(&d)?;
    let t0 = u32::try_from(c.t0).map_err(|_| Error::Config("T0 too large".into()))?;
    let m = m_of_t(&d, t0)?;
    Ok(d.mu_pp * m / -(t0 as f64 * d.xi.ln()).exp_m1())
}

/// Sufficient number of rounds `log((ε + K·m(T0))/n) / log ξ`; the caller ceils.
pub fn tz_bound(c: &SmoothnessConstants, variant: XiVariant) -> Result<f64> {
    let km = heterogeneity_term(c, variant)?;
    let arg = (c.epsilon + km) / c.n;
    if !(arg > 0.0) {
        return Err(Error::Validity(format!("log argument (epsilon + K*m)/n = {arg} is not positive")));
    }
    let xi = derive_constants(c, variant).xi;
    Ok(arg.ln() / xi.ln())
}

/// Gap bound after `t` rounds as carried through the proof: `ξ^t·n − K·m(T0)`.
pub fn gap_bound(c: &SmoothnessConstants, variant: XiVariant, t: u32) -> Result<f64> {
    let km = heterogeneity_term(c, variant)?;
    let xi = derive_constants(c, variant).xi;
    Ok(xi.powi(t as i32) * c.n - km)
}
