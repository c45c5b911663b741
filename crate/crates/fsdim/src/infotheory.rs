//! Entropy, Kullback–Leibler divergence, their conditional forms, and the
//! Pinsker bound. Everything is measured in bits (log base 2); the Pinsker
//! constant carries the matching `ln 2` correction. The conventions
//! `0·log 0 = 0` and `0·log(0/0) = 0` apply throughout, and an unabsorbed
//! support mismatch makes a divergence `+∞` — a value, never an error.
//!
//! The load-bearing identity of the whole crate lives here: against a fair
//! reference (conditional probability 1/2 on both out-edges of every state),
//! the conditional KL divergence of a joint equals `1 − H(E | Q)` in bits.

use std::f64::consts::LN_2;

use crate::empirical::JointDistribution;
use crate::{Error, Result};

/// A validated probability distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::BadDistribution {
                reason: "negative or non-finite entry".into(),
            });
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadDistribution {
                reason: format!("mass sums to {total}"),
            });
        }
        Ok(Distribution(mass))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }

    pub fn kl(&self, other: &Distribution) -> f64 {
        kl(&self.0, &other.0)
    }

    pub fn pinsker_gap(&self, other: &Distribution) -> (f64, f64) {
        pinsker_gap(&self.0, &other.0)
    }
}

/// Shannon entropy `−Σ p log₂ p` in bits.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.log2())
        .sum::<f64>()
}

/// `Σ p log₂(p/q)` in bits; `+∞` when p puts mass outside q's support.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for (&pv, &qv) in p.iter().zip(q) {
        if pv > 0.0 {
            if qv <= 0.0 {
                return f64::INFINITY;
            }
            total += pv * (pv / qv).log2();
        }
    }
    total
}

/// `H(E | Q) = Σ_q Q(q) · H(edge | q)` in bits; zero-mass states are skipped.
pub fn conditional_entropy(joint: &JointDistribution) -> f64 {
    let mut total = 0.0;
    for q in 0..joint.state_count() {
        let weight = joint.mass(q, 0) + joint.mass(q, 1);
        if weight > 0.0 {
            let cond = joint.conditional(q).expect("positive marginal");
            total += weight * entropy(&cond);
        }
    }
    total
}

/// `Σ_q Q_μ(q) · D_KL(μ(·|q) ‖ ν(·|q))` in bits. States with zero μ-marginal
/// are skipped; a μ-visited state that ν never visits contributes `+∞`.
pub fn conditional_kl(mu: &JointDistribution, nu: &JointDistribution) -> f64 {
    debug_assert_eq!(mu.state_count(), nu.state_count());
    let mut total = 0.0;
    for q in 0..mu.state_count() {
        let weight = mu.mass(q, 0) + mu.mass(q, 1);
        if weight > 0.0 {
            let mu_cond = mu.conditional(q).expect("positive marginal");
            let Some(nu_cond) = nu.conditional(q) else {
                return f64::INFINITY;
            };
            let term = kl(&mu_cond, &nu_cond);
            if term.is_infinite() {
                return f64::INFINITY;
            }
            total += weight * term;
        }
    }
    total
}

/// Conditional KL against the fair reference, whose conditional is 1/2 on
/// both out-edges of every state. Equals `1 − conditional_entropy(μ)`.
pub fn conditional_kl_to_fair(mu: &JointDistribution) -> f64 {
    let mut total = 0.0;
    for q in 0..mu.state_count() {
        let weight = mu.mass(q, 0) + mu.mass(q, 1);
        if weight > 0.0 {
            let cond = mu.conditional(q).expect("positive marginal");
            total += weight * kl(&cond, &[0.5, 0.5]);
        }
    }
    total
}

/// Both sides of Pinsker's inequality: `(‖p − q‖₁, √(2 ln 2 · D_KL(p‖q)))`.
pub fn pinsker_gap(p: &[f64], q: &[f64]) -> (f64, f64) {
    let l1 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    let bound = (2.0 * LN_2 * kl(p, q)).sqrt();
    (l1, bound)
}
