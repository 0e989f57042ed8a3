//! Weight processes `Φ(η) = Θ(η) S` and `Φ̄ = Φ + sup |ΔΦ|` sampled at a
//! set of times along a path.

use serde::{Deserialize, Serialize};

/// Weight path of one simulated price path, sampled at the metric times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPath {
    pub eta: f64,
    /// `S_a`.
    pub price: Vec<f64>,
    /// `Θ(η)_a = sup_{u ≤ a} S_u^{η-1}`.
    pub theta_weight: Vec<f64>,
    /// `Φ(η)_a = Θ(η)_a S_a`.
    pub phi: Vec<f64>,
    /// `Φ̄_a = Φ_a + sup_{u ≤ a} |ΔΦ_u|`.
    pub phi_bar: Vec<f64>,
    /// `sup_{u ∈ [a, T]} Φ_u`.
    pub phi_sup_after: Vec<f64>,
}

impl WeightPath {
    /// Path with `Φ ≡ Φ̄ ≡ c` (for estimator checks).
    pub fn constant(eta: f64, c: f64, len: usize) -> Self {
        WeightPath {
            eta,
            price: vec![1.0; len],
            theta_weight: vec![c; len],
            phi: vec![c; len],
            phi_bar: vec![c; len],
            phi_sup_after: vec![c; len],
        }
    }

    /// Builds a weight path from `Φ` values at the sample times, the
    /// supremum of `Φ` over each gap `(a_{j-1}, a_j]` (with the gap after the
    /// last time in `tail_sup`) and the running jump supremum.
    pub fn from_samples(
        eta: f64,
        price: Vec<f64>,
        theta_weight: Vec<f64>,
        jump_sup: Vec<f64>,
        gap_sup: Vec<f64>,
        tail_sup: f64,
    ) -> Self {
        let phi: Vec<f64> = price.iter().zip(&theta_weight).map(|(s, t)| s * t).collect();
        let phi_bar = phi.iter().zip(&jump_sup).map(|(p, j)| p + j).collect();
        let mut phi_sup_after = vec![0.0; phi.len()];
        let mut m = tail_sup;
        for j in (0..phi.len()).rev() {
            m = m.max(phi[j]);
            phi_sup_after[j] = m;
            if j > 0 {
                m = m.max(gap_sup[j]);
            }
        }
        WeightPath {
            eta,
            price,
            theta_weight,
            phi,
            phi_bar,
            phi_sup_after,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Multiplies `Φ`, `Φ̄` and the running suprema by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let m = |v: &Vec<f64>| v.iter().map(|x| c * x).collect();
        WeightPath {
            eta: self.eta,
            price: self.price.clone(),
            theta_weight: m(&self.theta_weight),
            phi: m(&self.phi),
            phi_bar: m(&self.phi_bar),
            phi_sup_after: m(&self.phi_sup_after),
        }
    }
}
