//! Stretched, clamped binary-concrete gates.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardConcreteConfig {
    pub beta: f64,
    pub stretch_low: f64,
    pub stretch_high: f64,
    /// Draw fresh noise every epoch; otherwise `u = 0.5` throughout.
    pub stochastic: bool,
    pub seed: u64,
}

impl Default for HardConcreteConfig {
    fn default() -> Self {
        Self { beta: 0.5, stretch_low: -0.1, stretch_high: 1.1, stochastic: true, seed: 0 }
    }
}

impl HardConcreteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Validation(format!("temperature must be positive, got {}", self.beta)));
        }
        if !(self.stretch_low < 0.0 && self.stretch_high > 1.0) {
            return Err(Error::Validation(format!(
                "stretch interval ({}, {}) must contain [0, 1]",
                self.stretch_low, self.stretch_high
            )));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A sampled gate and its derivative with respect to the logit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub value: f64,
    pub d_logit: f64,
}

/// `ε = clamp(σ((ln u − ln(1−u) + m)/β)·(high − low) + low, 0, 1)`.
pub fn sample_hard_concrete(m: f64, cfg: &HardConcreteConfig, u: f64) -> Result<f64> {
    Ok(gate(m, cfg, u)?.value)
}

/// [`sample_hard_concrete`] with the exact derivative; zero where the clamp is active.
pub fn gate(m: f64, cfg: &HardConcreteConfig, u: f64) -> Result<Gate> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("noise u = {u} outside (0, 1)")));
    }
    let s = sigmoid((u.ln() - (1.0 - u).ln() + m) / cfg.beta);
    let width = cfg.stretch_high - cfg.stretch_low;
    let stretched = s * width + cfg.stretch_low;
    Ok(if stretched <= 0.0 {
        Gate { value: 0.0, d_logit: 0.0 }
    } else if stretched >= 1.0 {
        Gate { value: 1.0, d_logit: 0.0 }
    } else {
        Gate { value: stretched, d_logit: width * s * (1.0 - s) / cfg.beta }
    })
}

/// Importance score `σ(m/β)`.
pub fn importance_from_mask(m: f64, beta: f64) -> f64 {
    sigmoid(m / beta)
}

/// Which parameter family a noise draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Edge = 0,
    Attribute = 1,
}

/// Noise for every parameter of one family in one epoch. Draws are a pure
/// function of `(seed, epoch, kind, index)`.
pub fn noise(cfg: &HardConcreteConfig, epoch: usize, kind: NoiseKind, count: usize) -> Vec<f64> {
    if !cfg.stochastic {
        return vec![0.5; count];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((epoch as u64) << 1) | kind as u64);
    (0..count).map(|_| rng.sample(Open01)).collect()
}
