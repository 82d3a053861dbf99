//! Sensor attack model.
//!
//! At each iteration an adversary replaces the measurements of at most `S`
//! agents. The attacked set is drawn uniformly without replacement, either
//! once (`Fixed`) or independently per iteration (`TimeVarying`), and the
//! corruption strategy is a pure function of `(theta*, agent, t, seed)`.
//! Strategies may read the true parameter; the modeled adversary is
//! omniscient, which is the worst case the estimator must survive.
//!
//! The `attacked` mask records which agents the adversary targeted. A
//! strategy can still leave a targeted measurement unchanged (negating a
//! zero parameter, adding a zero offset), in which case the effective
//! disturbance is zero while the mask bit stays set; consumers of the mask
//! get intent, not effect.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{keyed_rng, sample_in_ball};

const DOMAIN_SET: u64 = 0x5345;
const DOMAIN_VALUE: u64 = 0x56414c;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("attack size {size} must be strictly less than the agent count {n_agents}")]
    TooManyTargets { size: usize, n_agents: usize },
    #[error("constant offset has dimension {offset_dim}, parameter has dimension {param_dim}")]
    OffsetDimensionMismatch { offset_dim: usize, param_dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMode {
    /// One target set sampled at t = 0 and reused forever.
    Fixed,
    /// Targets resampled independently at every iteration.
    TimeVarying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "strategy")]
pub enum AttackStrategy {
    /// No corruption; targeted measurements pass through unchanged.
    None,
    /// Replace the measurement with the negated parameter.
    Negation,
    /// Add a fixed offset vector.
    ConstantOffset { offset: Vec<f64> },
    /// Add a seeded random disturbance with L2 norm at most `magnitude`.
    RandomBounded { magnitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPlan {
    /// Max attacked agents per iteration, `0 <= S < N`.
    pub size: usize,
    pub mode: AttackMode,
    pub strategy: AttackStrategy,
    pub seed: u64,
}

/// One iteration's worth of measurements: row `n` is agent `n`'s view of
/// the parameter, `attacked[n]` marks adversary targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    values: Vec<f64>,
    dim: usize,
    attacked: Vec<bool>,
}

impl Measurement {
    pub fn n_agents(&self) -> usize {
        self.attacked.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn is_attacked(&self, n: usize) -> bool {
        self.attacked[n]
    }

    pub fn attacked_count(&self) -> usize {
        self.attacked.iter().filter(|&&a| a).count()
    }
}

impl AttackPlan {
    /// The target set at iteration `t`: `size` agents drawn uniformly
    /// without replacement via a seeded Fisher-Yates prefix. Returned
    /// sorted ascending.
    pub fn attack_set(&self, t: u64, n_agents: usize) -> Result<Vec<usize>, AttackError> {
        if self.size >= n_agents {
            return Err(AttackError::TooManyTargets { size: self.size, n_agents });
        }
        if self.size == 0 {
            return Ok(Vec::new());
        }
        let draw_t = match self.mode {
            AttackMode::Fixed => 0,
            AttackMode::TimeVarying => t,
        };
        let mut rng = keyed_rng(self.seed, &[DOMAIN_SET, draw_t]);
        let mut indices: Vec<usize> = (0..n_agents).collect();
        for i in 0..self.size {
            let j = rng.random_range(i..n_agents);
            indices.swap(i, j);
        }
        let mut set = indices[..self.size].to_vec();
        set.sort_unstable();
        Ok(set)
    }

    /// Measurements for all agents at iteration `t`. Unattacked rows equal
    /// `theta` exactly; attacked rows are rewritten per the strategy.
    /// `theta` itself is never modified.
    pub fn measure(&self, theta: &[f64], t: u64, n_agents: usize) -> Result<Measurement, AttackError> {
        if let AttackStrategy::ConstantOffset { offset } = &self.strategy {
            if offset.len() != theta.len() {
                return Err(AttackError::OffsetDimensionMismatch {
                    offset_dim: offset.len(),
                    param_dim: theta.len(),
                });
            }
        }
        let dim = theta.len();
        let mut values = Vec::with_capacity(n_agents * dim);
        for _ in 0..n_agents {
            values.extend_from_slice(theta);
        }
        let mut attacked = vec![false; n_agents];
        for n in self.attack_set(t, n_agents)? {
            attacked[n] = true;
            let row = &mut values[n * dim..(n + 1) * dim];
            match &self.strategy {
                AttackStrategy::None => {}
                AttackStrategy::Negation => {
                    for (y, th) in row.iter_mut().zip(theta) {
                        *y = -th;
                    }
                }
                AttackStrategy::ConstantOffset { offset } => {
                    for (y, c) in row.iter_mut().zip(offset) {
                        *y += c;
                    }
                }
                AttackStrategy::RandomBounded { magnitude } => {
                    let mut rng = keyed_rng(self.seed, &[DOMAIN_VALUE, t, n as u64]);
                    let u = sample_in_ball(&mut rng, dim, *magnitude);
                    for (y, d) in row.iter_mut().zip(&u) {
                        *y += d;
                    }
                }
            }
        }
        Ok(Measurement { values, dim, attacked })
    }
}
