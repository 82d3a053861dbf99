//! Step-size schedules and the adaptive saturation threshold.
//!
//! The estimator uses two decaying step sequences,
//!
//! ```text
//! alpha_t = a / (t+1)^tau1        (innovation weight)
//! beta_t  = b / (t+1)^tau2        (consensus weight)
//! ```
//!
//! with `0 < tau2 < tau1 < 1`, `0 < a <= 1/(1-2s)` and `0 < b <= 1/lambdaN`.
//! The saturation threshold `gamma_t = gamma1_t + gamma2_t` evolves by the
//! coupled linear recursion
//!
//! ```text
//! gamma1_{t+1} = (1 - beta_t*lambda2 + kappa1*alpha_t) * gamma1_t + kappa2*alpha_t * gamma2_t
//! gamma2_{t+1} = alpha_t * gamma1_t + (1 - alpha_t*(1-2s)) * gamma2_t
//! ```
//!
//! from `(gamma1_0, gamma2_0) = (0, eta)`, with `kappa1 = 1 + sqrt(N)` and
//! `kappa2 = 2*sqrt(N)`. Along any run that keeps the attacked fraction
//! below the resilience index `s`, `gamma1_t` bounds the consensus
//! deviation, `gamma2_t` bounds the average error, and their sum bounds
//! every agent's estimation error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("threshold component went negative at t = {t}: gamma1 = {gamma1:e}, gamma2 = {gamma2:e} (invalid configuration slipped through validation)")]
    NegativeThreshold { t: u64, gamma1: f64, gamma2: f64 },
}

/// Step-size and threshold parameters. Plain data; use [`ScheduleConfig::validate`]
/// to check the constraints before trusting a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Innovation step scale `a`.
    pub a: f64,
    /// Consensus step scale `b`.
    pub b: f64,
    /// Innovation decay exponent `tau1`.
    pub tau1: f64,
    /// Consensus decay exponent `tau2`.
    pub tau2: f64,
    /// Resilience index `s`; the run tolerates attacked fractions below it.
    pub s: f64,
    /// Bound on the parameter norm, `||theta*||_2 <= eta`.
    pub eta: f64,
    /// Number of agents `N`; fixes `kappa1` and `kappa2`.
    pub n_agents: usize,
}

/// One constraint violation found by [`ScheduleConfig::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: &'static str,
    pub value: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (got {})", self.constraint, self.value)
    }
}

impl ScheduleConfig {
    /// `kappa1 = 1 + sqrt(N)`. Derived from the agent count, never user-supplied.
    pub fn kappa1(&self) -> f64 {
        1.0 + (self.n_agents as f64).sqrt()
    }

    /// `kappa2 = 2 * sqrt(N)`.
    pub fn kappa2(&self) -> f64 {
        2.0 * (self.n_agents as f64).sqrt()
    }

    /// `alpha_t = a / (t+1)^tau1`.
    pub fn alpha(&self, t: u64) -> f64 {
        self.a / ((t + 1) as f64).powf(self.tau1)
    }

    /// `beta_t = b / (t+1)^tau2`.
    pub fn beta(&self, t: u64) -> f64 {
        self.b / ((t + 1) as f64).powf(self.tau2)
    }

    /// Checks every constraint against the spectral bounds of the
    /// communication graph. Violations are data, not failures; the harness
    /// decides whether to refuse the run.
    pub fn validate(&self, lambda_n: f64, lambda2: f64) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.s > 0.0 && self.s < 0.5) {
            v.push(Violation { constraint: "resilience index must satisfy 0 < s < 1/2", value: self.s });
        }
        if !(self.tau2 > 0.0 && self.tau2 < self.tau1 && self.tau1 < 1.0) {
            v.push(Violation {
                constraint: "decay exponents must satisfy 0 < tau2 < tau1 < 1; offending tau1",
                value: self.tau1,
            });
            v.push(Violation {
                constraint: "decay exponents must satisfy 0 < tau2 < tau1 < 1; offending tau2",
                value: self.tau2,
            });
        }
        if self.s > 0.0 && self.s < 0.5 {
            let a_bound = 1.0 / (1.0 - 2.0 * self.s);
            if !(self.a > 0.0 && self.a <= a_bound) {
                v.push(Violation { constraint: "innovation scale must satisfy 0 < a <= 1/(1-2s)", value: self.a });
            }
        } else if self.a <= 0.0 {
            v.push(Violation { constraint: "innovation scale must satisfy a > 0", value: self.a });
        }
        if !(lambda_n > 0.0 && self.b > 0.0 && self.b <= 1.0 / lambda_n) {
            v.push(Violation { constraint: "consensus scale must satisfy 0 < b <= 1/lambdaN", value: self.b });
        }
        if !(self.eta > 0.0) {
            v.push(Violation { constraint: "parameter norm bound must satisfy eta > 0", value: self.eta });
        }
        if self.n_agents == 0 {
            v.push(Violation { constraint: "agent count must be positive", value: self.n_agents as f64 });
        }
        if !(lambda2 > 0.0) {
            v.push(Violation { constraint: "graph must be connected (lambda2 > 0)", value: lambda2 });
        }
        v
    }
}

/// The coupled threshold pair `(gamma1_t, gamma2_t)` at iteration `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaState {
    pub gamma1: f64,
    pub gamma2: f64,
    pub t: u64,
}

impl GammaState {
    /// Initial condition `(0, eta)` at `t = 0`.
    pub fn initial(config: &ScheduleConfig) -> Self {
        Self { gamma1: 0.0, gamma2: config.eta, t: 0 }
    }

    /// One step of the threshold recursion.
    ///
    /// Evaluation order is load-bearing: [`crate::lemma::simulate_coupled`]
    /// must reproduce these iterates bit-for-bit under the constant mapping
    /// `(v, w) = (gamma2, gamma1)`, `(c1, delta1) = (a, tau1)`,
    /// `(c2, delta2) = (b, tau2)`, `(c3..c7) = (1-2s, 1, lambda2, kappa1, kappa2)`.
    pub fn advance(&self, config: &ScheduleConfig, lambda2: f64) -> Result<GammaState, ScheduleError> {
        let alpha = config.alpha(self.t);
        let beta = config.beta(self.t);
        let gamma1 = (1.0 - beta * lambda2 + config.kappa1() * alpha) * self.gamma1
            + (config.kappa2() * alpha) * self.gamma2;
        let gamma2 = alpha * self.gamma1 + (1.0 - (1.0 - 2.0 * config.s) * alpha) * self.gamma2;
        if gamma1 < 0.0 || gamma2 < 0.0 {
            return Err(ScheduleError::NegativeThreshold { t: self.t + 1, gamma1, gamma2 });
        }
        Ok(GammaState { gamma1, gamma2, t: self.t + 1 })
    }

    /// `gamma_t = gamma1_t + gamma2_t`.
    pub fn total(&self) -> f64 {
        self.gamma1 + self.gamma2
    }
}
