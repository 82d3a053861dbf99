//! The saturated-innovation estimator core.
//!
//! Every agent keeps a local estimate `x_n(t)` of the parameter and updates
//! it synchronously:
//!
//! ```text
//! x_n(t+1) = x_n(t) - beta_t * sum_{l in Omega_n} (x_n(t) - x_l(t))
//!                   + alpha_t * K_n(t) * (y_n(t) - x_n(t))
//! ```
//!
//! The scalar gain `K_n(t)` rescales the innovation so its L2 norm never
//! exceeds the threshold `gamma_t`:
//!
//! ```text
//! K_n(t) = 1                                if ||y_n - x_n||_2 <= gamma_t
//!          gamma_t / ||y_n - x_n||_2        otherwise
//! ```
//!
//! Saturation is what buys resilience: an attacked measurement can pull its
//! agent by at most `alpha_t * gamma_t` per step, no matter how wild the
//! corrupted value is, while honest innovations pass through unscaled once
//! the estimates are within `gamma_t` of the parameter.
//!
//! [`diagnostics`] exposes the two quantities the convergence argument
//! tracks: the consensus deviation `V_t` (stacked distance of all estimates
//! from the network average) and the average error `W_t` (distance of the
//! average from the parameter). On a valid run `V_t <= gamma1_t`,
//! `W_t <= gamma2_t`, and every agent's error is at most
//! `gamma_t = gamma1_t + gamma2_t`.

use thiserror::Error;

use crate::attack::Measurement;
use crate::graph::Graph;
use crate::schedule::GammaState;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("dimension mismatch: state is {state_agents}x{state_dim}, measurement is {meas_agents}x{meas_dim}, graph has {graph_agents} vertices")]
    DimensionMismatch {
        state_agents: usize,
        state_dim: usize,
        meas_agents: usize,
        meas_dim: usize,
        graph_agents: usize,
    },
}

/// Stacked local estimates, dense row-major `N x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    x: Vec<f64>,
    n_agents: usize,
    dim: usize,
    t: u64,
}

/// Per-step diagnostic quantities, evaluated against the current thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Consensus deviation `V_t = ||x_t - 1 (x) mean||_2` (stacked norm).
    pub v: f64,
    /// Average error `W_t = ||mean - theta*||_2`.
    pub w: f64,
    /// `max_n ||x_n - theta*||_2`.
    pub max_err: f64,
    /// Mean over agents of `||x_n - theta*||_2`.
    pub mean_err: f64,
    /// Gain each agent would apply to an uncorrupted measurement of the
    /// parameter. For unattacked agents this equals the gain actually used.
    pub gains: Vec<f64>,
    /// `V_t <= gamma1_t`.
    pub v_within_gamma1: bool,
    /// `W_t <= gamma2_t`.
    pub w_within_gamma2: bool,
    /// `max_err <= gamma_t`.
    pub max_err_within_gamma: bool,
}

impl EstimatorState {
    /// All agents start from the zero estimate.
    pub fn zeros(n_agents: usize, dim: usize) -> Self {
        Self { x: vec![0.0; n_agents * dim], n_agents, dim, t: 0 }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.x[n * self.dim..(n + 1) * self.dim]
    }
}

/// Saturation gain for one innovation. `gamma = 0` with a nonzero
/// innovation yields 0; a zero innovation always yields 1 (the threshold
/// branch applies, no division happens).
pub fn gain(y: &[f64], x: &[f64], gamma: f64) -> f64 {
    debug_assert_eq!(y.len(), x.len());
    let norm = y
        .iter()
        .zip(x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if norm <= gamma {
        1.0
    } else {
        gamma / norm
    }
}

/// One agent's next estimate, reading only the immutable prior state.
fn updated_row(
    state: &EstimatorState,
    g: &Graph,
    meas: &Measurement,
    n: usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
    out: &mut [f64],
) {
    let dim = state.dim;
    let x_n = state.row(n);
    let y_n = meas.row(n);
    let k = gain(y_n, x_n, gamma);
    let degree = g.degree(n) as f64;
    for j in 0..dim {
        let mut neighbor_sum = 0.0;
        for &l in g.neighbors(n) {
            neighbor_sum += state.row(l)[j];
        }
        let consensus = degree * x_n[j] - neighbor_sum;
        out[j] = x_n[j] - beta * consensus + alpha * (k * (y_n[j] - x_n[j]));
    }
}

/// One synchronous update of every agent. All reads come from the input
/// state, so the result does not depend on evaluation order; the input is
/// left untouched.
pub fn siu_step(
    state: &EstimatorState,
    g: &Graph,
    meas: &Measurement,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<EstimatorState, EstimatorError> {
    if meas.n_agents() != state.n_agents
        || meas.dim() != state.dim
        || g.vertex_count() != state.n_agents
    {
        return Err(EstimatorError::DimensionMismatch {
            state_agents: state.n_agents,
            state_dim: state.dim,
            meas_agents: meas.n_agents(),
            meas_dim: meas.dim(),
            graph_agents: g.vertex_count(),
        });
    }
    let dim = state.dim;
    let mut next = vec![0.0; state.x.len()];
    for (n, out) in next.chunks_mut(dim).enumerate() {
        updated_row(state, g, meas, n, alpha, beta, gamma, out);
    }
    Ok(EstimatorState { x: next, n_agents: state.n_agents, dim, t: state.t + 1 })
}

/// Consensus deviation, average error, per-agent errors and clean gains,
/// with the threshold comparisons for the current `GammaState`.
pub fn diagnostics(state: &EstimatorState, theta: &[f64], gamma: &GammaState) -> StepDiagnostics {
    debug_assert_eq!(theta.len(), state.dim);
    debug_assert_eq!(state.t, gamma.t, "diagnostics must compare same-iteration quantities");
    let n = state.n_agents;
    let dim = state.dim;

    let mut mean = vec![0.0; dim];
    for agent in 0..n {
        for (m, x) in mean.iter_mut().zip(state.row(agent)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut v_sq = 0.0;
    let mut max_err = 0.0f64;
    let mut err_sum = 0.0;
    let gamma_total = gamma.total();
    let mut gains = Vec::with_capacity(n);
    for agent in 0..n {
        let row = state.row(agent);
        let mut dev_sq = 0.0;
        let mut err_sq = 0.0;
        for j in 0..dim {
            let dev = row[j] - mean[j];
            dev_sq += dev * dev;
            let err = row[j] - theta[j];
            err_sq += err * err;
        }
        v_sq += dev_sq;
        let err = err_sq.sqrt();
        max_err = max_err.max(err);
        err_sum += err;
        gains.push(gain(theta, row, gamma_total));
    }
    let v = v_sq.sqrt();
    let w = mean
        .iter()
        .zip(theta)
        .map(|(m, th)| (m - th) * (m - th))
        .sum::<f64>()
        .sqrt();

    StepDiagnostics {
        v,
        w,
        max_err,
        mean_err: err_sum / n as f64,
        gains,
        v_within_gamma1: v <= gamma.gamma1,
        w_within_gamma2: w <= gamma.gamma2,
        max_err_within_gamma: max_err <= gamma_total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{AttackMode, AttackPlan, AttackStrategy};
    use crate::schedule::ScheduleConfig;

    fn no_attack(theta: &[f64], n: usize) -> Measurement {
        AttackPlan { size: 0, mode: AttackMode::Fixed, strategy: AttackStrategy::None, seed: 0 }
            .measure(theta, 0, n)
            .unwrap()
    }

    #[test]
    fn gain_matches_hand_values() {
        // ||y - x|| = 3 against gamma = 5: unsaturated.
        assert_eq!(gain(&[3.0, 0.0], &[0.0, 0.0], 5.0), 1.0);
        // ||y - x|| = 10 against gamma = 4: scaled to 0.4.
        assert_eq!(gain(&[10.0], &[0.0], 4.0), 0.4);
        // Zero innovation: threshold branch, no division.
        assert_eq!(gain(&[2.0, 2.0], &[2.0, 2.0], 0.0), 1.0);
        assert_eq!(gain(&[2.0, 2.0], &[2.0, 2.0], 7.0), 1.0);
        // gamma = 0 with nonzero innovation.
        assert_eq!(gain(&[1.0], &[0.0], 0.0), 0.0);
    }

    #[test]
    fn scaled_innovation_never_exceeds_gamma() {
        let mut rng = crate::rng::keyed_rng(3, &[99]);
        use rand::Rng;
        for _ in 0..500 {
            let dim = rng.random_range(1..5);
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect();
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect();
            let gamma: f64 = rng.random_range(0.0..10.0);
            let k = gain(&y, &x, gamma);
            assert!(k > 0.0 && k <= 1.0);
            let scaled: f64 = y
                .iter()
                .zip(&x)
                .map(|(a, b)| (k * (a - b)).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(scaled <= gamma * (1.0 + 1e-12), "scaled {scaled} > gamma {gamma}");
        }
    }

    #[test]
    fn first_step_from_zero_moves_every_agent_to_alpha_theta() {
        let theta = [2.0, -1.0, 0.5];
        let g = Graph::random_geometric(6, 0.8, 4).unwrap();
        let state = EstimatorState::zeros(6, 3);
        let meas = no_attack(&theta, 6);
        // gamma >= ||theta|| so K = 1; consensus term vanishes (all equal).
        let alpha = 0.3;
        let next = siu_step(&state, &g, &meas, alpha, 0.1, 10.0).unwrap();
        for n in 0..6 {
            for j in 0..3 {
                assert_eq!(next.row(n)[j], alpha * theta[j]);
            }
        }
        assert_eq!(next.t(), 1);
        assert_eq!(state.t(), 0, "input state is unmodified");
    }

    #[test]
    fn single_agent_converges_monotonically() {
        let theta = [4.0, -3.0];
        let g = Graph::new(1, []).unwrap();
        let cfg = ScheduleConfig { a: 0.5, b: 0.1, tau1: 0.3, tau2: 0.1, s: 0.1, eta: 5.0, n_agents: 1 };
        let mut state = EstimatorState::zeros(1, 2);
        let meas = no_attack(&theta, 1);
        let mut prev_err = f64::INFINITY;
        for t in 0..1000 {
            let err: f64 = state
                .row(0)
                .iter()
                .zip(&theta)
                .map(|(x, th)| (x - th) * (x - th))
                .sum::<f64>()
                .sqrt();
            assert!(err <= prev_err, "error must not increase: {err} > {prev_err} at t = {t}");
            prev_err = err;
            state = siu_step(&state, &g, &meas, cfg.alpha(t), cfg.beta(t), cfg.eta).unwrap();
        }
        assert!(prev_err < 1e-3, "did not converge: residual error {prev_err}");
    }

    #[test]
    fn zero_steps_change_nothing_but_the_clock() {
        let theta = [1.0, 1.0];
        let g = Graph::random_geometric(5, 0.9, 1).unwrap();
        let mut state = EstimatorState::zeros(5, 2);
        let meas = no_attack(&theta, 5);
        state = siu_step(&state, &g, &meas, 0.5, 0.05, 10.0).unwrap();
        let frozen = siu_step(&state, &g, &meas, 0.0, 0.0, 10.0).unwrap();
        assert_eq!(frozen.x, state.x);
        assert_eq!(frozen.t(), state.t() + 1);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = Graph::random_geometric(4, 0.9, 1).unwrap();
        let state = EstimatorState::zeros(4, 3);
        let meas = no_attack(&[1.0, 2.0], 4); // dim 2, state dim 3
        assert!(matches!(
            siu_step(&state, &g, &meas, 0.1, 0.1, 1.0),
            Err(EstimatorError::DimensionMismatch { .. })
        ));
        let meas5 = no_attack(&[1.0, 2.0, 3.0], 5);
        assert!(siu_step(&state, &g, &meas5, 0.1, 0.1, 1.0).is_err());
    }

    #[test]
    fn result_is_bit_identical_under_shuffled_evaluation_order() {
        let theta = [1.5, -2.5, 0.25];
        let g = Graph::random_geometric(12, 0.5, 8).unwrap();
        let plan = AttackPlan {
            size: 3,
            mode: AttackMode::TimeVarying,
            strategy: AttackStrategy::Negation,
            seed: 5,
        };
        let mut state = EstimatorState::zeros(12, 3);
        for t in 0..5 {
            let meas = plan.measure(&theta, t, 12).unwrap();
            let reference = siu_step(&state, &g, &meas, 0.2, 0.05, 3.0).unwrap();
            // Recompute rows in reverse order into a fresh buffer.
            let mut scrambled = vec![0.0; 12 * 3];
            for n in (0..12).rev() {
                let mut out = vec![0.0; 3];
                updated_row(&state, &g, &meas, n, 0.2, 0.05, 3.0, &mut out);
                scrambled[n * 3..(n + 1) * 3].copy_from_slice(&out);
            }
            assert_eq!(scrambled, reference.x);
            state = reference;
        }
    }

    #[test]
    fn diagnostics_at_the_parameter_are_all_zero() {
        let cfg = ScheduleConfig { a: 0.1, b: 0.1, tau1: 0.3, tau2: 0.1, s: 0.1, eta: 5.0, n_agents: 3 };
        let theta = [1.0, 2.0];
        let mut state = EstimatorState::zeros(3, 2);
        state.x = vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        let d = diagnostics(&state, &theta, &GammaState::initial(&cfg));
        assert_eq!((d.v, d.w, d.max_err, d.mean_err), (0.0, 0.0, 0.0, 0.0));
        assert!(d.v_within_gamma1 && d.w_within_gamma2 && d.max_err_within_gamma);
        assert!(d.gains.iter().all(|&k| k == 1.0));
    }

    #[test]
    fn diagnostics_from_zero_state_match_the_base_case() {
        // All estimates zero: V = 0 and W = ||theta|| <= eta = gamma2_0.
        let cfg = ScheduleConfig { a: 0.1, b: 0.1, tau1: 0.3, tau2: 0.1, s: 0.1, eta: 5.0, n_agents: 4 };
        let theta = [3.0, 4.0]; // norm 5 = eta exactly
        let state = EstimatorState::zeros(4, 2);
        let d = diagnostics(&state, &theta, &GammaState::initial(&cfg));
        assert_eq!(d.v, 0.0);
        assert_eq!(d.w, 5.0);
        assert_eq!(d.max_err, 5.0);
        assert!(d.v_within_gamma1 && d.w_within_gamma2 && d.max_err_within_gamma);
    }

    #[test]
    fn diagnostics_of_opposed_pair_match_hand_norms() {
        let cfg = ScheduleConfig { a: 0.1, b: 0.1, tau1: 0.3, tau2: 0.1, s: 0.1, eta: 5.0, n_agents: 2 };
        let u = [1.0, 2.0, 2.0]; // ||u|| = 3
        let mut state = EstimatorState::zeros(2, 3);
        state.x = vec![1.0, 2.0, 2.0, -1.0, -2.0, -2.0];
        let theta = [0.0, 0.0, 0.0];
        let d = diagnostics(&state, &theta, &GammaState::initial(&cfg));
        let expected_v = (2.0f64).sqrt() * 3.0;
        assert!((d.v - expected_v).abs() < 1e-12, "V = {} want {expected_v}", d.v);
        assert_eq!(d.w, 0.0, "mean estimate is the origin");
        assert_eq!(d.max_err, u.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
}
