//! Experiment runner: config loading, connected-graph provisioning,
//! parameter sampling, the main iteration loop, metric persistence, and the
//! resilience-versus-threshold sweep.

pub mod config;
pub mod run;
pub mod sweep;

pub use config::{AttackSpec, ExperimentConfig, GraphSpec, ScheduleSpec, ThetaSpec};
pub use run::{run, HarnessError, MetricsRow, RunOutcome, RunSummary, METRICS_HEADER};
pub use sweep::{sweep_resilience, SweepOutcome, SweepRow};

use crate::rng::{keyed_rng, sample_in_ball};

const DOMAIN_THETA: u64 = 0x7468;

/// Uniform sample from the closed L2 ball `||theta||_2 <= eta`:
/// direction uniform on the sphere, radius `eta * u^(1/dim)`.
/// Deterministic per seed.
pub fn sample_theta(dim: usize, eta: f64, seed: u64) -> Vec<f64> {
    let mut rng = keyed_rng(seed, &[DOMAIN_THETA]);
    sample_in_ball(&mut rng, dim, eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_eta_gives_the_zero_vector() {
        assert_eq!(sample_theta(3, 0.0, 42), vec![0.0; 3]);
    }

    #[test]
    fn samples_stay_inside_the_ball_and_are_deterministic() {
        for seed in 0..200 {
            let th = sample_theta(4, 2.0, seed);
            let norm: f64 = th.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm <= 2.0 + 1e-12);
            assert_eq!(th, sample_theta(4, 2.0, seed));
        }
    }

    #[test]
    fn mean_norm_matches_the_ball_distribution() {
        // E[||theta||] = eta * dim / (dim + 1); for dim = 3 that is 0.75 eta.
        let eta = 10.0;
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|seed| {
                let th = sample_theta(3, eta, seed);
                th.iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .sum::<f64>()
            / n as f64;
        let expect = eta * 3.0 / 4.0;
        assert!(
            (mean - expect).abs() <= 0.02 * expect,
            "mean norm {mean} vs expected {expect}"
        );
    }
}
