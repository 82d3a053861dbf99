//! Numerical oracles for time-varying linear recursions.
//!
//! Three recursion families back the convergence analysis, all driven by
//! the decaying rates `r1(t) = c1/(t+1)^delta1` and `r2(t) = c2/(t+1)^delta2`
//! with `0 < delta2 <= delta1 < 1`:
//!
//! * basic:    `v_{t+1} = (1 - r2) v_t + r1`
//! * modified: `v_{t+1} = (1 - c3 r2 + c4 r1) v_t + c5 r1`
//! * coupled:  `v_{t+1} = (1 - c3 r1) v_t + c4 r1 w_t`
//!             `w_{t+1} = (1 - c5 r2 + c6 r1) w_t + c7 r1 v_t`
//!
//! With `delta1 = delta2` the basic system stays bounded; with
//! `delta2 < delta1` all three decay fast enough that
//! `(t+1)^delta0 * |v_t| -> 0` for every `delta0 < delta1 - delta2`.
//! [`decay_rate_check`] certifies that limit on a finite horizon by
//! comparing window maxima of the weighted trajectory over its stored
//! (log-subsampled) tail. The coupled family is exactly the shape of the
//! saturation-threshold recursion, so [`simulate_coupled`] doubles as an
//! independent oracle for [`crate::schedule::GammaState::advance`].

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LemmaError {
    #[error("exponents must satisfy 0 < delta2 {relation} delta1 < 1 (got delta1 = {delta1}, delta2 = {delta2})")]
    InvalidExponents { delta1: f64, delta2: f64, relation: &'static str },
    #[error("{what} out of range: {value}")]
    InvalidArgument { what: &'static str, value: f64 },
    #[error("trajectory diverged (non-finite value) at t = {t}")]
    Diverged { t: u64 },
    #[error("horizon too short: only {samples} samples in the tail, need at least {min}")]
    HorizonTooShort { samples: usize, min: usize },
}

/// Constants for the recursion families. Each system reads the subset it
/// needs; unused entries are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSystemConfig {
    pub c1: f64,
    pub c2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub v0: f64,
    pub w0: f64,
}

impl Default for ScalarSystemConfig {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            delta1: 0.8,
            delta2: 0.2,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
            c6: 1.0,
            c7: 1.0,
            v0: 1.0,
            w0: 0.0,
        }
    }
}

impl ScalarSystemConfig {
    fn check_exponents(&self, strict: bool) -> Result<(), LemmaError> {
        let ordered = if strict { self.delta2 < self.delta1 } else { self.delta2 <= self.delta1 };
        if !(self.delta2 > 0.0 && ordered && self.delta1 < 1.0) {
            return Err(LemmaError::InvalidExponents {
                delta1: self.delta1,
                delta2: self.delta2,
                relation: if strict { "<" } else { "<=" },
            });
        }
        Ok(())
    }

    pub fn r1(&self, t: u64) -> f64 {
        self.c1 / ((t + 1) as f64).powf(self.delta1)
    }

    pub fn r2(&self, t: u64) -> f64 {
        self.c2 / ((t + 1) as f64).powf(self.delta2)
    }
}

/// One stored point of a simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: u64,
    pub v: f64,
    /// Second component for the coupled system, `None` for scalar systems.
    pub w: Option<f64>,
}

impl TrajectorySample {
    /// `|v| + |w|`; the quantity whose decay the checks certify.
    pub fn magnitude(&self) -> f64 {
        self.v.abs() + self.w.map_or(0.0, f64::abs)
    }
}

/// A (sub)sampled trajectory over `0..=horizon`. Every step below 1000 is
/// stored; beyond that, samples sit on a log grid of [`SAMPLES_PER_DECADE`]
/// points per decade, plus the final step. All stored values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    samples: Vec<TrajectorySample>,
    horizon: u64,
}

/// Density of the stored log grid past t = 1000.
pub const SAMPLES_PER_DECADE: u32 = 1000;

/// Sample count threshold below which [`decay_rate_check`] refuses to judge.
pub const MIN_TAIL_SAMPLES: usize = 100;

fn sample_times(horizon: u64) -> Vec<u64> {
    let mut times: Vec<u64> = (0..=horizon.min(999)).collect();
    if horizon >= 1000 {
        let mut last = 999;
        let mut k = 0u32;
        loop {
            let t = 10f64.powf(3.0 + f64::from(k) / f64::from(SAMPLES_PER_DECADE)).round() as u64;
            if t > horizon {
                break;
            }
            if t > last {
                times.push(t);
                last = t;
            }
            k += 1;
        }
        if last < horizon {
            times.push(horizon);
        }
    }
    times
}

impl TrajectoryRecord {
    /// Builds a record from explicit samples (ascending in `t`), rejecting
    /// non-finite values.
    pub fn from_samples(samples: Vec<TrajectorySample>, horizon: u64) -> Result<Self, LemmaError> {
        for s in &samples {
            if !s.v.is_finite() || s.w.is_some_and(|w| !w.is_finite()) {
                return Err(LemmaError::Diverged { t: s.t });
            }
        }
        debug_assert!(samples.windows(2).all(|p| p[0].t < p[1].t));
        Ok(Self { samples, horizon })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn last(&self) -> TrajectorySample {
        *self.samples.last().expect("trajectory has at least the t = 0 sample")
    }

    pub fn max_magnitude(&self) -> f64 {
        self.samples.iter().map(TrajectorySample::magnitude).fold(0.0, f64::max)
    }

    /// CSV with header `t,v,w`; the `w` column is left blank for scalar
    /// systems.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v,w\n");
        for s in &self.samples {
            match s.w {
                Some(w) => writeln!(out, "{},{},{}", s.t, s.v, w).unwrap(),
                None => writeln!(out, "{},{},", s.t, s.v).unwrap(),
            }
        }
        out
    }
}

fn run_scalar(
    cfg: &ScalarSystemConfig,
    horizon: u64,
    step: impl Fn(u64, f64) -> f64,
) -> Result<TrajectoryRecord, LemmaError> {
    if horizon < 1 {
        return Err(LemmaError::InvalidArgument { what: "horizon", value: horizon as f64 });
    }
    let times = sample_times(horizon);
    let mut keep = times.iter().copied().peekable();
    let mut samples = Vec::with_capacity(times.len());
    let mut v = cfg.v0;
    for t in 0..=horizon {
        if !v.is_finite() {
            return Err(LemmaError::Diverged { t });
        }
        if keep.peek() == Some(&t) {
            samples.push(TrajectorySample { t, v, w: None });
            keep.next();
        }
        if t < horizon {
            v = step(t, v);
        }
    }
    Ok(TrajectoryRecord { samples, horizon })
}

/// Forward iteration of `v_{t+1} = (1 - r2(t)) v_t + r1(t)`.
pub fn simulate_basic(cfg: &ScalarSystemConfig, horizon: u64) -> Result<TrajectoryRecord, LemmaError> {
    cfg.check_exponents(false)?;
    run_scalar(cfg, horizon, |t, v| (1.0 - cfg.r2(t)) * v + cfg.r1(t))
}

/// Forward iteration of `v_{t+1} = (1 - c3 r2(t) + c4 r1(t)) v_t + c5 r1(t)`.
pub fn simulate_modified(cfg: &ScalarSystemConfig, horizon: u64) -> Result<TrajectoryRecord, LemmaError> {
    cfg.check_exponents(true)?;
    run_scalar(cfg, horizon, |t, v| (1.0 - cfg.c3 * cfg.r2(t) + cfg.c4 * cfg.r1(t)) * v + cfg.c5 * cfg.r1(t))
}

/// Forward iteration of the coupled pair. Evaluation order is load-bearing:
/// under the constant mapping documented on
/// [`crate::schedule::GammaState::advance`], the iterates must equal the
/// threshold recursion bit-for-bit.
pub fn simulate_coupled(cfg: &ScalarSystemConfig, horizon: u64) -> Result<TrajectoryRecord, LemmaError> {
    cfg.check_exponents(true)?;
    if horizon < 1 {
        return Err(LemmaError::InvalidArgument { what: "horizon", value: horizon as f64 });
    }
    let times = sample_times(horizon);
    let mut keep = times.iter().copied().peekable();
    let mut samples = Vec::with_capacity(times.len());
    let mut v = cfg.v0;
    let mut w = cfg.w0;
    for t in 0..=horizon {
        if !v.is_finite() || !w.is_finite() {
            return Err(LemmaError::Diverged { t });
        }
        if keep.peek() == Some(&t) {
            samples.push(TrajectorySample { t, v, w: Some(w) });
            keep.next();
        }
        if t < horizon {
            let r1 = cfg.r1(t);
            let r2 = cfg.r2(t);
            let v_next = (1.0 - cfg.c3 * r1) * v + (cfg.c4 * r1) * w;
            let w_next = (1.0 - cfg.c5 * r2 + cfg.c6 * r1) * w + (cfg.c7 * r1) * v;
            v = v_next;
            w = w_next;
        }
    }
    Ok(TrajectoryRecord { samples, horizon })
}

/// Finite-horizon surrogate for `lim (t+1)^delta0 * |v_t| = 0`.
///
/// Takes the last `tail_fraction` of the stored samples (log-spaced late in
/// the run, so the tail spans decades of `t`), weights each magnitude by
/// `(t+1)^delta0`, and requires the maximum over the final quarter of those
/// samples to be at most `shrink_factor` times the maximum over the first
/// quarter. Errors rather than guessing when the tail holds fewer than
/// [`MIN_TAIL_SAMPLES`] points.
pub fn decay_rate_check(
    traj: &TrajectoryRecord,
    delta0: f64,
    tail_fraction: f64,
    shrink_factor: f64,
) -> Result<bool, LemmaError> {
    if !(delta0 >= 0.0) {
        return Err(LemmaError::InvalidArgument { what: "delta0", value: delta0 });
    }
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(LemmaError::InvalidArgument { what: "tail_fraction", value: tail_fraction });
    }
    let n = traj.samples.len();
    let tail_len = ((tail_fraction * n as f64).ceil() as usize).min(n);
    if tail_len < MIN_TAIL_SAMPLES {
        return Err(LemmaError::HorizonTooShort { samples: tail_len, min: MIN_TAIL_SAMPLES });
    }
    let tail = &traj.samples[n - tail_len..];
    let quarter = tail_len / 4;
    let weighted_max = |chunk: &[TrajectorySample]| {
        chunk
            .iter()
            .map(|s| ((s.t + 1) as f64).powf(delta0) * s.magnitude())
            .fold(0.0, f64::max)
    };
    let first = weighted_max(&tail[..quarter]);
    let last = weighted_max(&tail[tail_len - quarter..]);
    Ok(last <= shrink_factor * first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{GammaState, ScheduleConfig};

    #[test]
    fn sample_grid_is_dense_early_and_logarithmic_late() {
        let times = sample_times(1_000_000);
        assert_eq!(&times[..1000], &(0..1000).collect::<Vec<u64>>()[..]);
        assert_eq!(*times.last().unwrap(), 1_000_000);
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        // Roughly SAMPLES_PER_DECADE per decade over three decades.
        let late = times.iter().filter(|&&t| t >= 1000).count();
        assert!((2500..=3200).contains(&late), "late samples: {late}");
        // Short horizons store every step.
        assert_eq!(sample_times(50), (0..=50).collect::<Vec<u64>>());
    }

    #[test]
    fn basic_pure_contraction_decreases_to_zero() {
        // c2 < 1 keeps 0 < 1 - r2(t) < 1, so the decay is strict at every step.
        let cfg = ScalarSystemConfig { c1: 0.0, c2: 0.5, delta1: 0.5, delta2: 0.5, v0: 1.0, ..Default::default() };
        let traj = simulate_basic(&cfg, 500).unwrap();
        let s = traj.samples();
        for pair in s.windows(2) {
            assert!(pair[1].v < pair[0].v, "strictly decreasing");
            assert!(pair[1].v > 0.0);
        }
        assert!(traj.last().v < 0.05, "heading toward zero, got {}", traj.last().v);
    }

    #[test]
    fn basic_two_steps_match_hand_iteration() {
        let cfg = ScalarSystemConfig { c1: 1.0, c2: 1.0, delta1: 0.5, delta2: 0.5, v0: 0.0, ..Default::default() };
        let traj = simulate_basic(&cfg, 2).unwrap();
        let s = traj.samples();
        assert_eq!(s[0].v, 0.0);
        assert_eq!(s[1].v, 1.0, "v1 = (1 - 1) * 0 + 1");
        let r = 1.0 / 2f64.powf(0.5);
        assert_eq!(s[2].v, (1.0 - r) * 1.0 + r);
    }

    #[test]
    fn basic_with_equal_exponents_stays_bounded() {
        // Quasi-equilibrium is c1/c2 = 1, so the trajectory never strays far.
        let cfg = ScalarSystemConfig { c1: 1.0, c2: 1.0, delta1: 0.5, delta2: 0.5, v0: 7.0, ..Default::default() };
        let traj = simulate_basic(&cfg, 100_000).unwrap();
        assert!(traj.max_magnitude() <= 10.0, "sup |v| = {}", traj.max_magnitude());
    }

    #[test]
    fn modified_zero_input_is_a_fixed_point() {
        let cfg = ScalarSystemConfig { c5: 0.0, v0: 0.0, ..Default::default() };
        let traj = simulate_modified(&cfg, 2000).unwrap();
        assert!(traj.samples().iter().all(|s| s.v == 0.0));
    }

    #[test]
    fn modified_requires_strict_exponent_ordering() {
        let cfg = ScalarSystemConfig { delta1: 0.5, delta2: 0.5, ..Default::default() };
        assert!(matches!(simulate_modified(&cfg, 10), Err(LemmaError::InvalidExponents { .. })));
        assert!(simulate_basic(&cfg, 10).is_ok());
    }

    #[test]
    fn modified_reference_trajectory_passes_the_decay_check() {
        // delta1 - delta2 = 0.6; the weighted tail must shrink at
        // delta0 = 0.5 and grow at delta0 = 0.9.
        let cfg = ScalarSystemConfig {
            c1: 1.0,
            c2: 1.0,
            delta1: 0.8,
            delta2: 0.2,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
            v0: 5.0,
            ..Default::default()
        };
        let traj = simulate_modified(&cfg, 1_000_000).unwrap();
        assert!(decay_rate_check(&traj, 0.5, 0.5, 0.9).unwrap());
        assert!(!decay_rate_check(&traj, 0.9, 0.5, 0.9).unwrap());
    }

    #[test]
    fn coupled_zero_start_stays_zero() {
        let cfg = ScalarSystemConfig { v0: 0.0, w0: 0.0, ..Default::default() };
        let traj = simulate_coupled(&cfg, 2000).unwrap();
        assert!(traj.samples().iter().all(|s| s.v == 0.0 && s.w == Some(0.0)));
    }

    #[test]
    fn coupled_stays_bounded_over_long_horizons() {
        let cfg = ScalarSystemConfig { v0: 3.0, w0: -2.0, ..Default::default() };
        let traj = simulate_coupled(&cfg, 1_000_000).unwrap();
        assert!(traj.max_magnitude() < 1e9);
    }

    #[test]
    fn coupled_reproduces_the_threshold_recursion_bit_for_bit() {
        let schedule = ScheduleConfig {
            a: 1.54e-4,
            b: 3.78e-2,
            tau1: 0.15,
            tau2: 0.001,
            s: 0.201,
            eta: 100.0,
            n_agents: 300,
        };
        let lambda2 = 0.08;
        let cfg = ScalarSystemConfig {
            c1: schedule.a,
            c2: schedule.b,
            delta1: schedule.tau1,
            delta2: schedule.tau2,
            c3: 1.0 - 2.0 * schedule.s,
            c4: 1.0,
            c5: lambda2,
            c6: schedule.kappa1(),
            c7: schedule.kappa2(),
            v0: schedule.eta,
            w0: 0.0,
        };
        let horizon = 5000;
        let traj = simulate_coupled(&cfg, horizon).unwrap();
        let mut gamma = GammaState::initial(&schedule);
        let mut idx = 0;
        for t in 0..=horizon {
            if traj.samples()[idx].t == t {
                let s = traj.samples()[idx];
                assert_eq!(s.v.to_bits(), gamma.gamma2.to_bits(), "gamma2 diverged at t = {t}");
                assert_eq!(s.w.unwrap().to_bits(), gamma.gamma1.to_bits(), "gamma1 diverged at t = {t}");
                idx += 1;
            }
            if t < horizon {
                gamma = gamma.advance(&schedule, lambda2).unwrap();
            }
        }
        assert_eq!(idx, traj.samples().len());
    }

    #[test]
    fn decay_check_accepts_polynomial_decay_and_rejects_constants() {
        let times = sample_times(1_000_000);
        let decaying = TrajectoryRecord::from_samples(
            times.iter().map(|&t| TrajectorySample { t, v: 1.0 / (t + 1) as f64, w: None }).collect(),
            1_000_000,
        )
        .unwrap();
        assert!(decay_rate_check(&decaying, 0.5, 0.5, 0.9).unwrap());

        let flat = TrajectoryRecord::from_samples(
            times.iter().map(|&t| TrajectorySample { t, v: 1.0, w: None }).collect(),
            1_000_000,
        )
        .unwrap();
        assert!(!decay_rate_check(&flat, 0.1, 0.5, 0.9).unwrap());
    }

    #[test]
    fn decay_check_demands_enough_tail_samples() {
        let cfg = ScalarSystemConfig::default();
        let traj = simulate_modified(&cfg, 150).unwrap();
        assert!(matches!(
            decay_rate_check(&traj, 0.5, 0.5, 0.9),
            Err(LemmaError::HorizonTooShort { samples: 76, .. })
        ));
    }

    #[test]
    fn divergent_configurations_are_reported() {
        // Massive growth term: (1 + c4 r1) compounds until overflow.
        let cfg = ScalarSystemConfig {
            c3: 0.0,
            c4: 1e30,
            c5: 1.0,
            c1: 1e30,
            delta1: 0.9,
            delta2: 0.1,
            v0: 1.0,
            ..Default::default()
        };
        assert!(matches!(simulate_modified(&cfg, 100_000), Err(LemmaError::Diverged { .. })));
    }

    #[test]
    fn trajectory_csv_has_blank_w_for_scalar_systems() {
        let cfg = ScalarSystemConfig { c1: 0.0, v0: 1.0, delta1: 0.5, delta2: 0.5, ..Default::default() };
        let csv = simulate_basic(&cfg, 2).unwrap().to_csv();
        assert!(csv.starts_with("t,v,w\n0,1,\n"), "got {csv:?}");
        let coupled = simulate_coupled(&ScalarSystemConfig { v0: 1.0, w0: 2.0, ..Default::default() }, 1)
            .unwrap()
            .to_csv();
        assert!(coupled.starts_with("t,v,w\n0,1,2\n"), "got {coupled:?}");
    }
}
