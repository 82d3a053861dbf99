//! Resilient distributed parameter estimation under sensor attacks.
//!
//! A network of agents estimates a static parameter from locally observed
//! measurements while an adversary arbitrarily corrupts the sensors of up
//! to a fraction `s < 1/2` of them per iteration. Each agent combines a
//! consensus term over its neighbors with a saturated innovation term whose
//! L2 norm is clipped to an adaptive threshold; the threshold recursion is
//! tuned so that honest innovations pass unscaled while corrupted ones are
//! bounded, and every agent's estimate converges to the parameter at a
//! polynomial rate.
//!
//! Crate layout:
//!
//! * [`graph`] — communication topology, Laplacian spectra.
//! * [`schedule`] — decaying step sizes and the threshold recursion.
//! * [`attack`] — adversary model: target sets and corruption strategies.
//! * [`estimator`] — the saturated-innovation update and run diagnostics.
//! * [`lemma`] — oracles for the underlying time-varying recursions.
//! * [`harness`] — experiment configs, the iteration loop, CSV metrics,
//!   and the resilience sweep.

pub mod attack;
pub mod estimator;
pub mod graph;
pub mod harness;
pub mod lemma;
mod rng;
pub mod schedule;
