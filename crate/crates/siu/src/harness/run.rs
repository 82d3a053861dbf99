//! The main experiment loop.
//!
//! Per iteration: corrupt measurements, evaluate the step sizes and the
//! saturation threshold, apply one synchronous estimator update, advance
//! the threshold recursion, and (on logged steps) record diagnostics. A run
//! whose planned attack fraction stays below the resilience index must keep
//! all three proof invariants (`V <= gamma1`, `W <= gamma2`,
//! `max_err <= gamma`) at every logged step; a violation aborts with a
//! distinguished error, as does any non-finite value.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::config::{fmt_f64, ExperimentConfig, GraphSpec, ThetaSpec};
use super::sample_theta;
use crate::attack::{AttackError, AttackMode, AttackStrategy};
use crate::estimator::{diagnostics, siu_step, EstimatorError, EstimatorState};
use crate::graph::{spectral_bounds, Graph, GraphError, DEFAULT_SPECTRAL_TOL};
use crate::schedule::{GammaState, ScheduleConfig, ScheduleError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration violates {} constraint(s): {}", .0.len(), .0.join("; "))]
    Validation(Vec<String>),
    #[error("no connected graph after {attempts} seed(s) starting from {first_seed}")]
    Disconnected { attempts: u64, first_seed: u64 },
    #[error("invariant violated at t = {t}: {which} (value {value:e} exceeds bound {bound:e})")]
    InvariantViolation { t: u64, which: &'static str, value: f64, bound: f64 },
    #[error("non-finite value in run state at t = {t}")]
    Divergence { t: u64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 0 success, 2 validation failure, 3 invariant
    /// violation, 4 numeric divergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) | Self::Disconnected { .. } | Self::Parse(_) => 2,
            Self::InvariantViolation { .. } | Self::Schedule(_) => 3,
            Self::Divergence { .. } => 4,
            _ => 1,
        }
    }
}

/// Exact header of the metrics CSV.
pub const METRICS_HEADER: &str = "t,max_err,mean_err,V,W,gamma1,gamma2,gamma_total,inv_v,inv_w,inv_err";

/// One logged step. Boolean flags are the proof-invariant comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: u64,
    pub max_err: f64,
    pub mean_err: f64,
    pub v: f64,
    pub w: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_total: f64,
    pub inv_v: bool,
    pub inv_w: bool,
    pub inv_err: bool,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.max_err,
            self.mean_err,
            self.v,
            self.w,
            self.gamma1,
            self.gamma2,
            self.gamma_total,
            self.inv_v as u8,
            self.inv_w as u8,
            self.inv_err as u8
        )
    }

    fn all_finite(&self) -> bool {
        [self.max_err, self.mean_err, self.v, self.w, self.gamma1, self.gamma2, self.gamma_total]
            .iter()
            .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub n_agents: usize,
    pub dim: usize,
    pub iterations: u64,
    pub final_max_err: f64,
    pub final_gamma_total: f64,
    /// True when the planned attack fraction is strictly below `s`, i.e.
    /// the proof invariants are in force.
    pub invariants_enforced: bool,
    /// True when every logged row satisfied all three invariant flags.
    pub invariants_held: bool,
    /// Least-squares slope of `log(max_err)` against `log(t+1)` over logged
    /// rows in the second half of the run; `None` if degenerate.
    pub tail_slope: Option<f64>,
    /// Reference decay exponent `-(tau1 - tau2)`.
    pub rate_reference: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
    /// Seed that produced the connected graph, when generated.
    pub realized_graph_seed: Option<u64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub rows: Vec<MetricsRow>,
}

/// Builds the communication graph, retrying incremented seeds until
/// connected for generated specs.
pub fn provision_graph(
    spec: &GraphSpec,
    max_retries: u64,
) -> Result<(Graph, Option<u64>), HarnessError> {
    match spec {
        GraphSpec::FromFile { edge_list } => {
            let text = fs::read_to_string(edge_list)?;
            Ok((Graph::from_edge_list(&text)?, None))
        }
        GraphSpec::Generated { n, radius, seed } => {
            let attempts = max_retries.max(1);
            for k in 0..attempts {
                let candidate_seed = seed.wrapping_add(k);
                let g = Graph::random_geometric(*n, *radius, candidate_seed)?;
                if g.is_connected() {
                    return Ok((g, Some(candidate_seed)));
                }
            }
            Err(HarnessError::Disconnected { attempts, first_seed: *seed })
        }
    }
}

fn resolve_theta(spec: &ThetaSpec, eta: f64) -> Vec<f64> {
    match spec {
        ThetaSpec::Explicit { values } => values.clone(),
        ThetaSpec::Sampled { dim, seed } => sample_theta(*dim, eta, *seed),
    }
}

fn collect_violations(
    config: &ExperimentConfig,
    schedule: &ScheduleConfig,
    theta: &[f64],
    lambda_n: f64,
    lambda2: f64,
) -> Vec<String> {
    let mut out: Vec<String> =
        schedule.validate(lambda_n, lambda2).iter().map(ToString::to_string).collect();
    if config.iterations < 1 {
        out.push(format!("iterations must be >= 1 (got {})", config.iterations));
    }
    if config.log_stride < 1 {
        out.push(format!("log_stride must be >= 1 (got {})", config.log_stride));
    }
    if config.attack.size >= schedule.n_agents {
        out.push(format!(
            "attack size must satisfy S < N (got S = {}, N = {})",
            config.attack.size, schedule.n_agents
        ));
    }
    if theta.is_empty() {
        out.push("parameter dimension must be >= 1".into());
    }
    if theta.iter().any(|x| !x.is_finite()) {
        out.push("parameter must be finite".into());
    } else {
        let norm: f64 = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > schedule.eta {
            out.push(format!("parameter norm {norm} exceeds eta = {}", schedule.eta));
        }
    }
    match (&config.attack.strategy, theta.len()) {
        (AttackStrategy::ConstantOffset { offset }, dim) if offset.len() != dim => {
            out.push(format!(
                "attack offset dimension {} does not match parameter dimension {dim}",
                offset.len()
            ));
        }
        _ => {}
    }
    out
}

fn toml_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Resolved-config dump: everything needed to reproduce the run, floats at
/// 17 significant digits.
fn resolved_config_toml(
    config: &ExperimentConfig,
    realized_seed: Option<u64>,
    theta: &[f64],
) -> String {
    let mut out = String::new();
    writeln!(out, "iterations = {}", config.iterations).unwrap();
    writeln!(out, "log_stride = {}", config.log_stride).unwrap();
    writeln!(out, "max_graph_retries = {}", config.max_graph_retries).unwrap();
    if let Some(dir) = &config.output {
        writeln!(out, "output = \"{}\"", toml_escape(&dir.display().to_string())).unwrap();
    }
    out.push_str("\n[graph]\n");
    match &config.graph {
        GraphSpec::Generated { n, radius, .. } => {
            writeln!(out, "n = {n}").unwrap();
            writeln!(out, "radius = {}", fmt_f64(*radius)).unwrap();
            writeln!(out, "seed = {}", realized_seed.expect("generated graph has a realized seed"))
                .unwrap();
        }
        GraphSpec::FromFile { edge_list } => {
            writeln!(out, "edge_list = \"{}\"", toml_escape(&edge_list.display().to_string()))
                .unwrap();
        }
    }
    out.push_str("\n[schedule]\n");
    let s = &config.schedule;
    for (key, value) in [
        ("a", s.a),
        ("b", s.b),
        ("tau1", s.tau1),
        ("tau2", s.tau2),
        ("s", s.s),
        ("eta", s.eta),
    ] {
        writeln!(out, "{key} = {}", fmt_f64(value)).unwrap();
    }
    out.push_str("\n[attack]\n");
    writeln!(out, "size = {}", config.attack.size).unwrap();
    writeln!(
        out,
        "mode = \"{}\"",
        match config.attack.mode {
            AttackMode::Fixed => "fixed",
            AttackMode::TimeVarying => "time-varying",
        }
    )
    .unwrap();
    match &config.attack.strategy {
        AttackStrategy::None => writeln!(out, "strategy = \"none\"").unwrap(),
        AttackStrategy::Negation => writeln!(out, "strategy = \"negation\"").unwrap(),
        AttackStrategy::ConstantOffset { offset } => {
            writeln!(out, "strategy = \"constant-offset\"").unwrap();
            let items: Vec<String> = offset.iter().map(|x| fmt_f64(*x)).collect();
            writeln!(out, "offset = [{}]", items.join(", ")).unwrap();
        }
        AttackStrategy::RandomBounded { magnitude } => {
            writeln!(out, "strategy = \"random-bounded\"").unwrap();
            writeln!(out, "magnitude = {}", fmt_f64(*magnitude)).unwrap();
        }
    }
    writeln!(out, "seed = {}", config.attack.seed).unwrap();
    out.push_str("\n[theta]\n");
    let items: Vec<String> = theta.iter().map(|x| fmt_f64(*x)).collect();
    writeln!(out, "values = [{}]", items.join(", ")).unwrap();
    out
}

fn tail_slope(rows: &[MetricsRow], iterations: u64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t >= iterations / 2 && r.max_err > 0.0 && r.max_err.is_finite())
        .map(|r| (((r.t + 1) as f64).ln(), r.max_err.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let var: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if var == 0.0 {
        return None;
    }
    let cov: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    Some(cov / var)
}

struct MetricsSink {
    writer: Option<BufWriter<fs::File>>,
    rows: Vec<MetricsRow>,
}

impl MetricsSink {
    fn new(dir: Option<&Path>) -> Result<Self, HarnessError> {
        let writer = match dir {
            Some(dir) => {
                let mut w = BufWriter::new(fs::File::create(dir.join("metrics.csv"))?);
                writeln!(w, "{METRICS_HEADER}")?;
                Some(w)
            }
            None => None,
        };
        Ok(Self { writer, rows: Vec::new() })
    }

    fn push(&mut self, row: MetricsRow) -> Result<(), HarnessError> {
        if let Some(w) = &mut self.writer {
            writeln!(w, "{}", row.csv_line())?;
        }
        self.rows.push(row);
        Ok(())
    }

    fn finish(&mut self) -> Result<(), HarnessError> {
        if let Some(w) = &mut self.writer {
            w.flush()?;
        }
        Ok(())
    }
}

/// Executes one experiment. See the module docs for the loop structure;
/// returns every logged row plus a summary. With `override_validation` the
/// run proceeds despite constraint violations (the theorem's guarantees are
/// then off the table, which is the point of the flag).
pub fn run(config: &ExperimentConfig, override_validation: bool) -> Result<RunOutcome, HarnessError> {
    let (graph, realized_seed) = provision_graph(&config.graph, config.max_graph_retries)?;
    let n_agents = graph.vertex_count();
    let spectral = spectral_bounds(&graph.laplacian(), DEFAULT_SPECTRAL_TOL)?;
    let schedule = config.schedule.with_agents(n_agents);
    let theta = resolve_theta(&config.theta, schedule.eta);

    let violations = collect_violations(config, &schedule, &theta, spectral.lambda_n, spectral.lambda2);
    if !violations.is_empty() && !override_validation {
        return Err(HarnessError::Validation(violations));
    }

    let plan = config.attack.plan();
    let invariants_enforced = (plan.size as f64) / (n_agents as f64) < schedule.s;

    if let Some(dir) = &config.output {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("graph.txt"), graph.to_edge_list())?;
        fs::write(
            dir.join("config_resolved.toml"),
            resolved_config_toml(config, realized_seed, &theta),
        )?;
    }
    let mut sink = MetricsSink::new(config.output.as_deref())?;

    let iterations = config.iterations;
    let dim = theta.len();
    let mut state = EstimatorState::zeros(n_agents, dim);
    let mut gamma = GammaState::initial(&schedule);
    let mut invariants_held = true;

    let mut log_row = |state: &EstimatorState,
                       gamma: &GammaState,
                       sink: &mut MetricsSink|
     -> Result<(), HarnessError> {
        let diag = diagnostics(state, &theta, gamma);
        let row = MetricsRow {
            t: state.t(),
            max_err: diag.max_err,
            mean_err: diag.mean_err,
            v: diag.v,
            w: diag.w,
            gamma1: gamma.gamma1,
            gamma2: gamma.gamma2,
            gamma_total: gamma.total(),
            inv_v: diag.v_within_gamma1,
            inv_w: diag.w_within_gamma2,
            inv_err: diag.max_err_within_gamma,
        };
        let finite = row.all_finite();
        let flags_ok = row.inv_v && row.inv_w && row.inv_err;
        let t = row.t;
        sink.push(row)?;
        if !finite {
            sink.finish()?;
            return Err(HarnessError::Divergence { t });
        }
        if !flags_ok {
            invariants_held = false;
            if invariants_enforced {
                sink.finish()?;
                let (which, value, bound) = if !diag.v_within_gamma1 {
                    ("consensus deviation V <= gamma1", diag.v, gamma.gamma1)
                } else if !diag.w_within_gamma2 {
                    ("average error W <= gamma2", diag.w, gamma.gamma2)
                } else {
                    ("max error <= gamma", diag.max_err, gamma.total())
                };
                return Err(HarnessError::InvariantViolation { t, which, value, bound });
            }
        }
        Ok(())
    };

    log_row(&state, &gamma, &mut sink)?;
    for t in 0..iterations {
        let meas = plan.measure(&theta, t, n_agents)?;
        let alpha = schedule.alpha(t);
        let beta = schedule.beta(t);
        let gamma_total = gamma.total();
        state = siu_step(&state, &graph, &meas, alpha, beta, gamma_total)?;
        gamma = gamma.advance(&schedule, spectral.lambda2)?;
        if (t + 1) % config.log_stride == 0 || t + 1 == iterations {
            log_row(&state, &gamma, &mut sink)?;
        }
    }
    drop(log_row);
    sink.finish()?;

    let rows = sink.rows;
    let final_row = rows.last().expect("at least the t = 0 row");
    let summary = RunSummary {
        n_agents,
        dim,
        iterations,
        final_max_err: final_row.max_err,
        final_gamma_total: final_row.gamma_total,
        invariants_enforced,
        invariants_held,
        tail_slope: tail_slope(&rows, iterations),
        rate_reference: -(schedule.tau1 - schedule.tau2),
        lambda2: spectral.lambda2,
        lambda_n: spectral.lambda_n,
        realized_graph_seed: realized_seed,
        theta,
    };
    Ok(RunOutcome { summary, rows })
}
