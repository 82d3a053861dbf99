//! Experiment configuration: a flat TOML document mapping onto the graph,
//! schedule, attack, and parameter sections, plus run length and output
//! controls.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::attack::{AttackMode, AttackPlan, AttackStrategy};
use crate::schedule::ScheduleConfig;

/// Where the communication graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    /// Load a fixed edge list from a file.
    FromFile { edge_list: PathBuf },
    /// Generate a random geometric graph; the harness retries `seed`,
    /// `seed + 1`, ... until the result is connected.
    Generated { n: usize, radius: f64, seed: u64 },
}

/// The true parameter: given explicitly, or sampled uniformly from the
/// eta-ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Explicit { values: Vec<f64> },
    Sampled { dim: usize, seed: u64 },
}

/// Schedule parameters as they appear in the config file; `n_agents` comes
/// from the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub a: f64,
    pub b: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub s: f64,
    pub eta: f64,
}

impl ScheduleSpec {
    pub fn with_agents(&self, n_agents: usize) -> ScheduleConfig {
        ScheduleConfig {
            a: self.a,
            b: self.b,
            tau1: self.tau1,
            tau2: self.tau2,
            s: self.s,
            eta: self.eta,
            n_agents,
        }
    }
}

/// Attack section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub size: usize,
    pub mode: AttackMode,
    #[serde(flatten)]
    pub strategy: AttackStrategy,
    #[serde(default)]
    pub seed: u64,
}

impl AttackSpec {
    pub fn plan(&self) -> AttackPlan {
        AttackPlan { size: self.size, mode: self.mode, strategy: self.strategy.clone(), seed: self.seed }
    }
}

fn default_log_stride() -> u64 {
    500
}

fn default_max_retries() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub iterations: u64,
    /// Iterations between metric rows; rows for t = 0 and t = T are always
    /// written.
    #[serde(default = "default_log_stride")]
    pub log_stride: u64,
    /// Directory for metrics.csv, graph.txt and config_resolved.toml.
    /// `None` keeps everything in memory (used by tests).
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Cap on connectivity retries when generating the graph.
    #[serde(default = "default_max_retries")]
    pub max_graph_retries: u64,
    pub graph: GraphSpec,
    pub schedule: ScheduleSpec,
    pub attack: AttackSpec,
    pub theta: ThetaSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Full 17-significant-digit formatting; round-trips every f64 exactly.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
iterations = 500000
log_stride = 500
output = "runs/demo"

[graph]
n = 300
radius = 0.12
seed = 1

[schedule]
a = 1.54e-4
b = 3.78e-2
tau1 = 0.15
tau2 = 0.001
s = 0.201
eta = 100.0

[attack]
size = 60
mode = "fixed"
strategy = "negation"
seed = 2

[theta]
dim = 3
seed = 3
"#;

    #[test]
    fn parses_the_reference_config() {
        let cfg = ExperimentConfig::from_toml(FULL).unwrap();
        assert_eq!(cfg.iterations, 500_000);
        assert_eq!(cfg.log_stride, 500);
        assert_eq!(cfg.max_graph_retries, 1000);
        assert!(matches!(cfg.graph, GraphSpec::Generated { n: 300, .. }));
        assert_eq!(cfg.schedule.s, 0.201);
        assert_eq!(cfg.attack.size, 60);
        assert_eq!(cfg.attack.mode, AttackMode::Fixed);
        assert_eq!(cfg.attack.strategy, AttackStrategy::Negation);
        assert!(matches!(cfg.theta, ThetaSpec::Sampled { dim: 3, seed: 3 }));
    }

    #[test]
    fn parses_alternative_sections() {
        let text = r#"
iterations = 100

[graph]
edge_list = "graph.txt"

[schedule]
a = 0.5
b = 0.1
tau1 = 0.3
tau2 = 0.1
s = 0.2
eta = 10.0

[attack]
size = 2
mode = "time-varying"
strategy = "constant-offset"
offset = [1.0, 0.0]
seed = 9

[theta]
values = [3.0, -4.0]
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert!(matches!(cfg.graph, GraphSpec::FromFile { .. }));
        assert_eq!(cfg.log_stride, 500, "default");
        assert_eq!(cfg.attack.strategy, AttackStrategy::ConstantOffset { offset: vec![1.0, 0.0] });
        assert_eq!(cfg.theta, ThetaSpec::Explicit { values: vec![3.0, -4.0] });

        let rb = r#"
iterations = 10

[graph]
n = 5
radius = 0.9
seed = 0

[schedule]
a = 0.5
b = 0.1
tau1 = 0.3
tau2 = 0.1
s = 0.2
eta = 10.0

[attack]
size = 1
mode = "fixed"
strategy = "random-bounded"
magnitude = 2.5

[theta]
dim = 2
seed = 1
"#;
        let cfg = ExperimentConfig::from_toml(rb).unwrap();
        assert_eq!(cfg.attack.strategy, AttackStrategy::RandomBounded { magnitude: 2.5 });
        assert_eq!(cfg.attack.seed, 0, "default seed");
    }

    #[test]
    fn fmt_f64_round_trips() {
        for x in [1.54e-4, 3.78e-2, 0.15, 0.001, 0.201, 100.0, std::f64::consts::PI / 3.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
