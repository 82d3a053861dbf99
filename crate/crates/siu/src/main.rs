use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use siu::attack::{AttackMode, AttackStrategy};
use siu::graph::{spectral_bounds, Graph, DEFAULT_SPECTRAL_TOL};
use siu::harness::{self, ExperimentConfig, GraphSpec, HarnessError, ThetaSpec};
use siu::lemma::{self, ScalarSystemConfig};

#[derive(Parser)]
#[command(name = "siu", version, about = "Resilient distributed parameter estimation under sensor attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run(RunArgs),
    /// Evolve only the threshold recursion across a range of resilience indices.
    Sweep(SweepArgs),
    /// Simulate the time-varying recursion families and certify decay rates.
    Lemma(LemmaArgs),
    /// Generate or inspect communication graphs.
    #[command(subcommand)]
    Graph(GraphCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Proceed even if the configuration violates the schedule constraints.
    #[arg(long)]
    override_validation: bool,

    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    log_stride: Option<u64>,
    /// Output directory for metrics.csv, graph.txt, config_resolved.toml.
    #[arg(long)]
    output: Option<PathBuf>,

    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,

    #[arg(long)]
    graph_n: Option<usize>,
    #[arg(long)]
    graph_radius: Option<f64>,
    #[arg(long)]
    graph_seed: Option<u64>,
    /// Load the graph from an edge-list file instead of generating one.
    #[arg(long)]
    graph_edge_list: Option<PathBuf>,

    #[arg(long)]
    attack_size: Option<usize>,
    /// fixed | time-varying
    #[arg(long)]
    attack_mode: Option<String>,
    /// none | negation | constant-offset | random-bounded
    #[arg(long)]
    attack_strategy: Option<String>,
    #[arg(long)]
    attack_seed: Option<u64>,
    /// Offset vector for constant-offset, comma-separated.
    #[arg(long)]
    attack_offset: Option<String>,
    /// Disturbance bound for random-bounded.
    #[arg(long)]
    attack_magnitude: Option<f64>,

    /// Explicit parameter vector, comma-separated.
    #[arg(long)]
    theta_values: Option<String>,
    #[arg(long)]
    theta_dim: Option<usize>,
    #[arg(long)]
    theta_seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Explicit list of resilience indices, comma-separated.
    #[arg(long, conflicts_with = "s_linspace")]
    s_values: Option<String>,
    /// Evenly spaced grid as `min,max,count`.
    #[arg(long)]
    s_linspace: Option<String>,
    #[arg(long)]
    iterations: Option<u64>,
    /// Directory to write sweep.csv into (table always goes to stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LemmaArgs {
    /// basic | modified | coupled
    system: String,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 0.8)]
    delta1: f64,
    #[arg(long, default_value_t = 0.2)]
    delta2: f64,
    #[arg(long, default_value_t = 1.0)]
    c3: f64,
    #[arg(long, default_value_t = 1.0)]
    c4: f64,
    #[arg(long, default_value_t = 1.0)]
    c5: f64,
    #[arg(long, default_value_t = 1.0)]
    c6: f64,
    #[arg(long, default_value_t = 1.0)]
    c7: f64,
    #[arg(long, default_value_t = 1.0)]
    v0: f64,
    #[arg(long, default_value_t = 0.0)]
    w0: f64,
    #[arg(long, default_value_t = 1_000_000)]
    horizon: u64,
    /// Write the (sub)sampled trajectory as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run the decay-rate check at this exponent.
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    tail_fraction: f64,
    #[arg(long, default_value_t = 0.9)]
    shrink_factor: f64,
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Generate a random geometric graph and write its edge list.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        seed: u64,
        /// Retry incremented seeds until the graph is connected.
        #[arg(long)]
        require_connected: bool,
        #[arg(long, default_value_t = 1000)]
        max_retries: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the spectral summary of an edge-list file.
    Inspect {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SPECTRAL_TOL)]
        tol: f64,
    },
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad {what} entry {p:?}: {e}")))
        .collect()
}

fn apply_run_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<(), String> {
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.log_stride {
        cfg.log_stride = v;
    }
    if let Some(v) = &args.output {
        cfg.output = Some(v.clone());
    }
    if let Some(v) = args.a {
        cfg.schedule.a = v;
    }
    if let Some(v) = args.b {
        cfg.schedule.b = v;
    }
    if let Some(v) = args.tau1 {
        cfg.schedule.tau1 = v;
    }
    if let Some(v) = args.tau2 {
        cfg.schedule.tau2 = v;
    }
    if let Some(v) = args.s {
        cfg.schedule.s = v;
    }
    if let Some(v) = args.eta {
        cfg.schedule.eta = v;
    }

    if let Some(path) = &args.graph_edge_list {
        cfg.graph = GraphSpec::FromFile { edge_list: path.clone() };
    }
    if args.graph_n.is_some() || args.graph_radius.is_some() || args.graph_seed.is_some() {
        let (mut n, mut radius, mut seed) = match &cfg.graph {
            GraphSpec::Generated { n, radius, seed } => (*n, *radius, *seed),
            GraphSpec::FromFile { .. } => (0, 0.0, 0),
        };
        if let Some(v) = args.graph_n {
            n = v;
        }
        if let Some(v) = args.graph_radius {
            radius = v;
        }
        if let Some(v) = args.graph_seed {
            seed = v;
        }
        if n == 0 {
            return Err("graph overrides require --graph-n when the config uses an edge list".into());
        }
        cfg.graph = GraphSpec::Generated { n, radius, seed };
    }

    if let Some(v) = args.attack_size {
        cfg.attack.size = v;
    }
    if let Some(mode) = &args.attack_mode {
        cfg.attack.mode = match mode.as_str() {
            "fixed" => AttackMode::Fixed,
            "time-varying" => AttackMode::TimeVarying,
            other => return Err(format!("unknown attack mode {other:?} (fixed | time-varying)")),
        };
    }
    if let Some(v) = args.attack_seed {
        cfg.attack.seed = v;
    }
    if let Some(strategy) = &args.attack_strategy {
        cfg.attack.strategy = match strategy.as_str() {
            "none" => AttackStrategy::None,
            "negation" => AttackStrategy::Negation,
            "constant-offset" => {
                let text = args
                    .attack_offset
                    .as_ref()
                    .ok_or("constant-offset requires --attack-offset")?;
                AttackStrategy::ConstantOffset { offset: parse_f64_list(text, "offset")? }
            }
            "random-bounded" => {
                let magnitude =
                    args.attack_magnitude.ok_or("random-bounded requires --attack-magnitude")?;
                AttackStrategy::RandomBounded { magnitude }
            }
            other => return Err(format!(
                "unknown attack strategy {other:?} (none | negation | constant-offset | random-bounded)"
            )),
        };
    } else {
        if let Some(text) = &args.attack_offset {
            cfg.attack.strategy =
                AttackStrategy::ConstantOffset { offset: parse_f64_list(text, "offset")? };
        }
        if let Some(magnitude) = args.attack_magnitude {
            cfg.attack.strategy = AttackStrategy::RandomBounded { magnitude };
        }
    }

    if let Some(text) = &args.theta_values {
        cfg.theta = ThetaSpec::Explicit { values: parse_f64_list(text, "theta")? };
    } else if args.theta_dim.is_some() || args.theta_seed.is_some() {
        let (mut dim, mut seed) = match &cfg.theta {
            ThetaSpec::Sampled { dim, seed } => (*dim, *seed),
            ThetaSpec::Explicit { values } => (values.len(), 0),
        };
        if let Some(v) = args.theta_dim {
            dim = v;
        }
        if let Some(v) = args.theta_seed {
            seed = v;
        }
        cfg.theta = ThetaSpec::Sampled { dim, seed };
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    apply_run_overrides(&mut cfg, args).map_err(|e| HarnessError::Validation(vec![e]))?;
    let outcome = harness::run(&cfg, args.override_validation)?;
    let s = &outcome.summary;
    println!("run complete: N = {}, M = {}, T = {}", s.n_agents, s.dim, s.iterations);
    match s.realized_graph_seed {
        Some(seed) => println!(
            "  graph: lambda2 = {:.6}, lambdaN = {:.6}, realized seed = {seed}",
            s.lambda2, s.lambda_n
        ),
        None => println!("  graph: lambda2 = {:.6}, lambdaN = {:.6} (from edge list)", s.lambda2, s.lambda_n),
    }
    println!("  final max_err = {}", s.final_max_err);
    println!("  final gamma_t = {}", s.final_gamma_total);
    println!(
        "  invariants: {}, held = {}",
        if s.invariants_enforced { "enforced (attack fraction < s)" } else { "not enforced (attack fraction >= s)" },
        s.invariants_held
    );
    match s.tail_slope {
        Some(slope) => println!(
            "  tail slope of log(max_err) vs log(t+1) = {slope:.4}, reference -(tau1 - tau2) = {:.4}, steeper = {}",
            s.rate_reference,
            slope <= s.rate_reference
        ),
        None => println!("  tail slope unavailable (too few positive tail samples)"),
    }
    if let Some(dir) = &cfg.output {
        println!("  outputs: {}", dir.display());
    }
    Ok(())
}

fn parse_s_values(args: &SweepArgs) -> Result<Vec<f64>, String> {
    if let Some(text) = &args.s_values {
        return parse_f64_list(text, "s");
    }
    if let Some(text) = &args.s_linspace {
        let parts = parse_f64_list(text, "s-linspace")?;
        if parts.len() != 3 {
            return Err("--s-linspace expects min,max,count".into());
        }
        let (min, max, count) = (parts[0], parts[1], parts[2] as usize);
        if count < 1 {
            return Err("--s-linspace count must be >= 1".into());
        }
        if count == 1 {
            return Ok(vec![min]);
        }
        return Ok((0..count)
            .map(|i| min + (max - min) * i as f64 / (count - 1) as f64)
            .collect());
    }
    Err("provide --s-values or --s-linspace".into())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(&args.config)?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let s_values = parse_s_values(args).map_err(|e| HarnessError::Validation(vec![e]))?;
    let iterations = args.iterations.unwrap_or(cfg.iterations);
    let outcome = harness::sweep_resilience(&cfg, &s_values, iterations)?;
    for (s, why) in &outcome.skipped {
        eprintln!("skipped s = {s}: {why}");
    }
    print!("{}", outcome.to_csv());
    if let Some(dir) = &args.output {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), outcome.to_csv())?;
    }
    Ok(())
}

fn cmd_lemma(args: &LemmaArgs) -> Result<(), HarnessError> {
    let cfg = ScalarSystemConfig {
        c1: args.c1,
        c2: args.c2,
        delta1: args.delta1,
        delta2: args.delta2,
        c3: args.c3,
        c4: args.c4,
        c5: args.c5,
        c6: args.c6,
        c7: args.c7,
        v0: args.v0,
        w0: args.w0,
    };
    let traj = match args.system.as_str() {
        "basic" => lemma::simulate_basic(&cfg, args.horizon),
        "modified" => lemma::simulate_modified(&cfg, args.horizon),
        "coupled" => lemma::simulate_coupled(&cfg, args.horizon),
        other => {
            return Err(HarnessError::Validation(vec![format!(
                "unknown system {other:?} (basic | modified | coupled)"
            )]))
        }
    }
    .map_err(|e| HarnessError::Validation(vec![e.to_string()]))?;

    let last = traj.last();
    println!("system = {}, horizon = {}", args.system, traj.horizon());
    println!("  stored samples = {}", traj.samples().len());
    println!("  sup |v| + |w| = {}", traj.max_magnitude());
    match last.w {
        Some(w) => println!("  final: t = {}, v = {}, w = {}", last.t, last.v, w),
        None => println!("  final: t = {}, v = {}", last.t, last.v),
    }
    if let Some(delta0) = args.delta0 {
        let ok = lemma::decay_rate_check(&traj, delta0, args.tail_fraction, args.shrink_factor)
            .map_err(|e| HarnessError::Validation(vec![e.to_string()]))?;
        println!(
            "  decay check at delta0 = {delta0}: {} (tail fraction {}, shrink {})",
            if ok { "PASS" } else { "FAIL" },
            args.tail_fraction,
            args.shrink_factor
        );
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, traj.to_csv())?;
        println!("  trajectory written to {}", path.display());
    }
    Ok(())
}

fn cmd_graph(cmd: &GraphCommand) -> Result<(), HarnessError> {
    match cmd {
        GraphCommand::Generate { n, radius, seed, require_connected, max_retries, output } => {
            let (graph, realized) = if *require_connected {
                let spec = GraphSpec::Generated { n: *n, radius: *radius, seed: *seed };
                let (g, s) = harness::run::provision_graph(&spec, *max_retries)?;
                (g, s)
            } else {
                (Graph::random_geometric(*n, *radius, *seed)?, Some(*seed))
            };
            let text = graph.to_edge_list();
            match output {
                Some(path) => std::fs::write(path, &text)?,
                None => print!("{text}"),
            }
            let summary = spectral_bounds(&graph.laplacian(), DEFAULT_SPECTRAL_TOL)?;
            eprintln!(
                "n = {}, edges = {}, connected = {}, lambda2 = {:.6}, lambdaN = {:.6}, seed = {:?}",
                graph.vertex_count(),
                graph.edges().len(),
                graph.is_connected(),
                summary.lambda2,
                summary.lambda_n,
                realized
            );
            Ok(())
        }
        GraphCommand::Inspect { path, tol } => {
            let text = std::fs::read_to_string(path)?;
            let graph = Graph::from_edge_list(&text)?;
            let summary = spectral_bounds(&graph.laplacian(), *tol)?;
            println!("n = {}", graph.vertex_count());
            println!("edges = {}", graph.edges().len());
            println!("max degree = {}", graph.max_degree());
            println!("connected = {}", graph.is_connected());
            println!("lambda2 = {}", summary.lambda2);
            println!("lambdaN = {}", summary.lambda_n);
            println!("residual = {:e}", summary.residual);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Lemma(args) => cmd_lemma(args),
        Command::Graph(cmd) => cmd_graph(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
