//! Command-line driver for the movable-antenna multicast simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use macast::channel::read_scenario;
use macast::sim::{
    emit_figure_data, replay_scenario, run_experiment, timing_summary, ExperimentConfig,
    ExperimentKind, InitMode, Method,
};

#[derive(Parser)]
#[command(
    name = "macast",
    about = "Movable-antenna multicast beamforming simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multicast rate per alternating-optimization round
    Convergence(CommonArgs),
    /// Joint optimization vs the fixed array over a power sweep
    RateVsPower(CommonArgs),
    /// Joint optimization vs the fixed array over the user count
    RateVsUsers(CommonArgs),
    /// Two-user line-of-sight placement methods over a power sweep
    TwoUserLos(CommonArgs),
    /// Branch-and-bound vs exhaustive node counts over the grid size
    BabComplexity(CommonArgs),
    /// Re-evaluate a saved channel realization
    Replay {
        /// Scenario JSON written by the library
        scenario: PathBuf,
        #[command(flatten)]
        args: CommonArgs,
    },
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Convergence(_) => ExperimentKind::Convergence,
            Command::RateVsPower(_) => ExperimentKind::RateVsPower,
            Command::RateVsUsers(_) => ExperimentKind::RateVsUsers,
            Command::TwoUserLos(_) | Command::Replay { .. } => ExperimentKind::TwoUserLos,
            Command::BabComplexity(_) => ExperimentKind::BabComplexity,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Convergence(a)
            | Command::RateVsPower(a)
            | Command::RateVsUsers(a)
            | Command::TwoUserLos(a)
            | Command::BabComplexity(a) => a,
            Command::Replay { args, .. } => args,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; explicit flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Candidate positions M (a perfect square)
    #[arg(long)]
    m: Option<usize>,
    /// Antennas N
    #[arg(long)]
    n: Option<usize>,
    /// Users K
    #[arg(long)]
    k: Option<usize>,
    /// Paths per user L
    #[arg(long)]
    paths: Option<usize>,
    /// Transmit power budget in dBm
    #[arg(long)]
    power_dbm: Option<f64>,
    /// Noise power in dBm
    #[arg(long)]
    noise_dbm: Option<f64>,
    /// Power sweep in dBm (comma-separated)
    #[arg(long, value_delimiter = ',')]
    powers: Option<Vec<f64>>,
    /// User-count sweep (comma-separated)
    #[arg(long, value_delimiter = ',')]
    users: Option<Vec<usize>>,
    /// Grid-size sweep for bab-complexity (comma-separated squares)
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    /// Monte Carlo trials
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial t draws from stream t
    #[arg(long)]
    seed: Option<u64>,
    /// Subset of ao_sca,greedy,bab,exhaustive,fpa (comma-separated)
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Initialization: ula_anchored or random
    #[arg(long)]
    init: Option<String>,
    /// Output directory for CSV/SVG files
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Also render an SVG chart per experiment
    #[arg(long)]
    svg: bool,
}

fn build_config(kind: ExperimentKind, args: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig::defaults_for(kind),
    };
    config.experiment = kind;
    if let Some(m) = args.m {
        let side = (m as f64).sqrt().round() as usize;
        if side * side != m {
            bail!("--m must be a perfect square, got {m}");
        }
        config.grid_side = side;
    }
    if let Some(n) = args.n {
        config.num_antennas = n;
    }
    if let Some(k) = args.k {
        config.num_users = k;
    }
    if let Some(paths) = args.paths {
        config.paths_per_user = paths;
    }
    if let Some(p) = args.power_dbm {
        config.power_dbm = p;
    }
    if let Some(s) = args.noise_dbm {
        config.noise_dbm = s;
    }
    if let Some(powers) = &args.powers {
        config.power_dbm_sweep = powers.clone();
    }
    if let Some(users) = &args.users {
        config.users_sweep = users.clone();
    }
    if let Some(m_list) = &args.m_list {
        config.m_sweep = m_list.clone();
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(methods) = &args.methods {
        config.methods = methods
            .iter()
            .map(|s| s.parse::<Method>())
            .collect::<macast::Result<Vec<_>>>()?;
    }
    if let Some(init) = &args.init {
        config.init = match init.as_str() {
            "ula_anchored" | "ula-anchored" => InitMode::UlaAnchored,
            "random" => InitMode::Random,
            other => bail!("unknown init mode '{other}' (expected ula_anchored or random)"),
        };
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Command::Replay { scenario, args } = &cli.command {
        let users = read_scenario(scenario)
            .with_context(|| format!("reading scenario {}", scenario.display()))?;
        let mut config = build_config(ExperimentKind::TwoUserLos, args)?;
        // Replay accepts any scenario shape; line it up with the file.
        config.num_users = users.len();
        config.paths_per_user = users.iter().map(|u| u.paths.len()).max().unwrap_or(1);
        let results = replay_scenario(&users, &config)?;
        println!(
            "replayed {} user(s) at {} dBm on a {}x{} grid:",
            users.len(),
            config.power_dbm,
            config.grid_side,
            config.grid_side
        );
        for (method, rate) in results {
            println!("  {method:<10} {rate:.6} bits/s/Hz");
        }
        return Ok(());
    }

    let kind = cli.command.kind();
    let args = cli.command.args();
    let config = build_config(kind, args)?;
    config.validate()?;
    let run = run_experiment(&config)?;
    let files = emit_figure_data(&run, &args.out_dir, args.svg)?;
    println!(
        "{}: {} trials, {} records",
        config.experiment,
        config.trials,
        run.records.len()
    );
    for file in &files {
        println!("  wrote {}", file.display());
    }
    for (method, seconds) in timing_summary(&run.records) {
        println!("  {method:<10} total wall time {seconds:.3} s");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
