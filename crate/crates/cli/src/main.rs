use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use slicer_core::baselines::Method;
use slicer_core::evaluate::{compare, EvaluationReport, SimulationConfig};
use slicer_core::lp::write_lp;
use slicer_core::pipeline::{
    load_models, load_scenario, run_pipeline, run_snapshot_sequence, PipelineConfig, ScenarioSource,
};
use slicer_core::placement::{build_problem, SolverOptions};
use slicer_core::radio::vht20_table;
use slicer_core::scenario::{GenerationParams, SliceSpec};

/// Placement and channel allocation for sliced flying access networks.
#[derive(Debug, Parser)]
#[command(name = "slicer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random scenario and write it as JSON.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Place FAPs and allocate channels with one method.
    Solve {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "slicer")]
        method: Method,
    },
    /// Check SLAs for every method, optionally with packet simulation.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_delimiter = ',', default_value = "slicer,geometric_center,kmeans")]
        methods: Vec<Method>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Summarize report files into a comparison table.
    Compare {
        /// report.<method>.json files
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Output CSV; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline on one snapshot.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_delimiter = ',', default_value = "slicer,geometric_center,kmeans")]
        methods: Vec<Method>,
        /// Skip the packet simulation.
        #[arg(long)]
        no_sim: bool,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, default_value_t = 5)]
        runs: u32,
    },
    /// Solve a sequence of snapshots and report solve time against the period.
    Sequence {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 3)]
        k_max: u64,
        /// Reconfiguration period in seconds.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "slicer")]
        methods: Vec<Method>,
    },
    /// Write the placement model in CPLEX LP format.
    ExportLp {
        #[command(flatten)]
        input: InputArgs,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print the VHT20 MCS table for the given BER targets.
    McsTable {
        #[arg(long, value_delimiter = ',', default_value = "1e-5,1e-10")]
        ber: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Number of occupied subareas.
    #[arg(long, default_value_t = 20)]
    users: usize,
    /// JSON array of slice definitions.
    #[arg(long)]
    slices: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Scenario file; a random one is generated when omitted.
    #[arg(long, conflicts_with_all = ["users", "slices"])]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, env = "SLICER_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Replacement MCS table (JSON).
    #[arg(long)]
    mcs_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Run the packet simulation.
    #[arg(long)]
    sim: bool,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 5)]
    runs: u32,
}

impl GenArgs {
    fn params(&self) -> Result<GenerationParams> {
        let mut params = GenerationParams::with_users(self.users, self.seed);
        if let Some(path) = &self.slices {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let slices: Vec<SliceSpec> =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            params.slices = slices;
        }
        Ok(params)
    }
}

impl InputArgs {
    fn config(&self, methods: Vec<Method>, simulation: Option<SimulationConfig>) -> Result<PipelineConfig> {
        let source = match &self.scenario {
            Some(p) => ScenarioSource::File(p.clone()),
            None => ScenarioSource::Generate(self.gen.params()?),
        };
        Ok(PipelineConfig {
            source,
            methods,
            simulation,
            out_dir: self.out_dir.clone(),
            mcs_table: self.mcs_table.clone(),
            solver: SolverOptions::default(),
        })
    }
}

fn sim_config(duration: f64, runs: u32) -> SimulationConfig {
    SimulationConfig { duration, runs, ..SimulationConfig::default() }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { gen, out } => {
            let scenario = gen.params()?.generate()?;
            emit(out.as_deref(), &(scenario.to_json() + "\n"))
        }
        Command::Solve { input, method } => {
            let out = run_pipeline(&input.config(vec![method], None)?)?;
            println!("{}", input.out_dir.join(format!("solution.{}.json", method.name())).display());
            log::info!("{} subareas solved", out.scenario.subareas.len());
            Ok(())
        }
        Command::Evaluate { input, methods, sim } => {
            let simulation = sim.sim.then(|| sim_config(sim.duration, sim.runs));
            let out = run_pipeline(&input.config(methods, simulation)?)?;
            print_reports(&out.reports);
            Ok(())
        }
        Command::Compare { reports, out } => {
            let mut parsed: Vec<EvaluationReport> = Vec::with_capacity(reports.len());
            for p in &reports {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                parsed.push(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?);
            }
            emit(out.as_deref(), &compare(&parsed)?.to_csv())
        }
        Command::Run { input, methods, no_sim, duration, runs } => {
            let simulation = (!no_sim).then(|| sim_config(duration, runs));
            let out = run_pipeline(&input.config(methods, simulation)?)?;
            print_reports(&out.reports);
            Ok(())
        }
        Command::Sequence { input, k_max, dt, methods } => {
            if k_max == 0 {
                bail!("--k-max must be at least 1");
            }
            let timings = run_snapshot_sequence(&input.config(methods, None)?, k_max, dt)?;
            for t in &timings {
                println!(
                    "snapshot {}: {} subareas, solved in {:.3} s (period {} s)",
                    t.snapshot, t.n_subareas, t.solve_seconds, t.reconfig_period
                );
            }
            Ok(())
        }
        Command::ExportLp { input, out } => {
            let source = input.config(vec![Method::Slicer], None)?.source;
            let scenario = load_scenario(&source)?;
            let models = load_models(input.mcs_table.as_deref(), &scenario)?;
            let problem = build_problem(&scenario, &models)?;
            emit(out.as_deref(), &write_lp(&problem))
        }
        Command::McsTable { ber } => {
            let text = serde_json::to_string_pretty(&vht20_table(&ber))?;
            emit(None, &(text + "\n"))
        }
    }
}

fn print_reports(reports: &[EvaluationReport]) {
    for r in reports {
        println!(
            "{}: {} FAPs, {} MHz, {} SLA violations",
            r.method.name(),
            r.n_uavs,
            r.total_bandwidth / 1e6,
            r.sla_violation_count
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
