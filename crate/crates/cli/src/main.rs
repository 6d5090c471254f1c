use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gpc_cddp::runtime::export::{self, SolveSummary, Timing};
use gpc_cddp::runtime::{monte_carlo_detailed, run_mpc, run_open_loop, validate, McMode, MpcContext, PlantSim, Setup};
use gpc_cddp::{Error, ScenarioConfig};

#[derive(Parser)]
#[command(name = "gpc-cddp", version, about = "Chance-constrained gPC trajectory optimization and receding-horizon control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario's plant (mpc) or campaign (mc) seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-horizon open-loop gPC solve.
    Solve(Common),
    /// One receding-horizon episode against a sampled plant.
    Mpc(Common),
    /// Monte Carlo campaign over sampled plants.
    Mc {
        #[command(flatten)]
        common: Common,
        /// open_loop_gpc, mpc_gpc or mpc_deterministic.
        #[arg(long, default_value = "mpc_gpc")]
        mode: String,
        #[arg(long, default_value_t = 100)]
        realizations: usize,
    },
    /// Quadrature, moment, Riccati and gradient self-checks.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step mean, covariance ellipse and realization CSVs for plotting.
    ExportPlot {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "open_loop_gpc")]
        mode: String,
        #[arg(long, default_value_t = 20)]
        realizations: usize,
    },
}

enum Failure {
    Solver(String),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Config(msg),
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::load(path).map_err(|e| Failure::Config(e.to_string()))
}

fn parse_mode(mode: &str) -> Result<McMode, Failure> {
    mode.parse().map_err(|e: Error| Failure::Config(e.to_string()))
}

fn write_timing(out: &Path, start: Instant) -> Result<(), Failure> {
    export::write_json(out, "timing.json", &Timing { wall_seconds: start.elapsed().as_secs_f64() })?;
    Ok(())
}

fn solve(c: &Common) -> Result<(), Failure> {
    let cfg = load(&c.config)?;
    let start = Instant::now();
    let result = run_open_loop(&cfg)?;
    export::write_text(&c.out, "trajectory.csv", &export::trajectory_csv(&result, cfg.dt))?;
    export::write_text(&c.out, "covariance.csv", &export::covariance_csv(&result, cfg.dt))?;
    export::write_text(&c.out, "constraints.csv", &export::constraints_csv(&result, cfg.dt))?;
    let summary = SolveSummary::new(&cfg, &result);
    export::write_json(&c.out, "summary.json", &summary)?;
    write_timing(&c.out, start)?;
    println!(
        "cost {:.6} after {} outer / {} inner iterations, max violation {:.3e}",
        summary.cost, summary.outer_iterations, summary.inner_iterations, summary.max_violation
    );
    match summary.failure {
        Some(msg) => Err(Failure::Solver(msg)),
        None => Ok(()),
    }
}

fn mpc(c: &Common) -> Result<(), Failure> {
    let cfg = load(&c.config)?;
    let start = Instant::now();
    let seed = c.seed.unwrap_or(cfg.seeds.plant);
    let ctx = MpcContext::gpc(&cfg)?;
    let mut plant = PlantSim::from_scenario(&cfg, seed, 0);
    let log = run_mpc(&ctx, &mut plant)?;
    export::write_text(&c.out, "mpc.csv", &export::mpc_csv(&log))?;
    export::write_json(&c.out, "log.json", &log)?;
    write_timing(&c.out, start)?;
    let dims = &cfg.chance.position_dims;
    println!(
        "final state {:?}, collided {}, fallbacks {}, coverage {:.3}",
        log.final_state(),
        log.collided(&cfg.obstacles, dims),
        log.fallback_count(),
        log.confidence_coverage(dims)
    );
    Ok(())
}

fn mc(c: &Common, mode: &str, realizations: usize) -> Result<(), Failure> {
    let cfg = load(&c.config)?;
    let mode = parse_mode(mode)?;
    if realizations == 0 {
        return Err(Failure::Config("--realizations must be at least 1".into()));
    }
    let seed = c.seed.unwrap_or(cfg.seeds.mc);
    let (report, _) = monte_carlo_detailed(&cfg, mode, realizations, seed)?;
    export::write_json(&c.out, "report.json", &report)?;
    export::write_json(&c.out, "timing.json", &Timing { wall_seconds: report.elapsed_secs })?;
    println!(
        "{mode}: {}/{} collision free, mean final error {:.4}, {} failed episodes",
        report.collision_free_count, report.n_realizations, report.mean_final_error, report.failed_count
    );
    Ok(())
}

fn run_validate(seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let checks = validate::run_all(seed)?;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} (error {:.3e}, tolerance {:.0e})", c.name, c.error, c.tolerance);
    }
    if let Some(dir) = out {
        export::write_json(dir, "validate.json", &checks)?;
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Solver("validation failed".into()))
    }
}

fn export_plot(c: &Common, mode: &str, realizations: usize) -> Result<(), Failure> {
    let cfg = load(&c.config)?;
    let mode = parse_mode(mode)?;
    match mode {
        McMode::OpenLoopGpc => {
            let setup = Setup::gpc(&cfg)?;
            let result = run_open_loop(&cfg)?;
            export::write_text(&c.out, "ellipse.csv", &export::ellipse_csv(&result, &cfg))?;
            let seed = c.seed.unwrap_or(cfg.seeds.mc);
            let csv = export::gpc_realizations_csv(&result, setup.model.basis(), &cfg, realizations, seed)?;
            export::write_text(&c.out, "realizations.csv", &csv)?;
        }
        McMode::MpcGpc | McMode::MpcDeterministic => {
            let seed = c.seed.unwrap_or(cfg.seeds.mc);
            let ctx = if mode == McMode::MpcGpc { MpcContext::gpc(&cfg)? } else { MpcContext::deterministic(&cfg)? };
            let mut plant = PlantSim::from_scenario(&cfg, seed, 0);
            let log = run_mpc(&ctx, &mut plant)?;
            export::write_text(&c.out, "cycles.csv", &export::mpc_csv(&log))?;
            let (_, trajectories) = monte_carlo_detailed(&cfg, mode, realizations.max(1), seed)?;
            let csv = export::plant_realizations_csv(trajectories.iter().map(Vec::as_slice), &cfg);
            export::write_text(&c.out, "realizations.csv", &csv)?;
        }
    }
    println!("plot data written to {}", c.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => solve(c),
        Command::Mpc(c) => mpc(c),
        Command::Mc { common, mode, realizations } => mc(common, mode, *realizations),
        Command::Validate { seed, out } => run_validate(*seed, out.as_deref()),
        Command::ExportPlot { common, mode, realizations } => export_plot(common, mode, *realizations),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
