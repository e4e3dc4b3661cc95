use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wuuct_bench::config::list;
use wuuct_bench::emit::{self, CsvSink};
use wuuct_bench::{sweep, BenchConfig, BenchError, Overrides, PlannerKind};

#[derive(Parser)]
#[command(name = "bench", about = "Run and compare parallel MCTS planners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured planner on the first worker-grid cell.
    Run(Common),
    /// Run the configured planner over the whole worker grid.
    Sweep(Common),
    /// Run several planners over the worker grid.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated planner names.
        #[arg(long, value_delimiter = ',', required = true)]
        planners: Vec<String>,
    },
    /// Parse and check a configuration without running it.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// INI configuration file.
    config: Option<PathBuf>,
    /// Start from a bundled preset instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    planner: Option<String>,
    /// Comma-separated simulation-worker counts.
    #[arg(long)]
    n_sim: Option<String>,
    #[arg(long)]
    t_max: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<BenchConfig, BenchError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => BenchConfig::load(path)?,
            (None, Some(name)) => BenchConfig::preset(name)?,
            (None, None) => return Err(BenchError::Config("give a config file or --preset".into())),
        };
        let overrides = Overrides {
            planner: self.planner.as_deref().map(str::parse).transpose()?,
            n_sim: self.n_sim.as_deref().map(|v| list(v, "--n-sim")).transpose()?,
            t_max: self.t_max,
            seed: self.seed,
            out: self.out.clone(),
        };
        cfg.apply(&overrides)?;
        Ok(cfg)
    }
}

fn execute(cfg: &BenchConfig, planners: &[PlannerKind], stem: &str) -> Result<(), BenchError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let paths = emit::output_paths(&cfg.out_dir, stem);
    let mut sink = CsvSink::create(&paths[0])?;
    let result = sweep(cfg, planners, |cell| {
        eprintln!(
            "{} n_exp={} n_sim={} seed={}: return {:.3} wall/plan {:.1} ms speedup {:.2}",
            cell.planner, cell.n_exp, cell.n_sim, cell.seed, cell.return_mean, cell.wall_ms_per_plan, cell.speedup
        );
        sink.append(cell)
    })?;
    emit::write_summaries(&cfg.out_dir, stem, &result)?;
    print!("{}", emit::markdown(&result));
    for p in &paths {
        eprintln!("wrote {}", p.display());
    }
    if result.cells.is_empty() {
        return Err(BenchError::Runtime("every cell failed".into()));
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run(c) => {
            let mut cfg = c.load()?;
            cfg.n_exp.truncate(1);
            cfg.n_sim.truncate(1);
            execute(&cfg, &[cfg.planner], "run")
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            execute(&cfg, &[cfg.planner], "sweep")
        }
        Command::Compare { common, planners } => {
            let cfg = common.load()?;
            let kinds = planners.iter().map(|p| p.parse()).collect::<Result<Vec<PlannerKind>, _>>()?;
            execute(&cfg, &kinds, "compare")
        }
        Command::Validate(c) => {
            let cfg = c.load()?;
            println!("ok: {} on {:?}, t_max {}", cfg.planner, cfg.env, cfg.plan.t_max);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
