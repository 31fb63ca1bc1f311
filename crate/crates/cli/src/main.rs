use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wrelax::analysis::{balanced_weights, shape_blocks, theorem1_check_weighted, NormKind};
use wrelax::model::material_pair;
use wrelax::par::Execution;
use wrelax::relaxopt::relax_report;
use wrelax_cli::config::{parse_number, ExperimentConfig};
use wrelax_cli::experiment::{
    heat_problem, print_relax_table, relaxation, run_experiment, write_outputs,
};

/// Waveform relaxation experiments on the coupled heat benchmark.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal relaxation parameters and the Jacobi rate.
    RelaxTable {
        #[arg(long, default_value = "air-steel")]
        materials: String,
        #[arg(long, default_value = "1/513")]
        dx: String,
        /// Implicit-Euler step; a trapezoidal run at `dt` uses `dt/2` here.
        #[arg(long, default_value = "5")]
        dt: String,
    },
    /// Report diagonal-block norms of the three splitting shapes.
    Theorem1,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Large discretization (dx = 1/513, N = 200).
    #[arg(long, global = true)]
    large: bool,
    /// jacobi, gs-dn, gs-nd, async, a comma list or `all`.
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    materials: Option<String>,
    #[arg(long, global = true)]
    dimension: Option<String>,
    /// Mesh width, e.g. `1/64`.
    #[arg(long, global = true)]
    dx: Option<String>,
    #[arg(long, global = true)]
    steps: Option<String>,
    #[arg(long, global = true)]
    tf: Option<String>,
    #[arg(long, global = true)]
    integrator: Option<String>,
    /// `opt`, `none` or a constant in (0, 1].
    #[arg(long, global = true)]
    relax: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    kmax: Option<String>,
    /// free, lockstep, p0-ahead, p1-ahead or seeded.
    #[arg(long, global = true)]
    schedule: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Repetitions per method; aggregates go to `<out>.repeat.csv`.
    #[arg(long, global = true)]
    repeat: Option<String>,
    /// CSV output path (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// SVG plot path.
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
    /// Record the async schedule trace to this path.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Replay a recorded async schedule trace.
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
}

impl RunArgs {
    fn build(&self) -> wrelax::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if self.large {
            c = c.large_scale();
        }
        let pairs = [
            ("method", &self.method),
            ("materials", &self.materials),
            ("dimension", &self.dimension),
            ("dx", &self.dx),
            ("steps", &self.steps),
            ("tf", &self.tf),
            ("integrator", &self.integrator),
            ("relax", &self.relax),
            ("tol", &self.tol),
            ("kmax", &self.kmax),
            ("schedule", &self.schedule),
            ("seed", &self.seed),
            ("repeat", &self.repeat),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                c.set(k, v)?;
            }
        }
        let paths = [
            ("out", &self.out),
            ("plot", &self.plot),
            ("trace", &self.trace),
            ("replay", &self.replay),
        ];
        for (k, v) in paths {
            if let Some(v) = v {
                c.set(k, &v.to_string_lossy())?;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn theorem1(cfg: &ExperimentConfig) -> wrelax::Result<()> {
    let (heat, problem) = heat_problem(cfg)?;
    let (relax, _) = relaxation(cfg, &heat)?;
    let shapes = shape_blocks(
        &problem.system,
        &problem.partition,
        &problem.method,
        cfg.dt(),
        cfg.steps,
        &relax,
    )?;
    let all: Vec<_> = shapes.iter().map(|(_, b)| b).collect();
    let weights = balanced_weights(&problem.partition, &all)?;
    for (shape, b) in &shapes {
        let raw = theorem1_check_weighted(Execution::Sequential, b, NormKind::Two, None)?;
        let bal = theorem1_check_weighted(Execution::Sequential, b, NormKind::Two, Some(&weights))?;
        println!("[{}]", shape.name());
        println!("raw_max_norm2 = {:.6e}", raw.max_norm2);
        println!("raw_max_norm_inf = {:.6e}", raw.max_norm_inf);
        println!("{bal}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::RelaxTable { materials, dx, dt }) => (|| {
            let pair = material_pair(materials)?;
            let rep = relax_report(&pair, parse_number(dt)?, parse_number(dx)?)?;
            print!("{}", print_relax_table(&rep));
            Ok(ExitCode::SUCCESS)
        })(),
        Some(Command::Theorem1) => cli
            .run
            .build()
            .and_then(|c| theorem1(&c))
            .map(|_| ExitCode::SUCCESS),
        None => (|| {
            let cfg = cli.run.build()?;
            let outcome = run_experiment(&cfg)?;
            write_outputs(&cfg, &outcome)?;
            for r in &outcome.runs {
                eprintln!(
                    "{}: {} iterations, converged = {}",
                    r.method.name(),
                    r.iterations(),
                    r.converged
                );
            }
            Ok(ExitCode::from(outcome.exit_code() as u8))
        })(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
