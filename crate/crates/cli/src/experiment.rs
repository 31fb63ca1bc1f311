//! Runs the configured methods on the heat benchmark and writes CSV rows.

use std::io::Write;
use std::path::Path;

use wrelax::interp::Waveform;
use wrelax::model::{assemble_heat, material_pair, HeatProblem, HeatProblemConfig};
use wrelax::relaxopt::{relax_report_for, RelaxReport};
use wrelax::rma::{ScheduleMode, Trace};
use wrelax::timeint::lmm_solve_monolithic;
use wrelax::wr::{run, CoupledProblem, IterationRecord, Method, Relaxation, WRConfig};
use wrelax::{Error, Result};

use crate::config::{ExperimentConfig, RelaxChoice};

pub const CSV_HEADER: [&str; 5] = ["method", "k", "update_norm", "interface_error", "wall_time"];

/// One method run.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: Method,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub v: Waveform,
    pub w: Waveform,
    pub trace: Option<Trace>,
}

impl MethodRun {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Iteration counts and timings of one method across repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct RepeatStats {
    pub method: Method,
    pub iterations: Vec<usize>,
    pub wall_times: Vec<f64>,
    pub converged: usize,
}

impl RepeatStats {
    pub fn mean_iterations(&self) -> f64 {
        self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
    }

    pub fn mean_wall_time(&self) -> f64 {
        self.wall_times.iter().sum::<f64>() / self.wall_times.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub relax: Option<RelaxReport>,
    /// First repetition of every method, in configured order.
    pub runs: Vec<MethodRun>,
    pub repeats: Vec<RepeatStats>,
}

impl ExperimentOutcome {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.converged)
            && self
                .repeats
                .iter()
                .all(|r| r.converged == r.iterations.len())
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_converged() {
            0
        } else {
            1
        }
    }

    pub fn run(&self, method: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == method)
    }
}

pub fn heat_problem(config: &ExperimentConfig) -> Result<(HeatProblem, CoupledProblem)> {
    let hc = HeatProblemConfig::new(
        config.dimension,
        config.dx,
        material_pair(&config.materials)?,
        config.tf,
        config.steps,
    );
    let heat = assemble_heat(&hc)?;
    let problem = CoupledProblem::from_heat(&heat, config.integrator.method())?;
    Ok((heat, problem))
}

/// Relaxation of a run and, for the optimal choice, the report it came from.
pub fn relaxation(
    config: &ExperimentConfig,
    heat: &HeatProblem,
) -> Result<(Relaxation, Option<RelaxReport>)> {
    Ok(match config.relax {
        RelaxChoice::None => (Relaxation::None, None),
        RelaxChoice::Constant(t) => (
            Relaxation::Constant {
                theta_v: t,
                theta_w: t,
            },
            None,
        ),
        RelaxChoice::Optimal => {
            let rep = relax_report_for(
                &heat.config.materials,
                &config.integrator.method(),
                config.dt(),
                config.dx,
            )?;
            (Relaxation::Table(rep.table), Some(rep))
        }
    })
}

fn schedule_for_replay(trace: &Trace) -> Result<ScheduleMode> {
    Ok(trace.mode.parse::<ScheduleMode>()?)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let (heat, problem) = heat_problem(config)?;
    let (relax, report) = relaxation(config, &heat)?;
    let mono = lmm_solve_monolithic(&problem.system, &problem.method, &problem.grid_w)?;
    let reference: Vec<f64> = problem
        .partition
        .gamma_w
        .iter()
        .map(|&g| mono.last()[g])
        .collect();
    let replay = config.replay.as_deref().map(Trace::load).transpose()?;
    let schedule = match &replay {
        Some(t) => schedule_for_replay(t)?,
        None => config.effective_schedule(),
    };
    let base = WRConfig {
        relax,
        tol: config.tol,
        kmax: config.kmax,
        schedule,
        reference: Some(reference),
        ..WRConfig::default()
    };

    let mut runs = Vec::new();
    let mut repeats = Vec::new();
    for &method in &config.methods {
        let mut stats = RepeatStats {
            method,
            iterations: Vec::new(),
            wall_times: Vec::new(),
            converged: 0,
        };
        for rep in 0..config.repeat {
            let mut wr = base.clone();
            if method == Method::Async {
                if rep == 0 {
                    wr.replay = replay.clone();
                }
                if let ScheduleMode::Seeded {
                    seed,
                    jitter,
                    costs,
                } = wr.schedule.clone()
                {
                    wr.schedule = ScheduleMode::Seeded {
                        seed: seed.wrapping_add(rep as u64),
                        jitter,
                        costs,
                    };
                }
            }
            let r = run(&problem, &wr, method)?;
            stats.iterations.push(r.iterations());
            stats
                .wall_times
                .push(r.records.last().map_or(0.0, |x| x.wall_time));
            stats.converged += usize::from(r.converged);
            if rep == 0 {
                runs.push(MethodRun {
                    method,
                    records: r.records,
                    converged: r.converged,
                    v: r.v,
                    w: r.w,
                    trace: r.trace,
                });
            }
        }
        if config.repeat > 1 {
            repeats.push(stats);
        }
    }
    Ok(ExperimentOutcome {
        relax: report,
        runs,
        repeats,
    })
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-iteration rows, then one `summary:<method>` row per method whose `k`
/// is the iteration count and whose norms are the final ones.
pub fn write_csv<W: Write>(outcome: &ExperimentOutcome, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &outcome.runs {
        for rec in &r.records {
            w.write_record([
                r.method.name().to_string(),
                rec.k.to_string(),
                sci(rec.update_norm),
                sci(rec.interface_error),
                sci(rec.wall_time),
            ])?;
        }
    }
    for r in &outcome.runs {
        let last = r.records.last();
        w.write_record([
            format!("summary:{}", r.method.name()),
            r.iterations().to_string(),
            sci(last.map_or(f64::NAN, |x| x.update_norm)),
            sci(last.map_or(f64::NAN, |x| x.interface_error)),
            sci(last.map_or(0.0, |x| x.wall_time)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const REPEAT_HEADER: [&str; 7] = [
    "method",
    "runs",
    "converged",
    "mean_iterations",
    "min_iterations",
    "max_iterations",
    "mean_wall_time",
];

pub fn write_repeat_csv<W: Write>(outcome: &ExperimentOutcome, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPEAT_HEADER)?;
    for s in &outcome.repeats {
        w.write_record([
            s.method.name().to_string(),
            s.iterations.len().to_string(),
            s.converged.to_string(),
            sci(s.mean_iterations()),
            s.iterations.iter().min().copied().unwrap_or(0).to_string(),
            s.iterations.iter().max().copied().unwrap_or(0).to_string(),
            sci(s.mean_wall_time()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(outcome: &ExperimentOutcome) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(outcome, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
}

/// `<stem>.repeat.csv` next to the main output.
pub fn repeat_path(out: &Path) -> std::path::PathBuf {
    out.with_extension("repeat.csv")
}

/// Writes every artifact the config asks for.
pub fn write_outputs(config: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    match &config.out {
        Some(p) => {
            write_csv(outcome, std::fs::File::create(p)?)?;
            if !outcome.repeats.is_empty() {
                write_repeat_csv(outcome, std::fs::File::create(repeat_path(p))?)?;
            }
        }
        None => {
            write_csv(outcome, std::io::stdout().lock())?;
            if !outcome.repeats.is_empty() {
                write_repeat_csv(outcome, std::io::stdout().lock())?;
            }
        }
    }
    if let Some(p) = &config.plot {
        std::fs::write(p, crate::plot::convergence_svg(outcome))?;
    }
    if let Some(p) = &config.trace {
        let trace = outcome
            .run(Method::Async)
            .and_then(|r| r.trace.as_ref())
            .ok_or_else(|| Error::Config("a trace needs the async method".into()))?;
        trace.save(p)?;
    }
    Ok(())
}

/// Key/value description of the optimal relaxation.
pub fn print_relax_table(report: &RelaxReport) -> String {
    let t = &report.table;
    format!(
        "s1 = {:.6e}\ns2 = {:.6e}\ntheta_jacobi = {:.6}\ntheta_gs_dn = {:.6}\ntheta_gs_nd = {:.6}\nrho_jacobi = {:.6}\n",
        report.s1, report.s2, t.theta_jacobi, t.theta_gs_dn, t.theta_gs_nd, t.rho_jacobi
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_symmetric_run_converges() {
        let cfg = ExperimentConfig {
            materials: "same".into(),
            dx: 1.0 / 16.0,
            steps: 10,
            methods: vec![Method::Jacobi],
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&cfg).unwrap();
        assert!(out.all_converged());
        let csv = csv_string(&out).unwrap();
        assert!(csv.starts_with("method,k,update_norm,interface_error,wall_time\n"));
        assert!(csv.contains("summary:jacobi,"));
    }
}
