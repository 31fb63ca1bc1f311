//! Waveform relaxation drivers: Jacobi, Gauss-Seidel (both orders) and
//! asynchronous WR with constant or variable relaxation.
//!
//! Every method stores the same iterate: subsolver solutions whose exchanged
//! (gamma) components are replaced by their relaxed values. Subsolvers step
//! with their own unrelaxed history and relaxed peer data.

mod asynchronous;
mod sync;

use std::time::Instant;

pub use asynchronous::run_async;
pub use sync::{run_gauss_seidel, run_jacobi};

use crate::error::{Error, Result};
use crate::interp::{UnionGrid, Waveform};
use crate::linalg::weighted_norm;
use crate::model::{initial_flux, CoupledPartition, HeatProblem, MonolithicSystem, Shape};
use crate::par::Execution;
use crate::relaxopt::RelaxTable;
use crate::rma::{ScheduleMode, Trace};
use crate::timeint::{LMMethod, TimeGrid};

/// `(1 - theta) old + theta new`; exactly `new` for `theta = 1`.
#[inline]
pub fn relax(theta: f64, old: f64, new: f64) -> f64 {
    if theta == 1.0 {
        new
    } else {
        (1.0 - theta) * old + theta * new
    }
}

pub fn relax_vec(theta: f64, old: &[f64], new: &[f64]) -> Vec<f64> {
    old.iter()
        .zip(new)
        .map(|(&o, &n)| relax(theta, o, n))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Jacobi,
    GsDn,
    GsNd,
    Async,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Jacobi, Method::GsDn, Method::GsNd, Method::Async];

    pub fn name(self) -> &'static str {
        match self {
            Method::Jacobi => "jacobi",
            Method::GsDn => "gs-dn",
            Method::GsNd => "gs-nd",
            Method::Async => "async",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(Method::Jacobi),
            "gs-dn" | "gs" => Ok(Method::GsDn),
            "gs-nd" => Ok(Method::GsNd),
            "async" => Ok(Method::Async),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Relaxation of the exchanged unknowns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Relaxation {
    None,
    /// Per-shape optimal parameters.
    Table(RelaxTable),
    /// Fixed `(theta_v, theta_w)` for every shape.
    Constant {
        theta_v: f64,
        theta_w: f64,
    },
}

impl Relaxation {
    pub fn pair(&self, shape: Shape) -> (f64, f64) {
        match self {
            Relaxation::None => (1.0, 1.0),
            Relaxation::Table(t) => t.pair(shape),
            Relaxation::Constant { theta_v, theta_w } => (*theta_v, *theta_w),
        }
    }

    fn validate(&self) -> Result<()> {
        for s in Shape::ALL {
            let (a, b) = self.pair(s);
            if !(a > 0.0 && a <= 1.0 && b > 0.0 && b <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "relaxation ({a}, {b}) outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Relaxation variant of asynchronous WR.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsyncRelaxation {
    /// Sender relaxes with the Jacobi pair before each put.
    Constant,
    /// Receiver relaxes per point according to the observed local shape.
    Variable,
}

#[derive(Clone, Debug)]
pub struct WRConfig {
    pub relax: Relaxation,
    pub tol: f64,
    pub kmax: usize,
    pub schedule: ScheduleMode,
    pub async_relax: AsyncRelaxation,
    /// Interface values at `tf` used for the reported error.
    pub reference: Option<Vec<f64>>,
    pub exec: Execution,
    pub replay: Option<Trace>,
    /// Keep every iterate (matching grids only).
    pub record_history: bool,
}

impl Default for WRConfig {
    fn default() -> Self {
        Self {
            relax: Relaxation::None,
            tol: 1e-10,
            kmax: 50,
            schedule: ScheduleMode::Lockstep,
            async_relax: AsyncRelaxation::Variable,
            reference: None,
            exec: Execution::default(),
            replay: None,
            record_history: false,
        }
    }
}

impl WRConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        if self.kmax == 0 {
            return Err(Error::InvalidParameter("kmax must be >= 1".into()));
        }
        self.relax.validate()
    }
}

/// Local shape of a union-grid point, from both actors' first markings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LocalShape {
    Jacobi,
    GsDn,
    GsNd,
    /// Both actors saw fresh data (possible on non-matching grids only).
    Mixed,
}

impl LocalShape {
    pub fn as_shape(self) -> Option<Shape> {
        match self {
            LocalShape::Jacobi => Some(Shape::Jacobi),
            LocalShape::GsDn => Some(Shape::GsDn),
            LocalShape::GsNd => Some(Shape::GsNd),
            LocalShape::Mixed => None,
        }
    }

    pub fn from_shape(s: Shape) -> Self {
        match s {
            Shape::Jacobi => LocalShape::Jacobi,
            Shape::GsDn => LocalShape::GsDn,
            Shape::GsNd => LocalShape::GsNd,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub update_norm: f64,
    /// Interface error at `tf` against the configured reference (NaN without one).
    pub interface_error: f64,
    pub wall_time: f64,
    pub shape_log: Vec<LocalShape>,
}

/// Coupling realized in one step: whether each row consumed current-sweep
/// peer data at `t_{n+l}`, `l = 0..=m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealizedStep {
    pub fresh_v_row: Vec<bool>,
    pub fresh_w_row: Vec<bool>,
}

/// Splitting actually realized by one sweep on matching grids.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizedSplitting {
    pub steps: Vec<RealizedStep>,
    /// Relaxation applied to the exchanged v data, per grid point.
    pub theta_v: Vec<f64>,
    /// Relaxation applied to the exchanged w data, per grid point.
    pub theta_w: Vec<f64>,
}

impl RealizedSplitting {
    pub fn constant(shape: Shape, steps: usize, m: usize, pair: (f64, f64)) -> Self {
        let (fv, fw) = match shape {
            Shape::Jacobi => (false, false),
            Shape::GsDn => (false, true),
            Shape::GsNd => (true, false),
        };
        Self {
            steps: (0..steps)
                .map(|_| RealizedStep {
                    fresh_v_row: vec![fv; m + 1],
                    fresh_w_row: vec![fw; m + 1],
                })
                .collect(),
            theta_v: vec![pair.0; steps + 1],
            theta_w: vec![pair.1; steps + 1],
        }
    }
}

#[derive(Clone, Debug)]
pub struct WRResult {
    pub method: Method,
    /// Final v iterate on the v grid.
    pub v: Waveform,
    /// Final w iterate on the w grid.
    pub w: Waveform,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub trace: Option<Trace>,
    /// Full iterates `x^(0), x^(1), ...` in monolithic ordering (when recorded).
    pub history: Vec<Vec<Vec<f64>>>,
    /// Realized splitting of sweep `k` producing `x^(k+1)` (matching grids).
    pub realized: Vec<RealizedSplitting>,
}

impl WRResult {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Relaxed interface values (gamma_w) at every w grid point.
    pub fn interface(&self, problem: &CoupledProblem) -> Waveform {
        self.w.select(&problem.gamma_w_local)
    }
}

/// A partitioned linear system plus grids and initial guesses.
#[derive(Clone, Debug)]
pub struct CoupledProblem {
    pub system: MonolithicSystem,
    pub partition: CoupledPartition,
    pub method: LMMethod,
    pub grid_v: TimeGrid,
    pub grid_w: TimeGrid,
    /// Initial guess of the exchanged v data on the v grid.
    pub guess_v: Waveform,
    /// Initial guess of the exchanged w data on the w grid.
    pub guess_w: Waveform,
    /// Weight of the interface norm used for termination.
    pub interface_weight: f64,
    pub(crate) gamma_v_local: Vec<usize>,
    pub(crate) gamma_w_local: Vec<usize>,
}

impl CoupledProblem {
    /// Initial guesses extrapolate the initial value.
    pub fn new(
        system: MonolithicSystem,
        partition: CoupledPartition,
        method: LMMethod,
        grid_v: TimeGrid,
        grid_w: TimeGrid,
    ) -> Result<Self> {
        if partition.dim() != system.dim() {
            return Err(Error::Dimension(
                "partition does not match the system".into(),
            ));
        }
        if grid_v.tf() != system.tf || grid_w.tf() != system.tf {
            return Err(Error::InvalidParameter(
                "grids must end at the system's final time".into(),
            ));
        }
        let u0_v: Vec<f64> = partition.gamma_v.iter().map(|&i| system.u0[i]).collect();
        let u0_w: Vec<f64> = partition.gamma_w.iter().map(|&i| system.u0[i]).collect();
        let guess_v = Waveform::constant(&grid_v, &u0_v);
        let guess_w = Waveform::constant(&grid_w, &u0_w);
        Ok(Self {
            gamma_v_local: partition.gamma_v_local(),
            gamma_w_local: partition.gamma_w_local(),
            system,
            partition,
            method,
            grid_v,
            grid_w,
            guess_v,
            guess_w,
            interface_weight: 1.0,
        })
    }

    /// Heat benchmark; the integrated-flux guess grows linearly with slope `q0`.
    pub fn from_heat(heat: &HeatProblem, method: LMMethod) -> Result<Self> {
        let c = &heat.config;
        let grid_v = TimeGrid::new(c.tf, c.nv)?;
        let grid_w = TimeGrid::new(c.tf, c.nw)?;
        let mut p = Self::new(
            heat.system.clone(),
            heat.partition.clone(),
            method,
            grid_v,
            grid_w,
        )?;
        let q0 = initial_flux(c)?;
        let values = (0..=c.nv)
            .map(|n| q0.iter().map(|q| grid_v.time(n) * q).collect())
            .collect();
        p.guess_v = Waveform::from_grid(&grid_v, values)?;
        p.interface_weight = heat.interface_weight;
        Ok(p)
    }

    pub fn with_guess(mut self, guess_v: Waveform, guess_w: Waveform) -> Result<Self> {
        if guess_v.points() != self.grid_v.points().as_slice()
            || guess_w.points() != self.grid_w.points().as_slice()
            || guess_v.width() != self.partition.gamma_v.len()
            || guess_w.width() != self.partition.gamma_w.len()
        {
            return Err(Error::Dimension(
                "initial guesses must match grids and gamma sets".into(),
            ));
        }
        self.guess_v = guess_v;
        self.guess_w = guess_w;
        Ok(self)
    }

    pub fn matching_grids(&self) -> bool {
        self.grid_v == self.grid_w
    }

    pub fn union_grid(&self) -> Result<UnionGrid> {
        UnionGrid::new(&self.grid_v, &self.grid_w)
    }

    pub fn interface_norm(&self, x: &[f64]) -> f64 {
        weighted_norm(x, self.interface_weight)
    }

    pub(crate) fn check_method(&self) -> Result<()> {
        if self.method.steps() != 1 {
            return Err(Error::Unsupported(
                "WR drivers support one-step methods only".into(),
            ));
        }
        Ok(())
    }

    /// Full initial iterate in monolithic ordering (matching grids).
    pub(crate) fn initial_iterate(&self) -> Vec<Vec<f64>> {
        let (v0, w0) = self.partition.split(&self.system.u0);
        (0..self.guess_v.len())
            .map(|n| {
                let v = with_gamma(&v0, &self.gamma_v_local, self.guess_v.value(n));
                let w = with_gamma(
                    &w0,
                    &self.gamma_w_local,
                    self.guess_w.value(n.min(self.guess_w.len() - 1)),
                );
                self.partition.join(&v, &w)
            })
            .collect()
    }
}

pub(crate) fn with_gamma(x: &[f64], gamma: &[usize], values: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for (&g, &val) in gamma.iter().zip(values) {
        y[g] = val;
    }
    y
}

pub(crate) fn gamma_of(x: &[f64], gamma: &[usize]) -> Vec<f64> {
    gamma.iter().map(|&g| x[g]).collect()
}

/// Termination data of one sweep, computed from the interface quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Termination {
    pub update: f64,
    pub error: f64,
    pub converged: bool,
}

impl Termination {
    pub fn compute(
        problem: &CoupledProblem,
        config: &WRConfig,
        old_end: &[f64],
        new_end: &[f64],
        new_start: &[f64],
    ) -> Self {
        let diff: Vec<f64> = new_end.iter().zip(old_end).map(|(a, b)| a - b).collect();
        let update = problem.interface_norm(&diff);
        let scale = problem.interface_norm(new_start);
        let error = match &config.reference {
            Some(r) => {
                let e: Vec<f64> = new_end.iter().zip(r).map(|(a, b)| a - b).collect();
                problem.interface_norm(&e)
            }
            None => f64::NAN,
        };
        Self {
            update,
            error,
            converged: update < scale * config.tol || update == 0.0,
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![
            self.update,
            self.error,
            if self.converged { 1.0 } else { 0.0 },
        ]
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != 3 {
            return Err(Error::Protocol(
                "termination message has wrong length".into(),
            ));
        }
        Ok(Self {
            update: x[0],
            error: x[1],
            converged: x[2] == 1.0,
        })
    }
}

pub(crate) fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Runs `method` on `problem`.
pub fn run(problem: &CoupledProblem, config: &WRConfig, method: Method) -> Result<WRResult> {
    match method {
        Method::Jacobi => run_jacobi(problem, config),
        Method::GsDn => run_gauss_seidel(problem, config, Shape::GsDn),
        Method::GsNd => run_gauss_seidel(problem, config, Shape::GsNd),
        Method::Async => run_async(problem, config),
    }
}

/// Interface values at `tf` of a GS-DN run to `tol = 1e-11`, for error reporting.
pub fn interface_reference(problem: &CoupledProblem, relax: Relaxation) -> Result<Vec<f64>> {
    let config = WRConfig {
        relax,
        tol: 1e-11,
        kmax: 200,
        ..WRConfig::default()
    };
    let r = run_gauss_seidel(problem, &config, Shape::GsDn)?;
    Ok(gamma_of(r.w.last(), &problem.gamma_w_local))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relax_is_exact_for_unit_theta() {
        assert_eq!(relax(1.0, 3.0, 0.1).to_bits(), 0.1f64.to_bits());
        assert_eq!(relax(0.5, 1.0, 3.0), 2.0);
    }

    #[test]
    fn relaxation_pairs() {
        let c = Relaxation::Constant {
            theta_v: 0.3,
            theta_w: 0.7,
        };
        assert_eq!(c.pair(Shape::GsDn), (0.3, 0.7));
        assert_eq!(Relaxation::None.pair(Shape::Jacobi), (1.0, 1.0));
        assert!(Relaxation::Constant {
            theta_v: 0.0,
            theta_w: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }
}
