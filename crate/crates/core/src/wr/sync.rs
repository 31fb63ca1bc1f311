use std::time::Instant;

use super::{
    elapsed, gamma_of, relax_vec, with_gamma, CoupledProblem, IterationRecord, LocalShape, Method,
    RealizedSplitting, Termination, WRConfig, WRResult,
};
use crate::error::Result;
use crate::interp::Waveform;
use crate::model::Shape;
use crate::par;
use crate::timeint::SplitStepper;

/// Steppers and fixed data shared by the synchronous drivers.
pub(crate) struct Sides {
    pub v: SplitStepper,
    pub w: SplitStepper,
    pub v0: Vec<f64>,
    pub w0: Vec<f64>,
}

impl Sides {
    pub fn new(problem: &CoupledProblem) -> Result<Self> {
        problem.check_method()?;
        let p = &problem.partition;
        let s = &problem.system;
        let v = SplitStepper::new(s, &p.v_indices, &p.gamma_w, &problem.method, problem.grid_v)?;
        let w = SplitStepper::new(s, &p.w_indices, &p.gamma_v, &problem.method, problem.grid_w)?;
        let (v0, w0) = p.split(&s.u0);
        Ok(Self { v, w, v0, w0 })
    }
}

/// One sweep of a subsolver against relaxed peer data; returns the
/// unrelaxed own solution at every own grid point.
pub(crate) fn sweep(stepper: &SplitStepper, x0: &[f64], peer: &Waveform) -> Result<Vec<Vec<f64>>> {
    let grid = *stepper.grid();
    let peer_at: Vec<Vec<f64>> = grid
        .points()
        .into_iter()
        .map(|t| peer.eval_at(t))
        .collect::<Result<_>>()?;
    let mut hist = Vec::with_capacity(grid.steps() + 1);
    hist.push(x0.to_vec());
    for n in 0..grid.steps() {
        let next = stepper.step(n, &[&hist[n]], &[&peer_at[n], &peer_at[n + 1]])?;
        hist.push(next);
    }
    Ok(hist)
}

/// Relaxes the exchanged components of a sweep (point 0 is never relaxed).
pub(crate) fn relax_gamma(
    theta: f64,
    old: &Waveform,
    hat: &[Vec<f64>],
    gamma: &[usize],
) -> Result<Waveform> {
    let mut out = old.clone();
    for (n, x) in hat.iter().enumerate().skip(1) {
        out.update_point(n, &relax_vec(theta, old.value(n), &gamma_of(x, gamma)))?;
    }
    Ok(out)
}

pub(crate) fn iterate(hat: &[Vec<f64>], relaxed: &Waveform, gamma: &[usize]) -> Vec<Vec<f64>> {
    hat.iter()
        .enumerate()
        .map(|(n, x)| with_gamma(x, gamma, relaxed.value(n)))
        .collect()
}

/// Jacobi WR: both subsolvers sweep against the previous iterate.
pub fn run_jacobi(problem: &CoupledProblem, config: &WRConfig) -> Result<WRResult> {
    run_sync(problem, config, Shape::Jacobi)
}

/// Gauss-Seidel WR in the given order (`GsDn`: v first).
pub fn run_gauss_seidel(
    problem: &CoupledProblem,
    config: &WRConfig,
    order: Shape,
) -> Result<WRResult> {
    if order == Shape::Jacobi {
        return Err(crate::Error::InvalidParameter(
            "Gauss-Seidel order must be GS-DN or GS-ND".into(),
        ));
    }
    run_sync(problem, config, order)
}

fn run_sync(problem: &CoupledProblem, config: &WRConfig, shape: Shape) -> Result<WRResult> {
    config.validate()?;
    let sides = Sides::new(problem)?;
    let start = Instant::now();
    let (tv, tw) = config.relax.pair(shape);
    let gv_local = &problem.gamma_v_local;
    let gw_local = &problem.gamma_w_local;
    let union_len = problem.union_grid()?.len();
    let record = config.record_history && problem.matching_grids();

    let mut gv = problem.guess_v.clone();
    let mut gw = problem.guess_w.clone();
    let mut v_hat = vec![sides.v0.clone(); problem.grid_v.steps() + 1];
    let mut w_hat = vec![sides.w0.clone(); problem.grid_w.steps() + 1];
    let mut records = Vec::new();
    let mut history = Vec::new();
    let mut realized = Vec::new();
    if record {
        history.push(problem.initial_iterate());
    }
    let mut converged = false;

    for k in 0..config.kmax {
        let (new_gv, new_gw) = match shape {
            Shape::Jacobi => {
                let (a, b) = par::join(
                    config.exec,
                    || sweep(&sides.v, &sides.v0, &gw),
                    || sweep(&sides.w, &sides.w0, &gv),
                );
                v_hat = a?;
                w_hat = b?;
                (
                    relax_gamma(tv, &gv, &v_hat, gv_local)?,
                    relax_gamma(tw, &gw, &w_hat, gw_local)?,
                )
            }
            Shape::GsDn => {
                v_hat = sweep(&sides.v, &sides.v0, &gw)?;
                let ngv = relax_gamma(tv, &gv, &v_hat, gv_local)?;
                w_hat = sweep(&sides.w, &sides.w0, &ngv)?;
                (ngv, relax_gamma(tw, &gw, &w_hat, gw_local)?)
            }
            Shape::GsNd => {
                w_hat = sweep(&sides.w, &sides.w0, &gv)?;
                let ngw = relax_gamma(tw, &gw, &w_hat, gw_local)?;
                v_hat = sweep(&sides.v, &sides.v0, &ngw)?;
                (relax_gamma(tv, &gv, &v_hat, gv_local)?, ngw)
            }
        };
        let term = Termination::compute(problem, config, gw.last(), new_gw.last(), new_gw.value(0));
        gv = new_gv;
        gw = new_gw;
        if record {
            let v = iterate(&v_hat, &gv, gv_local);
            let w = iterate(&w_hat, &gw, gw_local);
            history.push(
                v.iter()
                    .zip(&w)
                    .map(|(a, b)| problem.partition.join(a, b))
                    .collect(),
            );
            realized.push(RealizedSplitting::constant(
                shape,
                problem.grid_v.steps(),
                problem.method.steps(),
                (tv, tw),
            ));
        }
        records.push(IterationRecord {
            k,
            update_norm: term.update,
            interface_error: term.error,
            wall_time: elapsed(start),
            shape_log: vec![LocalShape::from_shape(shape); union_len],
        });
        if term.converged {
            converged = true;
            break;
        }
    }

    let method = match shape {
        Shape::Jacobi => Method::Jacobi,
        Shape::GsDn => Method::GsDn,
        Shape::GsNd => Method::GsNd,
    };
    Ok(WRResult {
        method,
        v: Waveform::from_grid(&problem.grid_v, iterate(&v_hat, &gv, gv_local))?,
        w: Waveform::from_grid(&problem.grid_w, iterate(&w_hat, &gw, gw_local))?,
        records,
        converged,
        trace: None,
        history,
        realized,
    })
}
