//! Asynchronous WR: both subsolvers step concurrently and push every new
//! time point into the peer's window.

use std::sync::Arc;
use std::thread;
use std::time::Instant;

use super::sync::iterate;
use super::{
    elapsed, gamma_of, relax_vec, AsyncRelaxation, CoupledProblem, IterationRecord, LocalShape,
    Method, RealizedSplitting, RealizedStep, Termination, WRConfig, WRResult,
};
use crate::error::{Error, Result};
use crate::interp::{bracket, enclosing_interval, lerp, Bracket, UnionGrid, Waveform};
use crate::model::Shape;
use crate::rma::{Action, Collective, LockKind, RmaError, Scheduler, Window};
use crate::timeint::{GridTime, SplitStepper, TimeGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mark {
    Jacobi,
    Gs,
}

struct Shared<'a> {
    problem: &'a CoupledProblem,
    config: &'a WRConfig,
    sched: Scheduler,
    coll: Collective,
    /// Window `a` is owned by actor `a` and receives the peer's data.
    windows: [Arc<Window>; 2],
    union: UnionGrid,
    start: Instant,
}

#[derive(Default)]
struct ActorOutput {
    hat: Vec<Vec<f64>>,
    relaxed_own: Vec<Vec<f64>>,
    records: Vec<IterationRecord>,
    converged: bool,
    history: Vec<Vec<Vec<f64>>>,
    fresh: Vec<Vec<Vec<bool>>>,
    theta_peer: Vec<Vec<f64>>,
}

/// Per-actor state. Actor 0 owns v, actor 1 owns w.
struct Actor<'a> {
    id: usize,
    sh: &'a Shared<'a>,
    stepper: SplitStepper,
    own_grid: TimeGrid,
    peer_grid: TimeGrid,
    peer_points: Vec<GridTime>,
    own_gamma: Vec<usize>,
    peer_width: usize,
    own_union: Vec<usize>,
    peer_union: Vec<usize>,
    /// Relaxed own exchanged data on the own grid.
    own_relaxed: Vec<Vec<f64>>,
    /// Interpolant of the peer's exchanged data on the union grid.
    i_peer: Vec<Vec<f64>>,
    i_prev: Vec<Vec<f64>>,
    marks: Vec<Option<Mark>>,
    relaxed: Vec<bool>,
    theta_used: Vec<f64>,
    hat: Vec<Vec<f64>>,
    fresh: Vec<Vec<bool>>,
    out: ActorOutput,
}

fn interp_slots(points: &[GridTime], slots: &[Vec<f64>], width: usize, t: GridTime) -> Vec<f64> {
    match bracket(points, t) {
        Bracket::At(i) => slots[i][..width].to_vec(),
        Bracket::Between(i, w) => lerp(&slots[i][..width], &slots[i + 1][..width], w),
    }
}

fn fresh_at(points: &[GridTime], slots: &[Vec<f64>], width: usize, t: GridTime) -> bool {
    match bracket(points, t) {
        Bracket::At(i) => slots[i][width] == 1.0,
        Bracket::Between(i, _) => slots[i][width] == 1.0 && slots[i + 1][width] == 1.0,
    }
}

impl<'a> Actor<'a> {
    fn new(id: usize, sh: &'a Shared<'a>) -> Result<Self> {
        let p = sh.problem;
        let part = &p.partition;
        let (own, peer_gamma, own_grid, peer_grid, own_gamma, peer_guess, own_guess) = if id == 0 {
            (
                &part.v_indices,
                &part.gamma_w,
                p.grid_v,
                p.grid_w,
                p.gamma_v_local.clone(),
                &p.guess_w,
                &p.guess_v,
            )
        } else {
            (
                &part.w_indices,
                &part.gamma_v,
                p.grid_w,
                p.grid_v,
                p.gamma_w_local.clone(),
                &p.guess_v,
                &p.guess_w,
            )
        };
        let stepper = SplitStepper::new(&p.system, own, peer_gamma, &p.method, own_grid)?;
        let x0: Vec<f64> = own.iter().map(|&i| p.system.u0[i]).collect();
        let index = |g: &TimeGrid| -> Vec<usize> {
            g.points()
                .into_iter()
                .map(|t| sh.union.index_of(t).expect("union contains grid"))
                .collect()
        };
        let i_peer: Vec<Vec<f64>> = sh
            .union
            .points()
            .iter()
            .map(|&t| peer_guess.eval_at(t))
            .collect::<Result<_>>()?;
        let len = sh.union.len();
        Ok(Self {
            id,
            sh,
            stepper,
            own_grid,
            peer_grid,
            peer_points: peer_grid.points(),
            own_gamma,
            peer_width: peer_gamma.len(),
            own_union: index(&own_grid),
            peer_union: index(&peer_grid),
            own_relaxed: own_guess.values().to_vec(),
            i_prev: i_peer.clone(),
            i_peer,
            marks: vec![None; len],
            relaxed: vec![false; len],
            theta_used: vec![1.0; len],
            hat: vec![x0; own_grid.steps() + 1],
            fresh: vec![Vec::new(); own_grid.steps()],
            out: ActorOutput::default(),
        })
    }

    fn peer(&self) -> usize {
        1 - self.id
    }

    fn own_window(&self) -> &Window {
        &self.sh.windows[self.id]
    }

    /// Shape seen when this actor consumed fresh peer data.
    fn own_gs_shape(&self) -> Shape {
        if self.id == 0 {
            Shape::GsNd
        } else {
            Shape::GsDn
        }
    }

    fn peer_gs_shape(&self) -> Shape {
        if self.id == 0 {
            Shape::GsDn
        } else {
            Shape::GsNd
        }
    }

    fn peer_data_theta(&self, shape: Shape) -> f64 {
        let (tv, tw) = self.sh.config.relax.pair(shape);
        if self.id == 0 {
            tw
        } else {
            tv
        }
    }

    fn own_data_theta(&self, shape: Shape) -> f64 {
        let (tv, tw) = self.sh.config.relax.pair(shape);
        if self.id == 0 {
            tv
        } else {
            tw
        }
    }

    fn variable(&self) -> bool {
        self.sh.config.async_relax == AsyncRelaxation::Variable
    }

    fn relax_point(&mut self, p: usize, k: usize, theta: f64, new: &[f64]) -> Result<()> {
        if self.relaxed[p] {
            return Err(Error::RelaxConflict {
                point: p,
                iteration: k,
            });
        }
        self.i_peer[p] = relax_vec(theta, &self.i_prev[p], new);
        self.relaxed[p] = true;
        self.theta_used[p] = theta;
        Ok(())
    }

    /// One time step of sweep `k`.
    fn step(&mut self, n: usize, k: usize) -> Result<()> {
        let sh = self.sh;
        let (t0, t1) = (self.own_grid.point(n), self.own_grid.point(n + 1));
        sh.sched.gate(self.id, Action::Sync, self.id, n, k, t1)?;
        self.own_window().sync(self.id)?;
        let iv = enclosing_interval(&self.peer_grid, t0, t1)?;
        let slots: Vec<Vec<f64>> = (iv.index_minus..=iv.index_plus)
            .map(|j| self.own_window().read_private(self.id, j))
            .collect::<std::result::Result<_, _>>()?;
        let pts = self.peer_points[iv.index_minus..=iv.index_plus].to_vec();
        let pts = &pts[..];
        let w = self.peer_width;
        let ahead = slots.last().expect("non-empty interval")[w] == 1.0;
        let range = sh.union.range(iv.t_minus, iv.t_plus);
        for p in range.clone() {
            if p > 0 && self.marks[p].is_none() {
                self.marks[p] = Some(if ahead { Mark::Gs } else { Mark::Jacobi });
            }
        }

        let (a, b, fresh) = if self.variable() {
            if ahead {
                for p in range {
                    if p == 0 || self.relaxed[p] {
                        continue;
                    }
                    let shape = match self.marks[p] {
                        Some(Mark::Gs) => self.own_gs_shape(),
                        _ => Shape::Jacobi,
                    };
                    let new = interp_slots(pts, &slots, w, sh.union.points()[p]);
                    self.relax_point(p, k, self.peer_data_theta(shape), &new)?;
                }
            }
            let (u0, u1) = (self.own_union[n], self.own_union[n + 1]);
            (
                self.i_peer[u0].clone(),
                self.i_peer[u1].clone(),
                vec![self.relaxed[u0], self.relaxed[u1]],
            )
        } else {
            (
                interp_slots(pts, &slots, w, t0),
                interp_slots(pts, &slots, w, t1),
                vec![fresh_at(pts, &slots, w, t0), fresh_at(pts, &slots, w, t1)],
            )
        };
        self.fresh[n] = fresh;

        let x = self.stepper.step(n, &[&self.hat[n]], &[&a, &b])?;
        let own = gamma_of(&x, &self.own_gamma);
        let mut payload = if self.variable() {
            own
        } else {
            let r = relax_vec(
                self.own_data_theta(Shape::Jacobi),
                &self.own_relaxed[n + 1],
                &own,
            );
            self.own_relaxed[n + 1] = r.clone();
            r
        };
        payload.push(1.0);
        self.hat[n + 1] = x;

        sh.sched.gate(self.id, Action::Put, self.peer(), n, k, t1)?;
        let mut epoch = sh.windows[self.peer()].lock(self.id, LockKind::Exclusive)?;
        epoch.put(n + 1, &payload)?;
        epoch.unlock()?;
        Ok(())
    }

    /// End of sweep `k`: remaining relaxation, exchange, termination check.
    fn finalize(&mut self, k: usize) -> Result<bool> {
        let sh = self.sh;
        let (id, w) = (self.id, self.peer_width);
        sh.sched.barrier(id, k)?;
        self.own_window().sync(id)?;
        let all = self.own_window().read_private_all(id)?;
        if let Some(j) = (1..all.len()).find(|&j| all[j][w] != 1.0) {
            return Err(Error::Protocol(format!(
                "peer point {j} missing after sweep {k}"
            )));
        }

        let own_gs: Vec<f64> = (0..self.marks.len())
            .filter(|&p| self.marks[p] == Some(Mark::Gs))
            .map(|p| p as f64)
            .collect();
        let sets = sh.coll.allgather(&sh.sched, id, k, own_gs)?;
        let mut peer_gs = vec![false; self.marks.len()];
        for &p in &sets[self.peer()] {
            peer_gs[p as usize] = true;
        }
        let union_pts = sh.union.points();
        if self.variable() {
            let theta_gs = self.peer_data_theta(self.peer_gs_shape());
            let theta_j = self.peer_data_theta(Shape::Jacobi);
            for pass_gs in [true, false] {
                for p in 1..union_pts.len() {
                    if !self.relaxed[p] && (peer_gs[p] || !pass_gs) {
                        let new = interp_slots(&self.peer_points, &all, w, union_pts[p]);
                        self.relax_point(p, k, if pass_gs { theta_gs } else { theta_j }, &new)?;
                    }
                }
            }
            let flat: Vec<f64> = self.i_peer.concat();
            let gathered = sh.coll.allgather(&sh.sched, id, k, flat)?;
            let mine = &gathered[self.peer()];
            let g = self.own_gamma.len();
            for (n, &u) in self.own_union.iter().enumerate() {
                self.own_relaxed[n] = mine[u * g..(u + 1) * g].to_vec();
            }
        } else {
            let theta = self.peer_data_theta(Shape::Jacobi);
            for p in 0..union_pts.len() {
                self.i_peer[p] = interp_slots(&self.peer_points, &all, w, union_pts[p]);
                self.theta_used[p] = theta;
            }
        }

        let last = union_pts.len() - 1;
        let msg = if id == 0 {
            Termination::compute(
                sh.problem,
                sh.config,
                &self.i_prev[last],
                &self.i_peer[last],
                &self.i_peer[0],
            )
            .to_vec()
        } else {
            Vec::new()
        };
        let term = Termination::from_slice(&sh.coll.allgather(&sh.sched, id, k, msg)?[0])?;

        if id == 0 {
            let shape_log = (0..union_pts.len())
                .map(|p| {
                    let a0 = self.marks[p] == Some(Mark::Gs);
                    let a1 = peer_gs[p];
                    match (a0, a1) {
                        (true, true) => LocalShape::Mixed,
                        (true, false) => LocalShape::GsNd,
                        (false, true) => LocalShape::GsDn,
                        (false, false) => LocalShape::Jacobi,
                    }
                })
                .collect();
            self.out.records.push(IterationRecord {
                k,
                update_norm: term.update,
                interface_error: term.error,
                wall_time: elapsed(sh.start),
                shape_log,
            });
        }
        if sh.config.record_history && sh.problem.matching_grids() {
            let relaxed = Waveform::from_grid(&self.own_grid, self.own_relaxed.clone())?;
            self.out
                .history
                .push(iterate(&self.hat, &relaxed, &self.own_gamma));
            self.out.fresh.push(self.fresh.clone());
            self.out.theta_peer.push(
                self.peer_union
                    .iter()
                    .map(|&u| self.theta_used[u])
                    .collect(),
            );
        }

        for (j, slot) in all.iter().enumerate().skip(1) {
            let mut cleared = slot.clone();
            cleared[w] = 0.0;
            self.own_window().local_write(id, j, &cleared)?;
        }
        self.i_prev = self.i_peer.clone();
        self.marks.iter_mut().for_each(|m| *m = None);
        self.relaxed.iter_mut().for_each(|r| *r = false);
        self.theta_used.iter_mut().for_each(|t| *t = 1.0);
        sh.sched.barrier(id, k)?;
        Ok(term.converged)
    }

    fn run(mut self) -> Result<ActorOutput> {
        let kmax = self.sh.config.kmax;
        for k in 0..kmax {
            for n in 0..self.own_grid.steps() {
                self.step(n, k)?;
            }
            if self.finalize(k)? {
                self.out.converged = true;
                break;
            }
        }
        self.out.hat = self.hat;
        self.out.relaxed_own = self.own_relaxed;
        Ok(self.out)
    }
}

fn actor_main(id: usize, sh: &Shared<'_>) -> Result<ActorOutput> {
    let res = Actor::new(id, sh).and_then(Actor::run);
    if let Err(e) = &res {
        if !matches!(e, Error::Rma(RmaError::Aborted(_))) {
            let err = match e {
                Error::Rma(r) => r.clone(),
                other => RmaError::Aborted(format!("actor {id}: {other}")),
            };
            sh.sched.abort(err);
        }
    }
    sh.sched.finish(id);
    res
}

/// Asynchronous WR under the configured schedule.
pub fn run_async(problem: &CoupledProblem, config: &WRConfig) -> Result<WRResult> {
    config.validate()?;
    problem.check_method()?;
    let sched = match &config.replay {
        Some(t) => Scheduler::replaying(t.clone(), config.schedule.clone(), 2)?,
        None => Scheduler::new(config.schedule.clone(), 2),
    };
    let make_window = |owner: usize, guess: &Waveform| -> Result<Arc<Window>> {
        let mut init = guess.value(0).to_vec();
        init.push(0.0);
        let win = Window::new(owner, guess.len(), init.len(), &init);
        for j in 0..guess.len() {
            let mut slot = guess.value(j).to_vec();
            slot.push(0.0);
            win.local_write(owner, j, &slot)?;
        }
        Ok(win)
    };
    let shared = Shared {
        problem,
        config,
        sched,
        coll: Collective::new(2),
        windows: [
            make_window(0, &problem.guess_w)?,
            make_window(1, &problem.guess_v)?,
        ],
        union: problem.union_grid()?,
        start: Instant::now(),
    };

    let (r0, r1) = thread::scope(|s| {
        let h0 = s.spawn(|| actor_main(0, &shared));
        let h1 = s.spawn(|| actor_main(1, &shared));
        (h0.join(), h1.join())
    });
    let join = |r: thread::Result<Result<ActorOutput>>| {
        r.unwrap_or_else(|_| Err(Error::Protocol("actor thread panicked".into())))
    };
    let (r0, r1) = (join(r0), join(r1));
    let (a0, a1) = match (r0, r1) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), Err(f)) => {
            return Err(if matches!(e, Error::Rma(RmaError::Aborted(_))) {
                f
            } else {
                e
            });
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    shared.sched.check_replay_complete()?;

    let gv = Waveform::from_grid(&problem.grid_v, a0.relaxed_own.clone())?;
    let gw = Waveform::from_grid(&problem.grid_w, a1.relaxed_own.clone())?;
    let mut history = Vec::new();
    let mut realized = Vec::new();
    if config.record_history && problem.matching_grids() {
        history.push(problem.initial_iterate());
        for (hv, hw) in a0.history.iter().zip(&a1.history) {
            history.push(
                hv.iter()
                    .zip(hw)
                    .map(|(v, w)| problem.partition.join(v, w))
                    .collect(),
            );
        }
        for k in 0..a0.fresh.len() {
            realized.push(RealizedSplitting {
                steps: a0.fresh[k]
                    .iter()
                    .zip(&a1.fresh[k])
                    .map(|(fv, fw)| RealizedStep {
                        fresh_v_row: fv.clone(),
                        fresh_w_row: fw.clone(),
                    })
                    .collect(),
                theta_v: a1.theta_peer[k].clone(),
                theta_w: a0.theta_peer[k].clone(),
            });
        }
    }
    Ok(WRResult {
        method: Method::Async,
        v: Waveform::from_grid(
            &problem.grid_v,
            iterate(&a0.hat, &gv, &problem.gamma_v_local),
        )?,
        w: Waveform::from_grid(
            &problem.grid_w,
            iterate(&a1.hat, &gw, &problem.gamma_w_local),
        )?,
        records: a0.records,
        converged: a0.converged && a1.converged,
        trace: Some(shared.sched.trace()),
        history,
        realized,
    })
}
