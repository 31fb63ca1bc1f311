use std::fmt;
use std::str::FromStr;
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trace::{Trace, TraceEvent};
use super::RmaError;
use crate::timeint::GridTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Sync,
    Put,
    Barrier,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Sync => "sync",
            Action::Put => "put",
            Action::Barrier => "barrier",
        })
    }
}

/// How decision points of concurrent actors are ordered.
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleMode {
    /// Native thread scheduling; nothing is gated.
    Free,
    /// Both actors finish a step before either starts the next one.
    Lockstep,
    /// Actor 0 always proceeds when it can.
    P0Ahead,
    /// Actor 1 always proceeds when it can.
    P1Ahead,
    /// Virtual clocks with seeded per-step costs `cost * (1 + jitter * U[0,1))`.
    Seeded {
        seed: u64,
        jitter: f64,
        costs: [f64; 2],
    },
}

impl ScheduleMode {
    pub fn seeded(seed: u64) -> Self {
        ScheduleMode::Seeded {
            seed,
            jitter: 1.0,
            costs: [1.0, 1.0],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScheduleMode::Free => "free",
            ScheduleMode::Lockstep => "lockstep",
            ScheduleMode::P0Ahead => "p0-ahead",
            ScheduleMode::P1Ahead => "p1-ahead",
            ScheduleMode::Seeded { .. } => "seeded",
        }
    }
}

impl FromStr for ScheduleMode {
    type Err = RmaError;
    fn from_str(s: &str) -> Result<Self, RmaError> {
        match s {
            "free" => Ok(ScheduleMode::Free),
            "lockstep" => Ok(ScheduleMode::Lockstep),
            "p0-ahead" | "process0_ahead" => Ok(ScheduleMode::P0Ahead),
            "p1-ahead" | "process1_ahead" => Ok(ScheduleMode::P1Ahead),
            "seeded" => Ok(ScheduleMode::seeded(0)),
            other => Err(RmaError::TraceFormat(format!("unknown schedule `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Request {
    action: Action,
    target: usize,
    step: usize,
    iteration: usize,
    end: GridTime,
}

impl Request {
    fn event(&self, actor: usize) -> TraceEvent {
        TraceEvent {
            actor,
            action: self.action,
            target: self.target,
            step: self.step,
            iteration: self.iteration,
        }
    }
}

struct State {
    live: Vec<bool>,
    pending: Vec<Option<Request>>,
    granted: Vec<bool>,
    at_barrier: Vec<bool>,
    barrier_iteration: Vec<usize>,
    generation: u64,
    aborted: Option<RmaError>,
    trace: Vec<TraceEvent>,
    replay: Option<Vec<TraceEvent>>,
    position: usize,
    clocks: Vec<f64>,
    put_time: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
}

/// Serializes the decision points (sync, put, barrier) of `n` actors.
///
/// In every gated mode a decision is taken only once all live actors wait at
/// a decision point, so the order depends on the program and the policy alone.
pub struct Scheduler {
    mode: ScheduleMode,
    timeout: Duration,
    st: Mutex<State>,
    cv: Condvar,
}

impl fmt::Debug for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scheduler")
            .field("mode", &self.mode)
            .finish()
    }
}

impl Scheduler {
    pub fn new(mode: ScheduleMode, actors: usize) -> Self {
        let seed = match mode {
            ScheduleMode::Seeded { seed, .. } => seed,
            _ => 0,
        };
        let rngs = (0..actors)
            .map(|a| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(a as u64);
                r
            })
            .collect();
        Self {
            mode,
            timeout: Duration::from_secs(60),
            st: Mutex::new(State {
                live: vec![true; actors],
                pending: vec![None; actors],
                granted: vec![false; actors],
                at_barrier: vec![false; actors],
                barrier_iteration: vec![0; actors],
                generation: 0,
                aborted: None,
                trace: Vec::new(),
                replay: None,
                position: 0,
                clocks: vec![0.0; actors],
                put_time: vec![0.0; actors],
                rngs,
            }),
            cv: Condvar::new(),
        }
    }

    /// Scheduler that enforces a recorded order. The trace must come from a
    /// gated run in the same mode.
    pub fn replaying(trace: Trace, mode: ScheduleMode, actors: usize) -> Result<Self, RmaError> {
        if trace.mode != mode.name() {
            return Err(RmaError::ModeMismatch {
                trace: trace.mode,
                requested: mode.name().into(),
            });
        }
        if mode == ScheduleMode::Free {
            return Err(RmaError::NotReplayable(
                "free-mode traces are not reproducible".into(),
            ));
        }
        let s = Self::new(mode, actors);
        s.state().replay = Some(trace.events);
        Ok(s)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn mode(&self) -> &ScheduleMode {
        &self.mode
    }

    pub fn is_gated(&self) -> bool {
        self.mode != ScheduleMode::Free
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.st.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Blocks until the scheduler lets `actor` perform `action`.
    pub fn gate(
        &self,
        actor: usize,
        action: Action,
        target: usize,
        step: usize,
        iteration: usize,
        end: GridTime,
    ) -> Result<(), RmaError> {
        let req = Request {
            action,
            target,
            step,
            iteration,
            end,
        };
        let mut st = self.state();
        if let Some(e) = &st.aborted {
            return Err(e.clone());
        }
        if !self.is_gated() {
            st.trace.push(req.event(actor));
            return Ok(());
        }
        st.pending[actor] = Some(req);
        self.decide(&mut st);
        let (mut st, res) = self
            .cv
            .wait_timeout_while(st, self.timeout, |s| {
                !s.granted[actor] && s.aborted.is_none()
            })
            .unwrap_or_else(|e| e.into_inner());
        if let Some(e) = &st.aborted {
            return Err(e.clone());
        }
        if res.timed_out() && !st.granted[actor] {
            let err = RmaError::Deadlock(format!(
                "actor {actor} not scheduled within {:?}",
                self.timeout
            ));
            st.aborted = Some(err.clone());
            self.cv.notify_all();
            return Err(err);
        }
        st.granted[actor] = false;
        Ok(())
    }

    /// Waits until all live actors reach a barrier.
    pub fn barrier(&self, actor: usize, iteration: usize) -> Result<(), RmaError> {
        let mut st = self.state();
        if let Some(e) = &st.aborted {
            return Err(e.clone());
        }
        let generation = st.generation;
        st.at_barrier[actor] = true;
        st.barrier_iteration[actor] = iteration;
        self.decide(&mut st);
        let (mut st, res) = self
            .cv
            .wait_timeout_while(st, self.timeout, |s| {
                s.generation == generation && s.aborted.is_none()
            })
            .unwrap_or_else(|e| e.into_inner());
        if st.generation != generation {
            return Ok(());
        }
        if let Some(e) = &st.aborted {
            return Err(e.clone());
        }
        debug_assert!(res.timed_out());
        let err = RmaError::Deadlock(format!("actor {actor} stuck at barrier"));
        st.aborted = Some(err.clone());
        self.cv.notify_all();
        Err(err)
    }

    /// Marks `actor` as done; it no longer takes part in decisions.
    pub fn finish(&self, actor: usize) {
        let mut st = self.state();
        st.live[actor] = false;
        st.pending[actor] = None;
        st.at_barrier[actor] = false;
        self.decide(&mut st);
    }

    /// Aborts the run; every waiting or future call fails with `err`.
    pub fn abort(&self, err: RmaError) {
        let mut st = self.state();
        if st.aborted.is_none() {
            st.aborted = Some(err);
        }
        self.cv.notify_all();
    }

    pub fn trace(&self) -> Trace {
        Trace {
            mode: self.mode.name().into(),
            events: self.state().trace.clone(),
        }
    }

    /// Errors if a replayed trace has entries the program never reached.
    pub fn check_replay_complete(&self) -> Result<(), RmaError> {
        let st = self.state();
        match &st.replay {
            Some(ev) if st.position < ev.len() => Err(RmaError::Mismatch {
                position: st.position,
                expected: ev[st.position].to_string(),
                found: "end of program".into(),
            }),
            _ => Ok(()),
        }
    }

    fn decide(&self, st: &mut State) {
        if st.aborted.is_some() {
            self.cv.notify_all();
            return;
        }
        let n = st.live.len();
        let running = (0..n).any(|a| st.live[a] && st.pending[a].is_none() && !st.at_barrier[a]);
        if running {
            return;
        }
        let candidates: Vec<usize> = (0..n).filter(|&a| st.pending[a].is_some()).collect();
        if let Some(events) = &st.replay {
            let pos = st.position;
            let found = match candidates.first() {
                Some(&a) => st.pending[a].unwrap().event(a).to_string(),
                None => format!(
                    "barrier of {} actors",
                    st.at_barrier.iter().filter(|b| **b).count()
                ),
            };
            let mismatch = |expected: String| RmaError::Mismatch {
                position: pos,
                expected,
                found: found.clone(),
            };
            let Some(next) = events.get(pos).cloned() else {
                if !candidates.is_empty() || st.at_barrier.iter().any(|b| *b) {
                    st.aborted = Some(mismatch("end of trace".into()));
                    self.cv.notify_all();
                }
                return;
            };
            if next.action == Action::Barrier {
                if !candidates.is_empty() {
                    st.aborted = Some(mismatch(next.to_string()));
                    self.cv.notify_all();
                    return;
                }
                let arrived: Vec<usize> = (0..n).filter(|&a| st.at_barrier[a]).collect();
                let expected: Vec<TraceEvent> = arrived
                    .iter()
                    .map(|&a| TraceEvent {
                        actor: a,
                        action: Action::Barrier,
                        target: a,
                        step: 0,
                        iteration: st.barrier_iteration[a],
                    })
                    .collect();
                if events.get(pos..pos + expected.len()) != Some(&expected[..]) {
                    st.aborted = Some(mismatch(next.to_string()));
                    self.cv.notify_all();
                    return;
                }
                self.release_barrier(st);
                return;
            }
            match st.pending.get(next.actor).copied().flatten() {
                Some(req) if req.event(next.actor) == next => self.grant(st, next.actor),
                _ => {
                    st.aborted = Some(mismatch(next.to_string()));
                    self.cv.notify_all();
                }
            }
            return;
        }
        if candidates.is_empty() {
            if st.at_barrier.iter().any(|b| *b) {
                self.release_barrier(st);
            }
            return;
        }
        let req = |a: usize| st.pending[a].unwrap();
        let chosen = match &self.mode {
            ScheduleMode::Free | ScheduleMode::Lockstep => *candidates
                .iter()
                .min_by_key(|&&a| {
                    let r = req(a);
                    (r.iteration, r.end, r.action == Action::Put, a)
                })
                .unwrap(),
            ScheduleMode::P0Ahead => candidates[0],
            ScheduleMode::P1Ahead => *candidates.iter().max().unwrap(),
            ScheduleMode::Seeded { .. } => {
                let ts = |a: usize| match req(a).action {
                    Action::Put => st.put_time[a],
                    _ => st.clocks[a],
                };
                *candidates
                    .iter()
                    .min_by(|&&a, &&b| ts(a).total_cmp(&ts(b)).then(a.cmp(&b)))
                    .unwrap()
            }
        };
        self.grant(st, chosen);
    }

    fn grant(&self, st: &mut State, a: usize) {
        let req = st.pending[a].take().expect("pending request");
        if st.replay.is_some() {
            st.position += 1;
        }
        st.trace.push(req.event(a));
        if let ScheduleMode::Seeded { jitter, costs, .. } = &self.mode {
            match req.action {
                Action::Sync => {
                    let u: f64 = st.rngs[a].random();
                    let cost = costs[a.min(1)] * (1.0 + jitter * u);
                    st.put_time[a] = st.clocks[a] + cost;
                }
                Action::Put => st.clocks[a] = st.put_time[a],
                Action::Barrier => {}
            }
        }
        st.granted[a] = true;
        self.cv.notify_all();
    }

    fn release_barrier(&self, st: &mut State) {
        let n = st.live.len();
        let latest = st.clocks.iter().copied().fold(0.0, f64::max);
        for a in 0..n {
            if st.at_barrier[a] {
                st.trace.push(TraceEvent {
                    actor: a,
                    action: Action::Barrier,
                    target: a,
                    step: 0,
                    iteration: st.barrier_iteration[a],
                });
                if st.replay.is_some() {
                    st.position += 1;
                }
                st.at_barrier[a] = false;
                st.clocks[a] = latest;
                st.put_time[a] = latest;
            }
        }
        st.generation += 1;
        self.cv.notify_all();
    }
}

/// All-gather over a barrier-synchronized shared slot per actor.
#[derive(Debug)]
pub struct Collective {
    slots: Mutex<Vec<Vec<f64>>>,
}

impl Collective {
    pub fn new(actors: usize) -> Self {
        Self {
            slots: Mutex::new(vec![Vec::new(); actors]),
        }
    }

    pub fn allgather(
        &self,
        sched: &Scheduler,
        actor: usize,
        iteration: usize,
        data: Vec<f64>,
    ) -> Result<Vec<Vec<f64>>, RmaError> {
        self.slots.lock().unwrap_or_else(|e| e.into_inner())[actor] = data;
        sched.barrier(actor, iteration)?;
        let all = self.slots.lock().unwrap_or_else(|e| e.into_inner()).clone();
        sched.barrier(actor, iteration)?;
        Ok(all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::thread;

    fn run(mode: ScheduleMode, replay: Option<Trace>) -> Result<Trace, RmaError> {
        let sched = Arc::new(match replay {
            Some(t) => Scheduler::replaying(t, mode, 2)?,
            None => Scheduler::new(mode, 2),
        });
        let handles: Vec<_> = (0..2)
            .map(|a| {
                let s = Arc::clone(&sched);
                thread::spawn(move || -> Result<(), RmaError> {
                    let r = (|| {
                        for n in 0..4 {
                            let end = GridTime::new(n as u64 + 1, 4);
                            s.gate(a, Action::Sync, a, n, 0, end)?;
                            s.gate(a, Action::Put, 1 - a, n, 0, end)?;
                        }
                        s.barrier(a, 0)
                    })();
                    if let Err(e) = &r {
                        s.abort(e.clone());
                    }
                    s.finish(a);
                    r
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap()?;
        }
        sched.check_replay_complete()?;
        Ok(sched.trace())
    }

    #[test]
    fn lockstep_alternates_phases() {
        let t = run(ScheduleMode::Lockstep, None).unwrap();
        let head: Vec<String> = t.events.iter().take(4).map(|e| e.to_string()).collect();
        assert_eq!(
            head,
            ["0,sync,0,0,0", "1,sync,1,0,0", "0,put,1,0,0", "1,put,0,0,0"]
        );
    }

    #[test]
    fn p0_ahead_runs_actor_zero_first() {
        let t = run(ScheduleMode::P0Ahead, None).unwrap();
        assert!(t.events[..8].iter().all(|e| e.actor == 0));
    }

    #[test]
    fn seeded_is_deterministic_and_replayable() {
        let a = run(ScheduleMode::seeded(7), None).unwrap();
        let b = run(ScheduleMode::seeded(7), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(run(ScheduleMode::seeded(7), Some(a.clone())).unwrap(), a);
    }

    #[test]
    fn mutated_trace_is_rejected() {
        let mut t = run(ScheduleMode::Lockstep, None).unwrap();
        t.events[2].step = 3;
        assert!(matches!(
            run(ScheduleMode::Lockstep, Some(t)),
            Err(RmaError::Mismatch { .. })
        ));
    }

    #[test]
    fn mode_mismatch_and_free_replay_rejected() {
        let t = run(ScheduleMode::Lockstep, None).unwrap();
        assert!(matches!(
            Scheduler::replaying(t, ScheduleMode::Free, 2),
            Err(RmaError::ModeMismatch { .. })
        ));
        let f = run(ScheduleMode::Free, None).unwrap();
        assert!(matches!(
            Scheduler::replaying(f, ScheduleMode::Free, 2),
            Err(RmaError::NotReplayable(_))
        ));
    }

    #[test]
    fn allgather_collects_every_slot() {
        let sched = Arc::new(Scheduler::new(ScheduleMode::Free, 2));
        let coll = Arc::new(Collective::new(2));
        let hs: Vec<_> = (0..2)
            .map(|a| {
                let (s, c) = (Arc::clone(&sched), Arc::clone(&coll));
                thread::spawn(move || c.allgather(&s, a, 0, vec![a as f64]).unwrap())
            })
            .collect();
        for h in hs {
            assert_eq!(h.join().unwrap(), vec![vec![0.0], vec![1.0]]);
        }
    }
}
