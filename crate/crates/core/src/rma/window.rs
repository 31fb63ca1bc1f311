use std::collections::VecDeque;
use std::hash::{DefaultHasher, Hasher};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use super::RmaError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LockKind {
    Shared,
    Exclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LockState {
    Unlocked,
    Shared(usize),
    Exclusive(usize),
}

#[derive(Debug)]
struct State {
    public: Vec<f64>,
    private: Vec<f64>,
    public_sums: Vec<u64>,
    private_sums: Vec<u64>,
    lock: LockState,
    queue: VecDeque<(u64, LockKind)>,
    next_ticket: u64,
}

/// A window of `slots` fixed-length slots exposed by its owner.
#[derive(Debug)]
pub struct Window {
    owner: usize,
    slot_len: usize,
    slots: usize,
    timeout: Duration,
    state: Mutex<State>,
    cv: Condvar,
}

fn checksum(data: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    for x in data {
        h.write_u64(x.to_bits());
    }
    h.finish()
}

impl Window {
    pub fn new(owner: usize, slots: usize, slot_len: usize, init: &[f64]) -> Arc<Self> {
        Self::with_timeout(owner, slots, slot_len, init, Duration::from_secs(60))
    }

    /// `init` is copied into every slot of both copies.
    pub fn with_timeout(
        owner: usize,
        slots: usize,
        slot_len: usize,
        init: &[f64],
        timeout: Duration,
    ) -> Arc<Self> {
        assert_eq!(init.len(), slot_len, "initial slot has wrong length");
        let public: Vec<f64> = (0..slots).flat_map(|_| init.iter().copied()).collect();
        let sums = vec![checksum(init); slots];
        Arc::new(Self {
            owner,
            slot_len,
            slots,
            timeout,
            state: Mutex::new(State {
                private: public.clone(),
                public,
                public_sums: sums.clone(),
                private_sums: sums,
                lock: LockState::Unlocked,
                queue: VecDeque::new(),
                next_ticket: 0,
            }),
            cv: Condvar::new(),
        })
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn slot_len(&self) -> usize {
        self.slot_len
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn check_slot(&self, slot: usize, len: usize) -> Result<(), RmaError> {
        if slot >= self.slots {
            return Err(RmaError::OutOfRange {
                slot,
                slots: self.slots,
            });
        }
        if len != self.slot_len {
            return Err(RmaError::PayloadLength {
                expected: self.slot_len,
                got: len,
            });
        }
        Ok(())
    }

    fn check_owner(&self, actor: usize) -> Result<(), RmaError> {
        if actor != self.owner {
            return Err(RmaError::NotOwner {
                actor,
                owner: self.owner,
            });
        }
        Ok(())
    }

    /// Starts an access epoch. Grants are FIFO; shared epochs coexist.
    pub fn lock(self: &Arc<Self>, actor: usize, kind: LockKind) -> Result<Epoch, RmaError> {
        let mut st = self.state();
        let ticket = st.next_ticket;
        st.next_ticket += 1;
        st.queue.push_back((ticket, kind));
        let grantable = |st: &State| {
            st.queue.front().map(|t| t.0) == Some(ticket)
                && match (kind, st.lock) {
                    (_, LockState::Unlocked) => true,
                    (LockKind::Shared, LockState::Shared(_)) => true,
                    _ => false,
                }
        };
        let (mut st, res) = self
            .cv
            .wait_timeout_while(st, self.timeout, |st| !grantable(st))
            .unwrap_or_else(|e| e.into_inner());
        if res.timed_out() && !grantable(&st) {
            st.queue.retain(|t| t.0 != ticket);
            self.cv.notify_all();
            return Err(RmaError::Deadlock(format!(
                "actor {actor} waited {:?} for a {kind:?} lock on window {}",
                self.timeout, self.owner
            )));
        }
        st.queue.pop_front();
        st.lock = match (kind, st.lock) {
            (LockKind::Exclusive, _) => LockState::Exclusive(actor),
            (LockKind::Shared, LockState::Shared(n)) => LockState::Shared(n + 1),
            (LockKind::Shared, _) => LockState::Shared(1),
        };
        drop(st);
        // A following shared request may now be grantable too.
        self.cv.notify_all();
        Ok(Epoch {
            window: Arc::clone(self),
            actor,
            kind,
            pending: Vec::new(),
            open: true,
        })
    }

    fn release(&self, pending: &mut Vec<(usize, Vec<f64>)>) {
        let mut st = self.state();
        for (slot, data) in pending.drain(..) {
            let off = slot * self.slot_len;
            st.public[off..off + self.slot_len].copy_from_slice(&data);
            st.public_sums[slot] = checksum(&data);
        }
        st.lock = match st.lock {
            LockState::Shared(n) if n > 1 => LockState::Shared(n - 1),
            _ => LockState::Unlocked,
        };
        drop(st);
        self.cv.notify_all();
    }

    /// Copies the public copy into the private copy (owner only).
    pub fn sync(&self, actor: usize) -> Result<(), RmaError> {
        self.check_owner(actor)?;
        let mut st = self.state();
        let st = &mut *st;
        st.private.copy_from_slice(&st.public);
        st.private_sums.copy_from_slice(&st.public_sums);
        Ok(())
    }

    /// Owner-local write to both copies.
    pub fn local_write(&self, actor: usize, slot: usize, data: &[f64]) -> Result<(), RmaError> {
        self.check_owner(actor)?;
        self.check_slot(slot, data.len())?;
        let mut st = self.state();
        let off = slot * self.slot_len;
        let sum = checksum(data);
        st.public[off..off + self.slot_len].copy_from_slice(data);
        st.private[off..off + self.slot_len].copy_from_slice(data);
        st.public_sums[slot] = sum;
        st.private_sums[slot] = sum;
        Ok(())
    }

    /// Reads one slot of the private copy (owner only), verifying its checksum.
    pub fn read_private(&self, actor: usize, slot: usize) -> Result<Vec<f64>, RmaError> {
        self.check_owner(actor)?;
        self.check_slot(slot, self.slot_len)?;
        let st = self.state();
        let off = slot * self.slot_len;
        let data = st.private[off..off + self.slot_len].to_vec();
        if checksum(&data) != st.private_sums[slot] {
            return Err(RmaError::Checksum { slot });
        }
        Ok(data)
    }

    /// All slots of the private copy, checksum-verified.
    pub fn read_private_all(&self, actor: usize) -> Result<Vec<Vec<f64>>, RmaError> {
        self.check_owner(actor)?;
        let st = self.state();
        (0..self.slots)
            .map(|slot| {
                let off = slot * self.slot_len;
                let data = st.private[off..off + self.slot_len].to_vec();
                if checksum(&data) != st.private_sums[slot] {
                    return Err(RmaError::Checksum { slot });
                }
                Ok(data)
            })
            .collect()
    }

    /// Snapshot of the public copy, for inspection.
    pub fn public_snapshot(&self) -> Vec<f64> {
        self.state().public.clone()
    }
}

/// A passive-target access epoch. Puts are buffered and land in the target's
/// public copy at [`unlock`](Epoch::unlock) (or drop).
#[derive(Debug)]
pub struct Epoch {
    window: Arc<Window>,
    actor: usize,
    kind: LockKind,
    pending: Vec<(usize, Vec<f64>)>,
    open: bool,
}

impl Epoch {
    pub fn kind(&self) -> LockKind {
        self.kind
    }

    pub fn actor(&self) -> usize {
        self.actor
    }

    pub fn put(&mut self, slot: usize, payload: &[f64]) -> Result<(), RmaError> {
        if !self.open {
            return Err(RmaError::DoubleUnlock);
        }
        self.window.check_slot(slot, payload.len())?;
        self.pending.push((slot, payload.to_vec()));
        Ok(())
    }

    pub fn unlock(&mut self) -> Result<(), RmaError> {
        if !self.open {
            return Err(RmaError::DoubleUnlock);
        }
        self.open = false;
        self.window.release(&mut self.pending);
        Ok(())
    }
}

impl Drop for Epoch {
    fn drop(&mut self) {
        if self.open {
            self.open = false;
            self.window.release(&mut self.pending);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicBool, Ordering};
    use std::thread;

    #[test]
    fn put_lands_in_public_only() {
        let w = Window::new(1, 3, 2, &[0.0, 0.0]);
        let mut e = w.lock(0, LockKind::Exclusive).unwrap();
        e.put(2, &[1.0, 2.0]).unwrap();
        assert_eq!(w.public_snapshot(), vec![0.0; 6]);
        e.unlock().unwrap();
        assert_eq!(w.read_private(1, 2).unwrap(), vec![0.0, 0.0]);
        w.sync(1).unwrap();
        assert_eq!(w.read_private(1, 2).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn last_put_wins_and_double_unlock_fails() {
        let w = Window::new(0, 1, 1, &[0.0]);
        let mut e = w.lock(1, LockKind::Exclusive).unwrap();
        e.put(0, &[1.0]).unwrap();
        e.put(0, &[2.0]).unwrap();
        e.unlock().unwrap();
        assert_eq!(e.unlock(), Err(RmaError::DoubleUnlock));
        w.sync(0).unwrap();
        assert_eq!(w.read_private(0, 0).unwrap(), vec![2.0]);
    }

    #[test]
    fn range_and_owner_checks() {
        let w = Window::new(0, 2, 1, &[0.0]);
        let mut e = w.lock(1, LockKind::Exclusive).unwrap();
        assert!(matches!(e.put(2, &[1.0]), Err(RmaError::OutOfRange { .. })));
        assert!(matches!(
            e.put(0, &[1.0, 2.0]),
            Err(RmaError::PayloadLength { .. })
        ));
        drop(e);
        assert!(matches!(w.sync(1), Err(RmaError::NotOwner { .. })));
    }

    #[test]
    fn shared_locks_coexist() {
        let w = Window::new(0, 1, 1, &[0.0]);
        let a = w.lock(0, LockKind::Shared).unwrap();
        let b = w.lock(1, LockKind::Shared).unwrap();
        drop(a);
        drop(b);
        let _c = w.lock(1, LockKind::Exclusive).unwrap();
    }

    #[test]
    fn exclusive_blocks_shared_until_unlock() {
        let w = Window::new(0, 1, 1, &[0.0]);
        let mut e = w.lock(1, LockKind::Exclusive).unwrap();
        let released = Arc::new(AtomicBool::new(false));
        let (w2, r2) = (Arc::clone(&w), Arc::clone(&released));
        let h = thread::spawn(move || {
            let _s = w2.lock(0, LockKind::Shared).unwrap();
            assert!(r2.load(Ordering::SeqCst));
        });
        thread::sleep(Duration::from_millis(50));
        released.store(true, Ordering::SeqCst);
        e.unlock().unwrap();
        h.join().unwrap();
    }

    #[test]
    fn lock_timeout_reports_deadlock() {
        let w = Window::with_timeout(0, 1, 1, &[0.0], Duration::from_millis(20));
        let _e = w.lock(1, LockKind::Exclusive).unwrap();
        assert!(matches!(
            w.lock(0, LockKind::Shared),
            Err(RmaError::Deadlock(_))
        ));
    }
}
