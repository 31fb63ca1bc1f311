//! In-process emulation of one-sided communication: windows with public and
//! private copies, passive-target lock epochs, explicit sync, and a scheduler
//! that serializes decision points so asynchronous runs become replayable.

mod schedule;
mod trace;
mod window;

pub use schedule::{Action, Collective, ScheduleMode, Scheduler};
pub use trace::{Trace, TraceEvent};
pub use window::{Epoch, LockKind, Window};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RmaError {
    #[error("slot {slot} outside window of {slots} slots")]
    OutOfRange { slot: usize, slots: usize },

    #[error("payload of length {got}, slot holds {expected}")]
    PayloadLength { expected: usize, got: usize },

    #[error("epoch already unlocked")]
    DoubleUnlock,

    #[error("actor {actor} does not own window of actor {owner}")]
    NotOwner { actor: usize, owner: usize },

    #[error("checksum mismatch in slot {slot}")]
    Checksum { slot: usize },

    #[error("deadlock suspected: {0}")]
    Deadlock(String),

    #[error("run aborted: {0}")]
    Aborted(String),

    #[error("trace mismatch at entry {position}: expected `{expected}`, program did `{found}`")]
    Mismatch {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("trace recorded in mode `{trace}` cannot drive mode `{requested}`")]
    ModeMismatch { trace: String, requested: String },

    #[error("trace not replayable: {0}")]
    NotReplayable(String),

    #[error("malformed trace: {0}")]
    TraceFormat(String),
}
