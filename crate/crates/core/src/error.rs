use std::sync::Arc;

use thiserror::Error;

use crate::ids::{PromiseId, TaskId};
use crate::report::{DeadlockReport, OmittedSetReport};

/// Errors raised by promise and task operations.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum Error {
    /// The operation needs a current task (or must not run inside one).
    #[error("usage error: {0}")]
    Usage(&'static str),

    /// `spawn` tried to move a promise the spawning task does not own.
    #[error("task {caller} cannot move {promise}: it is owned by {}", fmt_owner(*.owner))]
    OwnershipViolation {
        promise: PromiseId,
        caller: TaskId,
        owner: Option<TaskId>,
    },

    /// `set` by a task that does not own the promise. A second `set` lands
    /// here too, since the first one clears the owner.
    #[error("task {caller} cannot set {promise}: it is owned by {}", fmt_owner(*.owner))]
    NotOwner {
        promise: PromiseId,
        caller: TaskId,
        owner: Option<TaskId>,
    },

    /// Waiting would close a deadlock cycle.
    #[error("{0}")]
    DeadlockDetected(DeadlockReport),

    /// The promise was abandoned by its owner at task exit.
    #[error("{promise} was poisoned: {report}")]
    PoisonedPromise {
        promise: PromiseId,
        report: Arc<OmittedSetReport>,
    },

    /// A second completion of a promise while ownership tracking is off.
    #[error("{0} is already completed")]
    AlreadyCompleted(PromiseId),
}

fn fmt_owner(owner: Option<TaskId>) -> String {
    match owner {
        Some(t) => t.to_string(),
        None => "nobody (already completed)".to_string(),
    }
}

impl Error {
    pub fn deadlock(&self) -> Option<&DeadlockReport> {
        match self {
            Error::DeadlockDetected(r) => Some(r),
            _ => None,
        }
    }

    /// The task blamed by a poisoned promise.
    pub fn poisoned_by(&self) -> Option<TaskId> {
        match self {
            Error::PoisonedPromise { report, .. } => Some(report.task),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
