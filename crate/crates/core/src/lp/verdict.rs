use std::fmt;

use crate::ids::{PromiseId, TaskId};
use crate::report::{DeadlockReport, OmittedSetReport};

/// Which ownership rule an instruction broke.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    /// `set` of a promise the task does not own.
    NotOwner,
    /// `async` moving a promise the task does not own.
    OwnershipViolation,
}

/// An alarm observed in a schedule.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Ok,
    /// Raised by a `get`; the cycle is canonical.
    Deadlock(DeadlockReport),
    OmittedSet(OmittedSetReport),
    PolicyViolation {
        kind: PolicyKind,
        task: TaskId,
        promise: PromiseId,
    },
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Ok => f.write_str("ok"),
            Verdict::Deadlock(r) => write!(f, "deadlock {r}"),
            Verdict::OmittedSet(r) => write!(f, "omitted set: {r}"),
            Verdict::PolicyViolation {
                kind,
                task,
                promise,
            } => write!(f, "policy violation ({kind:?}): {task} on {promise}"),
        }
    }
}

/// Why a task stopped early.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fate {
    /// A `get` raised a deadlock.
    Deadlock,
    /// A `get` returned a poisoned promise abandoned by `blame`.
    Poisoned { promise: PromiseId, blame: TaskId },
    Policy(PolicyKind),
}

/// Everything observable at the end of one complete schedule.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Outcome {
    /// Alarms in a canonical order; `[Ok]` when there were none.
    pub verdicts: Vec<Verdict>,
    /// Per task (by index), how it stopped early, if it did. Tasks that never
    /// started are `None` too.
    pub fates: Vec<Option<Fate>>,
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        self.verdicts == [Verdict::Ok]
    }

    pub fn deadlocks(&self) -> impl Iterator<Item = &DeadlockReport> {
        self.verdicts.iter().filter_map(|v| match v {
            Verdict::Deadlock(r) => Some(r),
            _ => None,
        })
    }

    pub fn omitted_sets(&self) -> impl Iterator<Item = &OmittedSetReport> {
        self.verdicts.iter().filter_map(|v| match v {
            Verdict::OmittedSet(r) => Some(r),
            _ => None,
        })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.verdicts.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
