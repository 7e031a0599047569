//! Blame records produced by the runtime and by the model checker.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ids::{PromiseId, TaskId};

/// How a task body finished.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "how", content = "detail", rename_all = "snake_case")]
pub enum ExitCause {
    Returned,
    /// The body returned an error value.
    Failed(String),
    Panicked(String),
}

impl ExitCause {
    pub fn is_exceptional(&self) -> bool {
        !matches!(self, ExitCause::Returned)
    }
}

/// A task terminated while still owning unfulfilled promises.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OmittedSetReport {
    pub task: TaskId,
    /// Never empty; sorted by id.
    pub promises: Vec<PromiseId>,
    pub cause: ExitCause,
}

impl fmt::Display for OmittedSetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task {} exited owning unfulfilled promises [", self.task)?;
        for (i, p) in self.promises.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("]")?;
        match &self.cause {
            ExitCause::Returned => Ok(()),
            ExitCause::Failed(msg) => write!(f, " after failing: {msg}"),
            ExitCause::Panicked(msg) => write!(f, " after panicking: {msg}"),
        }
    }
}

/// A deadlock cycle `[(t0, p0), .., (tn, pn)]`: each `tk` waits on `pk`, and
/// `pk` is owned by `t(k+1 mod n+1)`.
///
/// As produced by the detector the first pair belongs to the task that found
/// the cycle. Use [`DeadlockReport::canonical`] to compare cycles up to rotation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeadlockReport {
    pub cycle: Vec<(TaskId, PromiseId)>,
}

impl DeadlockReport {
    pub fn new(cycle: Vec<(TaskId, PromiseId)>) -> Self {
        debug_assert!(!cycle.is_empty());
        DeadlockReport { cycle }
    }

    /// The task whose wait closed the cycle.
    pub fn detector(&self) -> TaskId {
        self.cycle[0].0
    }

    pub fn tasks(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.cycle.iter().map(|&(t, _)| t)
    }

    pub fn promises(&self) -> impl Iterator<Item = PromiseId> + '_ {
        self.cycle.iter().map(|&(_, p)| p)
    }

    pub fn len(&self) -> usize {
        self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycle.is_empty()
    }

    /// The same cycle rotated to start at its smallest task id.
    pub fn canonical(&self) -> DeadlockReport {
        let start = self
            .cycle
            .iter()
            .enumerate()
            .min_by_key(|(_, (t, _))| *t)
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut cycle = self.cycle.clone();
        cycle.rotate_left(start);
        DeadlockReport { cycle }
    }

    pub fn same_cycle(&self, other: &DeadlockReport) -> bool {
        self.canonical() == other.canonical()
    }

    /// No repeated task and no repeated promise.
    pub fn is_simple(&self) -> bool {
        let mut tasks: Vec<_> = self.tasks().collect();
        let mut promises: Vec<_> = self.promises().collect();
        tasks.sort_unstable();
        tasks.dedup();
        promises.sort_unstable();
        promises.dedup();
        tasks.len() == self.len() && promises.len() == self.len()
    }
}

impl fmt::Display for DeadlockReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("deadlock cycle: ")?;
        for (t, p) in &self.cycle {
            write!(f, "{t} -> {p} -> ")?;
        }
        write!(f, "{}", self.detector())
    }
}

/// One entry of an alarm registry.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Alarm {
    OmittedSet(OmittedSetReport),
    Deadlock(DeadlockReport),
}

impl Alarm {
    pub fn kind(&self) -> &'static str {
        match self {
            Alarm::OmittedSet(_) => "omitted_set",
            Alarm::Deadlock(_) => "deadlock",
        }
    }

    /// The task blamed by the alarm: the exiting task, or the task whose
    /// `get` closed the cycle.
    pub fn task(&self) -> TaskId {
        match self {
            Alarm::OmittedSet(r) => r.task,
            Alarm::Deadlock(r) => r.detector(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Alarm::OmittedSet(r) => json!({
                "kind": self.kind(),
                "task": r.task,
                "promises": r.promises,
                "cause": r.cause,
            }),
            Alarm::Deadlock(r) => json!({
                "kind": self.kind(),
                "task": r.detector(),
                "promises": r.promises().collect::<Vec<_>>(),
                "cycle": r.cycle,
            }),
        }
    }

    /// One line of JSON, no trailing newline.
    pub fn to_json_line(&self) -> String {
        self.to_json().to_string()
    }
}

impl fmt::Display for Alarm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alarm::OmittedSet(r) => r.fmt(f),
            Alarm::Deadlock(r) => r.fmt(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(t: u64, p: u64) -> (TaskId, PromiseId) {
        (TaskId(t), PromiseId(p))
    }

    #[test]
    fn canonical_rotates_to_smallest_task() {
        let r = DeadlockReport::new(vec![pair(5, 1), pair(2, 9), pair(7, 3)]);
        assert_eq!(r.canonical().cycle, vec![pair(2, 9), pair(7, 3), pair(5, 1)]);
        let rotated = DeadlockReport::new(vec![pair(7, 3), pair(5, 1), pair(2, 9)]);
        assert!(r.same_cycle(&rotated));
        let reversed = DeadlockReport::new(vec![pair(7, 3), pair(2, 9), pair(5, 1)]);
        assert!(!r.same_cycle(&reversed));
    }

    #[test]
    fn simple_cycles() {
        assert!(DeadlockReport::new(vec![pair(1, 1)]).is_simple());
        assert!(!DeadlockReport::new(vec![pair(1, 1), pair(1, 2)]).is_simple());
        assert!(!DeadlockReport::new(vec![pair(1, 1), pair(2, 1)]).is_simple());
    }

    #[test]
    fn alarms_serialize_to_one_json_line() {
        let omitted = Alarm::OmittedSet(OmittedSetReport {
            task: TaskId(4),
            promises: vec![PromiseId(2), PromiseId(3)],
            cause: ExitCause::Returned,
        });
        let line = omitted.to_json_line();
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["kind"], "omitted_set");
        assert_eq!(v["task"], 4);
        assert_eq!(v["promises"], json!([2, 3]));

        let deadlock = Alarm::Deadlock(DeadlockReport::new(vec![pair(1, 10), pair(2, 20)]));
        let v: serde_json::Value = serde_json::from_str(&deadlock.to_json_line()).unwrap();
        assert_eq!(v["kind"], "deadlock");
        assert_eq!(v["task"], 1);
        assert_eq!(v["promises"], json!([10, 20]));
        assert_eq!(v["cycle"], json!([[1, 10], [2, 20]]));
    }
}
