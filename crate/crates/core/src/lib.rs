//! Task-parallel promises with ownership tracking.
//!
//! Every unfulfilled promise is owned by exactly one task: the one that
//! created it, or the task it was moved to at [`spawn`]. A task that exits
//! while still owning promises is reported and its promises are poisoned,
//! which wakes their waiters with an error. A [`Promise::get`] that would
//! close a cycle of tasks waiting on each other's promises fails with
//! [`Error::DeadlockDetected`] instead of blocking forever.
//!
//! ```
//! use vow::{run_root, spawn, Promise};
//!
//! let report = run_root(|| -> vow::Result<i32> {
//!     let p = Promise::<i32>::new()?;
//!     let setter = p.clone();
//!     spawn(&[&p], move || setter.set(42))?;
//!     Ok(*p.get()?)
//! })
//! .unwrap();
//! assert!(report.is_ok());
//! assert_eq!(report.value.unwrap().unwrap(), 42);
//! ```
//!
//! The [`lp`] module is a model checker for a small language of these
//! operations.

mod alarms;
pub mod detector;
mod error;
mod ids;
mod kit;
pub mod lp;
mod pool;
mod promise;
mod reclaim;
mod report;
mod runtime;
mod task;

pub use alarms::AlarmRegistry;
pub use error::{Error, Result};
pub use ids::{PromiseId, TaskId};
pub use kit::{channel_new, finish, promises_of, Channel, PromiseCollection, Scope};
pub use promise::{new_promise, AnyPromise, Promise, PromiseState};
pub use report::{Alarm, DeadlockReport, ExitCause, OmittedSetReport};
pub use runtime::{run_root, ExitReport, Mode, RunStats, Runtime, RuntimeConfig, WaitEdge};
pub use task::{current_task, owned_promises, spawn, TaskExit, TaskHandle, TaskOutput};
