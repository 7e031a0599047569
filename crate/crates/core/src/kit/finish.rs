use std::sync::Mutex;

use crate::error::Result;
use crate::task::{self, TaskHandle, TaskOutput};

use super::PromiseCollection;

/// Tasks spawned inside a [`finish`] body.
pub struct Scope {
    handles: Mutex<Vec<TaskHandle>>,
}

impl Scope {
    /// [`spawn`](crate::spawn), with the task joined at the end of the scope.
    pub fn spawn<F, R>(&self, moved: &[&dyn PromiseCollection], body: F) -> Result<TaskHandle>
    where
        F: FnOnce() -> R + Send + 'static,
        R: TaskOutput,
    {
        let handle = task::spawn(moved, body)?;
        self.handles
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(handle.clone());
        Ok(handle)
    }
}

/// Runs `body`, then waits for every task it spawned through the scope.
///
/// Joining goes through the tasks' completion promises, so the joins are
/// deadlock-checked. All tasks are joined even if one join fails; the first
/// failure is returned. Omitted sets inside the spawned tasks do not fail the
/// join; they are reported as alarms.
pub fn finish<F, R>(body: F) -> Result<R>
where
    F: FnOnce(&Scope) -> R,
{
    task::current()?;
    let scope = Scope {
        handles: Mutex::new(Vec::new()),
    };
    let value = body(&scope);
    let handles = scope.handles.into_inner().unwrap_or_else(|e| e.into_inner());
    let mut first_err = None;
    for h in &handles {
        if let Err(e) = h.join() {
            first_err.get_or_insert(e);
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

