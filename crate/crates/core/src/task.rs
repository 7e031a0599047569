//! Tasks, ownership hand-off at spawn, and the omitted-set check at exit.

use std::cell::{Cell, RefCell};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;
use std::rc::Rc;
use std::sync::atomic::{AtomicBool, AtomicPtr, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ids::{PromiseId, TaskId};
use crate::kit::PromiseCollection;
use crate::promise::{ErasedPromise, Promise, PromiseHeader};
use crate::reclaim::{Publish, Shared};
use crate::report::{Alarm, ExitCause, OmittedSetReport};
use crate::runtime::{Mode, RunState};

pub(crate) struct TaskRecord {
    pub(crate) id: TaskId,
    /// The promise this task is blocked on inside `get`, else null.
    pub(crate) waiting_on: AtomicPtr<PromiseHeader>,
    published: AtomicBool,
}

impl TaskRecord {
    fn new() -> Self {
        TaskRecord {
            id: TaskId::fresh(),
            waiting_on: AtomicPtr::new(ptr::null_mut()),
            published: AtomicBool::new(false),
        }
    }
}

impl Publish for TaskRecord {
    fn published_flag(&self) -> &AtomicBool {
        &self.published
    }
}

/// Per-task state that lives on the executing thread.
pub(crate) struct TaskCtx {
    pub(crate) record: Shared<TaskRecord>,
    /// Promises this task owns. Touched only by the task itself, or by its
    /// parent before the task starts.
    pub(crate) owned: RefCell<Vec<ErasedPromise>>,
    completion: Option<Promise<TaskExit>>,
    pub(crate) run: Arc<RunState>,
    gets: Cell<u64>,
    sets: Cell<u64>,
}

thread_local! {
    static CURRENT: RefCell<Option<Rc<TaskCtx>>> = const { RefCell::new(None) };
}

pub(crate) fn current() -> Result<Rc<TaskCtx>> {
    CURRENT
        .with(|c| c.borrow().clone())
        .ok_or(Error::Usage("no current task; run inside run_root"))
}

pub(crate) fn in_task() -> bool {
    CURRENT.with(|c| c.borrow().is_some())
}

/// The task running on this thread, if any.
pub fn current_task() -> Option<TaskId> {
    CURRENT.with(|c| c.borrow().as_ref().map(|ctx| ctx.record.id))
}

/// Ids of the promises the current task owns, in id (creation) order.
pub fn owned_promises() -> Result<Vec<PromiseId>> {
    let ctx = current()?;
    let mut ids: Vec<_> = ctx
        .owned
        .borrow()
        .iter()
        .map(|p| p.header().id())
        .filter(|id| Some(*id) != ctx.completion.as_ref().map(|c| c.id()))
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

impl TaskCtx {
    pub(crate) fn new(run: Arc<RunState>, owned: Vec<ErasedPromise>) -> Self {
        TaskCtx {
            record: Shared::new(TaskRecord::new()),
            owned: RefCell::new(owned),
            completion: None,
            run,
            gets: Cell::new(0),
            sets: Cell::new(0),
        }
    }

    pub(crate) fn mode(&self) -> Mode {
        self.run.rt.config.mode
    }

    pub(crate) fn count_get(&self) {
        self.gets.set(self.gets.get() + 1);
    }

    pub(crate) fn count_set(&self) {
        self.sets.set(self.sets.get() + 1);
    }

    pub(crate) fn own(&self, promise: ErasedPromise) {
        let mut owned = self.owned.borrow_mut();
        promise.header().slot.store(owned.len(), Ordering::Relaxed);
        owned.push(promise);
    }

    pub(crate) fn disown(&self, header: &PromiseHeader) {
        let mut owned = self.owned.borrow_mut();
        let i = header.slot.load(Ordering::Relaxed);
        if owned.get(i).map(|p| p.header().id()) != Some(header.id()) {
            return;
        }
        owned.swap_remove(i);
        if let Some(moved) = owned.get(i) {
            moved.header().slot.store(i, Ordering::Relaxed);
        }
    }

    /// Makes this the current task of the calling thread for the duration of
    /// `f`.
    pub(crate) fn enter<R>(self: &Rc<Self>, f: impl FnOnce() -> R) -> R {
        struct Reset(Option<Rc<TaskCtx>>);
        impl Drop for Reset {
            fn drop(&mut self) {
                let prev = self.0.take();
                CURRENT.with(|c| *c.borrow_mut() = prev);
            }
        }
        let prev = CURRENT.with(|c| c.borrow_mut().replace(Rc::clone(self)));
        let _reset = Reset(prev);
        f()
    }

    /// Runs `body` as this task, then performs the exit check.
    pub(crate) fn run_body<F, R>(self: &Rc<Self>, body: F) -> (Option<R>, ExitCause)
    where
        F: FnOnce() -> R,
        R: TaskOutput,
    {
        let outcome = self.enter(|| panic::catch_unwind(AssertUnwindSafe(body)));
        let (value, cause) = match outcome {
            Ok(v) => {
                let cause = v.exit_cause();
                (Some(v), cause)
            }
            Err(payload) => (None, ExitCause::Panicked(panic_message(&payload))),
        };
        self.exit(cause.clone());
        (value, cause)
    }

    /// Every promise still owned at exit is poisoned with a report blaming
    /// this task, which wakes its waiters with an error.
    fn exit(&self, cause: ExitCause) {
        let completion_id = self.completion.as_ref().map(Promise::id);
        let mut left: Vec<ErasedPromise> = self
            .owned
            .take()
            .into_iter()
            .filter(|p| Some(p.header().id()) != completion_id)
            .collect();
        let mut omitted = None;
        if !left.is_empty() {
            left.sort_by_key(|p| p.header().id());
            let report = Arc::new(OmittedSetReport {
                task: self.record.id,
                promises: left.iter().map(|p| p.header().id()).collect(),
                cause: cause.clone(),
            });
            self.run.record(Alarm::OmittedSet((*report).clone()));
            for p in &left {
                p.header().poison(Arc::clone(&report));
            }
            omitted = Some(report);
        }
        self.run.add_counts(self.gets.get(), self.sets.get());
        if let Some(completion) = &self.completion {
            let exit = TaskExit {
                task: self.record.id,
                cause,
                omitted,
            };
            completion
                .set_as(self, exit)
                .expect("the exiting task owns its completion promise");
        }
    }
}

fn panic_message(payload: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

/// What a task body returns. `Err` values count as an exceptional exit.
pub trait TaskOutput {
    fn exit_cause(&self) -> ExitCause;
}

impl TaskOutput for () {
    fn exit_cause(&self) -> ExitCause {
        ExitCause::Returned
    }
}

macro_rules! returns_normally {
    ($($t:ty),* $(,)?) => {
        $(impl TaskOutput for $t {
            fn exit_cause(&self) -> ExitCause {
                ExitCause::Returned
            }
        })*
    };
}

returns_normally!(bool, char, u8, u16, u32, u64, u128, usize, i8, i16, i32, i64, i128, isize, f32, f64, String);

impl<T> TaskOutput for Vec<T> {
    fn exit_cause(&self) -> ExitCause {
        ExitCause::Returned
    }
}

impl<T> TaskOutput for Option<T> {
    fn exit_cause(&self) -> ExitCause {
        ExitCause::Returned
    }
}

impl<T, E: std::fmt::Display> TaskOutput for std::result::Result<T, E> {
    fn exit_cause(&self) -> ExitCause {
        match self {
            Ok(_) => ExitCause::Returned,
            Err(e) => ExitCause::Failed(e.to_string()),
        }
    }
}

/// How a spawned task finished.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskExit {
    pub task: TaskId,
    pub cause: ExitCause,
    pub omitted: Option<Arc<OmittedSetReport>>,
}

/// Handle to a spawned task.
///
/// Joining waits on a completion promise that the child owns and the runtime
/// fulfills after the child's exit check, so a join takes part in deadlock
/// detection like any other `get`.
#[derive(Clone, Debug)]
pub struct TaskHandle {
    id: TaskId,
    completion: Promise<TaskExit>,
}

impl TaskHandle {
    pub fn id(&self) -> TaskId {
        self.id
    }

    pub fn join(&self) -> Result<TaskExit> {
        self.completion.get().cloned()
    }

    pub fn is_finished(&self) -> bool {
        self.completion.is_completed()
    }
}

/// Spawns `body` as a new task, moving ownership of every promise yielded by
/// `moved` from the current task to the new one.
///
/// The moved promises change owner before the child can run. Fails with
/// [`Error::OwnershipViolation`] (and spawns nothing) if any of them is not
/// owned by the caller.
pub fn spawn<F, R>(moved: &[&dyn PromiseCollection], body: F) -> Result<TaskHandle>
where
    F: FnOnce() -> R + Send + 'static,
    R: TaskOutput,
{
    let parent = current()?;
    let mut promises: Vec<ErasedPromise> = moved
        .iter()
        .flat_map(|c| c.promises())
        .map(|p| p.0)
        .collect();
    let verified = parent.mode() == Mode::Verified;

    if verified {
        let me = parent.record.as_ptr();
        promises.sort_by_key(|p| p.header().id());
        promises.dedup_by_key(|p| p.header().id());
        for p in &promises {
            let header = p.header();
            if header.owner.load(Ordering::Relaxed).cast_const() != me {
                return Err(Error::OwnershipViolation {
                    promise: header.id(),
                    caller: parent.record.id,
                    owner: header.owner_id(),
                });
            }
        }
    } else {
        promises.clear();
    }

    let completion: Promise<TaskExit> = Promise::create(&parent);
    if verified {
        promises.push(completion.erased());
    }
    let mut child = TaskCtx::new(Arc::clone(&parent.run), Vec::new());
    child.completion = Some(completion.clone());
    let id = child.record.id;

    if verified {
        child.record.mark_published();
        let child_ptr = child.record.as_ptr() as *mut TaskRecord;
        for p in promises {
            parent.disown(p.header());
            p.header().owner.store(child_ptr, Ordering::Relaxed);
            child.own(p);
        }
    }

    let run = Arc::clone(&parent.run);
    run.task_started();
    run.rt.pool.submit(Box::new(move || {
        let ctx = Rc::new(child);
        ctx.run_body(body);
        let run = Arc::clone(&ctx.run);
        drop(ctx);
        run.task_finished();
    }));
    Ok(TaskHandle { id, completion })
}
