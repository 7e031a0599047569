//! Write-once promises with an owning task.

use std::fmt;
use std::ptr::{self, NonNull};
use std::sync::atomic::{AtomicBool, AtomicPtr, AtomicU8, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, OnceLock};

use crossbeam_epoch as epoch;

use crate::detector::{Step, Traversal, WaitGraph};
use crate::error::{Error, Result};
use crate::ids::{PromiseId, TaskId};
use crate::reclaim::{Counted, Publish, Shared};
use crate::report::{Alarm, DeadlockReport, OmittedSetReport};
use crate::runtime::{Mode, WaitEdge};
use crate::task::{self, TaskCtx, TaskRecord};

const UNSET: u8 = 0;
const FULFILLED: u8 = 1;
const POISONED: u8 = 2;

/// Observable completion state of a promise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PromiseState {
    Unset,
    Fulfilled,
    Poisoned,
}

/// The type-independent part of a promise: identity, owner, completion state
/// and the waiter parking lot.
pub(crate) struct PromiseHeader {
    id: PromiseId,
    /// Owning task, or null once completed. Relaxed accesses only; its
    /// visibility rides on the `waiting_on` release/acquire pairs and on the
    /// spawn hand-off.
    pub(crate) owner: AtomicPtr<TaskRecord>,
    state: AtomicU8,
    waiters: AtomicUsize,
    lock: Mutex<()>,
    wake: Condvar,
    poison: OnceLock<Arc<OmittedSetReport>>,
    published: AtomicBool,
    /// Index in the owner's owned list. Touched only by whoever may touch
    /// that list.
    pub(crate) slot: AtomicUsize,
}

impl PromiseHeader {
    fn new(owner: *const TaskRecord) -> Self {
        PromiseHeader {
            id: PromiseId::fresh(),
            owner: AtomicPtr::new(owner as *mut TaskRecord),
            state: AtomicU8::new(UNSET),
            waiters: AtomicUsize::new(0),
            lock: Mutex::new(()),
            wake: Condvar::new(),
            poison: OnceLock::new(),
            published: AtomicBool::new(false),
            slot: AtomicUsize::new(0),
        }
    }

    pub(crate) fn id(&self) -> PromiseId {
        self.id
    }

    pub(crate) fn state(&self) -> PromiseState {
        match self.state.load(Ordering::Acquire) {
            UNSET => PromiseState::Unset,
            FULFILLED => PromiseState::Fulfilled,
            _ => PromiseState::Poisoned,
        }
    }

    pub(crate) fn owner_id(&self) -> Option<TaskId> {
        let _guard = epoch::pin();
        let owner = self.owner.load(Ordering::Relaxed);
        // SAFETY: a task record stays allocated while it is linked from an
        // owner cell and for as long as a pinned reader may have seen it.
        NonNull::new(owner).map(|t| unsafe { t.as_ref() }.id)
    }

    fn poison_report(&self) -> Arc<OmittedSetReport> {
        Arc::clone(self.poison.get().expect("poisoned promises carry a report"))
    }

    /// Blocks until the promise is completed.
    fn wait(&self, blocked: &AtomicUsize) {
        if self.state.load(Ordering::Acquire) != UNSET {
            return;
        }
        let mut guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        self.waiters.fetch_add(1, Ordering::SeqCst);
        blocked.fetch_add(1, Ordering::SeqCst);
        while self.state.load(Ordering::SeqCst) == UNSET {
            guard = self.wake.wait(guard).unwrap_or_else(|e| e.into_inner());
        }
        blocked.fetch_sub(1, Ordering::SeqCst);
        self.waiters.fetch_sub(1, Ordering::SeqCst);
    }

    /// Publishes the final state and wakes every waiter.
    fn complete(&self, state: u8) {
        self.state.store(state, Ordering::SeqCst);
        if self.waiters.load(Ordering::SeqCst) > 0 {
            let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
            self.wake.notify_all();
        }
    }

    /// Exceptional completion at the owner's exit. The caller is the owner.
    pub(crate) fn poison(&self, report: Arc<OmittedSetReport>) {
        self.owner.store(ptr::null_mut(), Ordering::Relaxed);
        if self.poison.set(report).is_ok() {
            self.complete(POISONED);
        }
    }
}

impl Publish for PromiseHeader {
    fn published_flag(&self) -> &AtomicBool {
        &self.published
    }
}

pub(crate) trait AsHeader: Publish + Send + Sync {
    fn header(&self) -> &PromiseHeader;
}

struct PromiseInner<T> {
    header: PromiseHeader,
    value: OnceLock<T>,
}

impl<T: Send + Sync> Publish for PromiseInner<T> {
    fn published_flag(&self) -> &AtomicBool {
        &self.header.published
    }

    fn shed(&mut self) {
        self.value.take();
    }
}

impl<T: Send + Sync> AsHeader for PromiseInner<T> {
    fn header(&self) -> &PromiseHeader {
        &self.header
    }
}

pub(crate) type ErasedPromise = Shared<dyn AsHeader>;

/// A write-once value owned by the task responsible for fulfilling it.
///
/// Handles are cheap to clone and may be shared freely; sharing a handle does
/// not share the obligation to set it. Ownership moves only through
/// [`spawn`](crate::spawn).
pub struct Promise<T: Send + Sync + 'static> {
    inner: Shared<PromiseInner<T>>,
}

impl<T: Send + Sync + 'static> Clone for Promise<T> {
    fn clone(&self) -> Self {
        Promise {
            inner: self.inner.clone(),
        }
    }
}

impl<T: Send + Sync + 'static> fmt::Debug for Promise<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Promise")
            .field("id", &self.id())
            .field("state", &self.state())
            .finish()
    }
}

/// Creates a promise owned by the current task.
pub fn new_promise<T: Send + Sync + 'static>() -> Result<Promise<T>> {
    let ctx = task::current()?;
    Ok(Promise::create(&ctx))
}

impl<T: Send + Sync + 'static> Promise<T> {
    /// Same as [`new_promise`].
    pub fn new() -> Result<Self> {
        new_promise()
    }

    pub(crate) fn create(ctx: &TaskCtx) -> Self {
        let verified = ctx.mode() == Mode::Verified;
        let owner = if verified {
            ctx.record.as_ptr()
        } else {
            ptr::null()
        };
        let promise = Promise {
            inner: Shared::new(PromiseInner {
                header: PromiseHeader::new(owner),
                value: OnceLock::new(),
            }),
        };
        if verified {
            ctx.own(promise.erased());
        }
        promise
    }

    pub fn id(&self) -> PromiseId {
        self.inner.header.id
    }

    /// Moves the value out if this is the last handle. Used to tear down long
    /// promise chains without recursion.
    pub(crate) fn take_unique(&mut self) -> Option<T> {
        self.inner.get_mut()?.value.take()
    }

    pub fn state(&self) -> PromiseState {
        self.inner.header.state()
    }

    pub fn is_completed(&self) -> bool {
        self.state() != PromiseState::Unset
    }

    /// The owning task as currently observed; `None` once completed (or when
    /// ownership tracking is off).
    pub fn owner(&self) -> Option<TaskId> {
        self.inner.header.owner_id()
    }

    pub(crate) fn erased(&self) -> ErasedPromise {
        self.inner.erase(|p| -> NonNull<Counted<dyn AsHeader>> { p })
    }

    /// Fulfills the promise. Only the owning task may do this, once.
    pub fn set(&self, value: T) -> Result<()> {
        let ctx = task::current()?;
        ctx.count_set();
        self.set_as(&ctx, value)
    }

    /// `NotOwner` unless `ctx` owns the promise. Always passes in baseline mode.
    pub(crate) fn check_owner(&self, ctx: &TaskCtx) -> Result<()> {
        let header = &self.inner.header;
        if ctx.mode() == Mode::Verified
            && header.owner.load(Ordering::Relaxed).cast_const() != ctx.record.as_ptr()
        {
            return Err(Error::NotOwner {
                promise: header.id,
                caller: ctx.record.id,
                owner: header.owner_id(),
            });
        }
        Ok(())
    }

    pub(crate) fn set_as(&self, ctx: &TaskCtx, value: T) -> Result<()> {
        let header = &self.inner.header;
        self.check_owner(ctx)?;
        if ctx.mode() == Mode::Verified {
            header.owner.store(ptr::null_mut(), Ordering::Relaxed);
            ctx.disown(header);
        }
        if self.inner.value.set(value).is_err() {
            return Err(Error::AlreadyCompleted(header.id));
        }
        header.complete(FULFILLED);
        Ok(())
    }

    /// The value if the promise is already completed; never blocks.
    pub fn try_get(&self) -> Option<Result<&T>> {
        match self.inner.header.state.load(Ordering::Acquire) {
            UNSET => None,
            _ => Some(self.outcome()),
        }
    }

    /// Waits for the value.
    ///
    /// Before blocking, the calling task records that it waits on this
    /// promise and follows the chain of owners and their waits. If the chain
    /// leads back to the caller, waiting would never end: the call fails with
    /// [`Error::DeadlockDetected`] and the cycle is recorded as an alarm.
    pub fn get(&self) -> Result<&T> {
        let ctx = task::current()?;
        ctx.count_get();
        if let Some(done) = self.try_get() {
            return done;
        }
        let header = &self.inner.header;
        let rt = &ctx.run.rt;
        if ctx.mode() == Mode::Baseline {
            header.wait(&rt.blocked);
            return self.outcome();
        }

        let config = &rt.config;
        let me = &ctx.record;
        let target = header as *const PromiseHeader as *mut PromiseHeader;
        header.mark_published();
        if config.wait_edge == WaitEdge::BeforeTraversal {
            me.waiting_on.store(target, Ordering::SeqCst);
        }
        rt.maybe_yield();
        let found = detect(me, header, config.traversal_budget, || rt.maybe_yield());
        if config.wait_edge == WaitEdge::AfterTraversal {
            rt.maybe_yield();
            me.waiting_on.store(target, Ordering::SeqCst);
        }

        let result = match found {
            Some(report) => {
                ctx.run.record(Alarm::Deadlock(report.clone()));
                Err(Error::DeadlockDetected(report))
            }
            None => {
                rt.maybe_yield();
                header.wait(&rt.blocked);
                self.outcome()
            }
        };
        // Not visible before the completion we just observed (or the alarm).
        me.waiting_on.store(ptr::null_mut(), Ordering::Release);
        result
    }

    fn outcome(&self) -> Result<&T> {
        match self.inner.header.state.load(Ordering::Acquire) {
            FULFILLED => Ok(self.inner.value.get().expect("fulfilled promises hold a value")),
            POISONED => Err(Error::PoisonedPromise {
                promise: self.id(),
                report: self.inner.header.poison_report(),
            }),
            _ => unreachable!("outcome of an unset promise"),
        }
    }
}

/// The live waits-for graph, read through raw pointers while pinned.
struct LiveGraph<'g> {
    _guard: &'g epoch::Guard,
}

impl WaitGraph for LiveGraph<'_> {
    type Task = NonNull<TaskRecord>;
    type Promise = NonNull<PromiseHeader>;

    fn owner(&self, promise: Self::Promise) -> Option<Self::Task> {
        // SAFETY: `promise` is the caller's own promise or was read from a
        // `waiting_on` cell under the guard this graph borrows.
        NonNull::new(unsafe { promise.as_ref() }.owner.load(Ordering::Relaxed))
    }

    fn waiting_on(&self, task: Self::Task) -> Option<Self::Promise> {
        // SAFETY: `task` was read from an owner cell under the same guard.
        NonNull::new(unsafe { task.as_ref() }.waiting_on.load(Ordering::Acquire))
    }
}

fn detect(
    me: &TaskRecord,
    promise: &PromiseHeader,
    budget: Option<usize>,
    between_steps: impl Fn(),
) -> Option<DeadlockReport> {
    let guard = epoch::pin();
    let graph = LiveGraph { _guard: &guard };
    let mut traversal = Traversal::new(NonNull::from(me), NonNull::from(promise), budget);
    loop {
        match traversal.step(&graph) {
            Step::Continue => between_steps(),
            Step::Clear(_) => return None,
            Step::Cycle(chain) => {
                let cycle = chain
                    .into_iter()
                    // SAFETY: every pointer in the chain was read under `guard`.
                    .map(|(t, p)| unsafe { (t.as_ref().id, p.as_ref().id) })
                    .collect();
                return Some(DeadlockReport::new(cycle));
            }
        }
    }
}

/// A type-erased promise handle, as yielded by
/// [`PromiseCollection::promises`](crate::PromiseCollection::promises).
#[derive(Clone)]
pub struct AnyPromise(pub(crate) ErasedPromise);

impl AnyPromise {
    pub fn id(&self) -> PromiseId {
        self.0.header().id
    }

    pub fn owner(&self) -> Option<TaskId> {
        self.0.header().owner_id()
    }

    pub fn state(&self) -> PromiseState {
        self.0.header().state()
    }
}

impl fmt::Debug for AnyPromise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("AnyPromise").field(&self.id()).finish()
    }
}

impl<T: Send + Sync + 'static> From<&Promise<T>> for AnyPromise {
    fn from(p: &Promise<T>) -> Self {
        AnyPromise(p.erased())
    }
}
