//! Runtime configuration and the root-task entry point.

use std::rc::Rc;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, OnceLock};

use crate::alarms::AlarmRegistry;
use crate::error::{Error, Result};
use crate::ids::TaskId;
use crate::pool::Pool;
use crate::report::{Alarm, DeadlockReport, ExitCause, OmittedSetReport};
use crate::task::{self, TaskCtx, TaskOutput};

/// Whether ownership tracking and deadlock detection are on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Full ownership bookkeeping, omitted-set checks and deadlock detection.
    #[default]
    Verified,
    /// Plain promises: no owners, no wait edges, no checks.
    Baseline,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "verified" => Ok(Mode::Verified),
            "baseline" => Ok(Mode::Baseline),
            other => Err(format!("unknown mode `{other}` (expected baseline or verified)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Verified => "verified",
            Mode::Baseline => "baseline",
        })
    }
}

/// When `get` publishes its wait edge relative to the cycle traversal.
///
/// Only [`WaitEdge::BeforeTraversal`] is correct. The other variant exists so
/// tests can demonstrate that they catch the broken ordering.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum WaitEdge {
    #[default]
    BeforeTraversal,
    AfterTraversal,
}

#[derive(Clone, Debug)]
pub struct RuntimeConfig {
    pub mode: Mode,
    /// Maximum number of links a single traversal follows before giving up
    /// and blocking. `None` is unlimited. Exhausting the budget never raises.
    pub traversal_budget: Option<usize>,
    /// Stack size of worker threads.
    pub stack_size: usize,
    #[doc(hidden)]
    pub wait_edge: WaitEdge,
    /// Yield the thread around wait-edge publication and between traversal
    /// reads, to shake out interleavings on machines with few cores.
    #[doc(hidden)]
    pub yield_points: bool,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            mode: Mode::Verified,
            traversal_budget: None,
            stack_size: 1 << 20,
            wait_edge: WaitEdge::BeforeTraversal,
            yield_points: false,
        }
    }
}

impl RuntimeConfig {
    pub fn with_mode(mode: Mode) -> Self {
        RuntimeConfig {
            mode,
            ..Self::default()
        }
    }
}

pub(crate) struct RuntimeInner {
    pub(crate) config: RuntimeConfig,
    pub(crate) alarms: AlarmRegistry,
    pub(crate) pool: Pool,
    pub(crate) blocked: AtomicUsize,
}

impl RuntimeInner {
    pub(crate) fn maybe_yield(&self) {
        if self.config.yield_points {
            std::thread::yield_now();
        }
    }
}

/// Executes task trees. Each runtime owns a worker pool and an alarm registry.
pub struct Runtime {
    inner: Arc<RuntimeInner>,
}

impl Default for Runtime {
    fn default() -> Self {
        Runtime::new(RuntimeConfig::default())
    }
}

impl Runtime {
    pub fn new(config: RuntimeConfig) -> Self {
        let pool = Pool::new(config.stack_size);
        Runtime {
            inner: Arc::new(RuntimeInner {
                config,
                alarms: AlarmRegistry::new(),
                pool,
                blocked: AtomicUsize::new(0),
            }),
        }
    }

    pub fn with_mode(mode: Mode) -> Self {
        Runtime::new(RuntimeConfig::with_mode(mode))
    }

    /// The process-wide verified runtime used by [`run_root`].
    pub fn global() -> &'static Runtime {
        static GLOBAL: OnceLock<Runtime> = OnceLock::new();
        GLOBAL.get_or_init(Runtime::default)
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.inner.config
    }

    /// Every alarm raised by task trees of this runtime.
    pub fn alarms(&self) -> &AlarmRegistry {
        &self.inner.alarms
    }

    /// Tasks currently parked in `get`.
    pub fn blocked_tasks(&self) -> usize {
        self.inner.blocked.load(Ordering::SeqCst)
    }

    /// Most worker threads alive at once.
    pub fn peak_threads(&self) -> usize {
        self.inner.pool.peak_threads()
    }

    /// Runs `main` as the root task on the calling thread and returns once
    /// every task of the tree has terminated.
    ///
    /// The root is checked at exit like any other task: promises it still owns
    /// are reported and poisoned.
    pub fn run_root<F, R>(&self, main: F) -> Result<ExitReport<R>>
    where
        F: FnOnce() -> R,
        R: TaskOutput,
    {
        if task::in_task() {
            return Err(Error::Usage("run_root called from inside a task"));
        }
        let run = Arc::new(RunState::new(Arc::clone(&self.inner)));
        run.task_started();
        let ctx = Rc::new(TaskCtx::new(Arc::clone(&run), Vec::new()));
        let root = ctx.record.id;
        let (value, cause) = ctx.run_body(main);
        drop(ctx);
        run.task_finished();
        run.wait_all();
        Ok(ExitReport {
            root,
            value,
            cause,
            alarms: run.take_alarms(),
            stats: run.stats(),
        })
    }
}

/// [`Runtime::run_root`] on the process-wide runtime.
pub fn run_root<F, R>(main: F) -> Result<ExitReport<R>>
where
    F: FnOnce() -> R,
    R: TaskOutput,
{
    Runtime::global().run_root(main)
}

/// Operation counts of one task tree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub tasks: u64,
    pub gets: u64,
    pub sets: u64,
}

/// Outcome of [`Runtime::run_root`].
#[derive(Debug)]
pub struct ExitReport<R> {
    pub root: TaskId,
    /// What `main` returned; `None` if it panicked.
    pub value: Option<R>,
    pub cause: ExitCause,
    /// Alarms raised anywhere in the tree, in the order they were raised.
    pub alarms: Vec<Alarm>,
    pub stats: RunStats,
}

impl<R> ExitReport<R> {
    /// No alarms and a normal return from `main`.
    pub fn is_ok(&self) -> bool {
        self.alarms.is_empty() && !self.cause.is_exceptional()
    }

    pub fn omitted_sets(&self) -> impl Iterator<Item = &OmittedSetReport> {
        self.alarms.iter().filter_map(|a| match a {
            Alarm::OmittedSet(r) => Some(r),
            _ => None,
        })
    }

    pub fn deadlocks(&self) -> impl Iterator<Item = &DeadlockReport> {
        self.alarms.iter().filter_map(|a| match a {
            Alarm::Deadlock(r) => Some(r),
            _ => None,
        })
    }
}

/// State shared by all tasks of one `run_root` invocation.
pub(crate) struct RunState {
    pub(crate) rt: Arc<RuntimeInner>,
    live: Mutex<usize>,
    all_done: Condvar,
    alarms: Mutex<Vec<Alarm>>,
    tasks: AtomicU64,
    gets: AtomicU64,
    sets: AtomicU64,
}

impl RunState {
    fn new(rt: Arc<RuntimeInner>) -> Self {
        RunState {
            rt,
            live: Mutex::new(0),
            all_done: Condvar::new(),
            alarms: Mutex::new(Vec::new()),
            tasks: AtomicU64::new(0),
            gets: AtomicU64::new(0),
            sets: AtomicU64::new(0),
        }
    }

    pub(crate) fn record(&self, alarm: Alarm) {
        self.rt.alarms.record(alarm.clone());
        self.alarms.lock().unwrap_or_else(|e| e.into_inner()).push(alarm);
    }

    pub(crate) fn add_counts(&self, gets: u64, sets: u64) {
        self.gets.fetch_add(gets, Ordering::Relaxed);
        self.sets.fetch_add(sets, Ordering::Relaxed);
    }

    pub(crate) fn task_started(&self) {
        self.tasks.fetch_add(1, Ordering::Relaxed);
        *self.live.lock().unwrap_or_else(|e| e.into_inner()) += 1;
    }

    pub(crate) fn task_finished(&self) {
        let mut live = self.live.lock().unwrap_or_else(|e| e.into_inner());
        *live -= 1;
        if *live == 0 {
            self.all_done.notify_all();
        }
    }

    fn wait_all(&self) {
        let mut live = self.live.lock().unwrap_or_else(|e| e.into_inner());
        while *live > 0 {
            live = self.all_done.wait(live).unwrap_or_else(|e| e.into_inner());
        }
    }

    fn take_alarms(&self) -> Vec<Alarm> {
        std::mem::take(&mut *self.alarms.lock().unwrap_or_else(|e| e.into_inner()))
    }

    fn stats(&self) -> RunStats {
        RunStats {
            tasks: self.tasks.load(Ordering::Relaxed),
            gets: self.gets.load(Ordering::Relaxed),
            sets: self.sets.load(Ordering::Relaxed),
        }
    }
}
