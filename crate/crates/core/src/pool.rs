//! Thread pool that never lets blocked tasks starve runnable ones: when a job
//! is submitted and no worker is idle, a new worker thread is started. A task
//! blocked in `get` keeps its thread, so the number of threads tracks the
//! number of simultaneously blocked tasks.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;
use std::time::Duration;

type Job = Box<dyn FnOnce() + Send + 'static>;

/// How long an idle worker lingers before exiting.
const IDLE_TIMEOUT: Duration = Duration::from_secs(5);

pub(crate) struct Pool {
    shared: Arc<Shared>,
}

struct Shared {
    state: Mutex<State>,
    available: Condvar,
    stack_size: usize,
}

#[derive(Default)]
struct State {
    queue: VecDeque<Job>,
    /// Workers parked on `available`.
    idle: usize,
    /// Workers spawned but not yet looking at the queue.
    starting: usize,
    threads: usize,
    peak_threads: usize,
    shutdown: bool,
}

impl Pool {
    pub(crate) fn new(stack_size: usize) -> Self {
        Pool {
            shared: Arc::new(Shared {
                state: Mutex::new(State::default()),
                available: Condvar::new(),
                stack_size,
            }),
        }
    }

    pub(crate) fn submit(&self, job: Job) {
        let mut st = self.shared.lock();
        st.queue.push_back(job);
        if st.queue.len() > st.idle + st.starting {
            st.starting += 1;
            st.threads += 1;
            st.peak_threads = st.peak_threads.max(st.threads);
            drop(st);
            let shared = Arc::clone(&self.shared);
            thread::Builder::new()
                .name("vow-worker".into())
                .stack_size(self.shared.stack_size)
                .spawn(move || shared.work())
                .expect("failed to start a worker thread");
        } else {
            self.shared.available.notify_one();
        }
    }

    pub(crate) fn peak_threads(&self) -> usize {
        self.shared.lock().peak_threads
    }
}

impl Drop for Pool {
    fn drop(&mut self) {
        self.shared.lock().shutdown = true;
        self.shared.available.notify_all();
    }
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn work(&self) {
        let mut st = self.lock();
        st.starting -= 1;
        loop {
            if let Some(job) = st.queue.pop_front() {
                drop(st);
                job();
                st = self.lock();
                continue;
            }
            if st.shutdown {
                break;
            }
            st.idle += 1;
            let (guard, timeout) = self
                .available
                .wait_timeout(st, IDLE_TIMEOUT)
                .unwrap_or_else(|e| e.into_inner());
            st = guard;
            st.idle -= 1;
            if timeout.timed_out() && st.queue.is_empty() {
                break;
            }
        }
        st.threads -= 1;
    }
}

#[cfg(test)]
mod tests {
    use std::sync::mpsc;

    use super::*;

    #[test]
    fn blocked_jobs_do_not_starve_later_ones() {
        let pool = Pool::new(256 * 1024);
        let (release_tx, release_rx) = mpsc::channel::<()>();
        let (done_tx, done_rx) = mpsc::channel();
        // The first job blocks until the second one has run.
        let d1 = done_tx.clone();
        pool.submit(Box::new(move || {
            release_rx.recv().unwrap();
            d1.send(1).unwrap();
        }));
        pool.submit(Box::new(move || {
            release_tx.send(()).unwrap();
            done_tx.send(2).unwrap();
        }));
        let mut got = vec![
            done_rx.recv_timeout(Duration::from_secs(10)).unwrap(),
            done_rx.recv_timeout(Duration::from_secs(10)).unwrap(),
        ];
        got.sort();
        assert_eq!(got, vec![1, 2]);
        assert!(pool.peak_threads() >= 2);
    }

    #[test]
    fn idle_workers_are_reused() {
        let pool = Pool::new(256 * 1024);
        for _ in 0..20 {
            let (tx, rx) = mpsc::channel();
            pool.submit(Box::new(move || tx.send(()).unwrap()));
            rx.recv_timeout(Duration::from_secs(10)).unwrap();
            // Let the worker get back to waiting on the queue.
            thread::sleep(Duration::from_millis(2));
        }
        assert!(pool.peak_threads() <= 2, "peak {}", pool.peak_threads());
    }
}
