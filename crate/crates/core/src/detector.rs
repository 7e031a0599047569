//! The deadlock-cycle traversal run by every blocking `get`.
//!
//! Before a task commits to waiting on `p0` it publishes the wait edge
//! (`t0.waiting_on = p0`) and then walks the alternating chain
//! `p0.owner -> t1.waiting_on -> p1.owner -> t2.waiting_on -> ...`.
//! Reaching `t0` again proves a cycle. Reaching a fulfilled promise, a task
//! that is not waiting, or a promise whose owner changed between the two reads
//! that bracket the `waiting_on` read proves that progress is still possible.
//! Reaching some other task for the second time means the chain ran into a
//! cycle that `t0` is not part of; `t0` then blocks behind it without an alarm,
//! which bounds every traversal by the number of tasks.
//!
//! [`Traversal`] performs exactly one shared-memory read per [`Traversal::step`]
//! so the model checker can interleave other tasks between any two reads. The
//! runtime simply calls `step` in a loop.

/// Read access to the waits-for state: who owns a promise, and which promise a
/// task is currently waiting on.
pub trait WaitGraph {
    type Task: Copy + Eq;
    type Promise: Copy + Eq;

    fn owner(&self, promise: Self::Promise) -> Option<Self::Task>;
    fn waiting_on(&self, task: Self::Task) -> Option<Self::Promise>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    /// `t(i+1) <- p(i).owner`
    ReadOwner,
    /// `p(i+1) <- t(i+1).waiting_on`
    ReadWaitingOn,
    /// `t(i+1) == p(i).owner` still?
    RecheckOwner,
}

/// Why a traversal concluded that waiting is safe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Clear {
    /// The last promise on the chain has no owner: it is fulfilled.
    Fulfilled,
    /// The last task on the chain is not waiting on anything.
    NotWaiting,
    /// The previous promise changed hands while we looked at its owner.
    OwnerChanged,
    /// The chain revisited a task other than the origin.
    ForeignCycle,
    /// The configured step budget ran out. Never reported as a cycle.
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Step<T, P> {
    Continue,
    Clear(Clear),
    /// The chain returned to the origin task. Pairs are `(t_k, p_k)` with
    /// `t_0` the origin.
    Cycle(Vec<(T, P)>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Traversal<T, P> {
    chain: Vec<(T, P)>,
    next_task: Option<T>,
    next_promise: Option<P>,
    phase: Phase,
    budget: Option<usize>,
    reads: usize,
    done: bool,
}

impl<T: Copy + Eq, P: Copy + Eq> Traversal<T, P> {
    /// Starts a traversal for `origin` waiting on `promise`. The caller must
    /// already have published `origin.waiting_on = promise`.
    ///
    /// `budget` bounds how many links the chain may grow by; once exceeded
    /// the traversal clears with [`Clear::BudgetExhausted`].
    pub fn new(origin: T, promise: P, budget: Option<usize>) -> Self {
        Traversal {
            chain: vec![(origin, promise)],
            next_task: None,
            next_promise: None,
            phase: Phase::ReadOwner,
            budget,
            reads: 0,
            done: false,
        }
    }

    pub fn origin(&self) -> T {
        self.chain[0].0
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Links followed so far (the length of the chain minus one).
    pub fn depth(&self) -> usize {
        self.chain.len() - 1
    }

    /// Shared reads performed so far.
    pub fn reads(&self) -> usize {
        self.reads
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Name of the read the next step performs.
    pub fn label(&self) -> &'static str {
        match self.phase {
            Phase::ReadOwner if self.chain.len() == 1 => "read-first-owner",
            Phase::ReadOwner => "read-owner",
            Phase::ReadWaitingOn => "read-waiting-on",
            Phase::RecheckOwner => "recheck-owner",
        }
    }

    /// The `(task, promise)` links followed so far, origin first.
    pub fn chain(&self) -> &[(T, P)] {
        &self.chain
    }

    /// Performs one shared read and advances.
    ///
    /// # Panics
    ///
    /// If called again after the traversal has concluded.
    pub fn step<G>(&mut self, graph: &G) -> Step<T, P>
    where
        G: WaitGraph<Task = T, Promise = P> + ?Sized,
    {
        assert!(!self.done, "traversal already concluded");
        self.reads += 1;
        let origin = self.origin();
        let (_, last_promise) = *self.chain.last().expect("chain is never empty");
        match self.phase {
            Phase::ReadOwner => match graph.owner(last_promise) {
                Some(t) if t == origin => {
                    self.done = true;
                    Step::Cycle(self.chain.clone())
                }
                None => self.clear(Clear::Fulfilled),
                Some(t) => {
                    self.next_task = Some(t);
                    self.phase = Phase::ReadWaitingOn;
                    Step::Continue
                }
            },
            Phase::ReadWaitingOn => {
                let task = self.next_task.expect("owner read precedes waiting_on read");
                match graph.waiting_on(task) {
                    None => self.clear(Clear::NotWaiting),
                    Some(p) => {
                        self.next_promise = Some(p);
                        self.phase = Phase::RecheckOwner;
                        Step::Continue
                    }
                }
            }
            Phase::RecheckOwner => {
                let task = self.next_task.take().expect("owner read precedes re-check");
                let promise = self.next_promise.take().expect("waiting_on read precedes re-check");
                if graph.owner(last_promise) != Some(task) {
                    return self.clear(Clear::OwnerChanged);
                }
                if self.chain.iter().any(|&(t, _)| t == task) {
                    return self.clear(Clear::ForeignCycle);
                }
                self.chain.push((task, promise));
                if self.budget.is_some_and(|b| self.depth() > b) {
                    return self.clear(Clear::BudgetExhausted);
                }
                self.phase = Phase::ReadOwner;
                Step::Continue
            }
        }
    }

    /// Steps until the traversal concludes.
    pub fn run<G>(&mut self, graph: &G) -> Step<T, P>
    where
        G: WaitGraph<Task = T, Promise = P> + ?Sized,
    {
        loop {
            match self.step(graph) {
                Step::Continue => continue,
                done => return done,
            }
        }
    }

    fn clear(&mut self, why: Clear) -> Step<T, P> {
        self.done = true;
        Step::Clear(why)
    }
}

#[cfg(test)]
mod tests {
    use std::cell::RefCell;
    use std::collections::HashMap;

    use super::*;

    type Hook = Box<dyn Fn(&MapGraph)>;

    #[derive(Default)]
    struct MapGraph {
        owner: RefCell<HashMap<u32, u32>>,
        waiting: RefCell<HashMap<u32, u32>>,
        /// Mutation applied right after the n-th read.
        after_read: RefCell<Option<(usize, Hook)>>,
        reads: RefCell<usize>,
    }

    impl MapGraph {
        fn with(owner: &[(u32, u32)], waiting: &[(u32, u32)]) -> Self {
            let g = MapGraph::default();
            g.owner.borrow_mut().extend(owner.iter().copied());
            g.waiting.borrow_mut().extend(waiting.iter().copied());
            g
        }

        fn tick(&self) {
            let n = {
                let mut r = self.reads.borrow_mut();
                *r += 1;
                *r
            };
            let hook = self.after_read.borrow_mut().take();
            if let Some((at, f)) = hook {
                if at == n {
                    f(self);
                } else {
                    *self.after_read.borrow_mut() = Some((at, f));
                }
            }
        }
    }

    impl WaitGraph for MapGraph {
        type Task = u32;
        type Promise = u32;

        fn owner(&self, p: u32) -> Option<u32> {
            let v = self.owner.borrow().get(&p).copied();
            self.tick();
            v
        }

        fn waiting_on(&self, t: u32) -> Option<u32> {
            let v = self.waiting.borrow().get(&t).copied();
            self.tick();
            v
        }
    }

    #[test]
    fn self_wait_is_a_length_one_cycle() {
        // Task 1 owns promise 10 and waits on it.
        let g = MapGraph::with(&[(10, 1)], &[(1, 10)]);
        let mut tr = Traversal::new(1, 10, None);
        assert_eq!(tr.label(), "read-first-owner");
        assert_eq!(tr.step(&g), Step::Cycle(vec![(1, 10)]));
        assert_eq!(tr.reads(), 1);
    }

    #[test]
    fn fulfilled_promise_clears_at_first_read() {
        let g = MapGraph::with(&[], &[(1, 10)]);
        let mut tr = Traversal::new(1, 10, None);
        assert_eq!(tr.step(&g), Step::Clear(Clear::Fulfilled));
        assert!(tr.is_done());
    }

    #[test]
    fn running_owner_clears() {
        let g = MapGraph::with(&[(10, 2)], &[(1, 10)]);
        let mut tr = Traversal::new(1, 10, None);
        assert_eq!(tr.run(&g), Step::Clear(Clear::NotWaiting));
        assert_eq!(tr.reads(), 2);
    }

    #[test]
    fn two_task_cycle() {
        // 1 waits on 10 owned by 2; 2 waits on 20 owned by 1.
        let g = MapGraph::with(&[(10, 2), (20, 1)], &[(1, 10), (2, 20)]);
        let mut tr = Traversal::new(1, 10, None);
        let labels: Vec<&str> = std::iter::from_fn(|| {
            (!tr.is_done()).then(|| {
                let l = tr.label();
                tr.step(&g);
                l
            })
        })
        .collect();
        assert_eq!(
            labels,
            vec!["read-first-owner", "read-waiting-on", "recheck-owner", "read-owner"]
        );
        let mut tr = Traversal::new(1, 10, None);
        assert_eq!(tr.run(&g), Step::Cycle(vec![(1, 10), (2, 20)]));
    }

    #[test]
    fn cycle_not_through_origin_clears() {
        // 1 waits on 10 owned by 2; 2 and 3 deadlock among themselves.
        let g = MapGraph::with(&[(10, 2), (20, 3), (30, 2)], &[(1, 10), (2, 20), (3, 30)]);
        let mut tr = Traversal::new(1, 10, None);
        assert_eq!(tr.run(&g), Step::Clear(Clear::ForeignCycle));
        assert_eq!(tr.depth(), 2);
    }

    #[test]
    fn budget_bounds_the_chain() {
        // A waiting chain 1 -> 2 -> 3 -> 4 -> 5, with 5 running.
        let g = MapGraph::with(
            &[(10, 2), (20, 3), (30, 4), (40, 5)],
            &[(1, 10), (2, 20), (3, 30), (4, 40)],
        );
        let mut tr = Traversal::new(1, 10, Some(2));
        assert_eq!(tr.run(&g), Step::Clear(Clear::BudgetExhausted));
        assert_eq!(tr.depth(), 3);
        let mut tr = Traversal::new(1, 10, None);
        assert_eq!(tr.run(&g), Step::Clear(Clear::NotWaiting));
        assert_eq!(tr.depth(), 3);
    }

    #[test]
    fn owner_change_between_reads_clears() {
        let g = MapGraph::with(&[(10, 2), (20, 1)], &[(1, 10), (2, 20)]);
        // After the waiting_on read (read 2), promise 10 moves to task 3.
        *g.after_read.borrow_mut() = Some((
            2,
            Box::new(|g: &MapGraph| {
                g.owner.borrow_mut().insert(10, 3);
            }),
        ));
        let mut tr = Traversal::new(1, 10, None);
        assert_eq!(tr.run(&g), Step::Clear(Clear::OwnerChanged));
    }

    #[test]
    #[should_panic(expected = "already concluded")]
    fn stepping_after_conclusion_panics() {
        let g = MapGraph::with(&[], &[]);
        let mut tr = Traversal::new(1, 10, None);
        tr.step(&g);
        tr.step(&g);
    }
}
