//! Deadlock ground truth, computed directly on a global state.
//!
//! Each task waits on at most one promise and each promise has at most one
//! owner, so "task -> owner of the promise it waits on" is a partial function
//! and its cycles are exactly the deadlock cycles. This is deliberately a
//! different computation from the detector's traversal.

use crate::ids::{PromiseId, TaskId};
use crate::report::DeadlockReport;

use super::verdict::Verdict;

/// A global waits-for state: `waiting_on[t]` and `owner[p]`, by index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WaitState {
    pub waiting_on: Vec<Option<usize>>,
    pub owner: Vec<Option<usize>>,
}

impl WaitState {
    fn next(&self, t: usize) -> Option<usize> {
        let p = self.waiting_on[t]?;
        self.owner[p]
    }

    fn report(&self, members: &[usize]) -> DeadlockReport {
        let cycle = members
            .iter()
            .map(|&t| {
                let p = self.waiting_on[t].expect("cycle members wait");
                (TaskId(t as u64), PromiseId(p as u64))
            })
            .collect();
        DeadlockReport::new(cycle).canonical()
    }
}

/// Every deadlock cycle in `state`, canonical and sorted.
pub fn oracle_cycles(state: &WaitState) -> Vec<DeadlockReport> {
    const NEW: u8 = 0;
    const ACTIVE: u8 = 1;
    const DONE: u8 = 2;
    let n = state.waiting_on.len();
    let mut color = vec![NEW; n];
    let mut found = Vec::new();
    for start in 0..n {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(t) = cur {
            match color[t] {
                NEW => {
                    color[t] = ACTIVE;
                    path.push(t);
                    cur = state.next(t);
                }
                ACTIVE => {
                    let from = path.iter().position(|&x| x == t).expect("active tasks are on the path");
                    found.push(state.report(&path[from..]));
                    break;
                }
                _ => break,
            }
        }
        for t in path {
            color[t] = DONE;
        }
    }
    found.sort();
    found
}

/// The deadlock cycle through `task`, if there is one.
pub fn cycle_through(state: &WaitState, task: usize) -> Option<DeadlockReport> {
    let mut members = vec![task];
    let mut cur = state.next(task)?;
    while cur != task {
        if members.contains(&cur) {
            return None;
        }
        members.push(cur);
        cur = state.next(cur)?;
    }
    Some(state.report(&members))
}

/// `Deadlock` with the least cycle when `state` contains one.
pub fn oracle_verdict(state: &WaitState) -> Option<Verdict> {
    oracle_cycles(state).into_iter().next().map(Verdict::Deadlock)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(waiting_on: &[Option<usize>], owner: &[Option<usize>]) -> WaitState {
        WaitState {
            waiting_on: waiting_on.to_vec(),
            owner: owner.to_vec(),
        }
    }

    fn pairs(r: &DeadlockReport) -> Vec<(u64, u64)> {
        r.cycle.iter().map(|(t, p)| (t.0, p.0)).collect()
    }

    #[test]
    fn two_task_cycle() {
        // Root (0) waits on q (1) owned by 2; task 2 waits on p (0) owned by root.
        let s = state(&[Some(1), None, Some(0)], &[Some(0), Some(2)]);
        let cycles = oracle_cycles(&s);
        assert_eq!(cycles.len(), 1);
        assert_eq!(pairs(&cycles[0]), vec![(0, 1), (2, 0)]);
        assert_eq!(cycle_through(&s, 2), Some(cycles[0].clone()));
        assert_eq!(cycle_through(&s, 1), None);
        assert_eq!(oracle_verdict(&s), Some(Verdict::Deadlock(cycles[0].clone())));
    }

    #[test]
    fn waiting_on_a_running_owner_is_no_deadlock() {
        let s = state(&[Some(0), None], &[Some(1)]);
        assert!(oracle_cycles(&s).is_empty());
        assert_eq!(oracle_verdict(&s), None);
    }

    #[test]
    fn self_cycle() {
        let s = state(&[Some(0)], &[Some(0)]);
        assert_eq!(pairs(&oracle_cycles(&s)[0]), vec![(0, 0)]);
    }

    #[test]
    fn tail_into_a_cycle_is_not_part_of_it() {
        // 0 -> 1 -> 2 -> 1.
        let s = state(&[Some(0), Some(1), Some(2)], &[Some(1), Some(2), Some(1)]);
        let cycles = oracle_cycles(&s);
        assert_eq!(cycles.len(), 1);
        assert_eq!(pairs(&cycles[0]), vec![(1, 1), (2, 2)]);
        assert_eq!(cycle_through(&s, 0), None);
    }
}
