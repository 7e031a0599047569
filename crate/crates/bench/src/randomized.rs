//! Random ownership movement over a task tree.
//!
//! The root allocates every promise and each one travels down the tree, one
//! spawn at a time, to the task that fulfills it. Tasks wait only on promises
//! fulfilled by higher-numbered tasks, so the run cannot deadlock: the
//! highest-numbered task waits on nothing, and every task spawns its children
//! before it waits.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vow::{spawn, Promise, Result, TaskHandle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub tasks: usize,
    pub promises: usize,
    pub fanout: usize,
    pub max_gets: usize,
    pub seed: u64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            tasks: 254,
            promises: 500,
            fanout: 3,
            max_gets: 4,
            seed: 0x5eed,
        }
    }
}

/// Who fulfills what and who waits on what. Tasks are numbered breadth-first.
#[derive(Debug)]
pub struct Plan {
    shape: Shape,
    owner: Vec<usize>,
    owned: Vec<Vec<usize>>,
    gets: Vec<Vec<usize>>,
}

impl Plan {
    pub fn new(shape: Shape) -> Self {
        let tasks = shape.tasks.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(shape.seed);
        let owner: Vec<usize> = (0..shape.promises).map(|_| rng.random_range(0..tasks)).collect();
        let mut owned = vec![Vec::new(); tasks];
        for (p, &o) in owner.iter().enumerate() {
            owned[o].push(p);
        }
        let gets = (0..tasks)
            .map(|t| {
                let later: Vec<usize> = (0..shape.promises).filter(|&p| owner[p] > t).collect();
                if later.is_empty() {
                    return Vec::new();
                }
                let n = rng.random_range(0..=shape.max_gets);
                (0..n).map(|_| later[rng.random_range(0..later.len())]).collect()
            })
            .collect();
        Plan {
            shape: Shape { tasks, ..shape },
            owner,
            owned,
            gets,
        }
    }

    fn children(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        let f = self.shape.fanout.max(1);
        (t * f + 1..=t * f + f).filter(move |&c| c < self.shape.tasks)
    }

    fn parent(&self, t: usize) -> Option<usize> {
        (t > 0).then(|| (t - 1) / self.shape.fanout.max(1))
    }

    fn in_subtree(&self, root: usize, mut t: usize) -> bool {
        loop {
            if t == root {
                return true;
            }
            match self.parent(t) {
                Some(p) if p >= root => t = p,
                _ => return false,
            }
        }
    }

    pub fn value(&self, p: usize) -> u64 {
        let mut x = self.shape.seed ^ (p as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        x ^= x >> 31;
        x.wrapping_mul(0xbf58_476d_1ce4_e5b9) >> 8
    }

    /// What the run must produce, computed without running it.
    pub fn expected(&self) -> u64 {
        self.gets
            .iter()
            .flatten()
            .fold(0u64, |acc, &p| acc.wrapping_add(self.value(p)))
    }
}

/// Runs the plan from the current task, which plays task 0. Returns the sum of
/// every value read.
pub fn randomized(plan: Arc<Plan>) -> Result<u64> {
    let promises: Arc<Vec<Promise<u64>>> =
        Arc::new((0..plan.owner.len()).map(|_| Promise::new()).collect::<Result<_>>()?);
    let total = Arc::new(AtomicU64::new(0));
    run_task(0, &plan, &promises, &total)?;
    Ok(total.load(Ordering::SeqCst))
}

fn run_task(
    t: usize,
    plan: &Arc<Plan>,
    promises: &Arc<Vec<Promise<u64>>>,
    total: &Arc<AtomicU64>,
) -> Result<()> {
    let mut children: Vec<TaskHandle> = Vec::new();
    for c in plan.children(t) {
        let moved: Vec<Promise<u64>> = (0..promises.len())
            .filter(|&p| plan.in_subtree(c, plan.owner[p]))
            .map(|p| promises[p].clone())
            .collect();
        let (plan, promises, total) = (plan.clone(), promises.clone(), total.clone());
        children.push(spawn(&[&moved], move || run_task(c, &plan, &promises, &total))?);
    }
    let mut sum = 0u64;
    for &p in &plan.gets[t] {
        sum = sum.wrapping_add(*promises[p].get()?);
    }
    total.fetch_add(sum, Ordering::SeqCst);
    for &p in &plan.owned[t] {
        promises[p].set(plan.value(p))?;
    }
    for child in children {
        child.join()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waits_only_on_later_tasks() {
        let plan = Plan::new(Shape::default());
        for (t, gets) in plan.gets.iter().enumerate() {
            assert!(gets.iter().all(|&p| plan.owner[p] > t));
        }
        assert_eq!(plan.owned.iter().map(Vec::len).sum::<usize>(), 500);
    }

    #[test]
    fn subtree_membership() {
        let plan = Plan::new(Shape::default());
        assert!(plan.in_subtree(0, 253));
        assert!(plan.in_subtree(1, 4));
        assert!(plan.in_subtree(1, 13));
        assert!(!plan.in_subtree(2, 4));
        assert!(!plan.in_subtree(4, 1));
    }

    #[test]
    fn small_plans_run_clean() {
        for seed in 0..20 {
            let plan = Arc::new(Plan::new(Shape {
                tasks: 13,
                promises: 20,
                seed,
                ..Shape::default()
            }));
            let want = plan.expected();
            let report = vow::run_root(move || randomized(plan)).unwrap();
            assert!(report.is_ok(), "seed {seed}: {:?}", report.alarms);
            assert_eq!(report.value.unwrap().unwrap(), want);
            assert_eq!(report.stats.tasks, 13);
        }
    }
}
