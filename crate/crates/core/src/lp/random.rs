//! Seeded random well-formed programs.
//!
//! The generator builds a random task tree. Every promise is created at the
//! top of some task's body and handed down the tree, one `async` at a time,
//! to a designated task below it, which usually sets it. Other tasks sprinkle
//! `get`s over the promises in scope, and occasionally a `set` of a promise
//! they do not own.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::{Instr, Program};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomParams {
    /// At least 1; the root counts.
    pub max_tasks: usize,
    pub max_promises: usize,
    /// Most `get`s per task.
    pub max_gets_per_task: usize,
    /// Chance that the designated task actually sets its promise.
    pub set_probability: f64,
    /// Chance per task of one `set` of a promise it was not given.
    pub stray_set_probability: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            max_tasks: 4,
            max_promises: 4,
            max_gets_per_task: 2,
            set_probability: 0.85,
            stray_set_probability: 0.05,
        }
    }
}

enum Item {
    Child(usize),
    Set(usize),
    Get(usize),
}

/// A program determined entirely by `seed` and `params`.
pub fn random_program(seed: u64, params: &RandomParams) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tasks = rng.random_range(1..=params.max_tasks.max(1));
    let promises = if params.max_promises == 0 {
        0
    } else {
        rng.random_range(1..=params.max_promises)
    };

    let parent: Vec<Option<usize>> = (0..tasks)
        .map(|t| (t > 0).then(|| rng.random_range(0..t)))
        .collect();
    let path_up = |mut t: usize, to: usize| {
        let mut path = vec![t];
        while t != to {
            t = parent[t].expect("`to` is an ancestor");
            path.push(t);
        }
        path.reverse();
        path
    };
    let descendants = |root: usize| -> Vec<usize> {
        (0..tasks)
            .filter(|&t| {
                let mut cur = Some(t);
                while let Some(c) = cur {
                    if c == root {
                        return true;
                    }
                    cur = parent[c];
                }
                false
            })
            .collect()
    };

    let mut creates: Vec<Vec<usize>> = vec![Vec::new(); tasks];
    let mut moves: Vec<Vec<usize>> = vec![Vec::new(); tasks];
    let mut items: Vec<Vec<Item>> = (0..tasks).map(|_| Vec::new()).collect();
    for t in 1..tasks {
        items[parent[t].expect("non-root")].push(Item::Child(t));
    }
    let mut setter = vec![None; promises];
    for (p, slot) in setter.iter_mut().enumerate() {
        let creator = rng.random_range(0..tasks);
        creates[creator].push(p);
        let below = descendants(creator);
        let target = below[rng.random_range(0..below.len())];
        let path = path_up(target, creator);
        for &hop in &path[1..] {
            moves[hop].push(p);
        }
        if rng.random_bool(params.set_probability) {
            items[target].push(Item::Set(p));
            *slot = Some(target);
        }
    }

    // Promises in scope in each task: those created by it or its ancestors.
    let scope = |t: usize| {
        let mut v = Vec::new();
        let mut cur = Some(t);
        while let Some(c) = cur {
            v.extend(creates[c].iter().copied());
            cur = parent[c];
        }
        v.sort_unstable();
        v
    };
    for (t, mine) in items.iter_mut().enumerate() {
        let visible = scope(t);
        if visible.is_empty() {
            continue;
        }
        for _ in 0..rng.random_range(0..=params.max_gets_per_task) {
            mine.push(Item::Get(visible[rng.random_range(0..visible.len())]));
        }
        if rng.random_bool(params.stray_set_probability) {
            let strays: Vec<usize> = visible.iter().copied().filter(|&p| setter[p] != Some(t)).collect();
            if let Some(&p) = strays.get(rng.random_range(0..strays.len().max(1))) {
                mine.push(Item::Set(p));
            }
        }
        mine.shuffle(&mut rng);
    }

    let name = |p: usize| format!("p{p}");
    fn emit(
        t: usize,
        creates: &[Vec<usize>],
        moves: &[Vec<usize>],
        items: &mut [Vec<Item>],
        name: &dyn Fn(usize) -> String,
    ) -> Vec<Instr> {
        let mut body: Vec<Instr> = creates[t].iter().map(|&p| Instr::New(name(p))).collect();
        for item in std::mem::take(&mut items[t]) {
            body.push(match item {
                Item::Set(p) => Instr::Set(name(p)),
                Item::Get(p) => Instr::Get(name(p)),
                Item::Child(c) => {
                    let mut moved = moves[c].clone();
                    moved.sort_unstable();
                    Instr::Async {
                        moved: moved.into_iter().map(name).collect(),
                        body: emit(c, creates, moves, items, name),
                    }
                }
            });
        }
        body
    }
    Program::new(emit(0, &creates, &moves, &mut items, &name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::parse::{check_well_formed, parse_program};

    #[test]
    fn deterministic_in_the_seed() {
        let params = RandomParams::default();
        for seed in 0..50 {
            assert_eq!(random_program(seed, &params), random_program(seed, &params));
        }
        let distinct: std::collections::HashSet<_> =
            (0..50).map(|s| random_program(s, &params).to_string()).collect();
        assert!(distinct.len() > 40);
    }

    #[test]
    fn respects_the_size_bounds() {
        let params = RandomParams {
            max_tasks: 3,
            max_promises: 2,
            ..RandomParams::default()
        };
        for seed in 0..500 {
            let p = random_program(seed, &params);
            assert!(p.task_count() <= 3);
            assert!((1..=2).contains(&p.promise_count()));
        }
    }

    #[test]
    fn single_task_single_promise() {
        let params = RandomParams {
            max_tasks: 1,
            max_promises: 1,
            ..RandomParams::default()
        };
        for seed in 0..200 {
            let p = random_program(seed, &params);
            assert_eq!(p.body[0], Instr::New("p0".into()));
            assert!(p
                .body
                .iter()
                .all(|i| matches!(i, Instr::New(_) | Instr::Set(_) | Instr::Get(_))));
        }
    }

    #[test]
    fn programs_are_well_formed_and_round_trip() {
        for seed in 0..2000 {
            let p = random_program(seed, &RandomParams::default());
            check_well_formed(&p).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{p}"));
            assert_eq!(parse_program(&p.to_string()).unwrap(), p, "seed {seed}");
        }
    }
}
