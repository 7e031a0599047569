use std::collections::BTreeSet;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use proptest::prelude::*;
use vow::detector::{Step, Traversal, WaitGraph};
use vow::lp::oracle::{cycle_through, oracle_cycles, WaitState};

struct Frozen<'a>(&'a WaitState);

impl WaitGraph for Frozen<'_> {
    type Task = usize;
    type Promise = usize;

    fn owner(&self, p: usize) -> Option<usize> {
        self.0.owner[p]
    }

    fn waiting_on(&self, t: usize) -> Option<usize> {
        self.0.waiting_on[t]
    }
}

fn states() -> impl Strategy<Value = WaitState> {
    (1usize..9, 1usize..9).prop_flat_map(|(tasks, promises)| {
        (
            prop::collection::vec(prop::option::weighted(0.7, 0..promises), tasks),
            prop::collection::vec(prop::option::weighted(0.8, 0..tasks), promises),
        )
            .prop_map(|(waiting_on, owner)| WaitState { waiting_on, owner })
    })
}

/// Task sets of the cycles in the waits-for graph, via strongly connected
/// components.
fn scc_cycles(state: &WaitState) -> BTreeSet<BTreeSet<usize>> {
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..state.waiting_on.len()).map(|t| g.add_node(t)).collect();
    for (t, w) in state.waiting_on.iter().enumerate() {
        if let Some(owner) = w.and_then(|p| state.owner[p]) {
            g.add_edge(nodes[t], nodes[owner], ());
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .filter(|scc| scc.len() > 1 || g.contains_edge(scc[0], scc[0]))
        .map(|scc| scc.into_iter().map(|n| g[n]).collect())
        .collect()
}

fn members(cycle: impl Iterator<Item = usize>) -> BTreeSet<usize> {
    cycle.collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn oracle_agrees_with_strongly_connected_components(state in states()) {
        let ours: BTreeSet<_> = oracle_cycles(&state)
            .iter()
            .map(|r| members(r.tasks().map(|t| t.0 as usize)))
            .collect();
        prop_assert_eq!(ours, scc_cycles(&state));
    }

    #[test]
    fn quiescent_traversal_finds_exactly_the_cycle_through_its_origin(state in states()) {
        let sccs = scc_cycles(&state);
        for (t, w) in state.waiting_on.iter().enumerate() {
            let Some(p) = *w else { continue };
            let expected = sccs.iter().find(|c| c.contains(&t));
            match Traversal::new(t, p, None).run(&Frozen(&state)) {
                Step::Cycle(chain) => {
                    let found = members(chain.iter().map(|&(t, _)| t));
                    prop_assert_eq!(Some(&found), expected);
                    let oracle = cycle_through(&state, t).expect("oracle sees the cycle too");
                    prop_assert_eq!(oracle.len(), chain.len());
                    for &(task, promise) in &chain {
                        prop_assert_eq!(state.waiting_on[task], Some(promise));
                    }
                }
                Step::Clear(_) => {
                    prop_assert!(expected.is_none());
                    prop_assert!(cycle_through(&state, t).is_none());
                }
                Step::Continue => unreachable!("run only returns a conclusion"),
            }
        }
    }

    #[test]
    fn traversal_reads_are_bounded_by_the_task_count(state in states()) {
        let n = state.waiting_on.len();
        for (t, w) in state.waiting_on.iter().enumerate() {
            let Some(p) = *w else { continue };
            let mut trav = Traversal::new(t, p, None);
            trav.run(&Frozen(&state));
            prop_assert!(trav.reads() <= 3 * n + 1);
        }
    }
}
