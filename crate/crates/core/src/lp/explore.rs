//! Exhaustive exploration of every interleaving of a program's steps.
//!
//! The search is a depth-first walk over global states with memoization: a
//! state reached again along a different schedule is not expanded twice, and
//! the number of complete schedules through it is carried along instead. The
//! checks are local to states and steps, so pruning repeated states loses no
//! violation:
//!
//! * precision: a raised cycle must have existed, with the raising task in it,
//!   at some state since that task published its wait edge;
//! * completeness: no reachable state has a deadlock cycle whose tasks are all
//!   blocked;
//! * no reachable state without enabled steps has unfinished tasks.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::runtime::WaitEdge;

use super::ast::Program;
use super::model::{Model, ModelError, State, StepLabel, Violation};
use super::verdict::{Outcome, Verdict};

/// Exploration bounds. Exceeding one is reported, never silently truncated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Distinct global states. Each one stands for every schedule through it.
    pub max_states: usize,
    /// Steps in a single schedule.
    pub max_schedule_len: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_states: 1_000_000,
            max_schedule_len: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExploreOptions {
    pub limits: Limits,
    /// Where `get` publishes its wait edge. Only the default is correct.
    pub wait_edge: WaitEdge,
    /// Passed to every traversal; `None` is unlimited.
    pub traversal_budget: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExplorationStats {
    /// Complete schedules, saturating at `u128::MAX`.
    pub interleavings: u128,
    /// Distinct states visited.
    pub states: usize,
    /// Every verdict seen at the end of some schedule.
    pub verdicts: BTreeSet<Verdict>,
    /// Most reads made by a single traversal.
    pub max_traversal: usize,
    /// Longest schedule, in steps.
    pub max_schedule_len: usize,
}

/// A completed exploration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exploration {
    pub stats: ExplorationStats,
    /// Every distinct end-of-schedule outcome.
    pub outcomes: BTreeSet<Outcome>,
}

impl Exploration {
    /// True when every schedule ends with `pred` holding.
    pub fn all(&self, pred: impl Fn(&Outcome) -> bool) -> bool {
        self.outcomes.iter().all(pred)
    }
}

/// A schedule that violates a check, with the steps leading to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub violation: Violation,
    /// Task index of every step, replayable with [`replay`].
    pub schedule: Vec<usize>,
    pub trace: Vec<StepLabel>,
}

impl Counterexample {
    /// One step per line: task, instruction, step.
    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|s| format!("{s}\n")).collect()
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} after {} steps:", self.violation, self.trace.len())?;
        f.write_str(&self.trace_text())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExploreError {
    #[error("exploration budget exceeded ({what}) after {} states", stats.states)]
    BudgetExceeded {
        what: &'static str,
        stats: ExplorationStats,
    },
    #[error("counterexample: {0}")]
    Counterexample(Box<Counterexample>),
    #[error(transparent)]
    Model(#[from] ModelError),
}

struct Frame {
    state: State,
    enabled: Vec<usize>,
    next: usize,
    schedules: u128,
    /// The step that led here; `None` for the initial state.
    via: Option<(usize, StepLabel)>,
}

/// Explores every interleaving of `program`.
pub fn explore(program: &Program, options: &ExploreOptions) -> Result<Exploration, ExploreError> {
    let model = Model::compile(program, options.wait_edge, options.traversal_budget)?;
    let limits = options.limits;
    let mut stats = ExplorationStats::default();
    let mut outcomes = BTreeSet::new();
    let mut done: HashMap<State, u128> = HashMap::new();

    let counterexample = |stack: &[Frame], last: Option<(usize, StepLabel)>, violation| {
        let mut schedule = Vec::new();
        let mut trace = Vec::new();
        for (t, label) in stack.iter().filter_map(|f| f.via.clone()).chain(last) {
            schedule.push(t);
            trace.push(label);
        }
        ExploreError::Counterexample(Box::new(Counterexample {
            violation,
            schedule,
            trace,
        }))
    };

    let init = model.initial();
    if let Err(v) = model.check(&init) {
        return Err(counterexample(&[], None, v));
    }
    let mut stack = vec![Frame {
        enabled: model.enabled(&init),
        state: init,
        next: 0,
        schedules: 0,
        via: None,
    }];

    while let Some(top) = stack.last_mut() {
        if top.next == top.enabled.len() {
            let frame = stack.pop().expect("stack is non-empty");
            let count = if frame.enabled.is_empty() {
                match model.outcome(&frame.state) {
                    Ok(outcome) => {
                        stats.verdicts.extend(outcome.verdicts.iter().cloned());
                        outcomes.insert(outcome);
                    }
                    Err(v) => {
                        stack.push(frame);
                        return Err(counterexample(&stack, None, v));
                    }
                }
                stats.max_schedule_len = stats.max_schedule_len.max(stack.len());
                1
            } else {
                frame.schedules
            };
            done.insert(frame.state, count);
            match stack.last_mut() {
                Some(parent) => parent.schedules = parent.schedules.saturating_add(count),
                None => stats.interleavings = count,
            }
            continue;
        }

        let t = top.enabled[top.next];
        top.next += 1;
        let mut state = top.state.clone();
        let label = model.label(&state, t);
        if let Err(v) = model.step(&mut state, t) {
            return Err(counterexample(&stack, Some((t, label)), v));
        }
        if let Some(&count) = done.get(&state) {
            let top = stack.last_mut().expect("stack is non-empty");
            top.schedules = top.schedules.saturating_add(count);
            continue;
        }
        if let Err(v) = model.check(&state) {
            return Err(counterexample(&stack, Some((t, label)), v));
        }
        stats.max_traversal = stats.max_traversal.max(model.traversal_reads(&state));
        stats.states = done.len() + stack.len() + 1;
        if stats.states > limits.max_states {
            return Err(ExploreError::BudgetExceeded {
                what: "distinct states",
                stats,
            });
        }
        if stack.len() + 1 > limits.max_schedule_len {
            return Err(ExploreError::BudgetExceeded {
                what: "schedule length",
                stats,
            });
        }
        stack.push(Frame {
            enabled: model.enabled(&state),
            state,
            next: 0,
            schedules: 0,
            via: Some((t, label)),
        });
    }
    stats.states = done.len();
    Ok(Exploration { stats, outcomes })
}

/// The result of re-running a fixed schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replay {
    pub trace: Vec<StepLabel>,
    /// The first violation hit, if any.
    pub violation: Option<Violation>,
    /// Set when the schedule ran to a state with no enabled step.
    pub outcome: Option<Outcome>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("step {step}: task t{task} cannot move")]
    NotEnabled { step: usize, task: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Re-executes `schedule` (task indices, one per step) deterministically.
pub fn replay(
    program: &Program,
    schedule: &[usize],
    options: &ExploreOptions,
) -> Result<Replay, ReplayError> {
    let model = Model::compile(program, options.wait_edge, options.traversal_budget)?;
    let mut state = model.initial();
    let mut trace = Vec::new();
    for (step, &t) in schedule.iter().enumerate() {
        if !model.enabled(&state).contains(&t) {
            return Err(ReplayError::NotEnabled { step, task: t });
        }
        trace.push(model.label(&state, t));
        if let Err(v) = model.step(&mut state, t).and_then(|()| model.check(&state)) {
            return Ok(Replay {
                trace,
                violation: Some(v),
                outcome: None,
            });
        }
    }
    let (violation, outcome) = if model.enabled(&state).is_empty() {
        match model.outcome(&state) {
            Ok(o) => (None, Some(o)),
            Err(v) => (Some(v), None),
        }
    } else {
        (None, None)
    };
    Ok(Replay {
        trace,
        violation,
        outcome,
    })
}

/// Task count and promise names of a program as the model numbers them.
pub fn numbering(program: &Program) -> Result<(usize, Vec<String>), ModelError> {
    let model = Model::compile(program, WaitEdge::default(), None)?;
    let names = (0..program.promise_count())
        .map(|p| model.promise_name(p).to_string())
        .collect();
    Ok((model.task_count(), names))
}
