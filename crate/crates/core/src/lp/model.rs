//! Step semantics of L_p under sequential consistency.
//!
//! Each task executes one atomic step at a time. Steps mirror the runtime:
//!
//! * `new`: owner and owned list updated together.
//! * `set`: check and clear the owner; then publish the value.
//! * `get`: check for completion; publish the wait edge; one step per read of
//!   the detector traversal; then either raise (and clear the edge) or block,
//!   and clear the edge once woken.
//! * `async`: check ownership of every moved promise; then one step per owner
//!   hand-off. The child becomes runnable with the last hand-off.
//! * exit: check the owned list; then poison each leftover promise.
//!
//! A task whose instruction fails (deadlock, poisoned promise or policy
//! violation) skips the rest of its body and goes straight to its exit check.

use crate::detector::{Step, Traversal, WaitGraph};
use crate::ids::{PromiseId, TaskId};
use crate::report::{DeadlockReport, ExitCause, OmittedSetReport};
use crate::runtime::WaitEdge;

use super::ast::{Instr, Program};
use super::oracle::{cycle_through, WaitState};
use super::verdict::{Fate, Outcome, PolicyKind, Verdict};

pub(crate) const MAX_PROMISES: usize = 32;
pub(crate) const MAX_TASKS: usize = 255;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Op {
    New(u8),
    Set(u8),
    Get(u8),
    Async { moved: u32, child: u8 },
}

#[derive(Clone, Debug)]
struct TaskCode {
    ops: Vec<Op>,
    text: Vec<String>,
}

/// A program resolved to task and promise indices.
///
/// Tasks are numbered by the preorder position of their `async` (the root is
/// 0), promises by the preorder position of their `new`.
#[derive(Clone, Debug)]
pub(crate) struct Model {
    tasks: Vec<TaskCode>,
    promise_names: Vec<String>,
    wait_edge: WaitEdge,
    budget: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum PState {
    Unset,
    Fulfilled,
    Poisoned(u8),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Prom {
    owner: Option<u8>,
    state: PState,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Stage {
    Dormant,
    Ready,
    SetFulfill(u8),
    GetEnter(u8),
    GetTraverse(u8, Traversal<u8, u8>),
    GetLateEdge(u8),
    GetRaise(DeadlockReport),
    GetBlocked(u8),
    GetReset(u8),
    AsyncMove { child: u8, rest: u32 },
    Poison(u32),
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Task {
    pc: usize,
    stage: Stage,
    waiting_on: Option<u8>,
    owned: u32,
    fate: Option<Fate>,
    /// Deadlock cycles through this task seen since its current `get`
    /// published its wait edge.
    seen: Vec<DeadlockReport>,
}

/// A global state of the model.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct State {
    tasks: Vec<Task>,
    promises: Vec<Prom>,
    /// Sorted, without duplicates.
    alarms: Vec<Verdict>,
}

/// A problem found in a single state or step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// A `get` raised a cycle that did not exist while it was looking.
    FalseAlarm { task: TaskId, reported: DeadlockReport },
    /// Every task of a deadlock cycle is blocked and none raised.
    MissedDeadlock { cycle: DeadlockReport },
    /// No task can move but some have not finished.
    Hang { stuck: Vec<TaskId> },
    /// Owner map and owned lists disagree.
    Inconsistent(String),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::FalseAlarm { task, reported } => {
                write!(f, "false alarm: {task} raised {reported}, which never existed during its get")
            }
            Violation::MissedDeadlock { cycle } => {
                write!(f, "missed deadlock: every task of {cycle} is blocked and none raised")
            }
            Violation::Hang { stuck } => {
                let names: Vec<_> = stuck.iter().map(ToString::to_string).collect();
                write!(f, "hang: {} can never finish", names.join(", "))
            }
            Violation::Inconsistent(msg) => write!(f, "inconsistent state: {msg}"),
        }
    }
}

/// What a step does, for traces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepLabel {
    pub task: TaskId,
    pub instr: String,
    pub step: &'static str,
}

impl std::fmt::Display for StepLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}\t{}\t{}", self.task, self.instr, self.step)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("program has {0} promises; the model supports at most {MAX_PROMISES}")]
    TooManyPromises(usize),
    #[error("program has {0} tasks; the model supports at most {MAX_TASKS}")]
    TooManyTasks(usize),
    #[error("promise `{0}` is not in scope")]
    Unbound(String),
}

fn bit(p: u8) -> u32 {
    1 << p
}

fn bits(mask: u32) -> impl Iterator<Item = u8> {
    (0..32u8).filter(move |&p| mask & bit(p) != 0)
}

fn tid(t: u8) -> TaskId {
    TaskId(u64::from(t))
}

fn pid(p: u8) -> PromiseId {
    PromiseId(u64::from(p))
}

struct Graph<'s>(&'s State);

impl WaitGraph for Graph<'_> {
    type Task = u8;
    type Promise = u8;

    fn owner(&self, p: u8) -> Option<u8> {
        self.0.promises[usize::from(p)].owner
    }

    fn waiting_on(&self, t: u8) -> Option<u8> {
        self.0.tasks[usize::from(t)].waiting_on
    }
}

impl Model {
    pub(crate) fn compile(
        program: &Program,
        wait_edge: WaitEdge,
        budget: Option<usize>,
    ) -> Result<Model, ModelError> {
        let promises = program.promise_count();
        if promises > MAX_PROMISES {
            return Err(ModelError::TooManyPromises(promises));
        }
        let tasks = program.task_count();
        if tasks > MAX_TASKS {
            return Err(ModelError::TooManyTasks(tasks));
        }
        let mut model = Model {
            tasks: vec![
                TaskCode {
                    ops: Vec::new(),
                    text: Vec::new()
                };
                tasks
            ],
            promise_names: Vec::new(),
            wait_edge,
            budget,
        };
        let mut next_task = 1;
        model.lower(&program.body, 0, &mut Vec::new(), &mut next_task)?;
        Ok(model)
    }

    fn lower(
        &mut self,
        body: &[Instr],
        task: usize,
        scope: &mut Vec<(String, u8)>,
        next_task: &mut usize,
    ) -> Result<(), ModelError> {
        let mark = scope.len();
        let resolve = |scope: &Vec<(String, u8)>, name: &String| {
            scope
                .iter()
                .rev()
                .find(|(n, _)| n == name)
                .map(|&(_, p)| p)
                .ok_or_else(|| ModelError::Unbound(name.clone()))
        };
        for instr in body {
            let op = match instr {
                Instr::New(name) => {
                    let p = self.promise_names.len() as u8;
                    self.promise_names.push(name.clone());
                    scope.push((name.clone(), p));
                    Op::New(p)
                }
                Instr::Set(name) => Op::Set(resolve(scope, name)?),
                Instr::Get(name) => Op::Get(resolve(scope, name)?),
                Instr::Async { moved, body } => {
                    let mut mask = 0;
                    for name in moved {
                        mask |= bit(resolve(scope, name)?);
                    }
                    let child = *next_task;
                    *next_task += 1;
                    self.lower(body, child, scope, next_task)?;
                    Op::Async {
                        moved: mask,
                        child: child as u8,
                    }
                }
            };
            self.tasks[task].ops.push(op);
            self.tasks[task].text.push(instr.head());
        }
        scope.truncate(mark);
        Ok(())
    }

    pub(crate) fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub(crate) fn initial(&self) -> State {
        let mut tasks = vec![
            Task {
                pc: 0,
                stage: Stage::Dormant,
                waiting_on: None,
                owned: 0,
                fate: None,
                seen: Vec::new(),
            };
            self.tasks.len()
        ];
        tasks[0].stage = Stage::Ready;
        State {
            tasks,
            promises: vec![
                Prom {
                    owner: None,
                    state: PState::Unset
                };
                self.promise_names.len()
            ],
            alarms: Vec::new(),
        }
    }

    /// Tasks that can take a step, in index order.
    pub(crate) fn enabled(&self, s: &State) -> Vec<usize> {
        (0..s.tasks.len())
            .filter(|&t| match &s.tasks[t].stage {
                Stage::Dormant | Stage::Done => false,
                Stage::GetBlocked(p) => s.promises[usize::from(*p)].state != PState::Unset,
                _ => true,
            })
            .collect()
    }

    fn at_exit(&self, task: &Task, t: usize) -> bool {
        task.fate.is_some() || task.pc >= self.tasks[t].ops.len()
    }

    pub(crate) fn label(&self, s: &State, t: usize) -> StepLabel {
        let task = &s.tasks[t];
        let code = &self.tasks[t];
        let instr = match task.stage {
            Stage::Poison(_) => "exit".to_string(),
            Stage::Ready if self.at_exit(task, t) => "exit".to_string(),
            _ => code.text[task.pc].clone(),
        };
        let step = match &task.stage {
            Stage::Ready if self.at_exit(task, t) => "check-owned",
            Stage::Ready => match code.ops[task.pc] {
                Op::New(_) => "new",
                Op::Set(_) => "clear-owner",
                Op::Get(_) => "check-completed",
                Op::Async { .. } => "check-owners",
            },
            Stage::SetFulfill(_) => "fulfill",
            Stage::GetEnter(_) if self.wait_edge == WaitEdge::BeforeTraversal => "publish-wait-edge",
            Stage::GetEnter(_) => "start-traversal",
            Stage::GetTraverse(_, tr) => tr.label(),
            Stage::GetLateEdge(_) => "publish-wait-edge",
            Stage::GetRaise(_) => "raise",
            Stage::GetBlocked(_) => "wake",
            Stage::GetReset(_) => "clear-wait-edge",
            Stage::AsyncMove { .. } => "move-owner",
            Stage::Poison(_) => "poison",
            Stage::Dormant | Stage::Done => "none",
        };
        StepLabel {
            task: tid(t as u8),
            instr,
            step,
        }
    }

    /// Applies one step of task `t`.
    pub(crate) fn step(&self, s: &mut State, t: usize) -> Result<(), Violation> {
        let me = t as u8;
        let stage = std::mem::replace(&mut s.tasks[t].stage, Stage::Done);
        let next = match stage {
            Stage::Ready if self.at_exit(&s.tasks[t], t) => self.exit_check(s, t),
            Stage::Ready => match self.tasks[t].ops[s.tasks[t].pc] {
                Op::New(p) => {
                    s.promises[usize::from(p)].owner = Some(me);
                    s.tasks[t].owned |= bit(p);
                    s.tasks[t].pc += 1;
                    Stage::Ready
                }
                Op::Set(p) => {
                    let prom = &mut s.promises[usize::from(p)];
                    if prom.owner == Some(me) {
                        prom.owner = None;
                        s.tasks[t].owned &= !bit(p);
                        Stage::SetFulfill(p)
                    } else {
                        self.violate(s, t, PolicyKind::NotOwner, p);
                        Stage::Ready
                    }
                }
                Op::Get(p) => {
                    match s.promises[usize::from(p)].state {
                        PState::Unset => Stage::GetEnter(p),
                        PState::Fulfilled => {
                            s.tasks[t].pc += 1;
                            Stage::Ready
                        }
                        PState::Poisoned(blame) => {
                            s.tasks[t].fate = Some(Fate::Poisoned {
                                promise: pid(p),
                                blame: tid(blame),
                            });
                            Stage::Ready
                        }
                    }
                }
                Op::Async { moved, child } => {
                    let bad = bits(moved).find(|&p| s.promises[usize::from(p)].owner != Some(me));
                    if let Some(p) = bad {
                        self.violate(s, t, PolicyKind::OwnershipViolation, p);
                        Stage::Ready
                    } else if moved == 0 {
                        s.tasks[usize::from(child)].stage = Stage::Ready;
                        s.tasks[t].pc += 1;
                        Stage::Ready
                    } else {
                        Stage::AsyncMove { child, rest: moved }
                    }
                }
            },
            Stage::SetFulfill(p) => {
                s.promises[usize::from(p)].state = PState::Fulfilled;
                s.tasks[t].pc += 1;
                Stage::Ready
            }
            Stage::GetEnter(p) => {
                if self.wait_edge == WaitEdge::BeforeTraversal {
                    s.tasks[t].waiting_on = Some(p);
                }
                s.tasks[t].seen.clear();
                Stage::GetTraverse(p, Traversal::new(me, p, self.budget))
            }
            Stage::GetTraverse(p, mut tr) => match tr.step(&Graph(s)) {
                Step::Continue => Stage::GetTraverse(p, tr),
                Step::Clear(_) => {
                    s.tasks[t].seen.clear();
                    match self.wait_edge {
                        WaitEdge::BeforeTraversal => Stage::GetBlocked(p),
                        WaitEdge::AfterTraversal => Stage::GetLateEdge(p),
                    }
                }
                Step::Cycle(chain) => {
                    let report = DeadlockReport::new(
                        chain.into_iter().map(|(t, p)| (tid(t), pid(p))).collect(),
                    )
                    .canonical();
                    let seen = std::mem::take(&mut s.tasks[t].seen);
                    if !seen.contains(&report) {
                        return Err(Violation::FalseAlarm {
                            task: tid(me),
                            reported: report,
                        });
                    }
                    Stage::GetRaise(report)
                }
            },
            Stage::GetLateEdge(p) => {
                s.tasks[t].waiting_on = Some(p);
                Stage::GetBlocked(p)
            }
            Stage::GetRaise(report) => {
                insert_alarm(s, Verdict::Deadlock(report));
                s.tasks[t].waiting_on = None;
                s.tasks[t].fate = Some(Fate::Deadlock);
                Stage::Ready
            }
            Stage::GetBlocked(p) => Stage::GetReset(p),
            Stage::GetReset(p) => {
                s.tasks[t].waiting_on = None;
                match s.promises[usize::from(p)].state {
                    PState::Poisoned(blame) => {
                        s.tasks[t].fate = Some(Fate::Poisoned {
                            promise: pid(p),
                            blame: tid(blame),
                        })
                    }
                    _ => s.tasks[t].pc += 1,
                }
                Stage::Ready
            }
            Stage::AsyncMove { child, rest } => {
                let p = bits(rest).next().expect("a move step has a promise to move");
                s.tasks[t].owned &= !bit(p);
                s.promises[usize::from(p)].owner = Some(child);
                s.tasks[usize::from(child)].owned |= bit(p);
                let rest = rest & !bit(p);
                if rest == 0 {
                    s.tasks[usize::from(child)].stage = Stage::Ready;
                    s.tasks[t].pc += 1;
                    Stage::Ready
                } else {
                    Stage::AsyncMove { child, rest }
                }
            }
            Stage::Poison(rest) => {
                let p = bits(rest).next().expect("a poison step has a promise to poison");
                s.tasks[t].owned &= !bit(p);
                let prom = &mut s.promises[usize::from(p)];
                prom.owner = None;
                prom.state = PState::Poisoned(me);
                let rest = rest & !bit(p);
                if rest == 0 {
                    Stage::Done
                } else {
                    Stage::Poison(rest)
                }
            }
            Stage::Dormant | Stage::Done => unreachable!("stepped a task that cannot move"),
        };
        s.tasks[t].stage = next;
        self.observe_cycles(s);
        Ok(())
    }

    fn violate(&self, s: &mut State, t: usize, kind: PolicyKind, p: u8) {
        insert_alarm(
            s,
            Verdict::PolicyViolation {
                kind,
                task: tid(t as u8),
                promise: pid(p),
            },
        );
        s.tasks[t].fate = Some(Fate::Policy(kind));
    }

    fn exit_check(&self, s: &mut State, t: usize) -> Stage {
        let task = &s.tasks[t];
        if task.owned == 0 {
            return Stage::Done;
        }
        let cause = match &task.fate {
            None => ExitCause::Returned,
            Some(Fate::Deadlock) => ExitCause::Failed("deadlock detected".into()),
            Some(Fate::Poisoned { promise, .. }) => ExitCause::Failed(format!("{promise} was poisoned")),
            Some(Fate::Policy(kind)) => ExitCause::Failed(format!("{kind:?}")),
        };
        let report = OmittedSetReport {
            task: tid(t as u8),
            promises: bits(task.owned).map(pid).collect(),
            cause,
        };
        let owned = task.owned;
        insert_alarm(s, Verdict::OmittedSet(report));
        Stage::Poison(owned)
    }

    /// Records, for every task inside a traversal, the deadlock cycle through
    /// it in the current state (counting its own pending wait edge).
    fn observe_cycles(&self, s: &mut State) {
        let traversing: Vec<(usize, u8)> = s
            .tasks
            .iter()
            .enumerate()
            .filter_map(|(t, task)| match task.stage {
                Stage::GetTraverse(p, _) => Some((t, p)),
                _ => None,
            })
            .collect();
        if traversing.is_empty() {
            return;
        }
        let mut ws = wait_state(s);
        for (t, p) in traversing {
            let saved = ws.waiting_on[t];
            ws.waiting_on[t] = Some(usize::from(p));
            if let Some(cycle) = cycle_through(&ws, t) {
                let seen = &mut s.tasks[t].seen;
                if let Err(at) = seen.binary_search(&cycle) {
                    seen.insert(at, cycle);
                }
            }
            ws.waiting_on[t] = saved;
        }
    }

    /// State-local checks: owner map and owned lists agree, and no deadlock
    /// cycle has all its tasks parked.
    pub(crate) fn check(&self, s: &State) -> Result<(), Violation> {
        for (p, prom) in s.promises.iter().enumerate() {
            let holders: Vec<usize> = (0..s.tasks.len())
                .filter(|&t| s.tasks[t].owned & bit(p as u8) != 0)
                .collect();
            let expected: Vec<usize> = prom.owner.map(usize::from).into_iter().collect();
            if holders != expected {
                return Err(Violation::Inconsistent(format!(
                    "{} has owner {:?} but is listed by {:?}",
                    pid(p as u8),
                    prom.owner,
                    holders
                )));
            }
            if prom.owner.is_some() && prom.state != PState::Unset {
                return Err(Violation::Inconsistent(format!(
                    "{} is completed but still owned",
                    pid(p as u8)
                )));
            }
        }
        for cycle in super::oracle::oracle_cycles(&wait_state(s)) {
            let parked = cycle
                .tasks()
                .all(|t| matches!(s.tasks[t.0 as usize].stage, Stage::GetBlocked(_)));
            if parked {
                return Err(Violation::MissedDeadlock { cycle });
            }
        }
        Ok(())
    }

    /// For a state with no enabled step: the outcome, or the tasks that hang.
    pub(crate) fn outcome(&self, s: &State) -> Result<Outcome, Violation> {
        let stuck: Vec<TaskId> = (0..s.tasks.len())
            .filter(|&t| !matches!(s.tasks[t].stage, Stage::Done | Stage::Dormant))
            .map(|t| tid(t as u8))
            .collect();
        if !stuck.is_empty() {
            return Err(Violation::Hang { stuck });
        }
        let verdicts = if s.alarms.is_empty() {
            vec![Verdict::Ok]
        } else {
            s.alarms.clone()
        };
        Ok(Outcome {
            verdicts,
            fates: s.tasks.iter().map(|t| t.fate.clone()).collect(),
        })
    }

    /// Length of the longest traversal in progress in `s`, in reads.
    pub(crate) fn traversal_reads(&self, s: &State) -> usize {
        s.tasks
            .iter()
            .filter_map(|t| match &t.stage {
                Stage::GetTraverse(_, tr) => Some(tr.reads()),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn promise_name(&self, p: usize) -> &str {
        &self.promise_names[p]
    }
}

fn insert_alarm(s: &mut State, v: Verdict) {
    if let Err(at) = s.alarms.binary_search(&v) {
        s.alarms.insert(at, v);
    }
}

fn wait_state(s: &State) -> WaitState {
    WaitState {
        waiting_on: s.tasks.iter().map(|t| t.waiting_on.map(usize::from)).collect(),
        owner: s.promises.iter().map(|p| p.owner.map(usize::from)).collect(),
    }
}
