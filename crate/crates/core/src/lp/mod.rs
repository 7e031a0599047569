//! A model checker for L_p, a minimal language of promise operations:
//!
//! ```text
//! new p          create a promise owned by the current task
//! set p          fulfill p (only its owner may)
//! get p          wait for p
//! async [p, q] { ... }
//!                spawn a task, moving ownership of p and q to it
//! ```
//!
//! [`explore`] runs every interleaving of a program's steps under sequential
//! consistency, with the detector's reads as separate steps, and checks every
//! alarm against [`oracle`] ground truth.

mod ast;
mod explore;
mod model;
pub mod oracle;
mod parse;
mod random;
mod verdict;

pub use ast::{Instr, Program};
pub use explore::{
    explore, numbering, replay, Counterexample, Exploration, ExplorationStats, ExploreError,
    ExploreOptions, Limits, Replay, ReplayError,
};
pub use model::{ModelError, StepLabel, Violation};
pub use oracle::{oracle_verdict, WaitState};
pub use parse::{check_well_formed, parse_program, LpError, ParseError, WellFormednessError};
pub use random::{random_program, RandomParams};
pub use verdict::{Fate, Outcome, PolicyKind, Verdict};
