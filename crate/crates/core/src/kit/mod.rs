//! Composite ownership: collections that move like promises, a multi-shot
//! channel built from a chain of promises, and finish scopes.

mod channel;
mod collection;
mod finish;

pub use channel::{channel_new, Channel};
pub use collection::{promises_of, PromiseCollection};
pub use finish::{finish, Scope};
