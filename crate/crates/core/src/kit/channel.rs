use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use crate::error::Result;
use crate::promise::{AnyPromise, Promise};
use crate::task;

use super::PromiseCollection;

enum Link<T: Send + Sync + 'static> {
    Item(T, Promise<Link<T>>),
    Closed,
}

impl<T: Send + Sync + 'static> Drop for Link<T> {
    fn drop(&mut self) {
        let Link::Item(_, next) = self else { return };
        let mut rest = next.take_unique();
        while let Some(mut link) = rest {
            rest = match &mut link {
                Link::Item(_, next) => next.take_unique(),
                Link::Closed => None,
            };
        }
    }
}

struct Ends<T: Send + Sync + 'static> {
    head: Mutex<Promise<Link<T>>>,
    tail: Mutex<Promise<Link<T>>>,
}

/// Unbounded single-producer single-consumer channel.
///
/// Each send fulfills the current tail promise with the value and a fresh
/// successor, which becomes the new tail. `close` fulfills the tail with an
/// end marker and no successor. The sending side is the tail
/// promise, so moving the channel at spawn hands the sending role to the
/// child. Receiving is a plain `get` on the head, so a receive that can never
/// complete is reported as a deadlock like any other.
pub struct Channel<T: Send + Sync + 'static> {
    ends: Arc<Ends<T>>,
}

impl<T: Send + Sync + 'static> Clone for Channel<T> {
    fn clone(&self) -> Self {
        Channel {
            ends: Arc::clone(&self.ends),
        }
    }
}

impl<T: Send + Sync + 'static> fmt::Debug for Channel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Channel")
            .field("head", &self.head().id())
            .field("tail", &self.tail().id())
            .finish()
    }
}

fn lock<U>(m: &Mutex<U>) -> MutexGuard<'_, U> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn channel_new<T: Send + Sync + 'static>() -> Result<Channel<T>> {
    let first = Promise::new()?;
    Ok(Channel {
        ends: Arc::new(Ends {
            head: Mutex::new(first.clone()),
            tail: Mutex::new(first),
        }),
    })
}

impl<T: Send + Sync + 'static> Channel<T> {
    pub fn new() -> Result<Self> {
        channel_new()
    }

    fn head(&self) -> Promise<Link<T>> {
        lock(&self.ends.head).clone()
    }

    fn tail(&self) -> Promise<Link<T>> {
        lock(&self.ends.tail).clone()
    }

    /// Fails with [`NotOwner`](crate::Error::NotOwner) unless the caller owns
    /// the sending end.
    pub fn send(&self, value: T) -> Result<()> {
        let ctx = task::current()?;
        let mut tail = lock(&self.ends.tail);
        tail.check_owner(&ctx)?;
        let next = Promise::create(&ctx);
        tail.set(Link::Item(value, next.clone()))?;
        *tail = next;
        Ok(())
    }

    /// Ends the stream. The sender owns nothing afterwards.
    pub fn close(&self) -> Result<()> {
        self.tail().set(Link::Closed)
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.tail().try_get(), Some(Ok(Link::Closed)))
    }
}

impl<T: Clone + Send + Sync + 'static> Channel<T> {
    /// Waits for the next value; `None` once the channel is closed. Single
    /// consumer.
    pub fn recv(&self) -> Result<Option<T>> {
        let head = self.head();
        match head.get()? {
            Link::Closed => Ok(None),
            Link::Item(value, next) => {
                let value = value.clone();
                let next = next.clone();
                let mut slot = lock(&self.ends.head);
                if slot.id() == head.id() {
                    *slot = next;
                }
                Ok(Some(value))
            }
        }
    }
}

impl<T: Send + Sync + 'static> PromiseCollection for Channel<T> {
    fn promises(&self) -> Vec<AnyPromise> {
        let tail = self.tail();
        if tail.is_completed() {
            Vec::new()
        } else {
            vec![AnyPromise::from(&tail)]
        }
    }
}
