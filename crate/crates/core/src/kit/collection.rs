use crate::promise::{AnyPromise, Promise};

/// Something whose ownership moves as a unit at spawn.
///
/// [`spawn`](crate::spawn) flattens every moved collection through
/// [`promises`](Self::promises) and transfers each yielded promise.
pub trait PromiseCollection {
    /// The promises to move, as of now.
    fn promises(&self) -> Vec<AnyPromise>;
}

impl<T: Send + Sync + 'static> PromiseCollection for Promise<T> {
    fn promises(&self) -> Vec<AnyPromise> {
        vec![AnyPromise::from(self)]
    }
}

impl PromiseCollection for AnyPromise {
    fn promises(&self) -> Vec<AnyPromise> {
        vec![self.clone()]
    }
}

impl<C: PromiseCollection> PromiseCollection for [C] {
    fn promises(&self) -> Vec<AnyPromise> {
        self.iter().flat_map(PromiseCollection::promises).collect()
    }
}

impl<C: PromiseCollection> PromiseCollection for Vec<C> {
    fn promises(&self) -> Vec<AnyPromise> {
        self.as_slice().promises()
    }
}

impl<C: PromiseCollection + ?Sized> PromiseCollection for &C {
    fn promises(&self) -> Vec<AnyPromise> {
        (**self).promises()
    }
}

pub fn promises_of(x: &dyn PromiseCollection) -> Vec<AnyPromise> {
    x.promises()
}
