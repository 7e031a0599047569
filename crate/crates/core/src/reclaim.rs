//! Reference-counted handles whose final release waits out concurrent
//! detector traversals.
//!
//! The detector follows raw pointers stored in `owner` and `waiting_on` cells
//! without taking references. An object whose address was ever stored in such
//! a cell ("published") therefore hands its strong references to the epoch
//! collector instead of dropping them in place. Traversals run pinned, so the
//! memory outlives any traversal that could still have read the stale pointer.
//! Objects that were never published drop immediately.

use std::marker::PhantomData;
use std::ops::Deref;
use std::ptr::NonNull;
use std::sync::atomic::{self, AtomicBool, AtomicUsize, Ordering};

use crossbeam_epoch as epoch;

pub(crate) trait Publish {
    fn published_flag(&self) -> &AtomicBool;

    /// Must be called before the object's address is stored in any cell that
    /// traversals read.
    fn mark_published(&self) {
        self.published_flag().store(true, Ordering::Relaxed);
    }

    /// Drops whatever traversals never read. Called on a published object
    /// once its last handle is gone, before its memory goes to the collector.
    fn shed(&mut self) {}
}

pub(crate) struct Counted<T: ?Sized> {
    refs: AtomicUsize,
    value: T,
}

/// A counted handle. The final release of a published object sheds it and
/// defers freeing to the epoch collector; every other release is a plain
/// decrement.
pub(crate) struct Shared<T: ?Sized + Publish + Send + Sync + 'static> {
    ptr: Ptr<Counted<T>>,
    _owns: PhantomData<Counted<T>>,
}

struct Ptr<T: ?Sized>(NonNull<T>);

impl<T: ?Sized> Clone for Ptr<T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T: ?Sized> Copy for Ptr<T> {}

// SAFETY: handles only give out `&T` and move `T` between threads when the
// last one is released, as `Arc` does.
unsafe impl<T: ?Sized + Send + Sync> Send for Ptr<T> {}
unsafe impl<T: ?Sized + Send + Sync> Sync for Ptr<T> {}

impl<T: Publish + Send + Sync + 'static> Shared<T> {
    pub(crate) fn new(value: T) -> Self {
        let boxed = Box::new(Counted {
            refs: AtomicUsize::new(1),
            value,
        });
        Shared {
            ptr: Ptr(NonNull::from(Box::leak(boxed))),
            _owns: PhantomData,
        }
    }

    /// Another handle to the same object under an unsized type.
    pub(crate) fn erase<U: ?Sized + Publish + Send + Sync + 'static>(
        &self,
        coerce: impl FnOnce(NonNull<Counted<T>>) -> NonNull<Counted<U>>,
    ) -> Shared<U> {
        let extra = self.clone();
        let ptr = Ptr(coerce(extra.ptr.0));
        std::mem::forget(extra);
        Shared {
            ptr,
            _owns: PhantomData,
        }
    }
}

impl<T: ?Sized + Publish + Send + Sync + 'static> Shared<T> {
    fn counted(&self) -> &Counted<T> {
        // SAFETY: the allocation lives while any handle does.
        unsafe { self.ptr.0.as_ref() }
    }

    pub(crate) fn as_ptr(&self) -> *const T {
        &self.counted().value
    }

    /// The object, if this is its only handle.
    pub(crate) fn get_mut(&mut self) -> Option<&mut T> {
        if self.counted().refs.load(Ordering::Acquire) == 1 {
            // SAFETY: no other handle exists, and new ones come only from
            // this one.
            Some(unsafe { &mut self.ptr.0.as_mut().value })
        } else {
            None
        }
    }
}

impl<T: ?Sized + Publish + Send + Sync + 'static> Clone for Shared<T> {
    fn clone(&self) -> Self {
        self.counted().refs.fetch_add(1, Ordering::Relaxed);
        Shared {
            ptr: self.ptr,
            _owns: PhantomData,
        }
    }
}

impl<T: ?Sized + Publish + Send + Sync + 'static> Deref for Shared<T> {
    type Target = T;

    fn deref(&self) -> &T {
        &self.counted().value
    }
}

impl<T: ?Sized + Publish + Send + Sync + 'static> Drop for Shared<T> {
    fn drop(&mut self) {
        if self.counted().refs.fetch_sub(1, Ordering::Release) != 1 {
            return;
        }
        atomic::fence(Ordering::Acquire);
        // SAFETY: this was the last handle; the allocation came from `Box`.
        let mut boxed = unsafe { Box::from_raw(self.ptr.0.as_ptr()) };
        if boxed.value.published_flag().load(Ordering::Relaxed) {
            boxed.value.shed();
            let guard = epoch::pin();
            guard.defer(move || drop(boxed));
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    struct Probe {
        published: AtomicBool,
        drops: Arc<AtomicUsize>,
    }

    impl Publish for Probe {
        fn published_flag(&self) -> &AtomicBool {
            &self.published
        }
    }

    impl Drop for Probe {
        fn drop(&mut self) {
            self.drops.fetch_add(1, Ordering::SeqCst);
        }
    }

    #[test]
    fn unpublished_objects_drop_immediately() {
        let drops = Arc::new(AtomicUsize::new(0));
        let a = Shared::new(Probe {
            published: AtomicBool::new(false),
            drops: drops.clone(),
        });
        let b = a.clone();
        drop(a);
        assert_eq!(drops.load(Ordering::SeqCst), 0);
        drop(b);
        assert_eq!(drops.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn published_objects_outlive_a_pinned_reader() {
        let drops = Arc::new(AtomicUsize::new(0));
        let a = Shared::new(Probe {
            published: AtomicBool::new(false),
            drops: drops.clone(),
        });
        a.mark_published();
        let reader = epoch::pin();
        drop(a);
        for _ in 0..256 {
            epoch::pin().flush();
        }
        assert_eq!(drops.load(Ordering::SeqCst), 0, "freed under a live guard");
        drop(reader);
        for _ in 0..256 {
            epoch::pin().flush();
            if drops.load(Ordering::SeqCst) == 1 {
                return;
            }
        }
        panic!("deferred drop never ran");
    }

    struct Payload {
        published: AtomicBool,
        shed: Arc<AtomicUsize>,
    }

    impl Publish for Payload {
        fn published_flag(&self) -> &AtomicBool {
            &self.published
        }

        fn shed(&mut self) {
            self.shed.fetch_add(1, Ordering::SeqCst);
        }
    }

    #[test]
    fn last_release_of_a_published_object_sheds_at_once() {
        let shed = Arc::new(AtomicUsize::new(0));
        let a = Shared::new(Payload {
            published: AtomicBool::new(true),
            shed: shed.clone(),
        });
        let b = a.clone();
        let _reader = epoch::pin();
        drop(a);
        assert_eq!(shed.load(Ordering::SeqCst), 0);
        drop(b);
        assert_eq!(shed.load(Ordering::SeqCst), 1);

        let c = Shared::new(Payload {
            published: AtomicBool::new(false),
            shed: shed.clone(),
        });
        drop(c);
        assert_eq!(shed.load(Ordering::SeqCst), 1);
    }
}
