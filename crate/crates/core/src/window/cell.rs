//! Atomic descriptor publication.
//!
//! Every sub-structure keeps its whole head state (item handle(s) plus
//! operation counter(s)) in one descriptor that is read and replaced as a
//! single unit. Pointer-carrying descriptors are immutable heap records
//! swapped by CAS and reclaimed through epochs; a record is never mutated
//! after publication, so pointer identity doubles as state identity.
//! Counter descriptors have no pointer and fit one machine word, so they
//! use a packed `AtomicU64` instead.

use std::ops::Deref;
use std::sync::atomic::Ordering;

use crossbeam_epoch::{self as epoch, Atomic, Guard, Owned, Shared};

/// Snapshot of a published descriptor. Valid for as long as the guard it
/// was loaded under is held; comparing two snapshots compares descriptor
/// identity, not field contents.
pub struct Snap<'g, D> {
    shared: Shared<'g, D>,
}

impl<D> Clone for Snap<'_, D> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<D> Copy for Snap<'_, D> {}

impl<'g, D> Snap<'g, D> {
    /// Identity of the underlying record, usable as an opaque state tag.
    pub fn id(&self) -> usize {
        self.shared.as_raw() as usize
    }

    pub fn same(&self, other: &Self) -> bool {
        self.shared == other.shared
    }
}

impl<D> Deref for Snap<'_, D> {
    type Target = D;

    fn deref(&self) -> &D {
        // Snapshots only come out of `DescriptorCell::load` under a live
        // guard; the record cannot be reclaimed before the guard drops.
        unsafe { self.shared.deref() }
    }
}

/// One atomically replaceable descriptor slot.
pub struct DescriptorCell<D> {
    inner: Atomic<D>,
}

impl<D> DescriptorCell<D> {
    pub fn new(initial: D) -> Self {
        DescriptorCell {
            inner: Atomic::new(initial),
        }
    }

    pub fn load<'g>(&self, guard: &'g Guard) -> Snap<'g, D> {
        Snap {
            shared: self.inner.load(Ordering::Acquire, guard),
        }
    }

    /// Replaces the descriptor iff the slot still holds exactly `expected`.
    /// On success the previous record is retired and the fresh snapshot is
    /// returned; `None` signals a lost race (the slot is untouched) and the
    /// caller should treat it as contention, not a fault.
    pub fn publish<'g>(
        &self,
        expected: Snap<'g, D>,
        new: D,
        guard: &'g Guard,
    ) -> Option<Snap<'g, D>> {
        match self.inner.compare_exchange(
            expected.shared,
            Owned::new(new),
            Ordering::AcqRel,
            Ordering::Acquire,
            guard,
        ) {
            Ok(installed) => {
                // The old record is unreachable from the slot now; readers
                // that still hold it are protected by their guards.
                unsafe { guard.defer_destroy(expected.shared) };
                Some(Snap { shared: installed })
            }
            Err(_) => None,
        }
    }
}

impl<D> Drop for DescriptorCell<D> {
    fn drop(&mut self) {
        // Exclusive access: no guards can still reference this cell.
        unsafe {
            let cur = self.inner.load(Ordering::Relaxed, epoch::unprotected());
            if !cur.is_null() {
                drop(cur.into_owned());
            }
        }
    }
}

/// Descriptor packed into a single word, replaced by plain CAS. Used by the
/// counters, whose whole state is two 32-bit fields.
pub struct PackedCell {
    inner: std::sync::atomic::AtomicU64,
}

impl PackedCell {
    pub fn new(initial: u64) -> Self {
        PackedCell {
            inner: std::sync::atomic::AtomicU64::new(initial),
        }
    }

    #[inline]
    pub fn load(&self) -> u64 {
        self.inner.load(Ordering::Acquire)
    }

    /// Single CAS attempt, same contract as `DescriptorCell::publish`.
    #[inline]
    pub fn publish(&self, expected: u64, new: u64) -> bool {
        self.inner
            .compare_exchange(expected, new, Ordering::AcqRel, Ordering::Acquire)
            .is_ok()
    }
}
