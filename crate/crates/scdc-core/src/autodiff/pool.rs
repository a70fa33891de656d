//! Thread-local recycling of value/gradient buffers.
//!
//! Training steps allocate and drop the same multi-megabyte buffers every
//! iteration; routing them through a free list keeps the allocator (and the
//! kernel) out of the hot loop. Buffers are zeroed on reuse, so behavior is
//! identical to fresh allocation.

use std::cell::RefCell;

// Retain at most this many f64 elements across all pooled buffers (~256 MB).
const MAX_POOLED_ELEMENTS: usize = 32 << 20;

thread_local! {
    static POOL: RefCell<Pool> = const { RefCell::new(Pool { buffers: Vec::new(), total: 0 }) };
}

struct Pool {
    buffers: Vec<Vec<f64>>,
    total: usize,
}

/// A zeroed buffer of length `n`, reusing a pooled allocation when one fits.
/// Best-fit selection keeps large buffers from being burned on tiny asks.
pub fn take_zeroed(n: usize) -> Vec<f64> {
    POOL.with(|p| {
        let mut pool = p.borrow_mut();
        let slot = pool
            .buffers
            .iter()
            .enumerate()
            .filter(|(_, b)| b.capacity() >= n)
            .min_by_key(|(_, b)| b.capacity())
            .map(|(i, _)| i);
        match slot {
            Some(i) => {
                let mut buf = pool.buffers.swap_remove(i);
                pool.total -= buf.capacity();
                buf.clear();
                buf.resize(n, 0.0);
                buf
            }
            None => vec![0.0; n],
        }
    })
}

/// A length-`n` buffer whose contents are arbitrary stale floats.
///
/// Safety contract (checked by review, not the compiler): callers must
/// overwrite every element before any read. Used only by operations whose
/// forward/backward fully writes their output.
pub fn take_uninit(n: usize) -> Vec<f64> {
    POOL.with(|p| {
        let mut pool = p.borrow_mut();
        let slot = pool
            .buffers
            .iter()
            .enumerate()
            .filter(|(_, b)| b.capacity() >= n)
            .min_by_key(|(_, b)| b.capacity())
            .map(|(i, _)| i);
        match slot {
            Some(i) => {
                let mut buf = pool.buffers.swap_remove(i);
                pool.total -= buf.capacity();
                // Every f64 bit pattern is a valid value, so exposing stale
                // contents cannot be UB by itself; callers guarantee
                // write-before-read.
                unsafe { buf.set_len(n) };
                buf
            }
            None => vec![0.0; n],
        }
    })
}

/// Returns a buffer to the pool for reuse.
pub fn give(buf: Vec<f64>) {
    if buf.capacity() == 0 {
        return;
    }
    POOL.with(|p| {
        let mut pool = p.borrow_mut();
        if pool.total + buf.capacity() <= MAX_POOLED_ELEMENTS {
            pool.total += buf.capacity();
            pool.buffers.push(buf);
        }
    });
}
