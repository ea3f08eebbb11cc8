//! Per-thread instrumentation of network evaluations.
//!
//! Every forward pass, traced forward (the first half of a gradient) and JVP
//! adds its batch row count, so the number of function evaluations spent
//! producing one action can be read off by differencing [`rows_evaluated`]
//! around the call. Call kinds are tallied separately in [`calls`].

use std::cell::Cell;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallCounts {
    pub forward: u64,
    pub grad: u64,
    pub jvp: u64,
}

impl std::ops::Sub for CallCounts {
    type Output = CallCounts;

    fn sub(self, rhs: CallCounts) -> CallCounts {
        CallCounts {
            forward: self.forward - rhs.forward,
            grad: self.grad - rhs.grad,
            jvp: self.jvp - rhs.jvp,
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Kind {
    Forward,
    Grad,
    Jvp,
}

thread_local! {
    static ROWS: Cell<u64> = const { Cell::new(0) };
    static CALLS: Cell<CallCounts> = const {
        Cell::new(CallCounts { forward: 0, grad: 0, jvp: 0 })
    };
}

pub(crate) fn record(kind: Kind, rows: usize) {
    ROWS.with(|c| c.set(c.get() + rows as u64));
    CALLS.with(|c| {
        let mut counts = c.get();
        match kind {
            Kind::Forward => counts.forward += 1,
            Kind::Grad => counts.grad += 1,
            Kind::Jvp => counts.jvp += 1,
        }
        c.set(counts);
    });
}

pub fn rows_evaluated() -> u64 {
    ROWS.with(Cell::get)
}

pub fn calls() -> CallCounts {
    CALLS.with(Cell::get)
}
