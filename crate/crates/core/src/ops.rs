//! Arithmetic-operation instrumentation.
//!
//! Algorithms that make complexity claims take a [`Tally`] so the same code
//! path can run uninstrumented ([`NoTally`]) or counted ([`OpCount`]).

pub trait Tally {
    fn add(&mut self, ops: u64);
}

/// Discards all counts.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoTally;

impl Tally for NoTally {
    #[inline(always)]
    fn add(&mut self, _ops: u64) {}
}

/// Accumulates a running operation count.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCount(pub u64);

impl Tally for OpCount {
    #[inline(always)]
    fn add(&mut self, ops: u64) {
        self.0 += ops;
    }
}
