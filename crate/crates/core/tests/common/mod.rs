//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use perishable_dynaq::InventoryState;

/// Serves demand one unit at a time from the oldest non-empty bucket.
pub fn fifo_unit_by_unit(state: InventoryState, demand: u32) -> InventoryState {
    let mut buckets = [state.s1, state.s2, state.s3];
    for _ in 0..demand {
        if let Some(b) = buckets.iter_mut().find(|b| **b > 0) {
            *b -= 1;
        }
    }
    InventoryState::new(buckets[0], buckets[1], buckets[2])
}

/// Deterministic 3-state chain with two actions. Action 0 advances to the
/// next state at cost 1 (state 2 wraps to 0 at cost 0); action 1 stays put
/// at cost 2.
pub struct Chain;

impl Chain {
    pub const STATES: usize = 3;
    pub const ACTIONS: usize = 2;

    pub fn step(state: usize, action: usize) -> (usize, f64) {
        match (state, action) {
            (2, 0) => (0, 0.0),
            (s, 0) => (s + 1, 1.0),
            (s, _) => (s, 2.0),
        }
    }

    /// Optimal cost-to-go Q-values by value iteration, iterated until the
    /// sup-norm change is below `tol`.
    pub fn value_iteration(gamma: f64, tol: f64) -> Vec<[f64; 2]> {
        let mut q = vec![[0.0f64; 2]; Self::STATES];
        loop {
            let mut next = q.clone();
            let mut delta: f64 = 0.0;
            for s in 0..Self::STATES {
                for a in 0..Self::ACTIONS {
                    let (s2, c) = Self::step(s, a);
                    let v = c + gamma * q[s2][0].min(q[s2][1]);
                    delta = delta.max((v - q[s][a]).abs());
                    next[s][a] = v;
                }
            }
            q = next;
            if delta < tol {
                return q;
            }
        }
    }
}

/// Central finite difference of a scalar function at `x`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a − b| / max(|a|, |b|)` with the scale floored at 1e-4, so round-off
/// on vanishing gradients is not amplified.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}
