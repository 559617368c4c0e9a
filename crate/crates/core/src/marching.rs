//! Heap-ordered causal sweep shared by the Eikonal and coupled-mode solvers.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::field::{Axis, Grid2D, NodeSet};

#[derive(Debug, Clone, Copy)]
struct Entry {
    value: f64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // ties broken by node index so runs are bit-reproducible
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.idx.cmp(&other.idx))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeUpdate {
    pub value: f64,
    pub stalled: bool,
}

/// Bookkeeping from one sweep.
#[derive(Debug, Clone, Default)]
pub struct MarchReport {
    /// Nodes in the order they were accepted.
    pub accepted_order: Vec<usize>,
    /// Non-boundary nodes whose accepted value came from a clamped update.
    pub stalled_nodes: Vec<usize>,
    /// Accepted values that dropped below their predecessor.
    pub causality_violations: usize,
}

/// Run the sweep. `update(idx, a, b)` returns the tentative value of `idx`
/// given the smaller accepted neighbour along x (`a`) and y (`b`).
pub(crate) fn march<F>(grid: &Grid2D, boundary: &NodeSet, mut update: F) -> (Vec<f64>, MarchReport)
where
    F: FnMut(usize, Option<f64>, Option<f64>) -> Option<NodeUpdate>,
{
    let n = grid.len();
    let mut values = vec![f64::INFINITY; n];
    let mut accepted = vec![false; n];
    let mut fixed = vec![false; n];
    let mut stalled = vec![false; n];
    let mut heap = BinaryHeap::with_capacity(n / 4 + 16);
    let mut report = MarchReport {
        accepted_order: Vec::with_capacity(n),
        ..Default::default()
    };

    for ((i, j), q) in boundary.iter() {
        let idx = grid.index(i, j);
        values[idx] = q;
        fixed[idx] = true;
        heap.push(Reverse(Entry { value: q, idx }));
    }

    let accepted_min = |values: &[f64], accepted: &[bool], idx: usize, axis: Axis| -> Option<f64> {
        let (m, p) = grid.axis_neighbors(idx, axis);
        let pick = |k: Option<usize>| k.filter(|&k| accepted[k]).map(|k| values[k]);
        match (pick(m), pick(p)) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        }
    };

    let mut last = f64::NEG_INFINITY;
    while let Some(Reverse(Entry { value, idx })) = heap.pop() {
        if accepted[idx] || value != values[idx] {
            continue;
        }
        accepted[idx] = true;
        report.accepted_order.push(idx);
        if value < last - 1e-12 * last.abs().max(1.0) {
            report.causality_violations += 1;
        }
        last = last.max(value);
        if stalled[idx] {
            report.stalled_nodes.push(idx);
        }

        for nb in grid.neighbors(idx) {
            if accepted[nb] || fixed[nb] {
                continue;
            }
            let a = accepted_min(&values, &accepted, nb, Axis::X);
            let b = accepted_min(&values, &accepted, nb, Axis::Y);
            if let Some(upd) = update(nb, a, b) {
                if upd.value < values[nb] {
                    values[nb] = upd.value;
                    stalled[nb] = upd.stalled;
                    heap.push(Reverse(Entry {
                        value: upd.value,
                        idx: nb,
                    }));
                }
            }
        }
    }
    (values, report)
}

/// Smaller neighbour value along each axis using final values (for residual checks).
pub(crate) fn neighbor_minima(values: &[f64], grid: &Grid2D, idx: usize) -> (Option<f64>, Option<f64>) {
    let along = |axis| crate::field::smaller_neighbor(values, grid, idx, axis).map(|(v, _)| v);
    (along(Axis::X), along(Axis::Y))
}
