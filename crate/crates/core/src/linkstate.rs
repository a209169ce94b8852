//! Per-node link-state memory: social tie (R), empirical adjacency (A) and
//! pairwise distance (D) matrices, each with a timestamp matrix, plus the
//! encounter windows behind the node's own social-tie measurements.

use crate::radio::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

/// Stamp of an entry that was never set.
pub const NEVER: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatrixId {
    R,
    A,
    D,
}

impl MatrixId {
    pub const ALL: [MatrixId; 3] = [MatrixId::R, MatrixId::A, MatrixId::D];
}

/// Symmetric `n x n` values with last-update stamps. The diagonal is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampedMatrix {
    n: usize,
    values: Vec<f64>,
    stamps: Vec<f64>,
    /// Local time this node last changed the entry; drives incremental exchange.
    touched: Vec<f64>,
}

impl TimestampedMatrix {
    pub fn new(n: usize, initial: f64) -> Self {
        Self { n, values: vec![initial; n * n], stamps: vec![NEVER; n * n], touched: vec![NEVER; n * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn idx(&self, i: NodeId, j: NodeId) -> usize {
        i * self.n + j
    }

    pub fn value(&self, i: NodeId, j: NodeId) -> f64 {
        self.values[self.idx(i, j)]
    }

    pub fn stamp(&self, i: NodeId, j: NodeId) -> f64 {
        self.stamps[self.idx(i, j)]
    }

    pub fn touched(&self, i: NodeId, j: NodeId) -> f64 {
        self.touched[self.idx(i, j)]
    }

    pub fn is_set(&self, i: NodeId, j: NodeId) -> bool {
        self.stamp(i, j) > NEVER
    }

    /// Unconditional write of both symmetric entries.
    pub fn set(&mut self, i: NodeId, j: NodeId, value: f64, stamp: f64, now: f64) {
        debug_assert_ne!(i, j);
        for k in [self.idx(i, j), self.idx(j, i)] {
            self.values[k] = value;
            self.stamps[k] = stamp;
            self.touched[k] = now;
        }
    }

    /// Adopts the remote entry iff its stamp is strictly newer. Returns whether
    /// the local entry changed.
    pub fn merge_entry(&mut self, i: NodeId, j: NodeId, remote_value: f64, remote_stamp: f64, now: f64) -> bool {
        if i == j || i >= self.n || j >= self.n || !(remote_stamp > self.stamp(i, j)) {
            return false;
        }
        self.set(i, j, remote_value, remote_stamp, now);
        true
    }

    /// Upper-triangle pairs with a populated stamp.
    pub fn populated_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j))).filter(|&(i, j)| self.is_set(i, j))
    }
}

/// Sliding window of encounter flags for one pair, `R_mem` intervals long.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncounterWindow {
    capacity: usize,
    flags: VecDeque<bool>,
    count: usize,
}

impl EncounterWindow {
    pub fn new(r_mem: usize) -> Self {
        Self { capacity: r_mem, flags: VecDeque::with_capacity(r_mem), count: 0 }
    }

    /// Pushes one interval's outcome, returns the updated tie `R`.
    pub fn record_interval(&mut self, was_adjacent: bool) -> usize {
        if self.flags.len() == self.capacity && self.flags.pop_front() == Some(true) {
            self.count -= 1;
        }
        if self.capacity > 0 {
            self.flags.push_back(was_adjacent);
            self.count += usize::from(was_adjacent);
        }
        self.count
    }

    pub fn tie(&self) -> usize {
        self.count
    }
}

/// One serialized table entry, as carried in INFO and expanded HELLO payloads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub matrix: MatrixId,
    pub i: NodeId,
    pub j: NodeId,
    pub value: f64,
    pub stamp: f64,
}

/// Bits per serialized row in the overhead accounting model.
pub const ROW_BITS: u64 = 96;

/// The link-state store of node `owner`.
#[derive(Debug, Clone)]
pub struct LinkStateStore {
    pub owner: NodeId,
    pub r_mem: usize,
    pub social: TimestampedMatrix,
    pub adjacency: TimestampedMatrix,
    pub distance: TimestampedMatrix,
    windows: BTreeMap<NodeId, (EncounterWindow, bool)>,
}

impl LinkStateStore {
    /// Empty store: A = 0, D = +inf, R = 0, every stamp unset.
    pub fn new(owner: NodeId, n: usize, r_mem: usize) -> Self {
        Self {
            owner,
            r_mem,
            social: TimestampedMatrix::new(n, 0.0),
            adjacency: TimestampedMatrix::new(n, 0.0),
            distance: TimestampedMatrix::new(n, f64::INFINITY),
            windows: BTreeMap::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.social.size()
    }

    /// Seeds social ties from prior knowledge, stamped at `stamp`.
    pub fn with_prior_ties(mut self, ties: &[(NodeId, NodeId, f64)], stamp: f64) -> Self {
        for &(i, j, r) in ties {
            self.social.set(i, j, r.clamp(0.0, self.r_mem as f64), stamp, stamp);
        }
        self
    }

    pub fn matrix(&self, id: MatrixId) -> &TimestampedMatrix {
        match id {
            MatrixId::R => &self.social,
            MatrixId::A => &self.adjacency,
            MatrixId::D => &self.distance,
        }
    }

    pub fn matrix_mut(&mut self, id: MatrixId) -> &mut TimestampedMatrix {
        match id {
            MatrixId::R => &mut self.social,
            MatrixId::A => &mut self.adjacency,
            MatrixId::D => &mut self.distance,
        }
    }

    /// Marks an encounter with `other` in the current measurement interval.
    pub fn mark_encounter(&mut self, other: NodeId) {
        let r_mem = self.r_mem;
        self.windows.entry(other).or_insert_with(|| (EncounterWindow::new(r_mem), false)).1 = true;
    }

    /// Closes the current measurement interval for every tracked pair and
    /// refreshes `R(owner, other)` stamped at `now`. A pair still adjacent at
    /// the boundary starts the next interval already marked.
    pub fn close_interval(&mut self, now: f64) {
        let owner = self.owner;
        for (&other, (window, marked)) in self.windows.iter_mut() {
            let r = window.record_interval(*marked);
            self.social.set(owner, other, r as f64, now, now);
            *marked = self.adjacency.value(owner, other) == 1.0;
        }
    }

    pub fn window(&self, other: NodeId) -> Option<&EncounterWindow> {
        self.windows.get(&other).map(|(w, _)| w)
    }

    pub fn merge_row(&mut self, row: &TableRow, now: f64) -> bool {
        self.matrix_mut(row.matrix).merge_entry(row.i, row.j, row.value, row.stamp, now)
    }

    /// Rows for every populated pair accepted by `filter`.
    pub fn snapshot_rows(&self, mut filter: impl FnMut(MatrixId, NodeId, NodeId) -> bool) -> Vec<TableRow> {
        let mut rows = Vec::new();
        for id in MatrixId::ALL {
            let m = self.matrix(id);
            for (i, j) in m.populated_pairs() {
                if filter(id, i, j) {
                    rows.push(TableRow { matrix: id, i, j, value: m.value(i, j), stamp: m.stamp(i, j) });
                }
            }
        }
        rows
    }

    /// Rows this node changed after `since`, newest stamp first, at most `cap`.
    pub fn changed_rows(&self, since: f64, cap: usize) -> Vec<TableRow> {
        let mut rows = Vec::new();
        for id in MatrixId::ALL {
            let m = self.matrix(id);
            for (i, j) in m.populated_pairs() {
                if m.touched(i, j) > since {
                    rows.push(TableRow { matrix: id, i, j, value: m.value(i, j), stamp: m.stamp(i, j) });
                }
            }
        }
        rows.sort_by(|a, b| b.stamp.total_cmp(&a.stamp).then_with(|| (a.matrix, a.i, a.j).cmp(&(b.matrix, b.i, b.j))));
        rows.truncate(cap);
        rows
    }
}
