//! TENSR node agent: HELLO-based neighbor sensing, INFO table exchange,
//! encounter bookkeeping and estimator-driven most-reliable-path routing.

use super::{HelloMessage, InfoMessage, NeighborEntry, DEFAULT_HOP_LIMIT};
use crate::engine::SimTime;
use crate::estimator::{estimate, EstimateCase, EstimatorParams, NodeView};
use crate::geometry::Point2;
use crate::linkstate::{LinkStateStore, TableRow};
use crate::mobility::MobilityPlan;
use crate::pli::PliRecord;
use crate::radio::NodeId;
use crate::router::{most_reliable_paths, ReliabilityGraph, RoutingTable};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TensrParams {
    #[serde(rename = "hello_interval_s")]
    pub hello_interval: f64,
    #[serde(rename = "info_interval_s")]
    pub info_interval: f64,
    pub expanded_hello: bool,
    pub max_rows_per_info: usize,
    pub max_rows_per_hello: usize,
    /// Maximum age of a routing table before it is recomputed.
    #[serde(rename = "route_recompute_s")]
    pub route_recompute: f64,
    /// Social-tie measurement interval `T_int`.
    #[serde(rename = "measurement_interval_s")]
    pub measurement_interval: f64,
    /// Social-tie memory `R_mem`, in measurement intervals.
    pub social_tie_memory: usize,
    pub hop_limit: u32,
}

impl Default for TensrParams {
    fn default() -> Self {
        Self {
            hello_interval: 0.5,
            info_interval: 4.0,
            expanded_hello: false,
            max_rows_per_info: 64,
            max_rows_per_hello: 8,
            route_recompute: 1.0,
            measurement_interval: 6.0,
            social_tie_memory: 10,
            hop_limit: DEFAULT_HOP_LIMIT,
        }
    }
}

impl TensrParams {
    pub fn neighbor_timeout(&self) -> f64 {
        3.0 * self.hello_interval
    }

    pub fn invalid_fields(&self) -> Vec<&'static str> {
        let mut bad = Vec::new();
        if !(self.hello_interval > 0.0) {
            bad.push("tensr.hello_interval_s");
        }
        if !(self.info_interval > 0.0) {
            bad.push("tensr.info_interval_s");
        }
        if !(self.route_recompute > 0.0) {
            bad.push("tensr.route_recompute_s");
        }
        if !(self.measurement_interval > 0.0) {
            bad.push("tensr.measurement_interval_s");
        }
        if self.social_tie_memory == 0 {
            bad.push("tensr.social_tie_memory");
        }
        bad
    }
}

struct CachedTable {
    computed_at: SimTime,
    neighbor_version: u64,
    table: RoutingTable<f64>,
}

pub struct TensrAgent {
    pub id: NodeId,
    pub params: TensrParams,
    pub store: LinkStateStore,
    /// Latest PLI per subject.
    pub pli: Vec<Option<PliRecord>>,
    last_heard: Vec<Option<SimTime>>,
    last_hello: Option<SimTime>,
    last_info: Option<SimTime>,
    neighbor_version: u64,
    cached: Option<CachedTable>,
    /// How many estimates each case produced, indexed by case number - 1.
    pub case_counts: [u64; 5],
    pub info_emissions: u64,
}

fn secs(t: SimTime) -> f64 {
    t.as_secs()
}

impl TensrAgent {
    pub fn new(id: NodeId, n: usize, params: TensrParams) -> Self {
        let store = LinkStateStore::new(id, n, params.social_tie_memory);
        Self {
            id,
            params,
            store,
            pli: vec![None; n],
            last_heard: vec![None; n],
            last_hello: None,
            last_info: None,
            neighbor_version: 0,
            cached: None,
            case_counts: [0; 5],
            info_emissions: 0,
        }
    }

    pub fn is_neighbor(&self, other: NodeId) -> bool {
        other != self.id && self.store.adjacency.value(self.id, other) == 1.0
    }

    pub fn neighbors(&self) -> Vec<NodeId> {
        (0..self.store.size()).filter(|&k| self.is_neighbor(k)).collect()
    }

    pub fn last_heard(&self, other: NodeId) -> Option<SimTime> {
        self.last_heard[other]
    }

    fn touches_self(&self, row: &TableRow) -> bool {
        row.i == self.id || row.j == self.id
    }

    /// HELLO from a current radio neighbor at `measured_distance` meters.
    /// Returns true if the sender is a new neighbor.
    pub fn on_hello(&mut self, msg: &HelloMessage, measured_distance: f64, now: SimTime) -> bool {
        let me = self.id;
        let s = msg.sender;
        if s == me {
            return false;
        }
        let t = secs(now);
        let is_new = !self.is_neighbor(s);
        self.store.adjacency.set(me, s, 1.0, t, t);
        self.store.distance.set(me, s, measured_distance, t, t);
        self.store.mark_encounter(s);
        self.last_heard[s] = Some(now);
        for entry in &msg.neighbors {
            if entry.node != me && entry.node != s {
                self.store.adjacency.merge_entry(s, entry.node, 1.0, entry.stamp, t);
            }
        }
        for row in &msg.rows {
            if !self.touches_self(row) {
                self.store.merge_row(row, t);
            }
        }
        if is_new {
            self.neighbor_version += 1;
        }
        is_new
    }

    /// Declares `neighbor` lost if nothing was heard within the timeout.
    /// Returns true if the adjacency changed.
    pub fn neighbor_timeout(&mut self, neighbor: NodeId, now: SimTime) -> bool {
        let Some(last) = self.last_heard[neighbor] else {
            return false;
        };
        let timeout = SimTime::from_secs(self.params.neighbor_timeout());
        if now - last < timeout || !self.is_neighbor(neighbor) {
            return false;
        }
        let t = secs(now);
        self.store.adjacency.set(self.id, neighbor, 0.0, t, t);
        self.neighbor_version += 1;
        true
    }

    pub fn hello(&mut self, now: SimTime) -> HelloMessage {
        let me = self.id;
        let neighbors = self
            .neighbors()
            .into_iter()
            .map(|k| NeighborEntry { node: k, stamp: self.store.adjacency.stamp(me, k) })
            .collect();
        let rows = if self.params.expanded_hello {
            let since = self.last_hello.map_or(f64::NEG_INFINITY, secs);
            self.store.changed_rows(since, self.params.max_rows_per_hello)
        } else {
            Vec::new()
        };
        self.last_hello = Some(now);
        HelloMessage { sender: me, neighbors, rows }
    }

    /// INFO with the rows changed since the previous emission, or `None` when
    /// rate-limited or there is nothing new.
    pub fn emit_info(&mut self, now: SimTime) -> Option<InfoMessage> {
        if let Some(last) = self.last_info {
            if now - last < SimTime::from_secs(self.params.info_interval) {
                return None;
            }
        }
        let since = self.last_info.map_or(f64::NEG_INFINITY, secs);
        let rows = self.store.changed_rows(since, self.params.max_rows_per_info);
        if rows.is_empty() {
            return None;
        }
        self.last_info = Some(now);
        self.info_emissions += 1;
        Some(InfoMessage { sender: self.id, rows })
    }

    pub fn on_info(&mut self, msg: &InfoMessage, now: SimTime) {
        let t = secs(now);
        for row in &msg.rows {
            if !self.touches_self(row) {
                self.store.merge_row(row, t);
            }
        }
    }

    pub fn on_pli(&mut self, record: PliRecord) {
        if record.subject == self.id {
            return;
        }
        let slot = &mut self.pli[record.subject];
        if slot.is_none_or(|old| record.timestamp > old.timestamp) {
            *slot = Some(record);
        }
    }

    pub fn close_interval(&mut self, now: SimTime) {
        self.store.close_interval(secs(now));
    }

    /// Estimates every pair and runs Dijkstra from this node.
    pub fn compute_table(
        &mut self,
        now: SimTime,
        own_position: Point2<f64>,
        plans: &[MobilityPlan<f64>],
        params: &EstimatorParams,
    ) -> RoutingTable<f64> {
        let view =
            NodeView { q: self.id, now: secs(now), store: &self.store, pli: &self.pli, own_position, plans, params };
        let counts = &mut self.case_counts;
        let graph = ReliabilityGraph::from_fn(self.store.size(), |i, j| {
            let e = estimate(&view, i, j);
            counts[e.case_used as usize - 1] += 1;
            e.p_hat
        });
        most_reliable_paths(&graph, self.id)
    }

    /// Cached table, recomputed when older than the recompute cadence or after
    /// a neighbor-set change.
    pub fn routing_table(
        &mut self,
        now: SimTime,
        own_position: Point2<f64>,
        plans: &[MobilityPlan<f64>],
        params: &EstimatorParams,
    ) -> &RoutingTable<f64> {
        let max_age = SimTime::from_secs(self.params.route_recompute);
        let fresh = self
            .cached
            .as_ref()
            .is_some_and(|c| c.neighbor_version == self.neighbor_version && now - c.computed_at < max_age);
        if !fresh {
            let table = self.compute_table(now, own_position, plans, params);
            self.cached = Some(CachedTable { computed_at: now, neighbor_version: self.neighbor_version, table });
        }
        &self.cached.as_ref().expect("just filled").table
    }

    pub fn case_count(&self, case: EstimateCase) -> u64 {
        self.case_counts[case as usize - 1]
    }
}
