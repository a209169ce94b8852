//! Simplified proactive link-state protocol used as the comparison baseline.
//!
//! Neighbor sensing by periodic HELLO (a link is symmetric once the peer lists
//! us), topology control by full flooding of each node's symmetric neighbor
//! set with sequence numbers and duplicate suppression, and hop-count shortest
//! paths over the learned topology. There is no MPR selection.

use super::{LinkHello, TcMessage, DEFAULT_HOP_LIMIT};
use crate::engine::SimTime;
use crate::radio::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    #[serde(rename = "hello_interval_s")]
    pub hello_interval: f64,
    #[serde(rename = "tc_interval_s")]
    pub tc_interval: f64,
    /// How long a link survives without a HELLO.
    #[serde(rename = "link_hold_s")]
    pub link_hold: f64,
    /// How long a topology entry survives without a refreshing TC.
    #[serde(rename = "topology_hold_s")]
    pub topology_hold: f64,
    pub hop_limit: u32,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self::with_intervals(2.0, 5.0)
    }
}

impl BaselineParams {
    /// Hold times at three times their refresh intervals.
    pub fn with_intervals(hello_interval: f64, tc_interval: f64) -> Self {
        Self {
            hello_interval,
            tc_interval,
            link_hold: 3.0 * hello_interval,
            topology_hold: 3.0 * tc_interval,
            hop_limit: DEFAULT_HOP_LIMIT,
        }
    }

    pub fn invalid_fields(&self) -> Vec<&'static str> {
        let mut bad = Vec::new();
        if !(self.hello_interval > 0.0) {
            bad.push("baseline.hello_interval_s");
        }
        if !(self.tc_interval > 0.0) {
            bad.push("baseline.tc_interval_s");
        }
        if !(self.link_hold > 0.0) {
            bad.push("baseline.link_hold_s");
        }
        if !(self.topology_hold > 0.0) {
            bad.push("baseline.topology_hold_s");
        }
        bad
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TopologyEntry {
    seq: u32,
    neighbors: Vec<NodeId>,
    expires: SimTime,
}

pub struct BaselineAgent {
    pub id: NodeId,
    pub params: BaselineParams,
    n: usize,
    /// Last HELLO heard from each node.
    heard: BTreeMap<NodeId, SimTime>,
    /// Last HELLO from each node that listed us.
    symmetric: BTreeMap<NodeId, SimTime>,
    topology: BTreeMap<NodeId, TopologyEntry>,
    seen: HashSet<(NodeId, u32)>,
    next_seq: u32,
}

/// One periodic step: what to send and the resulting routes.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineStep {
    pub hello: Option<LinkHello>,
    pub tc: Option<TcMessage>,
    pub next_hops: Vec<Option<NodeId>>,
}

impl BaselineAgent {
    pub fn new(id: NodeId, n: usize, params: BaselineParams) -> Self {
        Self {
            id,
            params,
            n,
            heard: BTreeMap::new(),
            symmetric: BTreeMap::new(),
            topology: BTreeMap::new(),
            seen: HashSet::new(),
            next_seq: 0,
        }
    }

    fn alive(last: SimTime, hold: f64, now: SimTime) -> bool {
        now - last <= SimTime::from_secs(hold)
    }

    pub fn symmetric_neighbors(&self, now: SimTime) -> Vec<NodeId> {
        self.symmetric.iter().filter(|&(_, &t)| Self::alive(t, self.params.link_hold, now)).map(|(&k, _)| k).collect()
    }

    pub fn hello(&mut self, now: SimTime) -> LinkHello {
        let heard =
            self.heard.iter().filter(|&(_, &t)| Self::alive(t, self.params.link_hold, now)).map(|(&k, _)| k).collect();
        LinkHello { sender: self.id, heard }
    }

    pub fn on_hello(&mut self, msg: &LinkHello, now: SimTime) {
        if msg.sender == self.id {
            return;
        }
        self.heard.insert(msg.sender, now);
        if msg.heard.contains(&self.id) {
            self.symmetric.insert(msg.sender, now);
        } else {
            self.symmetric.remove(&msg.sender);
        }
    }

    /// TC advertising the current symmetric neighbors; none when isolated.
    pub fn tc(&mut self, now: SimTime) -> Option<TcMessage> {
        let neighbors = self.symmetric_neighbors(now);
        if neighbors.is_empty() {
            return None;
        }
        self.next_seq = self.next_seq.wrapping_add(1);
        self.seen.insert((self.id, self.next_seq));
        Some(TcMessage { origin: self.id, seq: self.next_seq, neighbors })
    }

    /// Processes a received TC. Returns true if this node should rebroadcast it
    /// (first copy of a foreign TC).
    pub fn on_tc(&mut self, msg: &TcMessage, now: SimTime) -> bool {
        if msg.origin == self.id || !self.seen.insert((msg.origin, msg.seq)) {
            return false;
        }
        let expires = now + SimTime::from_secs(self.params.topology_hold);
        let newer = self.topology.get(&msg.origin).is_none_or(|e| msg.seq > e.seq);
        if newer {
            self.topology.insert(msg.origin, TopologyEntry { seq: msg.seq, neighbors: msg.neighbors.clone(), expires });
        }
        true
    }

    /// Hop-count next hops from BFS over own symmetric links and advertised
    /// `origin -> neighbor` edges. Ties resolve to the smallest node id.
    pub fn next_hops(&self, now: SimTime) -> Vec<Option<NodeId>> {
        let mut edges: Vec<Vec<NodeId>> = vec![Vec::new(); self.n];
        edges[self.id] = self.symmetric_neighbors(now);
        for (&origin, entry) in &self.topology {
            if origin != self.id && entry.expires >= now {
                edges[origin].extend(entry.neighbors.iter().copied().filter(|&k| k < self.n));
            }
        }
        for e in &mut edges {
            e.sort_unstable();
            e.dedup();
        }
        let mut first_hop: Vec<Option<NodeId>> = vec![None; self.n];
        let mut visited = vec![false; self.n];
        visited[self.id] = true;
        let mut queue = VecDeque::new();
        for &k in &edges[self.id] {
            if !visited[k] {
                visited[k] = true;
                first_hop[k] = Some(k);
                queue.push_back(k);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &edges[u] {
                if !visited[v] {
                    visited[v] = true;
                    first_hop[v] = first_hop[u];
                    queue.push_back(v);
                }
            }
        }
        first_hop
    }

    pub fn next_hop(&self, dst: NodeId, now: SimTime) -> Option<NodeId> {
        self.next_hops(now).get(dst).copied().flatten()
    }

    /// Emits whichever periodic messages are due and reports the routes.
    pub fn step(&mut self, now: SimTime, hello_due: bool, tc_due: bool) -> BaselineStep {
        let hello = hello_due.then(|| self.hello(now));
        let tc = if tc_due { self.tc(now) } else { None };
        BaselineStep { hello, tc, next_hops: self.next_hops(now) }
    }
}

/// Convenience wrapper mirroring [`BaselineAgent::step`].
pub fn baseline_step(agent: &mut BaselineAgent, now: SimTime, hello_due: bool, tc_due: bool) -> BaselineStep {
    agent.step(now, hello_due, tc_due)
}
