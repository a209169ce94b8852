//! Idealized unit-disk channel.
//!
//! Two nodes hear each other iff their distance is within the smaller of the
//! two radio ranges. There is no contention model: every transmission is
//! delivered after a fixed hop latency unless the optional loss draw drops it.

use crate::engine::{RngStream, SimTime};
use crate::geometry::Point2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Radio range per node, meters.
    pub d_max: Vec<f64>,
    pub hop_latency: SimTime,
    pub loss_probability: f64,
}

impl ChannelParams {
    pub fn uniform(n: usize, range: f64) -> Self {
        Self { d_max: vec![range; n], hop_latency: SimTime::from_secs(0.002), loss_probability: 0.0 }
    }

    pub fn effective_range(&self, i: NodeId, j: NodeId) -> f64 {
        self.d_max[i].min(self.d_max[j])
    }
}

/// Undirected graph over node ids `0..n`, with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    adj: Vec<Vec<NodeId>>,
}

impl AdjacencyGraph {
    pub fn empty(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Self {
        let mut g = Self::empty(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) {
        if a == b || self.adj[a].contains(&b) {
            return;
        }
        let pos = self.adj[a].partition_point(|&x| x < b);
        self.adj[a].insert(pos, b);
        let pos = self.adj[b].partition_point(|&x| x < a);
        self.adj[b].insert(pos, a);
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let n = self.adj.len();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}

/// Unit-disk graph: edge iff distance ≤ min(d_max,i, d_max,j).
pub fn neighbors(positions: &[Point2<f64>], params: &ChannelParams) -> AdjacencyGraph {
    let n = positions.len();
    let mut g = AdjacencyGraph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if positions[i].distance(positions[j]) <= params.effective_range(i, j) {
                g.adj[i].push(j);
                g.adj[j].push(i);
            }
        }
    }
    g
}

/// Neighbors of a single node; same rule as [`neighbors`].
pub fn neighbors_of(src: NodeId, positions: &[Point2<f64>], params: &ChannelParams) -> Vec<NodeId> {
    let p = positions[src];
    (0..positions.len()).filter(|&j| j != src && p.distance(positions[j]) <= params.effective_range(src, j)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    Control,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    Broadcast,
    Unicast(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub src: NodeId,
    pub dst: Destination,
    pub payload_bits: u64,
    pub kind: FrameKind,
    pub send_time: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub to: NodeId,
    pub at: SimTime,
}

/// Bits put on the air, by kind, plus drop counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub control_bits: u64,
    pub data_bits: u64,
    pub transmissions: u64,
    pub unicast_not_neighbor: u64,
    pub lost: u64,
}

/// The shared channel of one simulation run.
pub struct Radio {
    pub params: ChannelParams,
    pub ledger: Ledger,
    loss_rng: ChaCha8Rng,
}

impl Radio {
    pub fn new(params: ChannelParams, stream: RngStream) -> Self {
        Self { params, ledger: Ledger::default(), loss_rng: stream.rng() }
    }

    fn survives(&mut self) -> bool {
        let p = self.params.loss_probability;
        if p <= 0.0 {
            return true;
        }
        let keep = self.loss_rng.gen::<f64>() >= p;
        if !keep {
            self.ledger.lost += 1;
        }
        keep
    }

    /// Tallies the frame's bits and returns the resulting deliveries.
    pub fn transmit(&mut self, frame: &Frame, positions: &[Point2<f64>]) -> Vec<Delivery> {
        self.ledger.transmissions += 1;
        match frame.kind {
            FrameKind::Control => self.ledger.control_bits += frame.payload_bits,
            FrameKind::Data => self.ledger.data_bits += frame.payload_bits,
        }
        let at = frame.send_time + self.params.hop_latency;
        match frame.dst {
            Destination::Broadcast => {
                let nbrs = neighbors_of(frame.src, positions, &self.params);
                nbrs.into_iter().filter(|_| self.survives()).map(|to| Delivery { to, at }).collect()
            }
            Destination::Unicast(to) => {
                let range = self.params.effective_range(frame.src, to);
                if to == frame.src || positions[frame.src].distance(positions[to]) > range {
                    self.ledger.unicast_not_neighbor += 1;
                    return Vec::new();
                }
                if self.survives() {
                    vec![Delivery { to, at }]
                } else {
                    Vec::new()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2<f64>> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn disk_boundary() {
        let params = ChannelParams::uniform(2, 500.0);
        assert!(neighbors(&pts(&[(0.0, 0.0), (499.0, 0.0)]), &params).has_edge(0, 1));
        assert!(!neighbors(&pts(&[(0.0, 0.0), (501.0, 0.0)]), &params).has_edge(0, 1));
    }

    #[test]
    fn asymmetric_ranges_use_minimum() {
        let mut params = ChannelParams::uniform(2, 500.0);
        params.d_max[1] = 400.0;
        let g = neighbors(&pts(&[(0.0, 0.0), (450.0, 0.0)]), &params);
        assert!(!g.has_edge(0, 1) && !g.has_edge(1, 0));
    }

    #[test]
    fn broadcast_reaches_all_neighbors() {
        let positions = pts(&[(0.0, 0.0), (100.0, 0.0), (0.0, 100.0), (-100.0, 0.0), (2000.0, 0.0)]);
        let mut radio = Radio::new(ChannelParams::uniform(5, 500.0), RngStream::new(1, "radio"));
        let send_time = SimTime::from_secs(1.0);
        let frame =
            Frame { src: 0, dst: Destination::Broadcast, payload_bits: 100, kind: FrameKind::Control, send_time };
        let d = radio.transmit(&frame, &positions);
        assert_eq!(d.len(), 3);
        assert!(d.iter().all(|x| x.at == SimTime::from_secs(1.002)));
        assert_eq!(radio.ledger.control_bits, 100);
    }

    #[test]
    fn unicast_to_non_neighbor_is_dropped() {
        let positions = pts(&[(0.0, 0.0), (900.0, 0.0)]);
        let mut radio = Radio::new(ChannelParams::uniform(2, 500.0), RngStream::new(1, "radio"));
        let frame = Frame {
            src: 0,
            dst: Destination::Unicast(1),
            payload_bits: 1024,
            kind: FrameKind::Data,
            send_time: SimTime::ZERO,
        };
        assert!(radio.transmit(&frame, &positions).is_empty());
        assert_eq!(radio.ledger.unicast_not_neighbor, 1);
        // Bits are tallied per transmission, delivered or not.
        assert_eq!(radio.ledger.data_bits, 1024);
    }

    #[test]
    fn loss_rate_is_binomial() {
        let positions = pts(&[(0.0, 0.0), (10.0, 0.0)]);
        let mut params = ChannelParams::uniform(2, 500.0);
        params.loss_probability = 0.5;
        let mut radio = Radio::new(params, RngStream::new(99, "radio"));
        let trials = 10_000;
        let mut delivered = 0;
        for k in 0..trials {
            let frame = Frame {
                src: 0,
                dst: Destination::Broadcast,
                payload_bits: 8,
                kind: FrameKind::Control,
                send_time: SimTime::from_micros(k),
            };
            delivered += radio.transmit(&frame, &positions).len();
        }
        let frac = delivered as f64 / trials as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
        assert_eq!(radio.ledger.control_bits, 8 * trials as u64);
    }

    #[test]
    fn component_count() {
        let g = AdjacencyGraph::from_edges(4, &[(0, 1), (2, 3)]);
        assert_eq!(g.components(), 2);
        assert_eq!(AdjacencyGraph::empty(4).components(), 4);
    }
}
