//! Per-node protocol state machines and the message formats they exchange.
//!
//! Overhead accounting uses a fixed model: a 64-bit header, 32 bits per
//! neighbor entry and 96 bits per link-state row.

pub mod baseline;
pub mod tensr;

use crate::engine::SimTime;
use crate::linkstate::{TableRow, ROW_BITS};
use crate::radio::NodeId;
use serde::{Deserialize, Serialize};

pub const HEADER_BITS: u64 = 64;
pub const NEIGHBOR_ENTRY_BITS: u64 = 32;
pub const DEFAULT_HOP_LIMIT: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub node: NodeId,
    /// When the sender last confirmed the adjacency.
    pub stamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloMessage {
    pub sender: NodeId,
    pub neighbors: Vec<NeighborEntry>,
    /// Link-state rows piggybacked by the expanded format; empty otherwise.
    pub rows: Vec<TableRow>,
}

impl HelloMessage {
    pub fn bits(&self) -> u64 {
        HEADER_BITS + NEIGHBOR_ENTRY_BITS * self.neighbors.len() as u64 + ROW_BITS * self.rows.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoMessage {
    pub sender: NodeId,
    pub rows: Vec<TableRow>,
}

impl InfoMessage {
    pub fn bits(&self) -> u64 {
        HEADER_BITS + ROW_BITS * self.rows.len() as u64
    }
}

/// Baseline neighbor-sensing message: the links the sender currently hears.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkHello {
    pub sender: NodeId,
    pub heard: Vec<NodeId>,
}

impl LinkHello {
    pub fn bits(&self) -> u64 {
        HEADER_BITS + NEIGHBOR_ENTRY_BITS * self.heard.len() as u64
    }
}

/// Baseline topology-control flood.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcMessage {
    pub origin: NodeId,
    pub seq: u32,
    pub neighbors: Vec<NodeId>,
}

impl TcMessage {
    pub fn bits(&self) -> u64 {
        HEADER_BITS + NEIGHBOR_ENTRY_BITS * self.neighbors.len() as u64
    }
}

/// Application packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPacket {
    pub id: u64,
    pub flow: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub send_time: SimTime,
    /// Transmissions so far.
    pub hops: u32,
    pub is_reply: bool,
    pub bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardDecision {
    Delivered { delay: f64 },
    Send { next_hop: NodeId },
    DropUnreachable,
    DropHopLimit,
}

/// Hop-by-hop forwarding step at node `me`, given its table's next hop.
pub fn forward(
    me: NodeId,
    next_hop: Option<NodeId>,
    packet: &DataPacket,
    now: SimTime,
    hop_limit: u32,
) -> ForwardDecision {
    if packet.dst == me {
        return ForwardDecision::Delivered { delay: (now - packet.send_time).as_secs() };
    }
    if packet.hops >= hop_limit {
        return ForwardDecision::DropHopLimit;
    }
    match next_hop {
        Some(h) if h != me => ForwardDecision::Send { next_hop: h },
        _ => ForwardDecision::DropUnreachable,
    }
}
