//! Per-run metrics.

use crate::estimator::EstimateCase;
use crate::radio::{Ledger, NodeId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowMetrics {
    pub flow: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub sent: u64,
    pub delivered: u64,
    pub replies_sent: u64,
    pub replies_delivered: u64,
    /// Sum of delays over delivered packets (originals and replies).
    pub delay_sum_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub packets_sent: u64,
    pub packets_delivered: u64,
    /// Mean over delivered packets; `None` when nothing arrived.
    pub mean_delay_s: Option<f64>,
    pub control_bits: u64,
    pub data_bits: u64,
    pub percent_overhead: f64,
    pub anp: f64,
    pub drops_unreachable: u64,
    pub drops_hop_limit: u64,
    pub drops_link: u64,
    /// Estimates produced per case, TENSR only.
    pub estimator_cases: [u64; 5],
    pub transmissions: u64,
    pub flows: Vec<FlowMetrics>,
}

/// `control / (control + data)`, zero when nothing was sent.
pub fn percent_overhead(control_bits: u64, data_bits: u64) -> f64 {
    let total = control_bits + data_bits;
    if total == 0 {
        0.0
    } else {
        control_bits as f64 / total as f64
    }
}

impl RunMetrics {
    pub fn new(flows: Vec<FlowMetrics>) -> Self {
        Self { flows, ..Self::default() }
    }

    pub fn record_sent(&mut self, flow: usize, is_reply: bool) {
        self.packets_sent += 1;
        let f = &mut self.flows[flow];
        if is_reply {
            f.replies_sent += 1;
        } else {
            f.sent += 1;
        }
    }

    pub fn record_delivered(&mut self, flow: usize, is_reply: bool, delay: f64) {
        self.packets_delivered += 1;
        let f = &mut self.flows[flow];
        if is_reply {
            f.replies_delivered += 1;
        } else {
            f.delivered += 1;
        }
        f.delay_sum_s += delay;
    }

    pub fn record_case(&mut self, case: EstimateCase, count: u64) {
        self.estimator_cases[case as usize - 1] += count;
    }

    /// Fills the derived fields from the radio ledger.
    pub fn finish(&mut self, ledger: &Ledger, anp: f64) {
        self.control_bits = ledger.control_bits;
        self.data_bits = ledger.data_bits;
        self.transmissions = ledger.transmissions;
        self.percent_overhead = percent_overhead(ledger.control_bits, ledger.data_bits);
        self.anp = anp;
        let delay_sum: f64 = self.flows.iter().map(|f| f.delay_sum_s).sum();
        self.mean_delay_s = (self.packets_delivered > 0).then(|| delay_sum / self.packets_delivered as f64);
    }

    pub fn delivery_ratio(&self) -> f64 {
        if self.packets_sent == 0 {
            0.0
        } else {
            self.packets_delivered as f64 / self.packets_sent as f64
        }
    }
}
