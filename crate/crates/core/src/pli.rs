//! Position location information (PLI): an out-of-band oracle that
//! periodically tells a random subset of nodes where a node is, and the
//! staleness-dependent error model consumers apply to those reports.

use crate::engine::{RngStream, SimTime};
use crate::geometry::Point2;
use crate::radio::NodeId;
use crate::scalar::Real;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PliParams {
    #[serde(rename = "broadcast_interval_s")]
    pub broadcast_interval: f64,
    #[serde(rename = "interval_jitter_s")]
    pub interval_jitter: f64,
    pub reach_probability: f64,
    #[serde(rename = "broadcast_delay_s")]
    pub broadcast_delay: f64,
    /// `(staleness seconds, sigma_p meters)`, staleness strictly increasing.
    pub sigma_p_breakpoints: Vec<(f64, f64)>,
}

impl Default for PliParams {
    fn default() -> Self {
        Self {
            broadcast_interval: 5.0,
            interval_jitter: 5.0,
            reach_probability: 0.5,
            broadcast_delay: 3.0,
            sigma_p_breakpoints: vec![(0.0, 10.0), (20.0, 20.0), (30.0, 30.0)],
        }
    }
}

impl PliParams {
    /// Names of fields that violate their constraints.
    pub fn invalid_fields(&self) -> Vec<&'static str> {
        let mut bad = Vec::new();
        if !(self.broadcast_interval > 0.0) {
            bad.push("pli.broadcast_interval_s");
        }
        if !(self.interval_jitter >= 0.0) {
            bad.push("pli.interval_jitter_s");
        }
        if !(0.0..=1.0).contains(&self.reach_probability) {
            bad.push("pli.reach_probability");
        }
        if !(self.broadcast_delay >= 0.0) {
            bad.push("pli.broadcast_delay_s");
        }
        let bp = &self.sigma_p_breakpoints;
        if bp.is_empty() || bp.iter().any(|&(_, s)| !(s > 0.0)) || bp.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            bad.push("pli.sigma_p_breakpoints");
        }
        bad
    }
}

/// Piecewise-linear PLI standard deviation versus staleness, clamped outside
/// the breakpoint range.
pub fn sigma_p<T: Real>(tau: T, breakpoints: &[(T, T)]) -> T {
    let Some(first) = breakpoints.first() else {
        return T::zero();
    };
    if tau <= first.0 {
        return first.1;
    }
    for w in breakpoints.windows(2) {
        let ((t0, s0), (t1, s1)) = (w[0], w[1]);
        if tau <= t1 {
            return s0 + (s1 - s0) * (tau - t0) / (t1 - t0);
        }
    }
    breakpoints.last().expect("non-empty").1
}

impl PliParams {
    pub fn sigma_p(&self, tau: f64) -> f64 {
        sigma_p(tau, &self.sigma_p_breakpoints)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PliRecord {
    pub subject: NodeId,
    pub phi: Point2<f64>,
    /// When the position was sampled, seconds.
    pub timestamp: f64,
}

impl PliRecord {
    pub fn staleness(&self, now: f64) -> f64 {
        (now - self.timestamp).max(0.0)
    }
}

/// One emission: the record and who will receive it, when.
#[derive(Debug, Clone, PartialEq)]
pub struct PliBroadcast {
    pub record: PliRecord,
    pub receivers: Vec<NodeId>,
    pub deliver_at: SimTime,
}

/// The per-node oracle.
pub struct PliOracle {
    pub node: NodeId,
    params: PliParams,
    rng: ChaCha8Rng,
}

impl PliOracle {
    pub fn new(node: NodeId, params: PliParams, stream: RngStream) -> Self {
        Self { node, params, rng: stream.child(node as u64).rng() }
    }

    /// Gap until the next emission: `interval + U(0, jitter)`.
    pub fn next_gap(&mut self) -> SimTime {
        let jitter =
            if self.params.interval_jitter > 0.0 { self.rng.gen::<f64>() * self.params.interval_jitter } else { 0.0 };
        SimTime::from_secs(self.params.broadcast_interval + jitter)
    }

    /// Samples the node's position with `sigma_p(0)` noise and picks receivers
    /// independently with the reach probability.
    pub fn emit(&mut self, now: SimTime, true_position: Point2<f64>, n_nodes: usize) -> PliBroadcast {
        let noise = self.params.sigma_p(0.0);
        let dx: f64 = self.rng.sample(StandardNormal);
        let dy: f64 = self.rng.sample(StandardNormal);
        let record = PliRecord {
            subject: self.node,
            phi: Point2::new(true_position.x + noise * dx, true_position.y + noise * dy),
            timestamp: now.as_secs(),
        };
        let p = self.params.reach_probability;
        let receivers = (0..n_nodes).filter(|&j| j != self.node).filter(|_| self.rng.gen::<f64>() < p).collect();
        PliBroadcast { record, receivers, deliver_at: now + SimTime::from_secs(self.params.broadcast_delay) }
    }
}

/// Generates every broadcast of one node's oracle over `[0, until]`.
pub fn run_oracle(
    node: NodeId,
    params: &PliParams,
    stream: RngStream,
    n_nodes: usize,
    until: SimTime,
    mut position: impl FnMut(SimTime) -> Point2<f64>,
) -> Vec<PliBroadcast> {
    let mut oracle = PliOracle::new(node, params.clone(), stream);
    let mut out = Vec::new();
    let mut t = oracle.next_gap();
    while t <= until {
        out.push(oracle.emit(t, position(t), n_nodes));
        t = t + oracle.next_gap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_p_table_values() {
        let p = PliParams::default();
        assert_eq!(p.sigma_p(0.0), 10.0);
        assert_eq!(p.sigma_p(10.0), 15.0);
        assert_eq!(p.sigma_p(25.0), 25.0);
        assert_eq!(p.sigma_p(40.0), 30.0);
        let bp32: Vec<(f32, f32)> = vec![(0.0, 10.0), (20.0, 20.0)];
        assert_eq!(sigma_p(10.0f32, &bp32), 15.0);
    }

    #[test]
    fn delayed_delivery_makes_records_stale() {
        let params = PliParams { reach_probability: 1.0, ..Default::default() };
        let casts =
            run_oracle(0, &params, RngStream::new(1, "pli"), 5, SimTime::from_secs(120.0), |_| Point2::origin());
        assert!(!casts.is_empty());
        for c in &casts {
            assert_eq!(c.receivers, vec![1, 2, 3, 4]);
            let staleness = c.deliver_at.as_secs() - c.record.timestamp;
            assert!(staleness >= 3.0 - 1e-9);
        }
        for w in casts.windows(2) {
            let gap = w[1].record.timestamp - w[0].record.timestamp;
            assert!((5.0..=10.0).contains(&gap), "{gap}");
        }
    }

    #[test]
    fn zero_reach_never_delivers() {
        let params = PliParams { reach_probability: 0.0, ..Default::default() };
        let casts =
            run_oracle(3, &params, RngStream::new(1, "pli"), 6, SimTime::from_secs(300.0), |_| Point2::origin());
        assert!(casts.iter().all(|c| c.receivers.is_empty()));
    }

    #[test]
    fn mean_receivers_binomial() {
        let mut oracle = PliOracle::new(0, PliParams::default(), RngStream::new(8, "pli"));
        let n = 10_000;
        let total: usize =
            (0..n).map(|k| oracle.emit(SimTime::from_secs(k as f64), Point2::origin(), 21).receivers.len()).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 10.0).abs() <= 0.3, "{mean}");
    }

    #[test]
    fn params_validation() {
        let mut p = PliParams::default();
        assert!(p.invalid_fields().is_empty());
        p.sigma_p_breakpoints = vec![(0.0, 10.0), (0.0, 12.0)];
        p.reach_probability = 1.5;
        assert_eq!(p.invalid_fields(), vec!["pli.reach_probability", "pli.sigma_p_breakpoints"]);
    }
}
