//! Application traffic: flow endpoint selection and CBR emission schedules.

use super::config::{FlowEndpoints, TrafficSpec};
use crate::engine::{RngStream, SimTime};
use rand::seq::SliceRandom;

/// Emission instants `k / rate` for `k = 1 ..= floor(duration * rate)`.
pub fn cbr_schedule(rate_pps: f64, duration: f64) -> Vec<SimTime> {
    if !(rate_pps > 0.0) || !(duration > 0.0) {
        return Vec::new();
    }
    let count = (duration * rate_pps + 1e-9).floor() as u64;
    (1..=count).map(|k| SimTime::from_secs(k as f64 / rate_pps)).collect()
}

/// Flow endpoints: explicit ones if configured, otherwise `spec.flows` random
/// pairs whose members lie in different groups. With a single group any two
/// distinct nodes qualify.
pub fn choose_flows(spec: &TrafficSpec, group_of: &[usize], stream: RngStream) -> Vec<FlowEndpoints> {
    if !spec.endpoints.is_empty() {
        return spec.endpoints.clone();
    }
    let n = group_of.len();
    if n < 2 {
        return Vec::new();
    }
    let multi_group = group_of.iter().any(|&g| g != group_of[0]);
    let pairs: Vec<FlowEndpoints> = (0..n)
        .flat_map(|src| (0..n).map(move |dst| FlowEndpoints { src, dst }))
        .filter(|f| f.src != f.dst && (!multi_group || group_of[f.src] != group_of[f.dst]))
        .collect();
    let mut rng = stream.rng();
    (0..spec.flows).map(|_| *pairs.choose(&mut rng).expect("at least one pair")).collect()
}
