//! Scenario configuration, loaded from TOML. Every field has a default, so an
//! empty document is the reference configuration.

use crate::estimator::EstimatorParams;
use crate::mobility::{GroupScenario, MobilityPlan, Waypoint};
use crate::pli::PliParams;
use crate::protocol::baseline::BaselineParams;
use crate::protocol::tensr::TensrParams;
use crate::radio::NodeId;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid scenario fields: {}", .0.join(", "))]
    Invalid(Vec<String>),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Tensr,
    Baseline,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Tensr, Protocol::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Tensr => "tensr",
            Protocol::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tensr" => Ok(Protocol::Tensr),
            "baseline" | "olsr" => Ok(Protocol::Baseline),
            other => Err(format!("unknown protocol `{other}` (expected tensr or baseline)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grouping {
    pub groups: usize,
    pub nodes_per_group: usize,
}

impl Grouping {
    pub fn n_nodes(&self) -> usize {
        self.groups * self.nodes_per_group
    }
}

impl Default for Grouping {
    fn default() -> Self {
        Self { groups: 7, nodes_per_group: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficKind {
    Cbr,
    Echo,
}

/// A flow with fixed endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEndpoints {
    pub src: NodeId,
    pub dst: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSpec {
    pub kind: TrafficKind,
    /// Number of randomly placed flows; ignored when `endpoints` is non-empty.
    pub flows: usize,
    pub packet_bits: u64,
    pub rate_pps: f64,
    pub endpoints: Vec<FlowEndpoints>,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        Self { kind: TrafficKind::Cbr, flows: 6, packet_bits: 1024, rate_pps: 1.0, endpoints: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// One minus the hypothesis-test confidence level.
    pub alpha: f64,
    pub pli_staleness_threshold_s: f64,
    pub social_staleness_threshold_s: f64,
    pub p0: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { alpha: 0.05, pli_staleness_threshold_s: 10.0, social_staleness_threshold_s: 60.0, p0: 0.01 }
    }
}

/// An explicit node plan; replaces random generation when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    pub node: NodeId,
    #[serde(default)]
    pub group: usize,
    /// `[t, x, y]` triples.
    pub waypoints: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignGrid {
    pub velocities_mps: Vec<f64>,
    pub groupings: Vec<Grouping>,
}

impl Default for CampaignGrid {
    fn default() -> Self {
        Self {
            velocities_mps: vec![10.0, 20.0, 30.0],
            groupings: vec![
                Grouping { groups: 10, nodes_per_group: 2 },
                Grouping { groups: 7, nodes_per_group: 3 },
                Grouping { groups: 5, nodes_per_group: 4 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub grouping: Grouping,
    pub duration_s: f64,
    pub deviation_time_s: f64,
    pub velocity_mps: f64,
    pub sigma_n_m: f64,
    pub radio_range_m: f64,
    pub area_m: [f64; 2],
    pub trials: usize,
    pub hop_latency_s: f64,
    pub loss_probability: f64,
    pub anp_threshold: f64,
    pub max_generation_attempts: usize,
    /// Cadence of connectivity sampling for the ANP metric.
    pub anp_sample_interval_s: f64,
    pub tensr: TensrParams,
    pub baseline: BaselineParams,
    pub pli: PliParams,
    pub estimator: EstimatorConfig,
    pub traffic: TrafficSpec,
    pub campaign: CampaignGrid,
    pub plans: Vec<PlanSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            grouping: Grouping::default(),
            duration_s: 600.0,
            deviation_time_s: 300.0,
            velocity_mps: 20.0,
            sigma_n_m: 10.0,
            radio_range_m: 500.0,
            area_m: [1500.0, 1500.0],
            trials: 30,
            hop_latency_s: 0.002,
            loss_probability: 0.0,
            anp_threshold: 0.01,
            max_generation_attempts: 200,
            anp_sample_interval_s: 1.0,
            tensr: TensrParams::default(),
            baseline: BaselineParams::default(),
            pli: PliParams::default(),
            estimator: EstimatorConfig::default(),
            traffic: TrafficSpec::default(),
            campaign: CampaignGrid::default(),
            plans: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn n_nodes(&self) -> usize {
        if self.plans.is_empty() {
            self.grouping.n_nodes()
        } else {
            self.plans.len()
        }
    }

    /// Checks every constraint and lists all offending fields at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut bad: Vec<String> = Vec::new();
        let mut check = |ok: bool, name: &str| {
            if !ok {
                bad.push(name.to_string());
            }
        };
        check(self.grouping.groups >= 1, "grouping.groups");
        check(self.grouping.nodes_per_group >= 1, "grouping.nodes_per_group");
        check(self.duration_s > 0.0, "duration_s");
        check(self.deviation_time_s >= 0.0, "deviation_time_s");
        check(self.velocity_mps > 0.0, "velocity_mps");
        check(self.sigma_n_m >= 0.0, "sigma_n_m");
        check(self.radio_range_m > 0.0, "radio_range_m");
        check(self.area_m[0] > 0.0 && self.area_m[1] > 0.0, "area_m");
        check(self.trials >= 1, "trials");
        check(self.hop_latency_s >= 0.0, "hop_latency_s");
        check((0.0..=1.0).contains(&self.loss_probability), "loss_probability");
        check(self.anp_threshold >= 0.0, "anp_threshold");
        check(self.max_generation_attempts >= 1, "max_generation_attempts");
        check(self.anp_sample_interval_s > 0.0, "anp_sample_interval_s");
        check(self.estimator.alpha > 0.0 && self.estimator.alpha < 1.0, "estimator.alpha");
        check(self.estimator.pli_staleness_threshold_s >= 0.0, "estimator.pli_staleness_threshold_s");
        check(self.estimator.social_staleness_threshold_s >= 0.0, "estimator.social_staleness_threshold_s");
        check((0.0..=1.0).contains(&self.estimator.p0), "estimator.p0");
        check(self.traffic.rate_pps > 0.0, "traffic.rate_pps");
        check(self.traffic.packet_bits > 0, "traffic.packet_bits");
        check(!self.campaign.velocities_mps.is_empty(), "campaign.velocities_mps");
        check(self.campaign.velocities_mps.iter().all(|&v| v > 0.0), "campaign.velocities_mps");
        check(!self.campaign.groupings.is_empty(), "campaign.groupings");
        check(self.campaign.groupings.iter().all(|g| g.groups >= 1 && g.nodes_per_group >= 1), "campaign.groupings");
        let n = self.n_nodes();
        check(self.traffic.endpoints.iter().all(|f| f.src < n && f.dst < n && f.src != f.dst), "traffic.endpoints");
        if !self.plans.is_empty() {
            let mut ids: Vec<NodeId> = self.plans.iter().map(|p| p.node).collect();
            ids.sort_unstable();
            check(ids.iter().enumerate().all(|(k, &id)| k == id), "plans.node");
            check(self.plans.iter().all(|p| p.to_plan().is_ok()), "plans.waypoints");
        }
        bad.extend(self.tensr.invalid_fields().into_iter().map(String::from));
        bad.extend(self.baseline.invalid_fields().into_iter().map(String::from));
        bad.extend(self.pli.invalid_fields().into_iter().map(String::from));
        bad.dedup();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(bad))
        }
    }

    /// The same scenario at another grid cell.
    pub fn with_cell(&self, grouping: Grouping, velocity: f64) -> Self {
        Self { grouping, velocity_mps: velocity, ..self.clone() }
    }

    pub fn group_scenario(&self) -> GroupScenario {
        GroupScenario {
            n_groups: self.grouping.groups,
            nodes_per_group: self.grouping.nodes_per_group,
            area: (self.area_m[0], self.area_m[1]),
            target_speed: self.velocity_mps,
            duration: self.duration_s,
            deviation_time: self.deviation_time_s,
            radio_range: self.radio_range_m,
            jitter_sigma: self.sigma_n_m,
            anp_threshold: self.anp_threshold,
            max_attempts: self.max_generation_attempts,
            sample_interval: self.anp_sample_interval_s,
        }
    }

    pub fn estimator_params(&self) -> EstimatorParams {
        let n = self.n_nodes();
        EstimatorParams {
            alpha: self.estimator.alpha,
            pli_staleness_threshold: self.estimator.pli_staleness_threshold_s,
            social_staleness_threshold: self.estimator.social_staleness_threshold_s,
            p0: self.estimator.p0,
            sigma_n: vec![self.sigma_n_m; n],
            v_max: vec![self.velocity_mps; n],
            d_max: vec![self.radio_range_m; n],
            pli: self.pli.clone(),
        }
    }
}

impl PlanSpec {
    pub fn to_plan(&self) -> Result<MobilityPlan<f64>, crate::mobility::MobilityError> {
        let wps = self.waypoints.iter().map(|&[t, x, y]| Waypoint::new(t, x, y)).collect();
        MobilityPlan::new(self.node, wps)
    }
}
