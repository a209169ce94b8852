//! Scenario configuration, traffic, metrics, single runs and campaigns.

pub mod campaign;
pub mod config;
pub mod metrics;
pub mod sim;
pub mod traffic;

pub use campaign::{run_campaign, CampaignResult, CampaignRow};
pub use config::{Protocol, Scenario};
pub use metrics::RunMetrics;
pub use sim::{run_scenario, SimError, Simulation};
