//! Monte-Carlo campaigns over velocity x grouping x protocol cells.

use super::config::{Grouping, Protocol, Scenario};
use super::metrics::RunMetrics;
use super::sim::{run_scenario, SimError};
use crate::engine::stable_mix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Seed of trial `k`; independent of how many trials are run.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    stable_mix(master, trial as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub protocol: Protocol,
    pub grouping: Grouping,
    /// Velocity in whole mm/s so cells order and hash exactly.
    velocity_mmps: i64,
}

impl Cell {
    pub fn new(protocol: Protocol, grouping: Grouping, velocity: f64) -> Self {
        Self { protocol, grouping, velocity_mmps: (velocity * 1000.0).round() as i64 }
    }

    pub fn velocity(&self) -> f64 {
        self.velocity_mmps as f64 / 1000.0
    }
}

/// One CSV record. `trial` is the trial index, or `mean` for the cell aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub protocol: Protocol,
    pub groups: usize,
    pub nodes_per_group: usize,
    pub velocity: f64,
    pub trial: String,
    pub delivered: f64,
    pub mean_delay_s: Option<f64>,
    pub control_bits: f64,
    pub data_bits: f64,
    pub percent_overhead: f64,
    pub anp: f64,
}

impl CampaignRow {
    fn from_run(cell: &Cell, trial: usize, m: &RunMetrics) -> Self {
        Self {
            protocol: cell.protocol,
            groups: cell.grouping.groups,
            nodes_per_group: cell.grouping.nodes_per_group,
            velocity: cell.velocity(),
            trial: trial.to_string(),
            delivered: m.packets_delivered as f64,
            mean_delay_s: m.mean_delay_s,
            control_bits: m.control_bits as f64,
            data_bits: m.data_bits as f64,
            percent_overhead: m.percent_overhead,
            anp: m.anp,
        }
    }

    pub fn is_aggregate(&self) -> bool {
        self.trial == "mean"
    }
}

/// Mean and standard error of one metric over a cell's trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self { mean: f64::NAN, std_err: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let std_err = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Self { mean, std_err }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub protocol: Protocol,
    pub groups: usize,
    pub nodes_per_group: usize,
    pub velocity: f64,
    pub trials: usize,
    pub delivered: Estimate,
    pub mean_delay_s: Estimate,
    pub percent_overhead: Estimate,
    pub anp: Estimate,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    /// Per-trial rows in (cell, trial) order, each cell followed by its `mean` row.
    pub rows: Vec<CampaignRow>,
    pub summaries: Vec<CellSummary>,
}

impl CampaignResult {
    pub fn summary(&self, protocol: Protocol, grouping: Grouping, velocity: f64) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| {
            s.protocol == protocol
                && s.groups == grouping.groups
                && s.nodes_per_group == grouping.nodes_per_group
                && (s.velocity - velocity).abs() < 1e-9
        })
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summaries).expect("summaries serialize")
    }
}

/// Grid from the scenario's campaign section.
pub fn grid(scenario: &Scenario) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &g in &scenario.campaign.groupings {
        for &v in &scenario.campaign.velocities_mps {
            for p in Protocol::ALL {
                cells.push(Cell::new(p, g, v));
            }
        }
    }
    cells
}

/// Runs `trials` trials of every cell, in parallel. Both protocols in a cell
/// see the same mobility for a given trial.
pub fn run_campaign(scenario: &Scenario, cells: &[Cell], trials: usize) -> Result<CampaignResult, SimError> {
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..trials).map(move |k| (c, k))).collect();
    let runs: Vec<RunMetrics> = jobs
        .par_iter()
        .map(|&(c, k)| {
            let cell = &cells[c];
            let mut s = scenario.with_cell(cell.grouping, cell.velocity());
            s.seed = trial_seed(scenario.seed, k);
            run_scenario(&s, cell.protocol)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(jobs.len() + cells.len());
    let mut summaries = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let cell_runs = &runs[c * trials..(c + 1) * trials];
        let trial_rows: Vec<CampaignRow> =
            cell_runs.iter().enumerate().map(|(k, m)| CampaignRow::from_run(cell, k, m)).collect();
        let col = |f: &dyn Fn(&CampaignRow) -> f64| trial_rows.iter().map(f).collect::<Vec<f64>>();
        let delays: Vec<f64> = trial_rows.iter().filter_map(|r| r.mean_delay_s).collect();
        let mean = |xs: Vec<f64>| Estimate::of(&xs).mean;
        let aggregate = CampaignRow {
            trial: "mean".to_string(),
            delivered: mean(col(&|r| r.delivered)),
            mean_delay_s: (!delays.is_empty()).then(|| Estimate::of(&delays).mean),
            control_bits: mean(col(&|r| r.control_bits)),
            data_bits: mean(col(&|r| r.data_bits)),
            percent_overhead: mean(col(&|r| r.percent_overhead)),
            anp: mean(col(&|r| r.anp)),
            ..trial_rows[0].clone()
        };
        summaries.push(CellSummary {
            protocol: cell.protocol,
            groups: cell.grouping.groups,
            nodes_per_group: cell.grouping.nodes_per_group,
            velocity: cell.velocity(),
            trials,
            delivered: Estimate::of(&col(&|r| r.delivered)),
            mean_delay_s: Estimate::of(&delays),
            percent_overhead: Estimate::of(&col(&|r| r.percent_overhead)),
            anp: Estimate::of(&col(&|r| r.anp)),
        });
        rows.extend(trial_rows);
        rows.push(aggregate);
    }
    Ok(CampaignResult { rows, summaries })
}

pub fn write_csv<W: Write>(rows: &[CampaignRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> csv::Result<Vec<CampaignRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn to_csv_string(rows: &[CampaignRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}
