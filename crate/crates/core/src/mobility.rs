//! Waypoint mobility plans, jittered true trajectories, group scenario
//! generation and the average-network-partitioning metric.

use crate::engine::{stable_mix, RngStream, SimTime};
use crate::geometry::Point2;
use crate::radio::{self, AdjacencyGraph, ChannelParams};
use crate::scalar::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("mobility plan has no waypoints")]
    EmptyPlan,
    #[error("first waypoint must be at t=0, found t={0}")]
    FirstWaypointNotZero(f64),
    #[error("waypoint times must be strictly increasing (index {0})")]
    NonIncreasingTimes(usize),
    #[error("time {0} precedes the first waypoint")]
    BeforeStart(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no scenario met ANP <= {threshold} within {attempts} attempts")]
    AnpNotMet { threshold: f64, attempts: usize },
    #[error("ANP needs at least one snapshot")]
    NoSnapshots,
    #[error("ANP snapshot has {0} nodes; at least 2 required")]
    TooFewNodes(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint<T> {
    pub t: T,
    pub pos: Point2<T>,
}

impl<T: Real> Waypoint<T> {
    pub fn new(t: T, x: T, y: T) -> Self {
        Self { t, pos: Point2::new(x, y) }
    }
}

/// Planned trajectory of one node. Only the part up to `visible_until` is
/// known to routing protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityPlan<T> {
    pub node: usize,
    waypoints: Vec<Waypoint<T>>,
    pub visible_until: T,
}

impl<T: Real> MobilityPlan<T> {
    pub fn new(node: usize, waypoints: Vec<Waypoint<T>>) -> Result<Self, MobilityError> {
        let first = waypoints.first().ok_or(MobilityError::EmptyPlan)?;
        if first.t != T::zero() {
            return Err(MobilityError::FirstWaypointNotZero(first.t.to_f64().unwrap_or(f64::NAN)));
        }
        if let Some(i) = waypoints.windows(2).position(|w| !(w[1].t > w[0].t)) {
            return Err(MobilityError::NonIncreasingTimes(i + 1));
        }
        Ok(Self { node, waypoints, visible_until: T::infinity() })
    }

    pub fn with_visibility(mut self, horizon: T) -> Self {
        self.visible_until = horizon;
        self
    }

    pub fn waypoints(&self) -> &[Waypoint<T>] {
        &self.waypoints
    }

    pub fn last_time(&self) -> T {
        self.waypoints.last().expect("non-empty").t
    }

    /// Constant-velocity interpolation; holds the last waypoint afterwards.
    pub fn planned_position(&self, t: T) -> Result<Point2<T>, MobilityError> {
        if t.is_nan() || t < T::zero() {
            return Err(MobilityError::BeforeStart(t.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(self.position_unchecked(t))
    }

    fn position_unchecked(&self, t: T) -> Point2<T> {
        let wps = &self.waypoints;
        let idx = wps.partition_point(|w| w.t <= t);
        if idx == 0 {
            return wps[0].pos;
        }
        if idx == wps.len() {
            return wps[idx - 1].pos;
        }
        let (a, b) = (wps[idx - 1], wps[idx]);
        a.pos.lerp(b.pos, (t - a.t) / (b.t - a.t))
    }

    /// Planned position if `t` lies within the visibility horizon.
    pub fn visible_position(&self, t: T) -> Option<Point2<T>> {
        if t < T::zero() || t > self.visible_until {
            return None;
        }
        Some(self.position_unchecked(t))
    }

    /// The waypoints up to `horizon`, closed with an interpolated waypoint at
    /// the horizon itself.
    pub fn truncated(&self, horizon: T) -> Self {
        let mut wps: Vec<_> = self.waypoints.iter().copied().filter(|w| w.t <= horizon).collect();
        if wps.last().is_some_and(|w| w.t < horizon) && horizon < self.last_time() {
            wps.push(Waypoint { t: horizon, pos: self.position_unchecked(horizon) });
        }
        Self { node: self.node, waypoints: wps, visible_until: horizon }
    }

    /// Waypoints from `from` onwards, starting with the interpolated position at `from`.
    pub fn continuation(&self, from: T) -> Vec<Waypoint<T>> {
        let mut out = vec![Waypoint { t: from, pos: self.position_unchecked(from) }];
        out.extend(self.waypoints.iter().copied().filter(|w| w.t > from));
        out
    }

    /// Speed of each segment, m/s.
    pub fn segment_speeds(&self) -> Vec<T> {
        self.waypoints.windows(2).map(|w| w[0].pos.distance(w[1].pos) / (w[1].t - w[0].t)).collect()
    }
}

/// A node's actual motion: its full plan plus white Gaussian jitter.
///
/// The jitter at a given instant is a pure function of the stream seed and
/// the time, so repeated queries for the same instant agree.
#[derive(Debug, Clone)]
pub struct TrueTrajectory {
    pub plan: MobilityPlan<f64>,
    pub jitter_sigma: f64,
    pub jitter_stream: RngStream,
    pub deviation_time: f64,
    /// Positions are clamped to `[0, w] x [0, h]` when set.
    pub area: Option<(f64, f64)>,
}

impl TrueTrajectory {
    pub fn true_position(&self, t: SimTime) -> Point2<f64> {
        let base = self.plan.position_unchecked(t.as_secs().max(0.0));
        if self.jitter_sigma == 0.0 {
            return base;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stable_mix(self.jitter_stream.stream_seed, t.as_micros() as u64));
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        let mut p = Point2::new(base.x + self.jitter_sigma * dx, base.y + self.jitter_sigma * dy);
        if let Some((w, h)) = self.area {
            p.x = p.x.clamp(0.0, w);
            p.y = p.y.clamp(0.0, h);
        }
        p
    }
}

pub fn true_position(traj: &TrueTrajectory, t: SimTime) -> Point2<f64> {
    traj.true_position(t)
}

/// Parameters for random group mobility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScenario {
    pub n_groups: usize,
    pub nodes_per_group: usize,
    pub area: (f64, f64),
    pub target_speed: f64,
    pub duration: f64,
    pub deviation_time: f64,
    pub radio_range: f64,
    pub jitter_sigma: f64,
    pub anp_threshold: f64,
    pub max_attempts: usize,
    /// Cadence at which connectivity is sampled, seconds.
    pub sample_interval: f64,
}

impl Default for GroupScenario {
    fn default() -> Self {
        Self {
            n_groups: 7,
            nodes_per_group: 3,
            area: (1500.0, 1500.0),
            target_speed: 20.0,
            duration: 600.0,
            deviation_time: 300.0,
            radio_range: 500.0,
            jitter_sigma: 10.0,
            anp_threshold: 0.01,
            max_attempts: 200,
            sample_interval: 1.0,
        }
    }
}

impl GroupScenario {
    pub fn n_nodes(&self) -> usize {
        self.n_groups * self.nodes_per_group
    }

    fn validate(&self) -> Result<(), MobilityError> {
        let mut bad = Vec::new();
        if self.n_groups == 0 {
            bad.push("n_groups");
        }
        if self.nodes_per_group == 0 {
            bad.push("nodes_per_group");
        }
        if !(self.area.0 > 0.0 && self.area.1 > 0.0) {
            bad.push("area");
        }
        if !(self.target_speed > 0.0) {
            bad.push("target_speed");
        }
        if !(self.duration > 0.0) {
            bad.push("duration");
        }
        if !(self.radio_range > 0.0) {
            bad.push("radio_range");
        }
        if !(self.sample_interval > 0.0) {
            bad.push("sample_interval");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(MobilityError::InvalidScenario(bad.join(", ")))
        }
    }
}

/// Output of [`generate_scenario`]. Plans are indexed by node id.
#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    /// Full-mission plans with `visible_until` set to the deviation time.
    pub plans: Vec<MobilityPlan<f64>>,
    pub group_of: Vec<usize>,
    pub trajectories: Vec<TrueTrajectory>,
    pub attempts: usize,
    pub anp: f64,
}

impl GeneratedScenario {
    /// What routing protocols may see.
    pub fn visible_plans(&self) -> Vec<MobilityPlan<f64>> {
        self.plans.iter().map(|p| p.truncated(p.visible_until)).collect()
    }

    /// The hidden remainder of each plan, from the deviation time onwards.
    pub fn hidden_plans(&self) -> Vec<Vec<Waypoint<f64>>> {
        self.plans.iter().map(|p| p.continuation(p.visible_until)).collect()
    }
}

/// Builds true trajectories for the given plans, one jitter sub-stream per node.
pub fn trajectories_for(
    plans: &[MobilityPlan<f64>],
    jitter_sigma: f64,
    jitter: RngStream,
    deviation_time: f64,
    area: Option<(f64, f64)>,
) -> Vec<TrueTrajectory> {
    plans
        .iter()
        .map(|p| TrueTrajectory {
            plan: p.clone(),
            jitter_sigma,
            jitter_stream: jitter.child(p.node as u64),
            deviation_time,
            area,
        })
        .collect()
}

/// ANP of the true trajectories sampled every `interval` seconds over `[0, duration]`.
pub fn trajectory_anp(
    trajectories: &[TrueTrajectory],
    channel: &ChannelParams,
    duration: f64,
    interval: f64,
) -> Result<f64, MobilityError> {
    let steps = (duration / interval).floor() as usize;
    let mut positions = Vec::with_capacity(trajectories.len());
    let mut sum = 0.0;
    for k in 0..=steps {
        let t = SimTime::from_secs(k as f64 * interval);
        positions.clear();
        positions.extend(trajectories.iter().map(|tr| tr.true_position(t)));
        sum += partition_fraction(&radio::neighbors(&positions, channel))?;
    }
    Ok(sum / (steps + 1) as f64)
}

fn partition_fraction(g: &AdjacencyGraph) -> Result<f64, MobilityError> {
    let n = g.len();
    if n < 2 {
        return Err(MobilityError::TooFewNodes(n));
    }
    Ok((g.components() - 1) as f64 / (n - 1) as f64)
}

/// Average network partitioning: mean over snapshots of `(components - 1) / (N - 1)`.
pub fn anp(snapshots: &[AdjacencyGraph]) -> Result<f64, MobilityError> {
    if snapshots.is_empty() {
        return Err(MobilityError::NoSnapshots);
    }
    let mut sum = 0.0;
    for g in snapshots {
        sum += partition_fraction(g)?;
    }
    Ok(sum / snapshots.len() as f64)
}

const CANDIDATES_PER_SEGMENT: usize = 400;
/// Length of the time slices over which group moves are committed.
const SLICE_S: f64 = 10.0;

/// Random group waypoints at constant `target_speed`, regenerated until the
/// jittered true trajectories meet the ANP threshold.
///
/// Each group travels toward a destination drawn uniformly in the area and
/// draws a new one on arrival. Time advances in fixed slices; a slice is kept
/// only if the group graph (range shrunk by four jitter sigmas) stays connected
/// throughout, otherwise some groups redraw their destinations and the slice
/// is retried.
pub fn generate_scenario(spec: &GroupScenario, rng: RngStream) -> Result<GeneratedScenario, MobilityError> {
    spec.validate()?;
    let mut wrng = rng.rng();
    let jitter = RngStream::new(rng.seed, "jitter").child(rng.stream_seed);
    let n = spec.n_nodes();
    let channel = ChannelParams::uniform(n, spec.radio_range);
    let group_of: Vec<usize> = (0..n).map(|i| i / spec.nodes_per_group).collect();

    for attempt in 1..=spec.max_attempts {
        let Some(group_plans) = group_waypoints(spec, &mut wrng) else {
            continue;
        };
        let plans: Vec<MobilityPlan<f64>> = (0..n)
            .map(|i| {
                MobilityPlan::new(i, group_plans[group_of[i]].clone())
                    .expect("generated waypoints are valid")
                    .with_visibility(spec.deviation_time)
            })
            .collect();
        let trajectories = trajectories_for(&plans, spec.jitter_sigma, jitter, spec.deviation_time, Some(spec.area));
        let anp =
            if n >= 2 { trajectory_anp(&trajectories, &channel, spec.duration, spec.sample_interval)? } else { 0.0 };
        if anp <= spec.anp_threshold {
            return Ok(GeneratedScenario { plans, group_of, trajectories, attempts: attempt, anp });
        }
    }
    Err(MobilityError::AnpNotMet { threshold: spec.anp_threshold, attempts: spec.max_attempts })
}

fn uniform_point(spec: &GroupScenario, rng: &mut ChaCha8Rng) -> Point2<f64> {
    Point2::new(rng.gen::<f64>() * spec.area.0, rng.gen::<f64>() * spec.area.1)
}

fn connected(points: &[Point2<f64>], range: f64) -> bool {
    let channel = ChannelParams::uniform(points.len(), range);
    radio::neighbors(points, &channel).components() <= 1
}

/// One group's motion state during generation.
#[derive(Clone, Copy)]
struct Mover {
    pos: Point2<f64>,
    dest: Point2<f64>,
}

/// Advances a mover by `dt` at `speed`, drawing new destinations on arrival.
/// Returns the turning points passed on the way as `(time offset, position)`.
fn advance(m: &mut Mover, dt: f64, speed: f64, spec: &GroupScenario, rng: &mut ChaCha8Rng) -> Vec<(f64, Point2<f64>)> {
    let mut turns = Vec::new();
    let mut elapsed = 0.0;
    loop {
        let left = dt - elapsed;
        let dist = m.pos.distance(m.dest);
        if dist > speed * left {
            m.pos = m.pos.lerp(m.dest, speed * left / dist);
            return turns;
        }
        elapsed += dist / speed;
        m.pos = m.dest;
        if elapsed < dt {
            turns.push((elapsed, m.pos));
        }
        m.dest = loop {
            let p = uniform_point(spec, rng);
            if p.distance(m.pos) >= 1.0 {
                break p;
            }
        };
        if elapsed >= dt {
            return turns;
        }
    }
}

fn group_waypoints(spec: &GroupScenario, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<Waypoint<f64>>>> {
    let g = spec.n_groups;
    let range = (spec.radio_range - 4.0 * spec.jitter_sigma).max(spec.radio_range * 0.5);

    let mut starts: Vec<Point2<f64>> = Vec::with_capacity(g);
    for _ in 0..g {
        let p = (0..CANDIDATES_PER_SEGMENT)
            .map(|_| uniform_point(spec, rng))
            .find(|p| starts.is_empty() || starts.iter().any(|s| s.distance(*p) <= range))?;
        starts.push(p);
    }
    let mut movers: Vec<Mover> = starts.iter().map(|&pos| Mover { pos, dest: pos }).collect();
    for m in &mut movers {
        m.dest = uniform_point(spec, rng);
    }
    let mut plans: Vec<Vec<Waypoint<f64>>> = starts.iter().map(|&pos| vec![Waypoint { t: 0.0, pos }]).collect();
    let speed = spec.target_speed;
    let mut t0 = 0.0;
    while t0 < spec.duration {
        let dt = SLICE_S;
        let steps = (dt / spec.sample_interval).ceil().max(1.0) as usize;
        let mut committed = None;
        for attempt in 0..CANDIDATES_PER_SEGMENT {
            let mut trial = movers.clone();
            if attempt > 0 {
                let forced = rng.gen_range(0..g);
                for (k, m) in trial.iter_mut().enumerate() {
                    if k == forced || rng.gen::<bool>() {
                        m.dest = uniform_point(spec, rng);
                    }
                }
            }
            let start = trial.clone();
            let mut turns = Vec::with_capacity(g);
            for m in trial.iter_mut() {
                turns.push(advance(m, dt, speed, spec, rng));
            }
            // Position of group k at offset `s` into the slice.
            let at = |k: usize, s: f64| -> Point2<f64> {
                let mut prev = (0.0, start[k].pos);
                for &(ts, p) in turns[k].iter().chain(std::iter::once(&(dt, trial[k].pos))) {
                    if s <= ts {
                        let frac = if ts > prev.0 { (s - prev.0) / (ts - prev.0) } else { 1.0 };
                        return prev.1.lerp(p, frac);
                    }
                    prev = (ts, p);
                }
                trial[k].pos
            };
            let ok = (1..=steps).all(|i| {
                let s = (i as f64 * spec.sample_interval).min(dt);
                let pts: Vec<Point2<f64>> = (0..g).map(|k| at(k, s)).collect();
                connected(&pts, range)
            });
            if ok {
                committed = Some((trial, turns));
                break;
            }
        }
        let (next, turns) = committed?;
        for (k, plan) in plans.iter_mut().enumerate() {
            for &(ts, p) in &turns[k] {
                plan.push(Waypoint { t: t0 + ts, pos: p });
            }
            plan.push(Waypoint { t: t0 + dt, pos: next[k].pos });
        }
        movers = next;
        t0 += dt;
    }
    Some(plans)
}
