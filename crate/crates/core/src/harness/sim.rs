//! One simulated mission: mobility, channel, PLI oracle, protocol agents and
//! traffic, all driven by a single event queue.

use super::config::{ConfigError, FlowEndpoints, Protocol, Scenario, TrafficKind};
use super::metrics::{FlowMetrics, RunMetrics};
use super::traffic::{cbr_schedule, choose_flows};
use crate::engine::{EngineError, EventHandle, RngStream, Scheduler, SimTime};
use crate::estimator::{EstimateCase, EstimatorParams};
use crate::geometry::Point2;
use crate::mobility::{
    generate_scenario, trajectories_for, trajectory_anp, MobilityError, MobilityPlan, TrueTrajectory,
};
use crate::pli::{PliBroadcast, PliOracle};
use crate::protocol::baseline::BaselineAgent;
use crate::protocol::tensr::TensrAgent;
use crate::protocol::{forward, DataPacket, ForwardDecision, HelloMessage, InfoMessage, LinkHello, TcMessage};
use crate::radio::{ChannelParams, Destination, Frame, FrameKind, Ledger, NodeId, Radio};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::rc::Rc;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("mobility: {0}")]
    Mobility(#[from] MobilityError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
}

#[derive(Debug)]
enum Message {
    Hello(HelloMessage),
    Info(InfoMessage),
    LinkHello(LinkHello),
    Tc(TcMessage),
    Data(DataPacket),
}

#[derive(Debug)]
enum Action {
    Hello(NodeId),
    InfoCheck(NodeId),
    IntervalClose,
    NeighborTimeout { node: NodeId, neighbor: NodeId },
    Tc(NodeId),
    PliEmit(NodeId),
    PliArrive(Rc<PliBroadcast>),
    Cbr { flow: usize },
    Receive { to: NodeId, from: NodeId, msg: Rc<Message> },
}

enum Agents {
    Tensr(Vec<TensrAgent>),
    Baseline(Vec<BaselineAgent>),
}

/// A mission in progress. Most callers want [`run_scenario`].
pub struct Simulation {
    scenario: Scenario,
    n: usize,
    sched: Scheduler<Action>,
    radio: Radio,
    trajectories: Vec<TrueTrajectory>,
    visible_plans: Vec<MobilityPlan<f64>>,
    estimator: EstimatorParams,
    agents: Agents,
    oracles: Vec<PliOracle>,
    jitter_rngs: Vec<ChaCha8Rng>,
    timeouts: Vec<Option<EventHandle>>,
    flows: Vec<FlowEndpoints>,
    next_packet_id: u64,
    metrics: RunMetrics,
    position_cache: (SimTime, Vec<Point2<f64>>),
    anp: f64,
    pub group_of: Vec<usize>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, protocol: Protocol) -> Result<Self, SimError> {
        scenario.validate()?;
        let seed = scenario.seed;
        let area = Some((scenario.area_m[0], scenario.area_m[1]));
        let (plans, group_of, trajectories, anp) = if scenario.plans.is_empty() {
            let g = generate_scenario(&scenario.group_scenario(), RngStream::new(seed, "mobility"))?;
            (g.plans, g.group_of, g.trajectories, g.anp)
        } else {
            let mut specs = scenario.plans.clone();
            specs.sort_by_key(|p| p.node);
            let plans: Vec<MobilityPlan<f64>> = specs
                .iter()
                .map(|p| p.to_plan().map(|pl| pl.with_visibility(scenario.deviation_time_s)))
                .collect::<Result<_, _>>()?;
            let group_of = specs.iter().map(|p| p.group).collect();
            let trajectories = trajectories_for(
                &plans,
                scenario.sigma_n_m,
                RngStream::new(seed, "jitter"),
                scenario.deviation_time_s,
                area,
            );
            let channel = ChannelParams::uniform(plans.len(), scenario.radio_range_m);
            let anp = if plans.len() >= 2 {
                trajectory_anp(&trajectories, &channel, scenario.duration_s, scenario.anp_sample_interval_s)?
            } else {
                0.0
            };
            (plans, group_of, trajectories, anp)
        };
        let n = plans.len();
        let visible_plans = plans.iter().map(|p| p.truncated(p.visible_until)).collect();

        let mut channel = ChannelParams::uniform(n, scenario.radio_range_m);
        channel.hop_latency = SimTime::from_secs(scenario.hop_latency_s);
        channel.loss_probability = scenario.loss_probability;
        let radio = Radio::new(channel, RngStream::new(seed, "radio"));

        let agents = match protocol {
            Protocol::Tensr => Agents::Tensr((0..n).map(|i| TensrAgent::new(i, n, scenario.tensr.clone())).collect()),
            Protocol::Baseline => {
                Agents::Baseline((0..n).map(|i| BaselineAgent::new(i, n, scenario.baseline.clone())).collect())
            }
        };
        let pli_stream = RngStream::new(seed, "pli");
        let oracles = match protocol {
            Protocol::Tensr => (0..n).map(|i| PliOracle::new(i, scenario.pli.clone(), pli_stream)).collect(),
            Protocol::Baseline => Vec::new(),
        };
        let hello_stream = RngStream::new(seed, "hello");
        let jitter_rngs = (0..n).map(|i| hello_stream.child(i as u64).rng()).collect();

        let flows = choose_flows(&scenario.traffic, &group_of, RngStream::new(seed, "traffic"));
        let flow_metrics = flows
            .iter()
            .enumerate()
            .map(|(k, f)| FlowMetrics { flow: k, src: f.src, dst: f.dst, ..FlowMetrics::default() })
            .collect();

        let mut sim = Self {
            scenario: scenario.clone(),
            n,
            sched: Scheduler::new(),
            radio,
            trajectories,
            visible_plans,
            estimator: scenario.estimator_params(),
            agents,
            oracles,
            jitter_rngs,
            timeouts: vec![None; n * n],
            flows,
            next_packet_id: 0,
            metrics: RunMetrics::new(flow_metrics),
            position_cache: (SimTime::from_micros(-1), Vec::new()),
            anp,
            group_of,
        };
        sim.schedule_initial()?;
        Ok(sim)
    }

    fn schedule_initial(&mut self) -> Result<(), SimError> {
        let s = &self.scenario;
        let (hello, second) = match self.agents {
            Agents::Tensr(_) => (s.tensr.hello_interval, s.tensr.info_interval),
            Agents::Baseline(_) => (s.baseline.hello_interval, s.baseline.tc_interval),
        };
        let measurement = s.tensr.measurement_interval;
        for i in 0..self.n {
            let rng = &mut self.jitter_rngs[i];
            let first_hello = SimTime::from_secs(rng.gen::<f64>() * hello);
            let first_second = SimTime::from_secs(rng.gen::<f64>() * second);
            self.sched.schedule(first_hello, Action::Hello(i))?;
            match self.agents {
                Agents::Tensr(_) => {
                    self.sched.schedule(first_second, Action::InfoCheck(i))?;
                    let gap = self.oracles[i].next_gap();
                    self.sched.schedule(gap, Action::PliEmit(i))?;
                }
                Agents::Baseline(_) => {
                    self.sched.schedule(first_second, Action::Tc(i))?;
                }
            }
        }
        if matches!(self.agents, Agents::Tensr(_)) {
            self.sched.schedule(SimTime::from_secs(measurement), Action::IntervalClose)?;
        }
        let duration = self.scenario.duration_s;
        let rate = self.scenario.traffic.rate_pps;
        for flow in 0..self.flows.len() {
            for t in cbr_schedule(rate, duration) {
                self.sched.schedule(t, Action::Cbr { flow })?;
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn ledger(&self) -> Ledger {
        self.radio.ledger
    }

    /// Events dispatched so far.
    pub fn events_fired(&self) -> u64 {
        self.sched.fired()
    }

    pub fn flows(&self) -> &[FlowEndpoints] {
        &self.flows
    }

    pub fn tensr_agent(&self, i: NodeId) -> Option<&TensrAgent> {
        match &self.agents {
            Agents::Tensr(a) => a.get(i),
            Agents::Baseline(_) => None,
        }
    }

    pub fn baseline_agent(&self, i: NodeId) -> Option<&BaselineAgent> {
        match &self.agents {
            Agents::Baseline(a) => a.get(i),
            Agents::Tensr(_) => None,
        }
    }

    pub fn true_positions(&mut self, t: SimTime) -> &[Point2<f64>] {
        if self.position_cache.0 != t {
            let trajectories = &self.trajectories;
            self.position_cache.1.clear();
            self.position_cache.1.extend(trajectories.iter().map(|tr| tr.true_position(t)));
            self.position_cache.0 = t;
        }
        &self.position_cache.1
    }

    /// Advances the mission to `until`, capped at the scenario duration.
    pub fn run_until(&mut self, until: SimTime) {
        let end = until.min(SimTime::from_secs(self.scenario.duration_s));
        while let Some((now, action)) = self.sched.pop_until(end) {
            self.dispatch(now, action);
        }
    }

    /// Runs to the end of the mission and returns the metrics.
    pub fn finish(mut self) -> RunMetrics {
        self.run_until(SimTime::from_secs(self.scenario.duration_s));
        if let Agents::Tensr(agents) = &self.agents {
            for a in agents {
                for case in [
                    EstimateCase::OwnNeighborTable,
                    EstimateCase::RecentAdjacency,
                    EstimateCase::Location,
                    EstimateCase::SocialTie,
                    EstimateCase::Default,
                ] {
                    self.metrics.record_case(case, a.case_count(case));
                }
            }
        }
        self.metrics.finish(&self.radio.ledger, self.anp);
        self.metrics
    }

    fn jittered(&mut self, node: NodeId, interval: f64) -> SimTime {
        let f = 0.9 + 0.2 * self.jitter_rngs[node].gen::<f64>();
        SimTime::from_secs(interval * f)
    }

    fn schedule_at(&mut self, t: SimTime, action: Action) -> Option<EventHandle> {
        // Events past the horizon are harmless; the run simply stops first.
        self.sched.schedule(t, action).ok()
    }

    fn broadcast_control(&mut self, now: SimTime, src: NodeId, bits: u64, msg: Message) {
        let frame =
            Frame { src, dst: Destination::Broadcast, payload_bits: bits, kind: FrameKind::Control, send_time: now };
        self.true_positions(now);
        let deliveries = self.radio.transmit(&frame, &self.position_cache.1);
        if deliveries.is_empty() {
            return;
        }
        let msg = Rc::new(msg);
        for d in deliveries {
            self.schedule_at(d.at, Action::Receive { to: d.to, from: src, msg: Rc::clone(&msg) });
        }
    }

    fn dispatch(&mut self, now: SimTime, action: Action) {
        match action {
            Action::Hello(i) => self.on_hello_timer(now, i),
            Action::InfoCheck(i) => {
                let interval = self.scenario.tensr.info_interval;
                if let Agents::Tensr(agents) = &mut self.agents {
                    if let Some(info) = agents[i].emit_info(now) {
                        let bits = info.bits();
                        self.broadcast_control(now, i, bits, Message::Info(info));
                    }
                }
                self.schedule_at(now + SimTime::from_secs(interval), Action::InfoCheck(i));
            }
            Action::IntervalClose => {
                if let Agents::Tensr(agents) = &mut self.agents {
                    for a in agents.iter_mut() {
                        a.close_interval(now);
                    }
                }
                let step = SimTime::from_secs(self.scenario.tensr.measurement_interval);
                self.schedule_at(now + step, Action::IntervalClose);
            }
            Action::NeighborTimeout { node, neighbor } => {
                self.timeouts[node * self.n + neighbor] = None;
                if let Agents::Tensr(agents) = &mut self.agents {
                    agents[node].neighbor_timeout(neighbor, now);
                }
            }
            Action::Tc(i) => {
                let interval = self.scenario.baseline.tc_interval;
                if let Agents::Baseline(agents) = &mut self.agents {
                    if let Some(tc) = agents[i].tc(now) {
                        let bits = tc.bits();
                        self.broadcast_control(now, i, bits, Message::Tc(tc));
                    }
                }
                self.schedule_at(now + SimTime::from_secs(interval), Action::Tc(i));
            }
            Action::PliEmit(i) => {
                let pos = self.true_positions(now)[i];
                let n = self.n;
                let oracle = &mut self.oracles[i];
                let b = oracle.emit(now, pos, n);
                let gap = oracle.next_gap();
                let at = b.deliver_at;
                if !b.receivers.is_empty() {
                    self.schedule_at(at, Action::PliArrive(Rc::new(b)));
                }
                self.schedule_at(now + gap, Action::PliEmit(i));
            }
            Action::PliArrive(b) => {
                if let Agents::Tensr(agents) = &mut self.agents {
                    for &r in &b.receivers {
                        agents[r].on_pli(b.record);
                    }
                }
            }
            Action::Cbr { flow } => {
                let f = self.flows[flow];
                let packet = DataPacket {
                    id: self.next_packet_id,
                    flow,
                    src: f.src,
                    dst: f.dst,
                    send_time: now,
                    hops: 0,
                    is_reply: false,
                    bits: self.scenario.traffic.packet_bits,
                };
                self.next_packet_id += 1;
                self.metrics.record_sent(flow, false);
                self.route_packet(now, f.src, packet);
            }
            Action::Receive { to, from, msg } => self.on_receive(now, to, from, &msg),
        }
    }

    fn on_hello_timer(&mut self, now: SimTime, i: NodeId) {
        let (bits, msg, interval) = match &mut self.agents {
            Agents::Tensr(agents) => {
                let h = agents[i].hello(now);
                (h.bits(), Message::Hello(h), self.scenario.tensr.hello_interval)
            }
            Agents::Baseline(agents) => {
                let h = agents[i].hello(now);
                (h.bits(), Message::LinkHello(h), self.scenario.baseline.hello_interval)
            }
        };
        self.broadcast_control(now, i, bits, msg);
        let gap = self.jittered(i, interval);
        self.schedule_at(now + gap, Action::Hello(i));
    }

    fn on_receive(&mut self, now: SimTime, to: NodeId, from: NodeId, msg: &Message) {
        match msg {
            Message::Hello(h) => {
                let distance = {
                    let p = self.true_positions(now);
                    p[to].distance(p[from])
                };
                let timeout = SimTime::from_secs(self.scenario.tensr.neighbor_timeout());
                if let Agents::Tensr(agents) = &mut self.agents {
                    agents[to].on_hello(h, distance, now);
                }
                let slot = to * self.n + from;
                if let Some(old) = self.timeouts[slot].take() {
                    self.sched.cancel(old);
                }
                self.timeouts[slot] =
                    self.schedule_at(now + timeout, Action::NeighborTimeout { node: to, neighbor: from });
            }
            Message::Info(info) => {
                if let Agents::Tensr(agents) = &mut self.agents {
                    agents[to].on_info(info, now);
                }
            }
            Message::LinkHello(h) => {
                if let Agents::Baseline(agents) = &mut self.agents {
                    agents[to].on_hello(h, now);
                }
            }
            Message::Tc(tc) => {
                let relay = match &mut self.agents {
                    Agents::Baseline(agents) => agents[to].on_tc(tc, now),
                    Agents::Tensr(_) => false,
                };
                if relay {
                    self.broadcast_control(now, to, tc.bits(), Message::Tc(tc.clone()));
                }
            }
            Message::Data(p) => self.route_packet(now, to, *p),
        }
    }

    fn next_hop(&mut self, now: SimTime, me: NodeId, dst: NodeId) -> Option<NodeId> {
        let own = self.true_positions(now)[me];
        match &mut self.agents {
            Agents::Tensr(agents) => {
                agents[me].routing_table(now, own, &self.visible_plans, &self.estimator).next_hop(dst)
            }
            Agents::Baseline(agents) => agents[me].next_hop(dst, now),
        }
    }

    fn route_packet(&mut self, now: SimTime, me: NodeId, mut packet: DataPacket) {
        let hop_limit = match self.agents {
            Agents::Tensr(_) => self.scenario.tensr.hop_limit,
            Agents::Baseline(_) => self.scenario.baseline.hop_limit,
        };
        let next = if packet.dst == me { None } else { self.next_hop(now, me, packet.dst) };
        match forward(me, next, &packet, now, hop_limit) {
            ForwardDecision::Delivered { delay } => {
                self.metrics.record_delivered(packet.flow, packet.is_reply, delay);
                if self.scenario.traffic.kind == TrafficKind::Echo && !packet.is_reply {
                    let reply = DataPacket {
                        id: self.next_packet_id,
                        src: me,
                        dst: packet.src,
                        send_time: now,
                        hops: 0,
                        is_reply: true,
                        ..packet
                    };
                    self.next_packet_id += 1;
                    self.metrics.record_sent(packet.flow, true);
                    self.route_packet(now, me, reply);
                }
            }
            ForwardDecision::Send { next_hop } => {
                packet.hops += 1;
                let frame = Frame {
                    src: me,
                    dst: Destination::Unicast(next_hop),
                    payload_bits: packet.bits,
                    kind: FrameKind::Data,
                    send_time: now,
                };
                self.true_positions(now);
                let deliveries = self.radio.transmit(&frame, &self.position_cache.1);
                match deliveries.first() {
                    Some(d) => {
                        let action = Action::Receive { to: d.to, from: me, msg: Rc::new(Message::Data(packet)) };
                        self.schedule_at(d.at, action);
                    }
                    None => self.metrics.drops_link += 1,
                }
            }
            ForwardDecision::DropUnreachable => self.metrics.drops_unreachable += 1,
            ForwardDecision::DropHopLimit => self.metrics.drops_hop_limit += 1,
        }
    }
}

/// Simulates the full mission under `protocol`. Deterministic per seed.
pub fn run_scenario(scenario: &Scenario, protocol: Protocol) -> Result<RunMetrics, SimError> {
    Ok(Simulation::new(scenario, protocol)?.finish())
}
