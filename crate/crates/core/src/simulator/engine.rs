use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use super::{
    DecisionRecord, ReplicaChange, RequestRecord, ScalingEvent, SimConfig, SimulationLog, NS_PER_S,
};
use crate::autoscaler::{ClusterObservation, ScalingStrategy};
use crate::error::{Error, Result};
use crate::trace::WorkloadTrace;

const NS_PER_MIN: u64 = 60 * NS_PER_S;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PodState {
    Starting,
    Ready,
    Terminating,
    Gone,
}

#[derive(Debug, Clone, Copy)]
struct Pod {
    state: PodState,
    ready_at: u64,
    busy: bool,
}

/// Evenly spaced arrivals: request `i` of `n` in minute `m` lands at
/// `m*60s + (i + 0.5) * 60s / n`.
struct Arrivals<'a> {
    counts: &'a [u64],
    minute: usize,
    i: u64,
}

impl Iterator for Arrivals<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        while self.minute < self.counts.len() {
            let n = self.counts[self.minute];
            if self.i < n {
                let offset = ((2 * self.i + 1) as u128 * NS_PER_MIN as u128 / (2 * n) as u128) as u64;
                self.i += 1;
                return Some(self.minute as u64 * NS_PER_MIN + offset);
            }
            self.minute += 1;
            self.i = 0;
        }
        None
    }
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    occupancy_ns: u64,
    service_ns: u64,
    slo_ns: u64,
    max_wait_ns: u64,
    startup_ns: u64,
    end_ns: u64,

    pods: Vec<Pod>,
    idle: BTreeSet<usize>,
    busy: BinaryHeap<Reverse<(u64, usize)>>,
    starting: VecDeque<usize>,
    n_ready: u32,
    n_starting: u32,
    n_terminating: u32,
    queue: VecDeque<u64>,

    cursor_ns: u64,
    minute_active_ns: Vec<u128>,
    minute_busy_ns: Vec<u64>,
    second_busy_ns: Vec<u64>,
    second_arrivals: Vec<u64>,
    ready_pod_ns: u128,

    requests: Vec<RequestRecord>,
    changes: Vec<ReplicaChange>,
    events: Vec<ScalingEvent>,
    decisions: Vec<DecisionRecord>,
    pod_starts: u64,
    completed: u64,
    dropped: u64,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig, minutes: usize) -> Self {
        let seconds = minutes * 60;
        let mut e = Self {
            cfg,
            occupancy_ns: SimConfig::ns(1.0 / cfg.capacity_rps_per_pod).max(1),
            service_ns: SimConfig::ns(cfg.service_time_ms / 1000.0),
            slo_ns: SimConfig::ns(cfg.slo_ms / 1000.0),
            max_wait_ns: SimConfig::ns(cfg.max_queue_wait_s),
            startup_ns: SimConfig::ns(cfg.pod_startup_s),
            end_ns: minutes as u64 * NS_PER_MIN,
            pods: Vec::new(),
            idle: BTreeSet::new(),
            busy: BinaryHeap::new(),
            starting: VecDeque::new(),
            n_ready: 0,
            n_starting: 0,
            n_terminating: 0,
            queue: VecDeque::new(),
            cursor_ns: 0,
            minute_active_ns: vec![0; minutes],
            minute_busy_ns: vec![0; minutes],
            second_busy_ns: vec![0; seconds],
            second_arrivals: vec![0; seconds],
            ready_pod_ns: 0,
            requests: Vec::new(),
            changes: Vec::new(),
            events: Vec::new(),
            decisions: Vec::new(),
            pod_starts: 0,
            completed: 0,
            dropped: 0,
        };
        for id in 0..cfg.init_replicas as usize {
            e.pods.push(Pod {
                state: PodState::Ready,
                ready_at: 0,
                busy: false,
            });
            e.idle.insert(id);
        }
        e.n_ready = cfg.init_replicas;
        e
    }

    /// Integrates pod counts up to `t`.
    fn advance(&mut self, t: u64) {
        let t = t.min(self.end_ns);
        if t <= self.cursor_ns {
            return;
        }
        let active = u128::from(self.n_ready + self.n_terminating);
        self.ready_pod_ns += u128::from(self.n_ready) * u128::from(t - self.cursor_ns);
        let mut from = self.cursor_ns;
        while from < t {
            let m = (from / NS_PER_MIN) as usize;
            let to = t.min((m as u64 + 1) * NS_PER_MIN);
            self.minute_active_ns[m] += active * u128::from(to - from);
            from = to;
        }
        self.cursor_ns = t;
    }

    fn add_busy(&mut self, from: u64, to: u64) {
        let to = to.min(self.end_ns);
        let mut f = from;
        while f < to {
            let s = (f / NS_PER_S) as usize;
            let upto = to.min((s as u64 + 1) * NS_PER_S);
            self.second_busy_ns[s] += upto - f;
            self.minute_busy_ns[s / 60] += upto - f;
            f = upto;
        }
    }

    fn log_change(&mut self, t: u64) {
        let c = ReplicaChange {
            t_ns: t,
            ready: self.n_ready,
            starting: self.n_starting,
        };
        match self.changes.last_mut() {
            Some(last) if last.t_ns == t => *last = c,
            _ => self.changes.push(c),
        }
    }

    fn start_service(&mut self, pod: usize, arrival: u64, t: u64) {
        let p = &mut self.pods[pod];
        p.busy = true;
        let cold = p.ready_at > arrival;
        self.busy.push(Reverse((t + self.occupancy_ns, pod)));
        self.requests
            .push(RequestRecord::served(arrival, t, t + self.service_ns, self.slo_ns, cold));
        self.completed += 1;
        self.add_busy(t, t + self.occupancy_ns);
    }

    /// A ready pod has no work: hand it the oldest live request or park it.
    fn pod_available(&mut self, pod: usize, t: u64) {
        while let Some(arrival) = self.queue.pop_front() {
            if t - arrival > self.max_wait_ns {
                self.requests.push(RequestRecord::dropped(arrival, t));
                self.dropped += 1;
                continue;
            }
            self.start_service(pod, arrival, t);
            return;
        }
        self.idle.insert(pod);
    }

    fn on_arrival(&mut self, t: u64) {
        self.second_arrivals[(t / NS_PER_S) as usize] += 1;
        if self.queue.is_empty() {
            if let Some(pod) = self.idle.pop_first() {
                self.start_service(pod, t, t);
                return;
            }
        }
        self.queue.push_back(t);
    }

    fn on_completion(&mut self, pod: usize, t: u64) {
        match self.pods[pod].state {
            PodState::Terminating => {
                self.pods[pod].state = PodState::Gone;
                self.pods[pod].busy = false;
                self.n_terminating -= 1;
            }
            PodState::Ready => {
                self.pods[pod].busy = false;
                self.pod_available(pod, t);
            }
            PodState::Starting | PodState::Gone => unreachable!("only ready pods serve"),
        }
    }

    fn on_ready(&mut self, t: u64) {
        let pod = self.starting.pop_front().expect("ready event without a starting pod");
        self.pods[pod].state = PodState::Ready;
        self.n_starting -= 1;
        self.n_ready += 1;
        self.log_change(t);
        self.pod_available(pod, t);
    }

    fn window_sum(buckets: &[u64], t: u64, window_s: u64) -> u64 {
        let end = ((t / NS_PER_S) as usize).min(buckets.len());
        let start = end.saturating_sub(window_s as usize);
        buckets[start..end].iter().sum()
    }

    fn on_tick(&mut self, t: u64, strategy: &mut dyn ScalingStrategy, counts: &[f64]) {
        let window_s = self.cfg.metric_window_s.round().max(1.0) as u64;
        let busy_ns = Self::window_sum(&self.second_busy_ns, t, window_s);
        let arrivals = Self::window_sum(&self.second_arrivals, t, window_s);
        let utilization = if self.n_ready > 0 {
            busy_ns as f64 / (window_s as f64 * NS_PER_S as f64 * f64::from(self.n_ready))
        } else {
            0.0
        };
        let completed_minutes = ((t / NS_PER_MIN) as usize).min(counts.len());
        let obs = ClusterObservation {
            timestamp_s: t as f64 / NS_PER_S as f64,
            ready_replicas: self.n_ready,
            starting_replicas: self.n_starting,
            avg_cpu_utilization: utilization,
            minute_counts: &counts[..completed_minutes],
            recent_rps: arrivals as f64 / window_s as f64,
            queue_length: self.queue.len(),
            capacity_rps_per_pod: self.cfg.capacity_rps_per_pod,
        };
        let decision = strategy.decide(&obs);
        let current = self.n_ready + self.n_starting;
        let desired = self.cfg.bounds().clamp(decision.desired_replicas);
        self.decisions.push(DecisionRecord {
            t_s: obs.timestamp_s,
            ready: self.n_ready,
            starting: self.n_starting,
            utilization,
            recommended: decision.recommended,
            desired,
            cooldown_s: decision.cooldown_s,
            reason: decision.reason,
            archetype: decision.archetype,
            confidence: decision.confidence,
        });
        if desired == current {
            return;
        }
        if desired > current {
            for _ in current..desired {
                let id = self.pods.len();
                self.pods.push(Pod {
                    state: PodState::Starting,
                    ready_at: t + self.startup_ns,
                    busy: false,
                });
                self.starting.push_back(id);
                self.n_starting += 1;
                self.pod_starts += 1;
            }
        } else {
            self.scale_down(current - desired);
        }
        self.events.push(ScalingEvent {
            t_s: obs.timestamp_s,
            from: current,
            to: desired,
            reason: decision.reason,
        });
        self.log_change(t);
    }

    /// Removes starting pods first, then idle pods, then lets busy pods
    /// finish their request before leaving.
    fn scale_down(&mut self, mut k: u32) {
        while k > 0 {
            let Some(id) = self.starting.pop_back() else { break };
            self.pods[id].state = PodState::Gone;
            self.n_starting -= 1;
            k -= 1;
        }
        while k > 0 {
            let Some(id) = self.idle.pop_last() else { break };
            self.pods[id].state = PodState::Gone;
            self.n_ready -= 1;
            k -= 1;
        }
        for id in (0..self.pods.len()).rev() {
            if k == 0 {
                break;
            }
            let p = &mut self.pods[id];
            if p.state == PodState::Ready && p.busy {
                p.state = PodState::Terminating;
                self.n_ready -= 1;
                self.n_terminating += 1;
                k -= 1;
            }
        }
    }
}

/// Replays `trace` against `strategy`.
pub fn run_simulation(
    trace: &WorkloadTrace,
    strategy: &mut dyn ScalingStrategy,
    config: &SimConfig,
) -> Result<SimulationLog> {
    config.validate()?;
    if trace.counts.is_empty() {
        return Err(Error::Simulation("trace is empty".into()));
    }
    let interval_s = config.decision_interval_s.unwrap_or_else(|| strategy.decision_interval_s());
    if !(interval_s > 0.0 && interval_s.is_finite()) {
        return Err(Error::validation("decision interval must be positive"));
    }
    let interval_ns = SimConfig::ns(interval_s).max(1);
    let counts_f64 = trace.as_f64();
    let mut eng = Engine::new(config, trace.counts.len());
    let mut arrivals = Arrivals {
        counts: &trace.counts,
        minute: 0,
        i: 0,
    }
    .peekable();
    let mut next_tick = interval_ns;
    let end = eng.end_ns;

    loop {
        let t_free = eng.busy.peek().map(|r| r.0 .0);
        let t_ready = eng.starting.front().map(|&id| eng.pods[id].ready_at);
        let t_arrival = arrivals.peek().copied();
        let t_tick = (next_tick < end).then_some(next_tick);

        // ties: pods freeing up, then pods becoming ready, then arrivals,
        // then the controller
        let candidates = [t_free, t_ready, t_arrival, t_tick];
        let Some((kind, t)) = candidates
            .iter()
            .enumerate()
            .filter_map(|(k, t)| t.map(|t| (k, t)))
            .min_by_key(|&(k, t)| (t, k))
        else {
            break;
        };
        if t >= end {
            break;
        }
        eng.advance(t);
        match kind {
            0 => {
                let Reverse((_, pod)) = eng.busy.pop().expect("peeked");
                eng.on_completion(pod, t);
            }
            1 => eng.on_ready(t),
            2 => {
                arrivals.next();
                eng.on_arrival(t);
            }
            _ => {
                eng.on_tick(t, strategy, &counts_f64);
                next_tick += interval_ns;
            }
        }
    }
    eng.advance(end);

    let mut in_flight = 0;
    while let Some(arrival) = eng.queue.pop_front() {
        if end - arrival > eng.max_wait_ns {
            eng.requests.push(RequestRecord::dropped(arrival, end));
            eng.dropped += 1;
        } else {
            in_flight += 1;
        }
    }

    let minute_utilization = eng
        .minute_busy_ns
        .iter()
        .zip(&eng.minute_active_ns)
        .map(|(&b, &a)| if a == 0 { 0.0 } else { b as f64 / a as f64 })
        .collect();
    let arrivals_total = trace.total();
    Ok(SimulationLog {
        strategy: strategy.name().to_string(),
        config: *config,
        duration_s: end / NS_PER_S,
        minute_arrivals: trace.counts.clone(),
        requests: eng.requests,
        arrivals: arrivals_total,
        completed: eng.completed,
        dropped: eng.dropped,
        in_flight,
        replica_changes: eng.changes,
        minute_utilization,
        scaling_events: eng.events,
        decisions: eng.decisions,
        pod_starts: eng.pod_starts,
        ready_pod_seconds: eng.ready_pod_ns as f64 / NS_PER_S as f64,
    })
}
