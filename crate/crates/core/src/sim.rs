//! Network-level dynamics: in-block CA updates, signal gating, random
//! turning, conflict resolution and spillback blocking.
//!
//! A step is a two-phase update. First, every stop-line vehicle on a
//! green approach samples its turning movement and files an entry intent
//! against the first cell of the target block; intents against an
//! occupied entry cell are dropped (the driver re-samples next step) and
//! ties for the same entry cell are broken uniformly at random. Second,
//! every block advances one rule 184 update with its gates set by the
//! winning intents. Vehicle count is conserved exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{rule184_step_into, Boundary, Lane};
use crate::network::{Axis, Heading, Network, HEADINGS};
use crate::policy::{min_green, Observation, Policy};
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;

/// Signal phase of one intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    NsGreen,
    EwGreen,
}

impl Phase {
    pub fn green_axis(self) -> Axis {
        match self {
            Phase::NsGreen => Axis::NorthSouth,
            Phase::EwGreen => Axis::EastWest,
        }
    }
}

/// Complete dynamic state of a network.
#[derive(Debug, Clone)]
pub struct NetworkState {
    lanes: Vec<Lane>,
    scratch: Vec<Lane>,
    phases: Vec<Phase>,
    time_in_phase: Vec<u32>,
    node_rngs: Vec<ChaCha8Rng>,
}

/// What moved during one step.
#[derive(Debug, Clone)]
pub struct StepMetrics {
    /// Vehicles that advanced one cell, intersection crossings included.
    pub moved: usize,
    /// Crossings per intersection (vehicles that traversed it this step).
    pub crossings: Vec<u8>,
}

impl StepMetrics {
    pub fn total_crossings(&self) -> usize {
        self.crossings.iter().map(|&c| c as usize).sum()
    }
}

impl NetworkState {
    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn time_in_phase(&self) -> &[u32] {
        &self.time_in_phase
    }

    pub fn vehicle_count(&self) -> usize {
        self.lanes.iter().map(Lane::vehicle_count).sum()
    }

    /// Realized network density in vehicles per cell.
    pub fn density<S: Scalar>(&self, net: &Network) -> S {
        S::from_count(self.vehicle_count() as u64) / S::from_count(net.total_cells() as u64)
    }

    /// Force one intersection's phase, resetting its phase clock.
    pub fn set_phase(&mut self, node: usize, phase: Phase) {
        if self.phases[node] != phase {
            self.time_in_phase[node] = 0;
        }
        self.phases[node] = phase;
    }

    /// One line of 0/1 per block, for debugging golden tests.
    pub fn dump(&self) -> String {
        let mut s = String::with_capacity(self.lanes.iter().map(|l| l.len() + 1).sum());
        for lane in &self.lanes {
            for &c in lane.cells() {
                s.push(if c == 1 { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }
}

/// Initialize occupancy as an i.i.d. Bernoulli(k) draw over all cells.
/// Phases start NS-green with a zeroed phase clock.
pub fn init_bernoulli(net: &Network, k: f64, seed: u64) -> Result<NetworkState> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::invalid("k", format!("density {k} outside [0, 1]")));
    }
    let mut rng = stream_rng(seed, Stream::Init);
    let mut lanes = Vec::with_capacity(net.n_blocks());
    for block in net.blocks() {
        let mut lane = Lane::empty(block.len);
        for i in 0..block.len {
            if rng.random::<f64>() < k {
                lane.set(i, true);
            }
        }
        lanes.push(lane);
    }
    let n = net.n_intersections();
    Ok(NetworkState {
        scratch: lanes.clone(),
        lanes,
        phases: vec![Phase::NsGreen; n],
        time_in_phase: vec![0; n],
        node_rngs: (0..n)
            .map(|i| stream_rng(seed, Stream::Intersection(i as u64)))
            .collect(),
    })
}

/// Turning movement of a driver at a stop line.
#[derive(Debug, Clone, Copy)]
enum Movement {
    Straight,
    Left,
    Right,
    UTurn,
}

fn sample_movement(rng: &mut ChaCha8Rng, turn_prob: f64) -> Movement {
    let u: f64 = rng.random();
    if u < 1.0 - turn_prob {
        Movement::Straight
    } else {
        // turns split equally among left, right and U-turn
        let v = (u - (1.0 - turn_prob)) / turn_prob;
        if v < 1.0 / 3.0 {
            Movement::Left
        } else if v < 2.0 / 3.0 {
            Movement::Right
        } else {
            Movement::UTurn
        }
    }
}

fn target_heading(arrival: Heading, m: Movement) -> Heading {
    match m {
        Movement::Straight => arrival,
        Movement::Left => arrival.left(),
        Movement::Right => arrival.right(),
        Movement::UTurn => arrival.opposite(),
    }
}

/// Advance the network one time step under the current phases.
pub fn step(state: &mut NetworkState, net: &Network) -> StepMetrics {
    #[cfg(debug_assertions)]
    let count_before = state.vehicle_count();

    let n_nodes = net.n_intersections();
    let turn_prob = net.config().turn_prob;
    // per-block gate flags for the rebuild pass
    let mut entered = vec![false; net.n_blocks()];
    let mut crossed = vec![false; net.n_blocks()];
    let mut crossings = vec![0u8; n_nodes];

    #[allow(clippy::needless_range_loop)]
    for node in 0..n_nodes {
        let green = state.phases[node].green_axis();
        // the two green arrivals, in fixed heading order
        let mut intents: [Option<(usize, usize)>; 2] = [None, None];
        let mut slot = 0;
        for h in HEADINGS {
            if h.axis() != green {
                continue;
            }
            let in_block = net.incoming(node, h);
            if state.lanes[in_block].stop_line() {
                let movement = sample_movement(&mut state.node_rngs[node], turn_prob);
                let out_block = net.outgoing(node, target_heading(h, movement));
                // spillback: an occupied entry cell blocks the crossing
                if !state.lanes[out_block].entry() {
                    intents[slot] = Some((in_block, out_block));
                }
            }
            slot += 1;
        }
        match (intents[0], intents[1]) {
            (Some((b0, o0)), Some((b1, o1))) if o0 == o1 => {
                // both green approaches target the same entry cell
                let winner_first = state.node_rngs[node].random_range(0..2u32) == 0;
                let (b, o) = if winner_first { (b0, o0) } else { (b1, o1) };
                entered[o] = true;
                crossed[b] = true;
                crossings[node] = 1;
            }
            (a, b) => {
                for intent in [a, b].into_iter().flatten() {
                    let (bi, oi) = intent;
                    entered[oi] = true;
                    crossed[bi] = true;
                    crossings[node] += 1;
                }
            }
        }
    }

    // rebuild every lane synchronously from the previous state
    let mut moved = 0usize;
    for (b, lane) in state.lanes.iter().enumerate() {
        moved += lane.interior_movers();
        rule184_step_into(
            lane,
            Boundary::Gated {
                inflow: entered[b],
                outflow_open: crossed[b],
            },
            &mut state.scratch[b],
        );
    }
    std::mem::swap(&mut state.lanes, &mut state.scratch);
    moved += crossed.iter().filter(|&&c| c).count();

    for t in state.time_in_phase.iter_mut() {
        *t += 1;
    }

    #[cfg(debug_assertions)]
    debug_assert_eq!(
        state.vehicle_count(),
        count_before,
        "vehicles not conserved"
    );

    StepMetrics { moved, crossings }
}

/// Observation of one intersection: vehicle counts on the 8 approaches,
/// ordered NS-in, NS-in, EW-in, EW-in, NS-out, NS-out, EW-out, EW-out.
pub fn observe(state: &NetworkState, net: &Network, node: usize) -> Observation {
    let count = |block: usize| state.lanes[block].vehicle_count() as u32;
    let obs_order = [Heading::North, Heading::South, Heading::East, Heading::West];
    let mut o = [0u32; 8];
    for (i, h) in obs_order.iter().enumerate() {
        o[i] = count(net.incoming(node, *h));
        o[i + 4] = count(net.outgoing(node, *h));
    }
    Observation(o)
}

/// Apply one decision epoch: every intersection consults the policy with
/// its own observation and random stream. Entries in `overrides` pin the
/// phase of specific intersections instead (used by trainers).
pub fn decide_phases<S: Scalar>(
    state: &mut NetworkState,
    net: &Network,
    policy: &Policy<S>,
    overrides: &[(usize, Phase)],
) {
    for node in 0..net.n_intersections() {
        if let Some(&(_, phase)) = overrides.iter().find(|(n, _)| *n == node) {
            state.set_phase(node, phase);
            continue;
        }
        let obs = observe(state, net, node);
        let current = state.phases[node];
        let choice = policy.decide(&obs, current, &mut state.node_rngs[node]);
        state.set_phase(node, choice);
    }
}

/// Metrics series from a run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub metrics: Vec<StepMetrics>,
}

impl RunTrace {
    pub fn total_moved(&self) -> usize {
        self.metrics.iter().map(|m| m.moved).sum()
    }

    /// Mean flow in vehicles advanced per cell per step.
    pub fn mean_flow<S: Scalar>(&self, net: &Network) -> S {
        if self.metrics.is_empty() {
            return S::zero();
        }
        S::from_count(self.total_moved() as u64)
            / (S::from_count(net.total_cells() as u64) * S::from_count(self.metrics.len() as u64))
    }
}

/// Run `steps` time steps under `policy`, deciding phases every `g` steps
/// where `g` is the policy's calibrated minimum green.
pub fn run<S: Scalar>(
    state: &mut NetworkState,
    net: &Network,
    policy: &Policy<S>,
    steps: usize,
) -> Result<RunTrace> {
    let g = min_green(
        policy.kind(),
        net.config().mean_block_length,
        net.config().lambda,
    )?;
    let mut metrics = Vec::with_capacity(steps);
    for t in 0..steps {
        if t > 0 && (t as u32).is_multiple_of(g) {
            decide_phases(state, net, policy, &[]);
        }
        metrics.push(step(state, net));
    }
    Ok(RunTrace { metrics })
}

/// Average flow per cell between two states one step apart.
///
/// Counts vehicles that advanced one cell (including crossings, visible
/// as stop-line cells that emptied) and divides by the cell count. With
/// unit free-flow speed this is the space-mean flow in scaled units.
pub fn measure_flow<S: Scalar>(
    before: &NetworkState,
    after: &NetworkState,
    net: &Network,
) -> Result<S> {
    if before.lanes.len() != after.lanes.len() || before.lanes.len() != net.n_blocks() {
        return Err(Error::Mismatch("states refer to different networks".into()));
    }
    let mut moved = 0usize;
    for (b, (lb, la)) in before.lanes.iter().zip(&after.lanes).enumerate() {
        if lb.len() != la.len() || lb.len() != net.blocks()[b].len {
            return Err(Error::Mismatch(format!(
                "block {b} length differs between states"
            )));
        }
        moved += lb.interior_movers();
        if lb.stop_line() && !la.stop_line() {
            moved += 1;
        }
    }
    Ok(S::from_count(moved as u64) / S::from_count(net.total_cells() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, NetworkConfig};

    fn cfg() -> NetworkConfig {
        NetworkConfig {
            rows: 3,
            cols: 3,
            mean_block_length: 8,
            lambda: 1.0,
            delta: 0.0,
            turn_prob: 0.75,
            seed: 11,
        }
    }

    #[test]
    fn bernoulli_extremes() {
        let net = build_network(&cfg()).unwrap();
        let empty = init_bernoulli(&net, 0.0, 1).unwrap();
        assert_eq!(empty.vehicle_count(), 0);
        let full = init_bernoulli(&net, 1.0, 1).unwrap();
        assert_eq!(full.vehicle_count(), net.total_cells());
        assert!(init_bernoulli(&net, 1.5, 1).is_err());
    }

    #[test]
    fn bernoulli_count_concentrates() {
        let mut c = cfg();
        c.rows = 10;
        c.cols = 10;
        c.mean_block_length = 10;
        let net = build_network(&c).unwrap();
        assert_eq!(net.total_cells(), 4000);
        let s = init_bernoulli(&net, 0.5, 7).unwrap();
        let n = s.vehicle_count();
        assert!((1900..=2100).contains(&n), "count {n}");
    }

    #[test]
    fn full_and_empty_networks_are_static() {
        let net = build_network(&cfg()).unwrap();
        for k in [0.0, 1.0] {
            let mut s = init_bernoulli(&net, k, 3).unwrap();
            let trace = run(&mut s, &net, &Policy::<f64>::Lqf, 100).unwrap();
            assert_eq!(trace.total_moved(), 0, "k={k}");
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let net = build_network(&cfg()).unwrap();
        let mut a = init_bernoulli(&net, 0.4, 5).unwrap();
        let mut b = init_bernoulli(&net, 0.4, 5).unwrap();
        let ta = run(&mut a, &net, &Policy::<f64>::Rnd, 200).unwrap();
        let tb = run(&mut b, &net, &Policy::<f64>::Rnd, 200).unwrap();
        let moves_a: Vec<usize> = ta.metrics.iter().map(|m| m.moved).collect();
        let moves_b: Vec<usize> = tb.metrics.iter().map(|m| m.moved).collect();
        assert_eq!(moves_a, moves_b);
        assert_eq!(a.dump(), b.dump());
    }

    #[test]
    fn phases_change_only_at_decision_epochs() {
        let net = build_network(&cfg()).unwrap();
        let mut s = init_bernoulli(&net, 0.5, 17).unwrap();
        let g = crate::policy::min_green(crate::policy::PolicyKind::Rnd, 8, 1.0).unwrap();
        let mut prev = s.phases().to_vec();
        for t in 0..100usize {
            if t > 0 && (t as u32).is_multiple_of(g) {
                decide_phases(&mut s, &net, &Policy::<f64>::Rnd, &[]);
            } else {
                assert_eq!(
                    s.phases(),
                    prev.as_slice(),
                    "phase drifted off-epoch at {t}"
                );
            }
            step(&mut s, &net);
            // a phase younger than g steps can only date from the last epoch
            let since_epoch = (t as u32 + 1) % g;
            for &tip in s.time_in_phase() {
                if tip < g {
                    assert!(since_epoch == 0 || tip >= since_epoch);
                }
            }
            prev = s.phases().to_vec();
        }
        assert!(s.time_in_phase().iter().all(|&t| t >= 1));
    }

    #[test]
    fn vehicles_conserved_under_all_policies() {
        let net = build_network(&cfg()).unwrap();
        for policy in [Policy::<f64>::Lqf, Policy::Sqf, Policy::Rnd] {
            let mut s = init_bernoulli(&net, 0.55, 9).unwrap();
            let before = s.vehicle_count();
            run(&mut s, &net, &policy, 500).unwrap();
            assert_eq!(s.vehicle_count(), before);
        }
    }

    #[test]
    fn red_axis_never_crosses() {
        let net = build_network(&cfg()).unwrap();
        let mut s = init_bernoulli(&net, 0.5, 13).unwrap();
        // freeze all phases NS-green and watch EW stop lines
        for _ in 0..50 {
            let ew_stop_occupied: Vec<bool> = (0..net.n_intersections())
                .flat_map(|n| {
                    [Heading::East, Heading::West]
                        .into_iter()
                        .map(move |h| (n, h))
                })
                .map(|(n, h)| s.lanes()[net.incoming(n, h)].stop_line())
                .collect();
            let m = step(&mut s, &net);
            // an EW stop-line vehicle may never leave while NS is green
            let still: Vec<bool> = (0..net.n_intersections())
                .flat_map(|n| {
                    [Heading::East, Heading::West]
                        .into_iter()
                        .map(move |h| (n, h))
                })
                .map(|(n, h)| s.lanes()[net.incoming(n, h)].stop_line())
                .collect();
            for (was, is) in ew_stop_occupied.iter().zip(&still) {
                if *was {
                    assert!(*is, "red-axis stop line discharged");
                }
            }
            assert!(m.crossings.iter().all(|&c| c <= 2));
        }
    }

    #[test]
    fn straight_only_traffic_goes_straight() {
        let mut c = cfg();
        c.turn_prob = 0.0;
        let net = build_network(&c).unwrap();
        let mut s = init_bernoulli(&net, 0.0, 1).unwrap();
        // one vehicle at the stop line of a northbound approach of node 4
        let in_block = net.incoming(4, Heading::North);
        let out_block = net.outgoing(4, Heading::North);
        let len = net.blocks()[in_block].len;
        s.lanes[in_block].set(len - 1, true);
        let m = step(&mut s, &net);
        assert_eq!(m.moved, 1);
        assert!(s.lanes()[out_block].entry());
        assert!(!s.lanes()[in_block].stop_line());
    }

    #[test]
    fn turn_shares_are_uniform_at_p_one() {
        let mut c = cfg();
        c.turn_prob = 1.0;
        let net = build_network(&c).unwrap();
        let mut counts = [0usize; 4]; // straight, left, right, u
        let node = 0usize;
        let mut s = init_bernoulli(&net, 0.0, 2).unwrap();
        let arrivals = [Heading::North, Heading::South];
        let trials = 30_000;
        for t in 0..trials {
            let h = arrivals[t % 2];
            let in_block = net.incoming(node, h);
            let len = net.blocks()[in_block].len;
            let mut state = s.clone();
            state.lanes[in_block].set(len - 1, true);
            // reuse the evolving node rng from s for fresh randomness
            std::mem::swap(&mut state.node_rngs, &mut s.node_rngs);
            step(&mut state, &net);
            std::mem::swap(&mut state.node_rngs, &mut s.node_rngs);
            for (i, m) in [
                Movement::Straight,
                Movement::Left,
                Movement::Right,
                Movement::UTurn,
            ]
            .into_iter()
            .enumerate()
            {
                let out = net.outgoing(node, target_heading(h, m));
                if state.lanes()[out].entry() {
                    counts[i] += 1;
                }
            }
        }
        assert_eq!(counts[0], 0, "straight share must vanish at p=1");
        for &c in &counts[1..] {
            let share = c as f64 / trials as f64;
            assert!((share - 1.0 / 3.0).abs() < 0.02, "share {share}");
        }
    }

    #[test]
    fn blocked_entry_cell_stops_the_crossing() {
        let mut c = cfg();
        c.turn_prob = 0.0;
        let net = build_network(&c).unwrap();
        let mut s = init_bernoulli(&net, 0.0, 1).unwrap();
        let in_block = net.incoming(4, Heading::North);
        let out_block = net.outgoing(4, Heading::North);
        let len = net.blocks()[in_block].len;
        s.lanes[in_block].set(len - 1, true);
        s.lanes[out_block].set(0, true);
        s.lanes[out_block].set(1, true); // keep the jam in place one step
        let m = step(&mut s, &net);
        assert_eq!(m.crossings[4], 0);
        assert!(s.lanes()[in_block].stop_line(), "driver must wait");
    }

    #[test]
    fn measure_flow_agrees_with_step_metrics() {
        let net = build_network(&cfg()).unwrap();
        let mut s = init_bernoulli(&net, 0.45, 21).unwrap();
        for _ in 0..30 {
            let before = s.clone();
            let m = step(&mut s, &net);
            let flow: f64 = measure_flow(&before, &s, &net).unwrap();
            let expected = m.moved as f64 / net.total_cells() as f64;
            assert_eq!(flow, expected);
        }
    }

    #[test]
    fn measure_flow_rejects_mismatched_networks() {
        let net = build_network(&cfg()).unwrap();
        let mut other_cfg = cfg();
        other_cfg.rows = 2;
        let other = build_network(&other_cfg).unwrap();
        let a = init_bernoulli(&net, 0.3, 1).unwrap();
        let b = init_bernoulli(&other, 0.3, 1).unwrap();
        assert!(measure_flow::<f64>(&a, &b, &net).is_err());
    }

    #[test]
    fn state_dump_is_one_line_per_block() {
        let net = build_network(&cfg()).unwrap();
        let s = init_bernoulli(&net, 0.5, 1).unwrap();
        let dump = s.dump();
        assert_eq!(dump.lines().count(), net.n_blocks());
        assert_eq!(dump.lines().next().unwrap().len(), net.blocks()[0].len);
    }
}
