//! Key-buffer recursion, fallback hysteresis and the per-step engine.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{key_hash, StreamFactory, StreamRng};
use crate::supply::{allocate_maxmin, allocate_weighted, AllocationRule, SupplySchedule, SupplySharing};
use crate::topology::Topology;
use crate::traffic::{class_step_demand, ArrivalModel, ArrivalProcess, BurstShape, ClassTable};

/// Inventory and counters of one node's key pool.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BufferState {
    pub level: f64,
    pub chi: bool,
    pub steps_total: u64,
    pub steps_outage: u64,
    pub steps_fallback: u64,
    pub consumed_bits: f64,
    pub supplied_bits: f64,
    pub shortfall_bits: f64,
    pub overflow_bits: f64,
}

impl BufferState {
    pub fn new(level: f64) -> Self {
        BufferState { level, ..Default::default() }
    }

    /// Counts the current step against the outage and fallback tallies.
    pub fn observe(&mut self, b_min: f64) {
        if self.level < b_min {
            self.steps_outage += 1;
        }
        if self.chi {
            self.steps_fallback += 1;
        }
    }
}

/// Demand left on the QKD pool once a share `phi` moves to fallback.
pub fn effective_demand(d: f64, phi: f64, chi: bool) -> f64 {
    if chi {
        d * (1.0 - phi)
    } else {
        d
    }
}

/// Consume first, then add supply, then cap at `b_max`.
pub fn buffer_step(mut state: BufferState, a: f64, d_eff: f64, b_max: f64) -> BufferState {
    let consumed = d_eff.min(state.level);
    let before_cap = state.level - consumed + a;
    let level = before_cap.min(b_max);
    state.shortfall_bits += d_eff - consumed;
    state.consumed_bits += consumed;
    state.supplied_bits += a;
    state.overflow_bits += before_cap - level;
    state.level = level;
    state.steps_total += 1;
    state
}

/// Hysteresis switch: set below `b_min`, cleared at or above `b_clear`.
pub fn update_fallback(state: &mut BufferState, b_min: f64, b_clear: f64) -> Result<bool> {
    if b_clear < b_min {
        return Err(Error::config(format!("b_clear {b_clear} below b_min {b_min}")));
    }
    if state.level < b_min {
        state.chi = true;
    } else if state.level >= b_clear {
        state.chi = false;
    }
    Ok(state.chi)
}

/// Buffer and fallback parameters of one node as used by the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeParams {
    pub b_max: f64,
    pub b_min: f64,
    pub b_clear: f64,
    pub phi: f64,
    pub initial: f64,
}

/// Everything a trace needs besides the horizon and the seed.
#[derive(Debug, Clone)]
pub struct Plant<'a> {
    pub topology: &'a Topology,
    pub classes: &'a ClassTable,
    pub schedule: &'a SupplySchedule,
    pub params: Vec<NodeParams>,
    pub dt: f64,
    pub sharing: SupplySharing,
    pub allocation: AllocationRule,
    pub burst: BurstShape,
    slots: Vec<Vec<usize>>,
}

impl<'a> Plant<'a> {
    /// Node parameters taken from the topology with `b_clear = ratio * b_min`.
    pub fn new(
        topology: &'a Topology,
        classes: &'a ClassTable,
        schedule: &'a SupplySchedule,
        hysteresis_ratio: f64,
    ) -> Result<Self> {
        if !(hysteresis_ratio >= 1.0) {
            return Err(Error::config(format!("hysteresis ratio {hysteresis_ratio} below 1")));
        }
        let params = topology
            .nodes
            .iter()
            .map(|n| NodeParams {
                b_max: n.b_max_bits,
                b_min: n.b_min_bits,
                b_clear: (n.b_min_bits * hysteresis_ratio).min(n.b_max_bits).max(n.b_min_bits),
                phi: n.phi,
                initial: n.b_max_bits,
            })
            .collect();
        Self::with_params(topology, classes, schedule, params)
    }

    pub fn with_params(
        topology: &'a Topology,
        classes: &'a ClassTable,
        schedule: &'a SupplySchedule,
        params: Vec<NodeParams>,
    ) -> Result<Self> {
        if params.len() != topology.nodes.len() {
            return Err(Error::config("one parameter set per node required"));
        }
        if schedule.links.len() != topology.links.len() {
            return Err(Error::config("schedule does not match topology links"));
        }
        for p in &params {
            if p.b_clear < p.b_min {
                return Err(Error::config(format!("b_clear {} below b_min {}", p.b_clear, p.b_min)));
            }
            if !(0.0..=1.0).contains(&p.phi) || p.initial < 0.0 || p.initial > p.b_max {
                return Err(Error::config(format!("invalid node parameters {p:?}")));
            }
        }
        let slots = topology
            .nodes
            .iter()
            .map(|n| {
                n.classes
                    .iter()
                    .map(|c| {
                        classes
                            .index_of(c)
                            .ok_or_else(|| Error::config(format!("node {} hosts unknown class {c}", n.id)))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Plant {
            topology,
            classes,
            schedule,
            params,
            dt: 1.0,
            sharing: SupplySharing::default(),
            allocation: AllocationRule::default(),
            burst: BurstShape::default(),
            slots,
        })
    }

    /// Class-table indices hosted by node `i`, in slot order.
    pub fn slots(&self, i: usize) -> &[usize] {
        &self.slots[i]
    }
}

/// What one node did during one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct NodeStep {
    /// Level at the start of the step.
    pub level: f64,
    pub chi: bool,
    pub demand: f64,
    pub eff_demand: f64,
    pub supply: f64,
}

/// Receives every step of a trace.
pub trait StepSink {
    /// `class_demand[i][s]` is the demand of slot `s` at node `i`.
    fn record(&mut self, t: u64, nodes: &[NodeStep], class_demand: &[Vec<f64>]);
}

/// Arrival stream of one hosted class. Keyed by node and class id so that
/// every architecture replays the same traffic for a given seed.
pub fn arrival_stream(streams: &StreamFactory, node: &str, class: &str) -> StreamRng {
    streams.stream("arrivals", key_hash(&format!("{node}/{class}")))
}

/// Runs the supply, demand and buffer loop for `horizon` steps.
pub fn simulate<S: StepSink>(
    plant: &Plant,
    horizon: u64,
    streams: &StreamFactory,
    sink: &mut S,
) -> Result<Vec<BufferState>> {
    if horizon < 1 {
        return Err(Error::config("horizon must be at least one step"));
    }
    let topo = plant.topology;
    let n = topo.nodes.len();
    let mut sources: Vec<Vec<(ArrivalProcess, StreamRng)>> = topo
        .nodes
        .iter()
        .enumerate()
        .map(|(i, node)| {
            plant.slots[i]
                .iter()
                .map(|&k| {
                    let class = &plant.classes.classes[k];
                    let mut rng = arrival_stream(streams, &node.id, &class.id);
                    let proc = ArrivalProcess::new(ArrivalModel::for_class(class, plant.burst), &mut rng);
                    (proc, rng)
                })
                .collect()
        })
        .collect();

    let mut fed_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut feeds: Vec<Vec<(usize, f64)>> = Vec::with_capacity(topo.links.len());
    for (li, link) in topo.links.iter().enumerate() {
        let mut fed = Vec::new();
        for (id, &w) in &link.weights {
            let i = topo
                .node_index(id)
                .ok_or_else(|| Error::config(format!("link {} weights unknown node {id}", link.id)))?;
            fed_by[i].push(li);
            fed.push((i, w));
        }
        feeds.push(fed);
    }

    let mut states: Vec<BufferState> = plant.params.iter().map(|p| BufferState::new(p.initial)).collect();
    let mut steps = vec![NodeStep::default(); n];
    let mut class_demand: Vec<Vec<f64>> = plant.slots.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut link_bits = vec![0.0; topo.links.len()];
    let mut cursor = plant.schedule.cursor();
    let mut requests = Vec::new();
    let mut weights = Vec::new();

    for t in 0..horizon {
        for (i, state) in states.iter_mut().enumerate() {
            let p = &plant.params[i];
            let chi = update_fallback(state, p.b_min, p.b_clear)?;
            let mut demand = 0.0;
            for (s, (proc, rng)) in sources[i].iter_mut().enumerate() {
                let count = proc.sample(plant.dt, rng);
                let class = &plant.classes.classes[plant.slots[i][s]];
                let d = class_step_demand(class, count, plant.dt);
                class_demand[i][s] = d;
                demand += d;
            }
            steps[i] = NodeStep {
                level: state.level,
                chi,
                demand,
                eff_demand: effective_demand(demand, p.phi, chi),
                supply: 0.0,
            };
        }
        for (li, bits) in link_bits.iter_mut().enumerate() {
            *bits = cursor.bits(li, t);
        }
        match plant.sharing {
            SupplySharing::Symmetric => {
                for (i, step) in steps.iter_mut().enumerate() {
                    step.supply = fed_by[i].iter().map(|&l| link_bits[l]).sum();
                }
            }
            SupplySharing::Allocated => {
                for (li, fed) in feeds.iter().enumerate() {
                    if fed.is_empty() {
                        continue;
                    }
                    requests.clear();
                    weights.clear();
                    for &(i, w) in fed {
                        let st = &steps[i];
                        let after = (st.level - st.eff_demand).max(0.0);
                        requests.push((plant.params[i].b_max - after - st.supply).max(0.0));
                        weights.push(w);
                    }
                    let alloc = match plant.allocation {
                        AllocationRule::MaxMin => allocate_maxmin(link_bits[li], &requests),
                        AllocationRule::Weighted => allocate_weighted(link_bits[li], &requests, &weights)?,
                    };
                    for (&(i, _), a) in fed.iter().zip(alloc) {
                        steps[i].supply += a;
                    }
                }
            }
        }
        for (i, state) in states.iter_mut().enumerate() {
            let p = &plant.params[i];
            state.observe(p.b_min);
            *state = buffer_step(*state, steps[i].supply, steps[i].eff_demand, p.b_max);
        }
        sink.record(t, &steps, &class_demand);
    }
    Ok(states)
}

/// One step of a recorded trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: u64,
    pub nodes: Vec<NodeStep>,
}

impl StepSink for Vec<StepRecord> {
    fn record(&mut self, t: u64, nodes: &[NodeStep], _: &[Vec<f64>]) {
        self.push(StepRecord { t, nodes: nodes.to_vec() });
    }
}

/// Full per-step trace; meant for short horizons.
pub fn run_trace(plant: &Plant, horizon: u64, seed: u64) -> Result<Vec<StepRecord>> {
    let mut records = Vec::with_capacity(horizon as usize);
    simulate(plant, horizon, &StreamFactory::new(seed), &mut records)?;
    Ok(records)
}

/// Writes `t,node,B_bits,chi,demand_bits,eff_demand_bits,supply_bits` rows.
pub fn write_trace_csv<W: Write>(records: &[StepRecord], topology: &Topology, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "node", "B_bits", "chi", "demand_bits", "eff_demand_bits", "supply_bits"])?;
    for r in records {
        for (node, s) in topology.nodes.iter().zip(&r.nodes) {
            w.write_record([
                r.t.to_string(),
                node.id.clone(),
                s.level.to_string(),
                u8::from(s.chi).to_string(),
                s.demand.to_string(),
                s.eff_demand.to_string(),
                s.supply.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Io { path: "trace".into(), source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn effective_demand_examples() {
        assert_eq!(effective_demand(100.0, 0.5, true), 50.0);
        assert_eq!(effective_demand(100.0, 0.3, false), 100.0);
        assert_eq!(effective_demand(100.0, 1.0, true), 0.0);
    }

    #[test]
    fn step_examples() {
        let s = buffer_step(BufferState::new(100.0), 30.0, 150.0, 200.0);
        assert_eq!(s.level, 30.0);
        assert_eq!(s.shortfall_bits, 50.0);
        assert_eq!(buffer_step(BufferState::new(100.0), 0.0, 0.0, 200.0).level, 100.0);
        let s = buffer_step(BufferState::new(190.0), 50.0, 0.0, 200.0);
        assert_eq!(s.level, 200.0);
        assert_eq!(s.overflow_bits, 40.0);
    }

    #[test]
    fn hysteresis() {
        let mut s = BufferState::new(9.0);
        assert!(update_fallback(&mut s, 10.0, 20.0).unwrap());
        s.level = 10.0;
        assert!(update_fallback(&mut s, 10.0, 20.0).unwrap());
        s.level = 20.0;
        assert!(!update_fallback(&mut s, 10.0, 20.0).unwrap());
        assert!(matches!(update_fallback(&mut s, 10.0, 5.0), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn bounds_and_conservation(
            b0 in 0u32..1000,
            steps in proptest::collection::vec((0u32..400, 0u32..400), 1..200),
        ) {
            let b_max = 1000.0;
            let mut s = BufferState::new(b0 as f64);
            for (a, d) in steps {
                s = buffer_step(s, a as f64, d as f64, b_max);
                prop_assert!(s.level >= 0.0 && s.level <= b_max);
            }
            let residual = s.supplied_bits - s.consumed_bits - (s.level - b0 as f64) - s.overflow_bits;
            prop_assert_eq!(residual, 0.0);
            prop_assert!(s.shortfall_bits >= 0.0 && s.overflow_bits >= 0.0);
        }
    }
}
