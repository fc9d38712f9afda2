//! Seeded runs, Monte Carlo replication and parameter sweeps.

mod disturbance;
pub mod output;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use disturbance::{
    compile_schedule, link_curve, DisturbanceEvent, DisturbanceGenerator, DisturbanceKind, EventProcess,
};

use crate::analytics::{self, ClassDelay, DelayDraw, DelayModel, Estimate, FIBRE_KM_PER_S};
use crate::architecture::Architecture;
use crate::buffer::{simulate, NodeStep, Plant, StepSink};
use crate::economics::ServiceOutcome;
use crate::error::{Error, Result};
use crate::rng::{key_hash, StreamFactory, StreamRng};
use crate::supply::{AllocationRule, CurveSet, RateCurve, SupplySharing};
use crate::topology::Topology;
use crate::traffic::{BurstShape, ClassTable, CRITICAL_CLASS_IDS, DEFAULT_OTP_CAP_BPS};

pub const SECONDS_PER_YEAR: f64 = 365.0 * 86_400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt_s: f64,
    pub horizon_steps: u64,
    pub warmup_steps: u64,
    pub seeds: Vec<u64>,
    pub architecture: Architecture,
    pub sharing: SupplySharing,
    pub allocation: AllocationRule,
    /// `b_clear / b_min` of the fallback switch.
    pub hysteresis_ratio: f64,
    pub burst: BurstShape,
    /// Delay is sampled on every n-th measured step.
    pub delay_sample_every: u64,
    pub otp_cap_bps: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt_s: 1.0,
            horizon_steps: 7 * 86_400,
            warmup_steps: 86_400,
            seeds: vec![1],
            architecture: Architecture::Hybrid,
            sharing: SupplySharing::Symmetric,
            allocation: AllocationRule::MaxMin,
            hysteresis_ratio: 1.5,
            burst: BurstShape::default(),
            delay_sample_every: 1,
            otp_cap_bps: DEFAULT_OTP_CAP_BPS,
        }
    }
}

/// A complete, self-contained simulation input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    #[serde(default)]
    pub sim: SimulationConfig,
    pub topology: Topology,
    pub classes: ClassTable,
    pub curves: CurveSet,
    pub delays: DelayModel,
    /// Fixed script; when non-empty it replaces the generator.
    #[serde(default)]
    pub disturbances: Vec<DisturbanceEvent>,
    #[serde(default)]
    pub generator: Option<DisturbanceGenerator>,
}

impl Experiment {
    /// Synthetic classes, curves and delays on the given topology.
    pub fn synthetic(topology: Topology) -> Self {
        Experiment {
            sim: SimulationConfig::default(),
            topology,
            classes: ClassTable::synthetic_default(),
            curves: CurveSet::synthetic_default(),
            delays: DelayModel::synthetic_default(),
            disturbances: Vec::new(),
            generator: None,
        }
    }

    pub fn with_arch(&self, arch: Architecture) -> Self {
        let mut e = self.clone();
        e.sim.architecture = arch;
        e
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sim;
        if !(s.dt_s > 0.0) {
            return Err(Error::config(format!("step length {} must be positive", s.dt_s)));
        }
        if s.warmup_steps >= s.horizon_steps {
            return Err(Error::config(format!(
                "warm-up of {} steps leaves nothing of the {}-step horizon",
                s.warmup_steps, s.horizon_steps
            )));
        }
        if s.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if s.delay_sample_every == 0 {
            return Err(Error::config("delay sampling interval must be positive"));
        }
        if !(s.hysteresis_ratio >= 1.0) {
            return Err(Error::config(format!("hysteresis ratio {} below 1", s.hysteresis_ratio)));
        }
        if !(s.burst.on_mean_s > 0.0 && s.burst.off_mean_s > 0.0) {
            return Err(Error::config("burst dwell times must be positive"));
        }
        self.topology.validate()?;
        self.classes.validate(s.otp_cap_bps)?;
        self.curves.validate()?;
        self.delays.validate()?;
        for link in &self.topology.links {
            link_curve(&self.curves, &link.rate_curve, s.architecture)?;
        }
        for node in &self.topology.nodes {
            if let Some(c) = node.classes.iter().find(|c| self.classes.get(c).is_none()) {
                return Err(Error::config(format!("node {} hosts unknown class {c}", node.id)));
            }
        }
        for e in &self.disturbances {
            e.validate(&self.topology)?;
        }
        if let Some(g) = &self.generator {
            g.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> Result<String> {
        let v = serde_json::to_value(self)?;
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&v)?)))
    }

    /// Script in force for `seed`.
    pub fn events(&self, seed: u64) -> Result<Vec<DisturbanceEvent>> {
        if !self.disturbances.is_empty() {
            return Ok(self.disturbances.clone());
        }
        match &self.generator {
            Some(g) => g.generate(
                &self.topology,
                self.sim.horizon_steps as f64 * self.sim.dt_s,
                &StreamFactory::new(seed),
            ),
            None => Ok(Vec::new()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub availability: f64,
    /// `Pr(Delay > L)` over all samples.
    pub delay_exceedance: f64,
    /// Joint frequency of engaged fallback and a missed delay bound.
    pub exceed_with_fallback: f64,
    /// Outright-outage share averaged over hosting nodes.
    pub outage: f64,
    /// QKD-supported share of the class's demand.
    pub rho: f64,
    pub hosts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub p_out: f64,
    pub fb_occupancy: f64,
    pub mean_supply_bps: f64,
    pub mean_demand_bps: f64,
    pub stability_margin_bps: f64,
    pub supplied_bits_per_year: f64,
    pub consumed_bits_per_year: f64,
    pub shortfall_bits_per_year: f64,
    pub overflow_bits_per_year: f64,
    pub outage_hours_per_year: f64,
    pub fallback_hours_per_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub arch: Architecture,
    pub digest: String,
    pub measured_steps: u64,
    pub classes: BTreeMap<String, ClassMetrics>,
    pub nodes: BTreeMap<String, NodeMetrics>,
}

impl RunResult {
    /// `(metric, class_or_node, value)` in a fixed order.
    pub fn metrics(&self) -> Vec<(&'static str, String, f64)> {
        let mut out = Vec::new();
        for (k, c) in &self.classes {
            out.push(("availability", k.clone(), c.availability));
            out.push(("delay_exceedance", k.clone(), c.delay_exceedance));
            out.push(("outage", k.clone(), c.outage));
            out.push(("rho", k.clone(), c.rho));
        }
        for (n, m) in &self.nodes {
            out.push(("p_out", n.clone(), m.p_out));
            out.push(("fb_occupancy", n.clone(), m.fb_occupancy));
            out.push(("stability_margin_bps", n.clone(), m.stability_margin_bps));
            out.push(("supplied_bits_per_year", n.clone(), m.supplied_bits_per_year));
            out.push(("consumed_bits_per_year", n.clone(), m.consumed_bits_per_year));
            out.push(("shortfall_bits_per_year", n.clone(), m.shortfall_bits_per_year));
            out.push(("outage_hours_per_year", n.clone(), m.outage_hours_per_year));
        }
        if let Some(a) = self.min_critical_availability() {
            out.push(("min_critical_availability", "*".to_string(), a));
        }
        out
    }

    pub fn min_critical_availability(&self) -> Option<f64> {
        CRITICAL_CLASS_IDS
            .iter()
            .filter_map(|k| self.classes.get(*k).map(|c| c.availability))
            .reduce(f64::min)
    }

    pub fn sla_report(&self) -> analytics::SlaReport {
        analytics::SlaReport {
            classes: self
                .classes
                .iter()
                .map(|(k, c)| {
                    let sla = analytics::ClassSla {
                        availability: c.availability,
                        ci95: None,
                        delay_exceedance: c.delay_exceedance,
                    };
                    (k.clone(), sla)
                })
                .collect(),
            nodes: self
                .nodes
                .iter()
                .map(|(n, m)| (n.clone(), analytics::NodeSla { p_out: m.p_out, ci95: None, fb_occupancy: m.fb_occupancy }))
                .collect(),
        }
    }
}

#[derive(Default, Clone)]
struct ClassTally {
    samples: u64,
    exceed: u64,
    exceed_fb: u64,
    demand: f64,
    fb_demand: f64,
}

#[derive(Default, Clone)]
struct NodeTally {
    steps: u64,
    outage: u64,
    engaged: u64,
    uncovered: f64,
    supply: f64,
    demand: f64,
}

struct MetricsSink<'a> {
    plant: &'a Plant<'a>,
    delays: Vec<Vec<&'a ClassDelay>>,
    delay_rngs: Vec<Vec<StreamRng>>,
    t_prop: Vec<f64>,
    path: analytics::CryptoPath,
    warmup: u64,
    every: u64,
    nodes: Vec<NodeTally>,
    classes: Vec<Vec<ClassTally>>,
}

impl StepSink for MetricsSink<'_> {
    fn record(&mut self, t: u64, steps: &[NodeStep], class_demand: &[Vec<f64>]) {
        if t < self.warmup {
            return;
        }
        let sample_delay = (t - self.warmup).is_multiple_of(self.every);
        for (i, st) in steps.iter().enumerate() {
            let p = &self.plant.params[i];
            let engaged = st.chi && p.phi > 0.0;
            let tally = &mut self.nodes[i];
            tally.steps += 1;
            tally.supply += st.supply;
            tally.demand += st.demand;
            if st.level < p.b_min {
                tally.outage += 1;
            }
            if engaged {
                tally.engaged += 1;
                // the share kept on the pool is still served unless the pool runs dry
                if st.eff_demand > st.level {
                    tally.uncovered += 1.0 - p.phi;
                }
            } else if st.level < p.b_min {
                tally.uncovered += 1.0;
            }
            for (s, &d) in class_demand[i].iter().enumerate() {
                let c = &mut self.classes[i][s];
                c.demand += d;
                if engaged {
                    c.fb_demand += p.phi * d;
                }
                if sample_delay {
                    let cd = self.delays[i][s];
                    let draw = DelayDraw::sample(cd, &mut self.delay_rngs[i][s]);
                    let delay = analytics::delay_from_draw(cd, draw, self.t_prop[i], self.path, engaged);
                    let class = &self.plant.classes.classes[self.plant.slots(i)[s]];
                    c.samples += 1;
                    if delay > class.delay_bound_s {
                        c.exceed += 1;
                        if engaged {
                            c.exceed_fb += 1;
                        }
                    }
                }
            }
        }
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// One seeded run of `exp` under its configured architecture.
pub fn run_one(exp: &Experiment, seed: u64) -> Result<RunResult> {
    exp.validate()?;
    let digest = exp.digest()?;
    run_validated(exp, seed, &digest)
}

fn run_validated(exp: &Experiment, seed: u64, digest: &str) -> Result<RunResult> {
    let s = &exp.sim;
    let arch = s.architecture;
    let events = exp.events(seed)?;
    let schedule = compile_schedule(&exp.topology, &exp.curves, arch, &events, s.horizon_steps, s.dt_s)?;
    let mut plant = Plant::new(&exp.topology, &exp.classes, &schedule, s.hysteresis_ratio)?;
    plant.dt = s.dt_s;
    plant.sharing = s.sharing;
    plant.allocation = s.allocation;
    plant.burst = s.burst;
    if arch != Architecture::Hybrid {
        plant.params.iter_mut().for_each(|p| p.phi = 0.0);
    }
    let streams = StreamFactory::new(seed);
    let topo = &exp.topology;
    let n = topo.nodes.len();
    let delays: Vec<Vec<&ClassDelay>> = (0..n)
        .map(|i| plant.slots(i).iter().map(|&k| exp.delays.class(&exp.classes.classes[k].id)).collect())
        .collect();
    let delay_rngs = (0..n)
        .map(|i| {
            plant
                .slots(i)
                .iter()
                .map(|&k| {
                    let key = format!("{}/{}", topo.nodes[i].id, exp.classes.classes[k].id);
                    streams.stream("delay", key_hash(&key))
                })
                .collect()
        })
        .collect();
    let t_prop = topo.propagation_km().into_iter().map(|km| km / FIBRE_KM_PER_S).collect();
    let mut sink = MetricsSink {
        plant: &plant,
        delays,
        delay_rngs,
        t_prop,
        path: arch.crypto_path(),
        warmup: s.warmup_steps,
        every: s.delay_sample_every,
        nodes: vec![NodeTally::default(); n],
        classes: (0..n).map(|i| vec![ClassTally::default(); plant.slots(i).len()]).collect(),
    };
    let finals = simulate(&plant, s.horizon_steps, &streams, &mut sink)?;

    let measured = s.horizon_steps - s.warmup_steps;
    let window_s = measured as f64 * s.dt_s;
    let per_year = SECONDS_PER_YEAR / window_s;
    let mut nodes = BTreeMap::new();
    for (i, node) in topo.nodes.iter().enumerate() {
        let t = &sink.nodes[i];
        let steps = t.steps as f64;
        let fin = &finals[i];
        let mean_supply_bps = t.supply / window_s;
        let mean_demand_bps = t.demand / window_s;
        // totals include the warm-up; scale them by the full horizon instead
        let full_per_year = SECONDS_PER_YEAR / (s.horizon_steps as f64 * s.dt_s);
        nodes.insert(
            node.id.clone(),
            NodeMetrics {
                p_out: t.outage as f64 / steps,
                fb_occupancy: t.engaged as f64 / steps,
                mean_supply_bps,
                mean_demand_bps,
                stability_margin_bps: analytics::stability_margin(mean_supply_bps, mean_demand_bps, node.delta_bits_per_s)
                    .margin,
                supplied_bits_per_year: fin.supplied_bits * full_per_year,
                consumed_bits_per_year: fin.consumed_bits * full_per_year,
                shortfall_bits_per_year: fin.shortfall_bits * full_per_year,
                overflow_bits_per_year: fin.overflow_bits * full_per_year,
                outage_hours_per_year: t.outage as f64 * s.dt_s * per_year / 3600.0,
                fallback_hours_per_year: t.engaged as f64 * s.dt_s * per_year / 3600.0,
            },
        );
    }

    let mut classes = BTreeMap::new();
    for (ci, class) in exp.classes.classes.iter().enumerate() {
        let mut hosts = 0usize;
        let (mut avail, mut outage) = (0.0, 0.0);
        let (mut samples, mut exceed, mut exceed_fb) = (0u64, 0u64, 0u64);
        let (mut demand, mut fb_demand) = (0.0, 0.0);
        for i in 0..n {
            let Some(s_idx) = plant.slots(i).iter().position(|&k| k == ci) else {
                continue;
            };
            let nt = &sink.nodes[i];
            let ct = &sink.classes[i][s_idx];
            let uncovered = nt.uncovered / nt.steps as f64;
            let joint = ratio(ct.exceed_fb as f64, ct.samples as f64);
            avail += analytics::availability(uncovered, joint, 1.0);
            outage += uncovered;
            hosts += 1;
            samples += ct.samples;
            exceed += ct.exceed;
            exceed_fb += ct.exceed_fb;
            demand += ct.demand;
            fb_demand += ct.fb_demand;
        }
        if hosts == 0 {
            continue;
        }
        classes.insert(
            class.id.clone(),
            ClassMetrics {
                availability: avail / hosts as f64,
                delay_exceedance: ratio(exceed as f64, samples as f64),
                exceed_with_fallback: ratio(exceed_fb as f64, samples as f64),
                outage: outage / hosts as f64,
                rho: if demand > 0.0 { 1.0 - fb_demand / demand } else { 1.0 },
                hosts,
            },
        );
    }
    Ok(RunResult { seed, arch, digest: digest.to_string(), measured_steps: measured, classes, nodes })
}

/// Order statistics and CI of one metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub estimate: Estimate,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

/// Linear-interpolation quantile of `values` (sorted internally).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> MetricSummary {
    MetricSummary {
        n: values.len(),
        estimate: analytics::mean_ci(values),
        p5: quantile(values, 0.05),
        p50: quantile(values, 0.5),
        p95: quantile(values, 0.95),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub arch: Architecture,
    pub digest: String,
    /// Per-seed results in the configured seed order.
    pub runs: Vec<RunResult>,
}

impl MonteCarloResult {
    /// Per-seed values of every `(metric, key)` pair.
    pub fn values(&self) -> BTreeMap<(String, String), Vec<f64>> {
        let mut out: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for r in &self.runs {
            for (m, k, v) in r.metrics() {
                out.entry((m.to_string(), k)).or_default().push(v);
            }
        }
        out
    }

    pub fn summary(&self) -> BTreeMap<(String, String), MetricSummary> {
        self.values().into_iter().map(|(k, v)| (k, summarize(&v))).collect()
    }

    pub fn metric(&self, metric: &str, key: &str) -> Vec<f64> {
        self.values().remove(&(metric.to_string(), key.to_string())).unwrap_or_default()
    }

    /// Seed-averaged availability and rho for the economics.
    pub fn outcome(&self) -> ServiceOutcome {
        let mut out = ServiceOutcome::default();
        let n = self.runs.len().max(1) as f64;
        for r in &self.runs {
            for (k, c) in &r.classes {
                *out.availability.entry(k.clone()).or_insert(0.0) += c.availability / n;
                *out.rho.entry(k.clone()).or_insert(0.0) += c.rho / n;
            }
        }
        out
    }
}

/// Runs every configured seed, on up to `threads` workers when the
/// `parallel` feature is on. Output order follows the seed list.
pub fn monte_carlo(exp: &Experiment, threads: Option<usize>) -> Result<MonteCarloResult> {
    exp.validate()?;
    let digest = exp.digest()?;
    let runs = run_seeds(exp, &digest, threads)?;
    Ok(MonteCarloResult { arch: exp.sim.architecture, digest, runs })
}

#[cfg(feature = "parallel")]
fn run_seeds(exp: &Experiment, digest: &str, threads: Option<usize>) -> Result<Vec<RunResult>> {
    use rayon::prelude::*;
    if threads == Some(1) {
        return exp.sim.seeds.iter().map(|&s| run_validated(exp, s, digest)).collect();
    }
    let job = || exp.sim.seeds.par_iter().map(|&s| run_validated(exp, s, digest)).collect();
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::usage(e.to_string()))?
            .install(job),
        None => job(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_seeds(exp: &Experiment, digest: &str, _threads: Option<usize>) -> Result<Vec<RunResult>> {
    exp.sim.seeds.iter().map(|&s| run_validated(exp, s, digest)).collect()
}

/// One swept parameter and its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub assignment: Vec<(String, f64)>,
    pub result: MonteCarloResult,
}

/// Sets the parameter named by `path` on a copy of the experiment.
///
/// Paths: `topology.alpha_db_per_km`; `node.{b_min_bits, reserve_bits,
/// b_max_bits, phi, delta_bits_per_s}` (all nodes); `class.<id|*>.<field>`;
/// `curve.<id|*>.{r0_bps, eta_per_db}`; `sim.hysteresis_ratio`.
/// `reserve_bits` moves `b_min` and keeps the headroom `b_max - b_min`.
pub fn apply_path(exp: &mut Experiment, path: &str, value: f64) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let bad = || Error::config(format!("unknown sweep path {path}"));
    match parts.as_slice() {
        ["topology", "alpha_db_per_km"] => exp.topology.alpha_db_per_km = value,
        ["sim", "hysteresis_ratio"] => exp.sim.hysteresis_ratio = value,
        ["node", field] => {
            for n in &mut exp.topology.nodes {
                match *field {
                    "b_min_bits" => n.b_min_bits = value,
                    "b_max_bits" => n.b_max_bits = value,
                    "reserve_bits" => {
                        let headroom = n.b_max_bits - n.b_min_bits;
                        n.b_min_bits = value;
                        n.b_max_bits = value + headroom;
                    }
                    "phi" => n.phi = value,
                    "delta_bits_per_s" => n.delta_bits_per_s = value,
                    _ => return Err(bad()),
                }
            }
        }
        ["class", id, field] => {
            let mut hit = false;
            for c in exp.classes.classes.iter_mut().filter(|c| *id == "*" || c.id == *id) {
                hit = true;
                match *field {
                    "f_hz" => c.f_hz = value,
                    "beta" => c.beta = value,
                    "lambda_pps" => c.lambda_pps = value,
                    "l_sess_bits" => c.l_sess_bits = value,
                    "l_mac_bits" => c.l_mac_bits = value,
                    _ => return Err(bad()),
                }
            }
            if !hit {
                return Err(bad());
            }
        }
        ["curve", id, field] => {
            let mut hit = false;
            for (cid, curve) in exp.curves.curves.iter_mut() {
                if *id != "*" && cid != id {
                    continue;
                }
                match (curve, *field) {
                    (RateCurve::Dv { r0_bps, .. } | RateCurve::Cv { r0_bps, .. }, "r0_bps") => *r0_bps = value,
                    (RateCurve::Dv { eta_per_db, .. } | RateCurve::Cv { eta_per_db, .. }, "eta_per_db") => {
                        *eta_per_db = value
                    }
                    _ if *id == "*" => continue,
                    _ => return Err(bad()),
                }
                hit = true;
            }
            if !hit {
                return Err(bad());
            }
        }
        _ => return Err(bad()),
    }
    Ok(())
}

/// Monte Carlo over the Cartesian product of one or two axes; the first
/// axis varies slowest.
pub fn sweep(exp: &Experiment, axes: &[SweepAxis], threads: Option<usize>) -> Result<Vec<SweepCell>> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::config(format!("sweeps take one or two axes, got {}", axes.len())));
    }
    if let Some(a) = axes.iter().find(|a| a.values.is_empty()) {
        return Err(Error::config(format!("axis {} has no values", a.path)));
    }
    let mut grid: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for axis in axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push((axis.path.clone(), v));
                    p
                })
            })
            .collect();
    }
    grid.into_iter()
        .map(|assignment| {
            let mut cell = exp.clone();
            for (path, v) in &assignment {
                apply_path(&mut cell, path, *v)?;
            }
            let result = monte_carlo(&cell, threads)?;
            Ok(SweepCell { assignment, result })
        })
        .collect()
}
