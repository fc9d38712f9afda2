//! Experiment manifests and the economics table built from simulated outcomes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analytics::DelayModel;
use crate::architecture::Architecture;
use crate::economics::{
    chance_constraint, cis, evaluate, expected_lcosec, ChanceVerdict, PriceBook, RobustSummary, ScenarioSet,
    ServiceOutcome, DEFAULT_CVAR_LEVEL,
};
use crate::error::{Error, Result};
use crate::simulator::{DisturbanceEvent, DisturbanceGenerator, Experiment, SimulationConfig, SweepAxis};
use crate::supply::CurveSet;
use crate::topology::{build_distribution, build_longhaul, build_metro, Topology};
use crate::traffic::ClassTable;

/// A value given inline or as a path relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    File(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Source<T> {
    pub fn resolve(&self, base: &Path) -> Result<T> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::File(p) => read_json(&base.join(p)),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    Ok(serde_json::from_str(&text)?)
}

/// Parameters of one of the built-in topology generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "lowercase", deny_unknown_fields)]
pub enum TopologySpec {
    Metro {
        substations: usize,
        ring_km: f64,
        #[serde(default)]
        chords: usize,
        #[serde(default = "one")]
        seed: u64,
    },
    Distribution {
        neighborhoods: usize,
        agg_points: usize,
        span_km: f64,
        #[serde(default = "one")]
        seed: u64,
    },
    Longhaul {
        km: f64,
        trusted: usize,
        #[serde(default)]
        dual_chain: bool,
    },
}

fn one() -> u64 {
    1
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology> {
        match *self {
            TopologySpec::Metro { substations, ring_km, chords, seed } => build_metro(substations, ring_km, chords, seed),
            TopologySpec::Distribution { neighborhoods, agg_points, span_km, seed } => {
                build_distribution(neighborhoods, agg_points, span_km, seed)
            }
            TopologySpec::Longhaul { km, trusted, dual_chain } => build_longhaul(km, trusted, dual_chain),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySource {
    File(PathBuf),
    Generate(TopologySpec),
    Inline(Topology),
}

/// Settings of the economics stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicsSettings {
    /// Reference architecture for incremental cost.
    pub baseline: Architecture,
    /// Shadow price of one unit of security output.
    pub shadow_price: f64,
    /// Allowed probability of missing an availability target.
    pub epsilon: f64,
    pub cvar_level: f64,
}

impl Default for EconomicsSettings {
    fn default() -> Self {
        EconomicsSettings {
            baseline: Architecture::PqcOnly,
            shadow_price: 1.0,
            epsilon: 0.05,
            cvar_level: DEFAULT_CVAR_LEVEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    #[serde(default = "default_scenario")]
    pub scenario: String,
    pub topology: TopologySource,
    #[serde(default)]
    pub classes: Option<Source<ClassTable>>,
    #[serde(default)]
    pub curves: Option<Source<CurveSet>>,
    #[serde(default)]
    pub delays: Option<Source<DelayModel>>,
    #[serde(default)]
    pub disturbances: Option<Source<Vec<DisturbanceEvent>>>,
    #[serde(default)]
    pub generator: Option<DisturbanceGenerator>,
    #[serde(default)]
    pub sim: SimulationConfig,
    /// Architectures to run; defaults to the one in `sim`.
    #[serde(default)]
    pub architectures: Vec<Architecture>,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub prices: Option<Source<PriceBook>>,
    #[serde(default)]
    pub scenarios: Option<Source<ScenarioSet>>,
    #[serde(default)]
    pub economics: EconomicsSettings,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_scenario() -> String {
    "base".into()
}

/// A manifest with every reference read and validated.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: String,
    pub experiment: Experiment,
    pub architectures: Vec<Architecture>,
    pub sweep: Vec<SweepAxis>,
    pub prices: PriceBook,
    pub scenarios: ScenarioSet,
    pub economics: EconomicsSettings,
    pub output_dir: Option<PathBuf>,
}

impl Loaded {
    pub fn topology_label(&self) -> &'static str {
        self.experiment.topology.kind.label()
    }

    /// The experiment configured for each requested architecture.
    pub fn experiments(&self) -> Vec<Experiment> {
        self.architectures.iter().map(|&a| self.experiment.with_arch(a)).collect()
    }
}

impl ExperimentManifest {
    pub fn from_path(path: &Path) -> Result<Loaded> {
        let m: ExperimentManifest = read_json(path)?;
        m.resolve(path.parent().unwrap_or(Path::new(".")))
    }

    /// Reads referenced files relative to `base` and validates the result.
    pub fn resolve(&self, base: &Path) -> Result<Loaded> {
        let topology: Topology = match &self.topology {
            TopologySource::File(p) => read_json(&base.join(p))?,
            TopologySource::Generate(spec) => spec.build()?,
            TopologySource::Inline(t) => t.clone(),
        };
        topology.validate()?;
        let classes = self.classes.as_ref().map(|s| s.resolve(base)).transpose()?.unwrap_or_else(ClassTable::synthetic_default);
        let curves = self.curves.as_ref().map(|s| s.resolve(base)).transpose()?.unwrap_or_else(CurveSet::synthetic_default);
        let delays = self.delays.as_ref().map(|s| s.resolve(base)).transpose()?.unwrap_or_else(DelayModel::synthetic_default);
        let disturbances = self.disturbances.as_ref().map(|s| s.resolve(base)).transpose()?.unwrap_or_default();
        let experiment = Experiment {
            sim: self.sim.clone(),
            topology,
            classes,
            curves,
            delays,
            disturbances,
            generator: self.generator,
        };
        let architectures =
            if self.architectures.is_empty() { vec![self.sim.architecture] } else { self.architectures.clone() };
        for &a in &architectures {
            experiment.with_arch(a).validate()?;
        }
        let prices = self.prices.as_ref().map(|s| s.resolve(base)).transpose()?.unwrap_or_default();
        let scenarios = self.scenarios.as_ref().map(|s| s.resolve(base)).transpose()?.unwrap_or_else(ScenarioSet::single);
        scenarios.validate()?;
        let e = &self.economics;
        if !(e.shadow_price >= 0.0) || !(0.0..1.0).contains(&e.epsilon) || !(0.0..1.0).contains(&e.cvar_level) {
            return Err(Error::config("economics settings out of range"));
        }
        Ok(Loaded {
            scenario: self.scenario.clone(),
            experiment,
            architectures,
            sweep: self.sweep.clone(),
            prices,
            scenarios,
            economics: self.economics.clone(),
            output_dir: self.output_dir.as_ref().map(|p| base.join(p)),
        })
    }
}

/// One row of the economics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconomicsRow {
    pub scenario: String,
    pub arch: Architecture,
    pub topology: String,
    pub npv: f64,
    pub eac: f64,
    pub risk_sla: f64,
    pub risk_sndl: f64,
    pub pv_secval: f64,
    pub lcosec: Option<f64>,
    pub cis: Option<f64>,
    pub breakeven_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchRobustness {
    pub arch: Architecture,
    /// Absent when some scenario has no defined LCoSec.
    pub lcosec: Option<RobustSummary>,
    pub chance: ChanceVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconomicsReport {
    pub rows: Vec<EconomicsRow>,
    pub robust: Vec<ArchRobustness>,
    pub settings: EconomicsSettings,
}

/// Evaluates every scenario and architecture, with incremental measures
/// against the baseline when more than one architecture is present.
pub fn economics_table(
    scenario_label: &str,
    topology: &Topology,
    classes: &ClassTable,
    prices: &PriceBook,
    scenarios: &ScenarioSet,
    settings: &EconomicsSettings,
    outcomes: &[(Architecture, ServiceOutcome)],
) -> Result<EconomicsReport> {
    scenarios.validate()?;
    if outcomes.is_empty() {
        return Err(Error::config("no simulated outcomes to evaluate"));
    }
    let baseline = if outcomes.len() > 1 {
        let b = outcomes.iter().find(|(a, _)| *a == settings.baseline);
        Some(b.ok_or_else(|| Error::config(format!("baseline architecture {} was not simulated", settings.baseline)))?)
    } else {
        None
    };
    let output = prices.output(topology, classes);
    let targets: BTreeMap<String, f64> =
        classes.classes.iter().map(|c| (c.id.clone(), c.availability_target)).collect();
    let mut rows = Vec::new();
    let mut per_arch: BTreeMap<Architecture, Vec<Option<f64>>> = BTreeMap::new();
    for s in &scenarios.scenarios {
        let label = if scenarios.scenarios.len() == 1 { scenario_label.to_string() } else { s.id.clone() };
        let eval_arch = |arch: Architecture, outcome: &ServiceOutcome| {
            let mut cost = prices.cost_model(topology, arch);
            let mut risk = prices.risk_model(topology, classes);
            s.overrides.apply(&mut cost, &mut risk);
            evaluate(&cost, &risk, &output, arch, outcome)
        };
        let base_eval = baseline.map(|(a, o)| eval_arch(*a, o)).transpose()?;
        for (arch, outcome) in outcomes {
            let ev = eval_arch(*arch, outcome)?;
            let (cis_v, pass) = match (&base_eval, baseline) {
                (Some(b), Some((ba, _))) if ba != arch => {
                    let (dn, dp) = (ev.npv - b.npv, ev.pv_secval - b.pv_secval);
                    (cis(dn, dp).ok(), Some(crate::economics::breakeven(settings.shadow_price, dp, dn)))
                }
                _ => (None, None),
            };
            per_arch.entry(*arch).or_default().push(ev.lcosec);
            rows.push(EconomicsRow {
                scenario: label.clone(),
                arch: *arch,
                topology: topology.kind.label().to_string(),
                npv: ev.npv,
                eac: ev.eac,
                risk_sla: ev.risk_sla,
                risk_sndl: ev.risk_sndl,
                pv_secval: ev.pv_secval,
                lcosec: ev.lcosec,
                cis: cis_v,
                breakeven_pass: pass,
            });
        }
    }
    let years = prices.horizon_years;
    let mut robust = Vec::new();
    for (arch, outcome) in outcomes {
        let values: Option<Vec<f64>> = per_arch[arch].iter().copied().collect();
        let lcosec = values.map(|v| expected_lcosec(scenarios, &v, settings.cvar_level)).transpose()?;
        let table: BTreeMap<String, Vec<f64>> =
            outcome.availability.iter().map(|(k, a)| (k.clone(), vec![*a; years])).collect();
        let tables = vec![table; scenarios.scenarios.len()];
        let served: BTreeMap<String, f64> =
            targets.iter().filter(|(k, _)| outcome.availability.contains_key(*k)).map(|(k, v)| (k.clone(), *v)).collect();
        let chance = chance_constraint(scenarios, &tables, &served, settings.epsilon)?;
        robust.push(ArchRobustness { arch: *arch, lcosec, chance });
    }
    Ok(EconomicsReport { rows, robust, settings: settings.clone() })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const ECONOMICS_HEADER: [&str; 11] = [
    "scenario",
    "arch",
    "topology",
    "npv",
    "eac",
    "risk_sla",
    "risk_sndl",
    "pv_secval",
    "lcosec",
    "cis",
    "breakeven_pass",
];

pub fn write_economics<W: Write>(out: W, rows: &[EconomicsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ECONOMICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.arch.label().to_string(),
            r.topology.clone(),
            r.npv.to_string(),
            r.eac.to_string(),
            r.risk_sla.to_string(),
            r.risk_sndl.to_string(),
            r.pv_secval.to_string(),
            opt(r.lcosec),
            opt(r.cis),
            opt(r.breakeven_pass),
        ])?;
    }
    w.flush().map_err(|e| Error::Io { path: "csv".into(), source: e })
}

/// Seed-averaged availability and QKD share per architecture, read back
/// from a long-format results table.
pub fn outcomes_from_results<R: Read>(input: R) -> Result<Vec<(Architecture, ServiceOutcome)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::config(format!("results table lacks column {name}")))
    };
    let (arch_c, metric_c, key_c, value_c) = (col("arch")?, col("metric")?, col("class_or_node")?, col("value")?);
    // arch -> metric -> class -> (sum, count)
    let mut acc: BTreeMap<Architecture, BTreeMap<(String, String), (f64, usize)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let metric = &rec[metric_c];
        if metric != "availability" && metric != "rho" {
            continue;
        }
        let arch: Architecture = rec[arch_c].parse()?;
        let value: f64 = rec[value_c].parse().map_err(|_| Error::config(format!("bad value {}", &rec[value_c])))?;
        let e = acc.entry(arch).or_default().entry((metric.to_string(), rec[key_c].to_string())).or_insert((0.0, 0));
        e.0 += value;
        e.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(arch, m)| {
            let mut out = ServiceOutcome::default();
            for ((metric, key), (sum, n)) in m {
                let target = if metric == "availability" { &mut out.availability } else { &mut out.rho };
                target.insert(key, sum / n as f64);
            }
            (arch, out)
        })
        .collect())
}
