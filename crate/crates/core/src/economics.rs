//! Discounted costs, risk, security output and the levelized metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::architecture::Architecture;
use crate::error::{Error, Result};
use crate::topology::{Tier, Topology, TopologyKind};
use crate::traffic::ClassTable;

/// Ratio metrics whose denominator vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RatioError {
    #[error("security output is not positive")]
    Undefined,
    #[error("no incremental security output over the baseline")]
    NotComparable,
}

/// A per-year quantity over `0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Curve {
    Constant { value: f64 },
    /// Linear from `from` in year 0 to `to` in year `T`.
    Ramp { from: f64, to: f64 },
    Series { values: Vec<f64> },
}

impl Curve {
    pub fn at(&self, t: usize, horizon: usize) -> f64 {
        match self {
            Curve::Constant { value } => *value,
            Curve::Ramp { from, to } => {
                if horizon == 0 {
                    *from
                } else {
                    from + (to - from) * t.min(horizon) as f64 / horizon as f64
                }
            }
            Curve::Series { values } => values
                .get(t)
                .or(values.last())
                .copied()
                .unwrap_or(0.0),
        }
    }

    pub fn scaled(&self, m: f64) -> Curve {
        match self {
            Curve::Constant { value } => Curve::Constant { value: value * m },
            Curve::Ramp { from, to } => Curve::Ramp { from: from * m, to: to * m },
            Curve::Series { values } => Curve::Series { values: values.iter().map(|v| v * m).collect() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub power_kw: f64,
    #[serde(default = "one")]
    pub count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lease {
    pub rate_per_km_year: f64,
    pub km: f64,
}

fn one() -> f64 {
    1.0
}

/// Cash-flow inputs of one deployment. Per-year series cover `0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub horizon_years: usize,
    pub discount_rate: f64,
    pub capex: Vec<f64>,
    #[serde(default)]
    pub devices: Vec<Device>,
    pub hours: Curve,
    pub tariff: Curve,
    /// Monthly tariff multipliers; the year uses their mean.
    #[serde(default)]
    pub monthly_tariff_weights: Option<[f64; 12]>,
    #[serde(default)]
    pub leases: Vec<Lease>,
    pub om_fraction: Curve,
    /// Years an asset stays in service; `None` keeps it for the whole horizon.
    #[serde(default)]
    pub asset_life_years: Option<usize>,
    /// Terminal salvage; negative values are recoveries.
    #[serde(default)]
    pub salvage: f64,
    /// First year with operating costs.
    #[serde(default)]
    pub service_start: usize,
}

impl CostModel {
    pub fn empty(horizon_years: usize, discount_rate: f64) -> Self {
        CostModel {
            horizon_years,
            discount_rate,
            capex: vec![0.0; horizon_years + 1],
            devices: Vec::new(),
            hours: Curve::Constant { value: 8760.0 },
            tariff: Curve::Constant { value: 0.0 },
            monthly_tariff_weights: None,
            leases: Vec::new(),
            om_fraction: Curve::Constant { value: 0.0 },
            asset_life_years: None,
            salvage: 0.0,
            service_start: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount_rate > 0.0) {
            return Err(Error::config(format!("discount rate {} must be positive", self.discount_rate)));
        }
        if self.horizon_years < 1 {
            return Err(Error::config("horizon must be at least one year"));
        }
        if self.capex.len() != self.horizon_years + 1 {
            return Err(Error::config(format!(
                "capex series has {} entries, expected {}",
                self.capex.len(),
                self.horizon_years + 1
            )));
        }
        Ok(())
    }

    /// `rho_{tau -> t}`: step survival over the asset life.
    pub fn survival(&self, tau: usize, t: usize) -> f64 {
        match self.asset_life_years {
            _ if t < tau => 0.0,
            Some(life) if t - tau >= life => 0.0,
            _ => 1.0,
        }
    }

    pub fn effective_tariff(&self, t: usize) -> f64 {
        let base = self.tariff.at(t, self.horizon_years);
        match &self.monthly_tariff_weights {
            Some(w) => base * w.iter().sum::<f64>() / 12.0,
            None => base,
        }
    }

    pub fn opex_series(&self) -> Vec<f64> {
        (0..=self.horizon_years).map(|t| opex_year(self, t)).collect()
    }
}

/// Present value of costs, year-0 flows undiscounted, salvage at year `T`.
pub fn npv_cost(model: &CostModel, opex: &[f64], risk: &[f64]) -> Result<f64> {
    let n = model.horizon_years + 1;
    if model.capex.len() != n || opex.len() != n || risk.len() != n {
        return Err(Error::usage(format!(
            "series lengths {}/{}/{} do not cover years 0..={}",
            model.capex.len(),
            opex.len(),
            risk.len(),
            model.horizon_years
        )));
    }
    let flows: Vec<f64> = (0..n).map(|t| model.capex[t] + opex[t] + risk[t]).collect();
    let r = model.discount_rate;
    Ok(present_value(&flows, r) - model.salvage / (1.0 + r).powi(model.horizon_years as i32))
}

pub fn present_value(flows: &[f64], r: f64) -> f64 {
    flows
        .iter()
        .enumerate()
        .map(|(t, f)| f / (1.0 + r).powi(t as i32))
        .sum()
}

/// Capital-recovery conversion of an NPV into a level annual payment.
pub fn eac(npv: f64, r: f64, horizon_years: usize) -> f64 {
    let log_growth = horizon_years as f64 * r.ln_1p();
    npv * r * log_growth.exp() / log_growth.exp_m1()
}

/// Energy, lease and O&M costs of year `t`.
pub fn opex_year(model: &CostModel, t: usize) -> f64 {
    if t < model.service_start {
        return 0.0;
    }
    let horizon = model.horizon_years;
    let kw: f64 = model.devices.iter().map(|d| d.power_kw * d.count).sum();
    let energy = kw * model.hours.at(t, horizon) * model.effective_tariff(t);
    let lease: f64 = model.leases.iter().map(|l| l.rate_per_km_year * l.km).sum();
    let base: f64 = (0..=t.min(model.capex.len().saturating_sub(1)))
        .map(|tau| model.capex[tau] * model.survival(tau, t))
        .sum();
    energy + lease + model.om_fraction.at(t, horizon) * base
}

/// Penalty and confidentiality exposure of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRisk {
    pub c_sla: f64,
    /// Penalty exposure `Q` per year.
    pub volume: f64,
    /// Annualized confidentiality value at risk.
    pub v_conf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskModel {
    pub classes: BTreeMap<String, ClassRisk>,
    pub p_br_qkd: Curve,
    pub p_br_pqc: Curve,
    pub horizon_years: usize,
}

impl RiskModel {
    pub fn validate(&self) -> Result<()> {
        for t in 0..=self.horizon_years {
            for p in [self.p_br_qkd.at(t, self.horizon_years), self.p_br_pqc.at(t, self.horizon_years)] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!("breach hazard {p} outside [0, 1]")));
                }
            }
        }
        if self.classes.values().any(|c| c.c_sla < 0.0 || c.volume < 0.0 || c.v_conf < 0.0) {
            return Err(Error::config("risk values must be non-negative"));
        }
        Ok(())
    }
}

/// `sum_k c_sla (1 - A_k) Q_k`; classes without an availability are skipped.
pub fn risk_sla(availability: &BTreeMap<String, f64>, risk: &RiskModel) -> f64 {
    risk.classes
        .iter()
        .filter_map(|(k, c)| availability.get(k).map(|a| c.c_sla * (1.0 - a) * c.volume))
        .sum()
}

/// `(1 - rho) p_pqc + rho p_qkd`.
pub fn hybrid_hazard(rho: f64, p_pqc: f64, p_qkd: f64) -> f64 {
    (1.0 - rho) * p_pqc + rho * p_qkd
}

/// Breach hazard of class `k` in year `t`. Hybrid classes without a
/// simulated `rho` are treated as fully on the PQC path.
pub fn breach_hazard(risk: &RiskModel, arch: Architecture, rho: Option<f64>, t: usize) -> f64 {
    let p_qkd = risk.p_br_qkd.at(t, risk.horizon_years);
    let p_pqc = risk.p_br_pqc.at(t, risk.horizon_years);
    match arch {
        Architecture::QkdOnly => p_qkd,
        Architecture::PqcOnly => p_pqc,
        Architecture::Hybrid => hybrid_hazard(rho.unwrap_or(0.0), p_pqc, p_qkd),
    }
}

/// `sum_k p_br(a) V_conf`.
pub fn risk_sndl(risk: &RiskModel, arch: Architecture, rho: &BTreeMap<String, f64>, t: usize) -> f64 {
    risk.classes
        .iter()
        .map(|(k, c)| breach_hazard(risk, arch, rho.get(k).copied(), t) * c.v_conf)
        .sum()
}

/// Output measure of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassOutput {
    pub weight: f64,
    pub q: f64,
}

/// `sum_k w_k A_k q_k`.
pub fn secval_year(availability: &BTreeMap<String, f64>, output: &BTreeMap<String, ClassOutput>) -> f64 {
    output
        .iter()
        .filter_map(|(k, o)| availability.get(k).map(|a| o.weight * a * o.q))
        .sum()
}

pub fn lcosec(npv: f64, pv_secval: f64) -> std::result::Result<f64, RatioError> {
    if pv_secval > 0.0 {
        Ok(npv / pv_secval)
    } else {
        Err(RatioError::Undefined)
    }
}

pub fn cis(delta_npv: f64, delta_pv: f64) -> std::result::Result<f64, RatioError> {
    if delta_pv > 0.0 {
        Ok(delta_npv / delta_pv)
    } else {
        Err(RatioError::NotComparable)
    }
}

/// Net benefit is non-negative at shadow price `pi`.
pub fn breakeven(pi: f64, delta_pv: f64, delta_npv: f64) -> bool {
    pi * delta_pv >= delta_npv
}

/// Multipliers and replacements a scenario applies to the base models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub capex: f64,
    pub energy: f64,
    pub lease: f64,
    pub om: f64,
    pub pqc_hazard: f64,
    pub qkd_hazard: f64,
    pub sla_penalty: f64,
    pub discount_rate: Option<f64>,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            capex: 1.0,
            energy: 1.0,
            lease: 1.0,
            om: 1.0,
            pqc_hazard: 1.0,
            qkd_hazard: 1.0,
            sla_penalty: 1.0,
            discount_rate: None,
        }
    }
}

impl Overrides {
    pub fn apply(&self, cost: &mut CostModel, risk: &mut RiskModel) {
        cost.capex.iter_mut().for_each(|c| *c *= self.capex);
        cost.tariff = cost.tariff.scaled(self.energy);
        cost.leases.iter_mut().for_each(|l| l.rate_per_km_year *= self.lease);
        cost.om_fraction = cost.om_fraction.scaled(self.om);
        if let Some(r) = self.discount_rate {
            cost.discount_rate = r;
        }
        risk.p_br_pqc = risk.p_br_pqc.scaled(self.pqc_hazard);
        risk.p_br_qkd = risk.p_br_qkd.scaled(self.qkd_hazard);
        risk.classes.values_mut().for_each(|c| c.c_sla *= self.sla_penalty);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub probability: f64,
    #[serde(default)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn single() -> Self {
        ScenarioSet {
            scenarios: vec![Scenario { id: "base".into(), probability: 1.0, overrides: Overrides::default() }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::config("scenario set is empty"));
        }
        if self.scenarios.iter().any(|s| !(0.0..=1.0).contains(&s.probability)) {
            return Err(Error::config("scenario probabilities must lie in [0, 1]"));
        }
        let total: f64 = self.scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("scenario probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }
}

/// Probability-weighted summary of a per-scenario metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustSummary {
    pub expected: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub cvar: f64,
    pub cvar_level: f64,
}

pub const DEFAULT_CVAR_LEVEL: f64 = 0.95;

/// Smallest value whose cumulative probability reaches `p`.
pub fn weighted_quantile(values: &[f64], probs: &[f64], p: f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| probs[i] > 0.0).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut cum = 0.0;
    for &i in &idx {
        cum += probs[i];
        if cum >= p - 1e-12 {
            return values[i];
        }
    }
    idx.last().map_or(f64::NAN, |&i| values[i])
}

/// Mean of the upper `1 - level` probability tail.
pub fn cvar(values: &[f64], probs: &[f64], level: f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| probs[i] > 0.0).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let tail = 1.0 - level;
    if tail <= 0.0 {
        return idx.first().map_or(f64::NAN, |&i| values[i]);
    }
    let (mut mass, mut acc) = (0.0, 0.0);
    for &i in &idx {
        let take = probs[i].min(tail - mass);
        if take <= 0.0 {
            break;
        }
        acc += take * values[i];
        mass += take;
    }
    acc / mass
}

pub fn expected_lcosec(scenarios: &ScenarioSet, values: &[f64], cvar_level: f64) -> Result<RobustSummary> {
    if values.len() != scenarios.scenarios.len() {
        return Err(Error::usage("one value per scenario required"));
    }
    scenarios.validate()?;
    let probs = scenarios.probabilities();
    Ok(RobustSummary {
        expected: values.iter().zip(&probs).map(|(v, p)| v * p).sum(),
        p5: weighted_quantile(values, &probs, 0.05),
        p50: weighted_quantile(values, &probs, 0.5),
        p95: weighted_quantile(values, &probs, 0.95),
        cvar: cvar(values, &probs, cvar_level),
        cvar_level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChanceVerdict {
    pub pass: bool,
    pub mass: f64,
}

/// Probability mass of scenarios meeting every class target in every year.
///
/// `availability[w][k]` holds the yearly availabilities of class `k` under
/// scenario `w`; classes absent from `targets` are ignored.
pub fn chance_constraint(
    scenarios: &ScenarioSet,
    availability: &[BTreeMap<String, Vec<f64>>],
    targets: &BTreeMap<String, f64>,
    eps: f64,
) -> Result<ChanceVerdict> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::usage(format!("epsilon {eps} outside [0, 1)")));
    }
    if availability.len() != scenarios.scenarios.len() {
        return Err(Error::usage("one availability table per scenario required"));
    }
    let mass: f64 = scenarios
        .scenarios
        .iter()
        .zip(availability)
        .filter(|(_, table)| {
            targets.iter().all(|(k, target)| {
                table.get(k).is_some_and(|years| years.iter().all(|a| a >= target))
            })
        })
        .map(|(s, _)| s.probability)
        .sum();
    Ok(ChanceVerdict { pass: mass >= 1.0 - eps - 1e-12, mass })
}

/// Synthetic unit prices used to build cost and risk models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceBook {
    pub horizon_years: usize,
    pub discount_rate: f64,
    /// Transmitter/receiver pair per QKD link.
    pub qkd_link_capex: f64,
    pub qkd_link_power_kw: f64,
    pub trusted_node_capex: f64,
    pub trusted_node_power_kw: f64,
    pub kms_capex_per_node: f64,
    /// Dedicated dark fibre for the quantum channel.
    pub fiber_lease_per_km_year: f64,
    pub pqc_capex_per_node: f64,
    pub pqc_power_kw: f64,
    pub om_fraction: f64,
    pub tariff_per_kwh: f64,
    pub hours_per_year: f64,
    pub monthly_tariff_weights: Option<[f64; 12]>,
    pub asset_life_years: Option<usize>,
    pub salvage: f64,
    pub p_br_qkd: Curve,
    pub p_br_pqc: Curve,
    /// Confidentiality value per hosting node and year of required secrecy.
    pub v_conf_per_node_year: f64,
}

impl Default for PriceBook {
    fn default() -> Self {
        PriceBook {
            horizon_years: 10,
            discount_rate: 0.06,
            qkd_link_capex: 150_000.0,
            qkd_link_power_kw: 0.4,
            trusted_node_capex: 250_000.0,
            trusted_node_power_kw: 1.0,
            kms_capex_per_node: 20_000.0,
            fiber_lease_per_km_year: 300.0,
            pqc_capex_per_node: 8_000.0,
            pqc_power_kw: 0.05,
            om_fraction: 0.06,
            tariff_per_kwh: 0.12,
            hours_per_year: 8760.0,
            monthly_tariff_weights: None,
            asset_life_years: None,
            salvage: 0.0,
            p_br_qkd: Curve::Constant { value: 1e-4 },
            p_br_pqc: Curve::Ramp { from: 1e-3, to: 1e-2 },
            v_conf_per_node_year: 20_000.0,
        }
    }
}

/// Trusted relays are the class-free intermediate nodes of long-haul chains.
fn is_trusted_relay(topology: &Topology, i: usize) -> bool {
    let n = &topology.nodes[i];
    topology.kind == TopologyKind::LongHaul && n.tier == Tier::Aggregation && n.classes.is_empty()
}

fn hosting_counts(topology: &Topology) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for n in &topology.nodes {
        for c in &n.classes {
            *counts.entry(c.clone()).or_insert(0.0) += 1.0;
        }
    }
    counts
}

impl PriceBook {
    pub fn cost_model(&self, topology: &Topology, arch: Architecture) -> CostModel {
        let mut capex0 = 0.0;
        let mut devices = Vec::new();
        let mut leases = Vec::new();
        if arch.uses_qkd() {
            let links = topology.links.len() as f64;
            let trusted = (0..topology.nodes.len()).filter(|&i| is_trusted_relay(topology, i)).count() as f64;
            capex0 += links * self.qkd_link_capex
                + trusted * self.trusted_node_capex
                + topology.nodes.len() as f64 * self.kms_capex_per_node;
            devices.push(Device { power_kw: self.qkd_link_power_kw, count: links });
            if trusted > 0.0 {
                devices.push(Device { power_kw: self.trusted_node_power_kw, count: trusted });
            }
            leases.extend(
                topology
                    .links
                    .iter()
                    .map(|l| Lease { rate_per_km_year: self.fiber_lease_per_km_year, km: l.d_km }),
            );
        }
        if arch.uses_pqc() {
            let endpoints = topology.nodes.iter().filter(|n| !n.classes.is_empty()).count() as f64;
            capex0 += endpoints * self.pqc_capex_per_node;
            devices.push(Device { power_kw: self.pqc_power_kw, count: endpoints });
        }
        let mut capex = vec![0.0; self.horizon_years + 1];
        capex[0] = capex0;
        CostModel {
            horizon_years: self.horizon_years,
            discount_rate: self.discount_rate,
            capex,
            devices,
            hours: Curve::Constant { value: self.hours_per_year },
            tariff: Curve::Constant { value: self.tariff_per_kwh },
            monthly_tariff_weights: self.monthly_tariff_weights,
            leases,
            om_fraction: Curve::Constant { value: self.om_fraction },
            asset_life_years: self.asset_life_years,
            salvage: self.salvage,
            service_start: 1,
        }
    }

    pub fn risk_model(&self, topology: &Topology, classes: &ClassTable) -> RiskModel {
        let counts = hosting_counts(topology);
        let classes = classes
            .classes
            .iter()
            .filter_map(|c| {
                counts.get(&c.id).map(|&n| {
                    let risk = ClassRisk {
                        c_sla: c.c_sla,
                        volume: c.q_per_year * n,
                        v_conf: self.v_conf_per_node_year * c.conf_horizon_years * n,
                    };
                    (c.id.clone(), risk)
                })
            })
            .collect();
        RiskModel {
            classes,
            p_br_qkd: self.p_br_qkd.clone(),
            p_br_pqc: self.p_br_pqc.clone(),
            horizon_years: self.horizon_years,
        }
    }

    pub fn output(&self, topology: &Topology, classes: &ClassTable) -> BTreeMap<String, ClassOutput> {
        let counts = hosting_counts(topology);
        classes
            .classes
            .iter()
            .filter_map(|c| counts.get(&c.id).map(|&n| (c.id.clone(), ClassOutput { weight: c.weight, q: c.q_per_year * n })))
            .collect()
    }
}

/// Simulated service quality feeding the economics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ServiceOutcome {
    pub availability: BTreeMap<String, f64>,
    /// QKD-supported share of each class's demand.
    pub rho: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub npv: f64,
    pub eac: f64,
    /// Present value of the SLA penalty stream.
    pub risk_sla: f64,
    /// Present value of the SNDL stream.
    pub risk_sndl: f64,
    pub pv_secval: f64,
    pub lcosec: Option<f64>,
}

/// Discounted evaluation with the simulated outcome held in every service year.
pub fn evaluate(
    cost: &CostModel,
    risk: &RiskModel,
    output: &BTreeMap<String, ClassOutput>,
    arch: Architecture,
    outcome: &ServiceOutcome,
) -> Result<Evaluation> {
    cost.validate()?;
    let n = cost.horizon_years + 1;
    let active = |t: usize| t >= cost.service_start;
    let sla: Vec<f64> = (0..n)
        .map(|t| if active(t) { risk_sla(&outcome.availability, risk) } else { 0.0 })
        .collect();
    let sndl: Vec<f64> = (0..n)
        .map(|t| if active(t) { risk_sndl(risk, arch, &outcome.rho, t) } else { 0.0 })
        .collect();
    let secval: Vec<f64> = (0..n)
        .map(|t| if active(t) { secval_year(&outcome.availability, output) } else { 0.0 })
        .collect();
    let total_risk: Vec<f64> = sla.iter().zip(&sndl).map(|(a, b)| a + b).collect();
    let npv = npv_cost(cost, &cost.opex_series(), &total_risk)?;
    let r = cost.discount_rate;
    let pv_secval = present_value(&secval, r);
    Ok(Evaluation {
        npv,
        eac: eac(npv, r, cost.horizon_years),
        risk_sla: present_value(&sla, r),
        risk_sndl: present_value(&sndl, r),
        pv_secval,
        lcosec: lcosec(npv, pv_secval).ok(),
    })
}
