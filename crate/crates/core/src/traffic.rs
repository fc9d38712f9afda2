//! Traffic classes, arrival processes and per-node key demand.

use std::collections::BTreeMap;

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::NodeSpec;

/// Class identifiers of the shipped default table, in reporting order.
pub const DEFAULT_CLASS_IDS: [&str; 9] =
    ["GOOSE", "SV", "PMU", "SCADA", "M1", "M2", "M3", "M4", "M5"];

/// Classes whose availability counts as "critical" in sensitivity studies.
pub const CRITICAL_CLASS_IDS: [&str; 3] = ["GOOSE", "SV", "PMU"];

/// Default cap on plaintext rate for one-time-pad classes.
pub const DEFAULT_OTP_CAP_BPS: f64 = 1_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum ClassName {
    GOOSE,
    SV,
    PMU,
    SCADA,
    M1,
    M2,
    M3,
    M4,
    M5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficClass {
    pub id: String,
    pub name: ClassName,
    pub lambda_pps: f64,
    pub s_bits: f64,
    /// End-to-end delay bound.
    #[serde(rename = "L_s")]
    pub delay_bound_s: f64,
    #[serde(rename = "A_target")]
    pub availability_target: f64,
    pub beta: f64,
    /// Session-key refresh frequency.
    pub f_hz: f64,
    pub l_sess_bits: f64,
    /// Per-message authentication key budget.
    pub l_mac_bits: f64,
    pub uses_otp: bool,
    #[serde(rename = "T_conf_years")]
    pub conf_horizon_years: f64,
    pub weight: f64,
    pub q_per_year: f64,
    pub c_sla: f64,
}

impl TrafficClass {
    pub fn validate(&self, otp_cap_bps: f64) -> Result<()> {
        let ok = self.lambda_pps >= 0.0
            && self.s_bits >= 0.0
            && self.beta >= 1.0
            && self.availability_target > 0.0
            && self.availability_target <= 1.0
            && self.weight > 0.0
            && self.f_hz >= 0.0
            && self.l_sess_bits >= 0.0
            && self.l_mac_bits >= 0.0;
        if !ok {
            return Err(Error::config(format!("class {} has out-of-range parameters", self.id)));
        }
        if self.uses_otp && self.lambda_pps * self.s_bits > otp_cap_bps {
            return Err(Error::config(format!(
                "class {} uses OTP but carries {} bit/s (cap {otp_cap_bps})",
                self.id,
                self.lambda_pps * self.s_bits
            )));
        }
        Ok(())
    }

    /// Mean key demand rate in bit/s.
    pub fn mean_demand_bps(&self) -> f64 {
        let otp = if self.uses_otp { self.lambda_pps * self.s_bits } else { 0.0 };
        demand_sym(self, self.lambda_pps) + otp
    }
}

/// Symmetric-key demand: session refresh plus per-message authentication.
pub fn demand_sym(class: &TrafficClass, lambda_pps: f64) -> f64 {
    class.f_hz * class.l_sess_bits + lambda_pps * class.l_mac_bits
}

/// One-time-pad demand, equal to the plaintext rate.
pub fn demand_otp(class: &TrafficClass, lambda_pps: f64) -> Result<f64> {
    if !class.uses_otp {
        return Err(Error::usage(format!("class {} does not use OTP", class.id)));
    }
    Ok(lambda_pps * class.s_bits)
}

/// Ordered set of traffic classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassTable {
    pub classes: Vec<TrafficClass>,
}

impl ClassTable {
    pub fn get(&self, id: &str) -> Option<&TrafficClass> {
        self.classes.iter().find(|c| c.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut TrafficClass> {
        self.classes.iter_mut().find(|c| c.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.id == id)
    }

    pub fn validate(&self, otp_cap_bps: f64) -> Result<()> {
        for (i, c) in self.classes.iter().enumerate() {
            c.validate(otp_cap_bps)?;
            if self.classes[..i].iter().any(|o| o.id == c.id) {
                return Err(Error::config(format!("duplicate class id {}", c.id)));
            }
        }
        Ok(())
    }

    /// Synthetic default table. Rates are per node.
    pub fn synthetic_default() -> Self {
        #[allow(clippy::too_many_arguments)]
        fn class(
            name: ClassName,
            lambda: f64,
            s: f64,
            bound: f64,
            target: f64,
            beta: f64,
            conf: f64,
            weight: f64,
            q: f64,
            c_sla: f64,
        ) -> TrafficClass {
            TrafficClass {
                id: format!("{name:?}"),
                name,
                lambda_pps: lambda,
                s_bits: s,
                delay_bound_s: bound,
                availability_target: target,
                beta,
                f_hz: 1.0,
                l_sess_bits: 256.0,
                l_mac_bits: 128.0,
                uses_otp: name == ClassName::M5,
                conf_horizon_years: conf,
                weight,
                q_per_year: q,
                c_sla,
            }
        }
        use ClassName::*;
        ClassTable {
            classes: vec![
                class(GOOSE, 20.0, 1200.0, 0.004, 0.9999, 3.0, 1.0, 3.0, 6000.0, 40.0),
                class(SV, 50.0, 2000.0, 0.004, 0.9999, 2.0, 1.0, 3.0, 6000.0, 40.0),
                class(PMU, 30.0, 800.0, 0.05, 0.9999, 1.0, 2.0, 3.0, 5000.0, 30.0),
                class(SCADA, 2.0, 2000.0, 1.0, 0.999, 1.0, 5.0, 2.0, 2000.0, 20.0),
                class(M1, 0.5, 4000.0, 5.0, 0.999, 1.0, 10.0, 1.0, 1000.0, 5.0),
                class(M2, 0.2, 8000.0, 2.0, 0.999, 1.0, 5.0, 1.0, 800.0, 10.0),
                class(M3, 1.0, 1000.0, 0.5, 0.9995, 1.0, 3.0, 1.0, 1000.0, 15.0),
                class(M4, 0.05, 16000.0, 60.0, 0.99, 1.0, 10.0, 1.0, 400.0, 5.0),
                class(M5, 0.01, 256.0, 60.0, 0.99, 1.0, 30.0, 1.0, 200.0, 5.0),
            ],
        }
    }
}

/// Dwell-time shape of the two-state burst modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstShape {
    pub on_mean_s: f64,
    pub off_mean_s: f64,
}

impl Default for BurstShape {
    fn default() -> Self {
        BurstShape { on_mean_s: 10.0, off_mean_s: 30.0 }
    }
}

impl BurstShape {
    pub fn p_on(&self) -> f64 {
        self.on_mean_s / (self.on_mean_s + self.off_mean_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArrivalModel {
    Poisson { rate: f64 },
    /// ON/OFF modulated Poisson process with ON rate `burst_factor * base_rate`
    /// and an OFF rate that keeps the long-run mean at `base_rate`.
    Burst { base_rate: f64, burst_factor: f64, on_dwell_s: f64, off_dwell_s: f64 },
}

impl ArrivalModel {
    pub fn for_class(class: &TrafficClass, shape: BurstShape) -> Self {
        if class.beta > 1.0 {
            ArrivalModel::Burst {
                base_rate: class.lambda_pps,
                burst_factor: class.beta,
                on_dwell_s: shape.on_mean_s,
                off_dwell_s: shape.off_mean_s,
            }
        } else {
            ArrivalModel::Poisson { rate: class.lambda_pps }
        }
    }

    /// (ON rate, OFF rate) of the modulation; both equal for Poisson.
    pub fn state_rates(&self) -> (f64, f64) {
        match *self {
            ArrivalModel::Poisson { rate } => (rate, rate),
            ArrivalModel::Burst { base_rate, burst_factor, on_dwell_s, off_dwell_s } => {
                let p_on = on_dwell_s / (on_dwell_s + off_dwell_s);
                let off = base_rate * (1.0 - burst_factor * p_on) / (1.0 - p_on);
                (burst_factor * base_rate, off.max(0.0))
            }
        }
    }

    pub fn mean_rate(&self) -> f64 {
        match *self {
            ArrivalModel::Poisson { rate } => rate,
            ArrivalModel::Burst { on_dwell_s, off_dwell_s, .. } => {
                let p_on = on_dwell_s / (on_dwell_s + off_dwell_s);
                let (on, off) = self.state_rates();
                p_on * on + (1.0 - p_on) * off
            }
        }
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Stateful arrival sampler for one (node, class) pair.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    model: ArrivalModel,
    on: bool,
    dwell_left_s: f64,
    cached: Option<(f64, Option<Poisson<f64>>, Option<Poisson<f64>>)>,
    last_step_all_on: bool,
}

impl ArrivalProcess {
    /// Starts the modulation in its stationary distribution.
    pub fn new<R: Rng + ?Sized>(model: ArrivalModel, rng: &mut R) -> Self {
        let mut p = ArrivalProcess {
            model,
            on: false,
            dwell_left_s: f64::INFINITY,
            cached: None,
            last_step_all_on: false,
        };
        if let ArrivalModel::Burst { on_dwell_s, off_dwell_s, burst_factor, .. } = model {
            let p_on = on_dwell_s / (on_dwell_s + off_dwell_s);
            if burst_factor * p_on > 1.0 {
                warn!("burst factor {burst_factor} with ON share {p_on} cannot preserve the mean rate");
            }
            p.on = rng.random::<f64>() < p_on;
            p.dwell_left_s = p.draw_dwell(rng);
        }
        p
    }

    pub fn model(&self) -> &ArrivalModel {
        &self.model
    }

    pub fn is_on(&self) -> bool {
        self.on
    }

    /// True when the whole of the previous step was spent in the ON state.
    pub fn last_step_all_on(&self) -> bool {
        self.last_step_all_on
    }

    fn draw_dwell<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.model {
            ArrivalModel::Poisson { .. } => f64::INFINITY,
            ArrivalModel::Burst { on_dwell_s, off_dwell_s, .. } => {
                let mean = if self.on { on_dwell_s } else { off_dwell_s };
                Exp::new(1.0 / mean).map(|e| e.sample(rng)).unwrap_or(mean)
            }
        }
    }

    /// Number of arrivals in the next `dt` seconds.
    pub fn sample<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> u64 {
        let (on_rate, off_rate) = self.model.state_rates();
        if self.dwell_left_s >= dt {
            // No state change inside the step: use a cached distribution.
            self.dwell_left_s -= dt;
            self.last_step_all_on = self.on;
            if !matches!(self.cached, Some((cdt, _, _)) if cdt == dt) {
                let mk = |r: f64| Poisson::new(r * dt).ok();
                self.cached = Some((dt, mk(on_rate), mk(off_rate)));
            }
            let (_, on_d, off_d) = self.cached.as_ref().expect("cache filled above");
            let dist = if self.on { on_d } else { off_d };
            return dist.as_ref().map_or(0, |d| d.sample(rng) as u64);
        }
        // Integrate the modulated rate over the step.
        let mut left = dt;
        let mut mean = 0.0;
        self.last_step_all_on = self.on;
        while left > 0.0 {
            let seg = self.dwell_left_s.min(left);
            mean += seg * if self.on { on_rate } else { off_rate };
            left -= seg;
            self.dwell_left_s -= seg;
            if self.dwell_left_s <= 0.0 {
                self.on = !self.on;
                self.last_step_all_on = false;
                self.dwell_left_s = self.draw_dwell(rng);
            }
        }
        poisson_count(mean, rng)
    }
}

/// Draws one step's arrival count for a (possibly bursty) model.
///
/// Convenience wrapper that starts a fresh modulation each call; simulations
/// keep an [`ArrivalProcess`] per node and class instead.
pub fn sample_arrivals<R: Rng + ?Sized>(model: ArrivalModel, dt: f64, rng: &mut R) -> u64 {
    ArrivalProcess::new(model, rng).sample(dt, rng)
}

/// Per-class contribution to one step's key demand in bits.
#[inline]
pub fn class_step_demand(class: &TrafficClass, count: u64, dt: f64) -> f64 {
    let n = count as f64;
    let otp = if class.uses_otp { n * class.s_bits } else { 0.0 };
    class.f_hz * class.l_sess_bits * dt + n * class.l_mac_bits + otp
}

/// Key demand of a node over one step given realized per-class arrivals.
pub fn node_demand(
    node: &NodeSpec,
    classes: &ClassTable,
    arrivals: &BTreeMap<String, u64>,
    dt: f64,
) -> Result<f64> {
    node.classes.iter().try_fold(0.0, |acc, id| {
        let class = classes
            .get(id)
            .ok_or_else(|| Error::usage(format!("node {} hosts unknown class {id}", node.id)))?;
        let count = arrivals
            .get(id)
            .ok_or_else(|| Error::usage(format!("no arrivals given for class {id}")))?;
        Ok(acc + class_step_demand(class, *count, dt))
    })
}

/// Mean key demand rate of a node in bit/s.
pub fn node_mean_demand(node: &NodeSpec, classes: &ClassTable) -> f64 {
    node.classes
        .iter()
        .filter_map(|id| classes.get(id))
        .map(TrafficClass::mean_demand_bps)
        .sum()
}

/// Worst-case demand rate using burst-inflated arrival rates.
pub fn demand_envelope(node: &NodeSpec, classes: &ClassTable) -> f64 {
    node.classes
        .iter()
        .filter_map(|id| classes.get(id))
        .map(|c| {
            let otp = if c.uses_otp { c.lambda_pps * c.s_bits } else { 0.0 };
            c.f_hz * c.l_sess_bits + c.beta * c.lambda_pps * c.l_mac_bits + otp
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;
    use crate::topology::Tier;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn class(f: f64, lambda: f64) -> TrafficClass {
        TrafficClass {
            id: "k".into(),
            name: ClassName::PMU,
            lambda_pps: lambda,
            s_bits: 512.0,
            delay_bound_s: 0.05,
            availability_target: 0.999,
            beta: 1.0,
            f_hz: f,
            l_sess_bits: 256.0,
            l_mac_bits: 128.0,
            uses_otp: false,
            conf_horizon_years: 1.0,
            weight: 1.0,
            q_per_year: 1.0,
            c_sla: 1.0,
        }
    }

    fn node_with(classes: &[&str]) -> NodeSpec {
        NodeSpec {
            id: "n".into(),
            tier: Tier::Edge,
            b_max_bits: 1e6,
            b_min_bits: 0.0,
            phi: 0.0,
            delta_bits_per_s: 0.0,
            classes: classes.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn symmetric_demand_examples() {
        assert_eq!(demand_sym(&class(0.0, 0.0), 0.0), 0.0);
        assert_relative_eq!(demand_sym(&class(1.0, 100.0), 100.0), 13_056.0);
        assert_relative_eq!(demand_sym(&class(5.0, 0.0), 0.0), 1_280.0);
    }

    #[test]
    fn otp_demand_examples() {
        let mut c = class(1.0, 2.0);
        c.uses_otp = true;
        assert_eq!(demand_otp(&c, 0.0).unwrap(), 0.0);
        assert_relative_eq!(demand_otp(&c, 2.0).unwrap(), 1_024.0);
        assert!(matches!(demand_otp(&class(1.0, 2.0), 2.0), Err(Error::Usage(_))));
    }

    #[test]
    fn otp_only_for_low_volume_classes() {
        let mut c = class(1.0, 100.0);
        c.uses_otp = true;
        assert!(c.validate(DEFAULT_OTP_CAP_BPS).is_err());
        c.lambda_pps = 1.0;
        assert!(c.validate(DEFAULT_OTP_CAP_BPS).is_ok());
    }

    #[test]
    fn node_demand_examples() {
        let table = ClassTable { classes: vec![class(1.0, 100.0)] };
        let empty = node_with(&[]);
        assert_eq!(node_demand(&empty, &table, &BTreeMap::new(), 1.0).unwrap(), 0.0);

        let one = node_with(&["k"]);
        let arrivals: BTreeMap<String, u64> = [("k".to_string(), 100)].into();
        assert_relative_eq!(node_demand(&one, &table, &arrivals, 1.0).unwrap(), 13_056.0);

        let mut k2 = class(1.0, 100.0);
        k2.id = "k2".into();
        let table2 = ClassTable { classes: vec![class(1.0, 100.0), k2] };
        let two = node_with(&["k", "k2"]);
        let arrivals2: BTreeMap<String, u64> =
            [("k".to_string(), 100), ("k2".to_string(), 100)].into();
        assert_relative_eq!(node_demand(&two, &table2, &arrivals2, 1.0).unwrap(), 2.0 * 13_056.0);

        assert!(matches!(
            node_demand(&two, &table2, &arrivals, 1.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn envelope_examples() {
        let mut c = class(1.0, 100.0);
        let node = node_with(&["k"]);
        let table = ClassTable { classes: vec![c.clone()] };
        assert_relative_eq!(demand_envelope(&node, &table), node_mean_demand(&node, &table));
        c.beta = 3.0;
        let table = ClassTable { classes: vec![c] };
        assert_relative_eq!(demand_envelope(&node, &table), 38_656.0);
    }

    #[test]
    fn zero_rate_gives_no_arrivals() {
        let mut rng = StreamFactory::new(1).stream("t", 0);
        for _ in 0..100 {
            assert_eq!(sample_arrivals(ArrivalModel::Poisson { rate: 0.0 }, 1.0, &mut rng), 0);
        }
    }

    #[test]
    fn poisson_mean_converges() {
        let mut rng = StreamFactory::new(2).stream("t", 0);
        let mut p = ArrivalProcess::new(ArrivalModel::Poisson { rate: 100.0 }, &mut rng);
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| p.sample(1.0, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 100.0).abs() < 0.5, "mean {mean}");
    }

    #[test]
    fn burst_mean_and_on_state_mean() {
        let mut rng = StreamFactory::new(3).stream("t", 0);
        let model = ArrivalModel::Burst {
            base_rate: 100.0,
            burst_factor: 3.0,
            on_dwell_s: 10.0,
            off_dwell_s: 30.0,
        };
        assert_relative_eq!(model.mean_rate(), 100.0, epsilon = 1e-9);
        let mut p = ArrivalProcess::new(model, &mut rng);
        let (mut total, mut on_total, mut on_steps) = (0u64, 0u64, 0u64);
        let n = 1_000_000;
        for _ in 0..n {
            let c = p.sample(1.0, &mut rng);
            total += c;
            if p.last_step_all_on() {
                on_total += c;
                on_steps += 1;
            }
        }
        let mean = total as f64 / n as f64;
        let on_mean = on_total as f64 / on_steps as f64;
        assert!((mean - 100.0).abs() < 1.0, "mean {mean}");
        assert!((on_mean - 300.0).abs() < 3.0, "on mean {on_mean}");
    }

    #[test]
    fn default_table_is_valid() {
        let t = ClassTable::synthetic_default();
        t.validate(DEFAULT_OTP_CAP_BPS).unwrap();
        let ids: Vec<&str> = t.classes.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, DEFAULT_CLASS_IDS);
        let json = serde_json::to_value(&t).unwrap();
        for key in [
            "id", "name", "lambda_pps", "s_bits", "L_s", "A_target", "beta", "f_hz",
            "l_sess_bits", "l_mac_bits", "uses_otp", "T_conf_years", "weight", "q_per_year", "c_sla",
        ] {
            assert!(json[0].get(key).is_some(), "{key}");
        }
    }

    proptest! {
        #[test]
        fn envelope_dominates_mean(
            params in proptest::collection::vec((0.0f64..5.0, 0.0f64..200.0, 1.0f64..4.0, 0.0f64..1024.0), 1..6)
        ) {
            let classes: Vec<TrafficClass> = params.iter().enumerate().map(|(i, &(f, l, b, mac))| {
                let mut c = class(f, l);
                c.id = format!("c{i}");
                c.beta = b;
                c.l_mac_bits = mac;
                c
            }).collect();
            let ids: Vec<String> = classes.iter().map(|c| c.id.clone()).collect();
            let node = NodeSpec { classes: ids, ..node_with(&[]) };
            let table = ClassTable { classes };
            prop_assert!(demand_envelope(&node, &table) >= node_mean_demand(&node, &table) - 1e-9);
        }

        #[test]
        fn node_demand_linear_in_dt(count in 0u64..1000, f in 0.0f64..5.0, dt in 0.1f64..10.0) {
            // With zero arrivals the session term scales linearly in dt.
            let c = class(f, 10.0);
            let table = ClassTable { classes: vec![c] };
            let node = node_with(&["k"]);
            let zero: BTreeMap<String, u64> = [("k".to_string(), 0)].into();
            let d1 = node_demand(&node, &table, &zero, dt).unwrap();
            let d2 = node_demand(&node, &table, &zero, 2.0 * dt).unwrap();
            prop_assert!((d2 - 2.0 * d1).abs() <= 1e-9 * d2.abs().max(1.0));
            let some: BTreeMap<String, u64> = [("k".to_string(), count)].into();
            let d3 = node_demand(&node, &table, &some, dt).unwrap();
            prop_assert!((d3 - d1 - count as f64 * 128.0).abs() < 1e-6);
        }
    }
}
