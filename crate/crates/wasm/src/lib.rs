//! Browser bindings: a rate curve, a buffer trace and an economics table,
//! each returned as a JSON string.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use qgs_core::buffer::{run_trace, Plant};
use qgs_core::economics::{evaluate, PriceBook, ServiceOutcome};
use qgs_core::simulator::{compile_schedule, DisturbanceEvent, DisturbanceKind};
use qgs_core::supply::{rate_from_loss, CurveSet, RateCurve};
use qgs_core::topology::{build_longhaul, build_metro};
use qgs_core::traffic::ClassTable;
use qgs_core::Architecture;

/// Longest trace the page will plot.
const MAX_POINTS: usize = 1500;

type Res = Result<String, String>;

fn to_js(r: Res) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

fn text<E: ToString>(e: E) -> String {
    e.to_string()
}

pub fn rate_curve_json(kind: &str, r0_bps: f64, eta_per_db: f64, max_db: f64, points: u32) -> Res {
    let curve = match kind {
        "dv" => RateCurve::Dv { r0_bps, eta_per_db },
        "cv" => RateCurve::Cv { r0_bps, eta_per_db, cutoff_db: qgs_core::supply::DEFAULT_CV_CUTOFF_DB },
        other => return Err(format!("unknown curve kind {other}")),
    };
    curve.validate().map_err(text)?;
    if points < 2 || !(max_db > 0.0) {
        return Err("need at least two points over a positive loss range".into());
    }
    let pts = (0..points)
        .map(|i| {
            let loss = max_db * f64::from(i) / f64::from(points - 1);
            rate_from_loss(&curve, loss).map(|r| [loss, r])
        })
        .collect::<qgs_core::Result<Vec<_>>>()
        .map_err(text)?;
    serde_json::to_string(&pts).map_err(text)
}

#[derive(Serialize)]
struct Trace {
    t: Vec<u64>,
    level: Vec<f64>,
    chi: Vec<bool>,
    b_min: f64,
    b_max: f64,
    outage_fraction: f64,
}

/// Trace of end node `A` on a 160 km, one-relay chain with a key-rate
/// outage on its link.
#[allow(clippy::too_many_arguments)]
pub fn buffer_trace_json(
    arch: &str,
    r0_bps: f64,
    b_max_bits: f64,
    b_min_bits: f64,
    phi: f64,
    outage_start_s: f64,
    outage_len_s: f64,
    steps: u32,
    seed: u64,
) -> Res {
    let arch: Architecture = arch.parse().map_err(text)?;
    let mut topo = build_longhaul(160.0, 1, false).map_err(text)?;
    for n in &mut topo.nodes {
        n.b_max_bits = b_max_bits;
        n.b_min_bits = b_min_bits;
        n.phi = if arch == Architecture::Hybrid { phi } else { 0.0 };
    }
    topo.validate().map_err(text)?;
    let classes = ClassTable::synthetic_default();
    let mut curves = CurveSet::synthetic_default();
    curves.curves.insert("dv".into(), RateCurve::Dv { r0_bps, eta_per_db: 0.1 });
    let script = if outage_len_s > 0.0 {
        vec![DisturbanceEvent {
            kind: DisturbanceKind::KeyRateOutage,
            link: "h0".into(),
            start_s: outage_start_s,
            duration_s: outage_len_s,
            magnitude_db: None,
        }]
    } else {
        Vec::new()
    };
    let horizon = u64::from(steps.max(1));
    let schedule = compile_schedule(&topo, &curves, arch, &script, horizon, 1.0).map_err(text)?;
    let plant = Plant::new(&topo, &classes, &schedule, 1.5).map_err(text)?;
    let records = run_trace(&plant, horizon, seed).map_err(text)?;
    let a = topo.node_index("A").ok_or("missing node A")?;
    let stride = records.len().div_ceil(MAX_POINTS).max(1);
    let outage = records.iter().filter(|r| r.nodes[a].level < b_min_bits).count();
    let kept: Vec<_> = records.iter().step_by(stride).collect();
    let trace = Trace {
        t: kept.iter().map(|r| r.t).collect(),
        level: kept.iter().map(|r| r.nodes[a].level).collect(),
        chi: kept.iter().map(|r| r.nodes[a].chi).collect(),
        b_min: b_min_bits,
        b_max: b_max_bits,
        outage_fraction: outage as f64 / records.len() as f64,
    };
    serde_json::to_string(&trace).map_err(text)
}

/// LCoSec of the three architectures on a 20-substation metro ring with
/// the given availabilities, under scaled PQC hazard and QKD capex.
pub fn economics_json(pqc_hazard: f64, qkd_capex: f64, avail_qkd: f64, rho_hybrid: f64) -> Res {
    if !(pqc_hazard >= 0.0 && qkd_capex >= 0.0) || !(0.0..=1.0).contains(&avail_qkd) || !(0.0..=1.0).contains(&rho_hybrid) {
        return Err("multipliers must be non-negative and shares in [0, 1]".into());
    }
    let topo = build_metro(20, 60.0, 2, 1).map_err(text)?;
    let classes = ClassTable::synthetic_default();
    let mut prices = PriceBook::default();
    prices.qkd_link_capex *= qkd_capex;
    prices.trusted_node_capex *= qkd_capex;
    prices.p_br_pqc = prices.p_br_pqc.scaled(pqc_hazard);
    let output = prices.output(&topo, &classes);
    let rows = Architecture::ALL
        .iter()
        .map(|&arch| {
            let (a, rho) = match arch {
                Architecture::PqcOnly => (1.0, 0.0),
                Architecture::QkdOnly => (avail_qkd, 1.0),
                Architecture::Hybrid => (1.0, rho_hybrid),
            };
            let outcome = ServiceOutcome {
                availability: classes.classes.iter().map(|c| (c.id.clone(), a)).collect(),
                rho: classes.classes.iter().map(|c| (c.id.clone(), rho)).collect(),
            };
            let cost = prices.cost_model(&topo, arch);
            let risk = prices.risk_model(&topo, &classes);
            evaluate(&cost, &risk, &output, arch, &outcome).map(|ev| {
                json!({
                    "arch": arch.label(),
                    "npv": ev.npv,
                    "eac": ev.eac,
                    "risk_sla": ev.risk_sla,
                    "risk_sndl": ev.risk_sndl,
                    "lcosec": ev.lcosec,
                })
            })
        })
        .collect::<qgs_core::Result<Vec<_>>>()
        .map_err(text)?;
    serde_json::to_string(&rows).map_err(text)
}

#[wasm_bindgen]
pub fn rate_curve(kind: &str, r0_bps: f64, eta_per_db: f64, max_db: f64, points: u32) -> Result<String, JsError> {
    to_js(rate_curve_json(kind, r0_bps, eta_per_db, max_db, points))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn buffer_trace(
    arch: &str,
    r0_bps: f64,
    b_max_bits: f64,
    b_min_bits: f64,
    phi: f64,
    outage_start_s: f64,
    outage_len_s: f64,
    steps: u32,
    seed: u64,
) -> Result<String, JsError> {
    to_js(buffer_trace_json(arch, r0_bps, b_max_bits, b_min_bits, phi, outage_start_s, outage_len_s, steps, seed))
}

#[wasm_bindgen]
pub fn economics(pqc_hazard: f64, qkd_capex: f64, avail_qkd: f64, rho_hybrid: f64) -> Result<String, JsError> {
    to_js(economics_json(pqc_hazard, qkd_capex, avail_qkd, rho_hybrid))
}
