//! CSV tables written by the experiment runner.

use std::io::Write;

use crate::error::{Error, Result};
use crate::simulator::{MonteCarloResult, SweepCell};
use crate::traffic::CRITICAL_CLASS_IDS;

pub const RESULTS_HEADER: [&str; 8] =
    ["run_id", "seed", "scenario", "arch", "topology", "metric", "class_or_node", "value"];

fn flush<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Io { path: "csv".into(), source: e.into_error() })?
        .flush()
        .map_err(|e| Error::Io { path: "csv".into(), source: e })
}

fn run_id(digest: &str, arch: &str, seed: u64) -> String {
    format!("{}-{arch}-{seed}", &digest[..digest.len().min(12)])
}

/// Long-format per-seed metrics.
pub fn write_results<W: Write>(out: W, scenario: &str, topology: &str, results: &[MonteCarloResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for mc in results {
        let arch = mc.arch.label();
        for r in &mc.runs {
            let id = run_id(&r.digest, arch, r.seed);
            for (metric, key, value) in r.metrics() {
                w.write_record([
                    id.as_str(),
                    &r.seed.to_string(),
                    scenario,
                    arch,
                    topology,
                    metric,
                    &key,
                    &value.to_string(),
                ])?;
            }
        }
    }
    flush(w)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Across-seed means with 95% CI bounds and quantiles.
pub fn write_summary<W: Write>(out: W, scenario: &str, topology: &str, results: &[MonteCarloResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario", "arch", "topology", "metric", "class_or_node", "n", "mean", "ci95_low", "ci95_high", "p5", "p50",
        "p95",
    ])?;
    for mc in results {
        for ((metric, key), s) in mc.summary() {
            w.write_record([
                scenario.to_string(),
                mc.arch.label().to_string(),
                topology.to_string(),
                metric,
                key,
                s.n.to_string(),
                s.estimate.mean.to_string(),
                opt(s.estimate.lower()),
                opt(s.estimate.upper()),
                s.p5.to_string(),
                s.p50.to_string(),
                s.p95.to_string(),
            ])?;
        }
    }
    flush(w)
}

/// One row per cell and seed, ready for heatmaps and violins.
pub fn write_sweep<W: Write>(out: W, cells: &[SweepCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = cells.first() else {
        return flush(w);
    };
    let mut header: Vec<String> = vec!["cell".into()];
    header.extend(first.assignment.iter().map(|(p, _)| p.clone()));
    header.extend(["arch", "seed", "min_critical_availability", "median_p_out", "mean_fb_occupancy"].map(String::from));
    let class_ids: Vec<String> = first.result.runs.first().map(|r| r.classes.keys().cloned().collect()).unwrap_or_default();
    header.extend(class_ids.iter().map(|k| format!("availability_{k}")));
    w.write_record(&header)?;
    for (ci, cell) in cells.iter().enumerate() {
        for r in &cell.result.runs {
            let mut row: Vec<String> = vec![ci.to_string()];
            row.extend(cell.assignment.iter().map(|(_, v)| v.to_string()));
            let p_out: Vec<f64> = r.nodes.values().map(|n| n.p_out).collect();
            let fb: f64 = r.nodes.values().map(|n| n.fb_occupancy).sum::<f64>() / r.nodes.len().max(1) as f64;
            row.push(r.arch.label().to_string());
            row.push(r.seed.to_string());
            row.push(opt(r.min_critical_availability()));
            row.push(super::quantile(&p_out, 0.5).to_string());
            row.push(fb.to_string());
            row.extend(class_ids.iter().map(|k| opt(r.classes.get(k).map(|c| c.availability))));
            w.write_record(&row)?;
        }
    }
    flush(w)
}

/// Seed-averaged minimum availability over the critical classes of a cell.
pub fn cell_min_critical_availability(cell: &SweepCell) -> f64 {
    let out = cell.result.outcome();
    CRITICAL_CLASS_IDS
        .iter()
        .filter_map(|k| out.availability.get(*k).copied())
        .fold(f64::INFINITY, f64::min)
}
