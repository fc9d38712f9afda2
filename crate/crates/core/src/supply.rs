//! Loss-to-rate conversion, supply schedules and link-budget allocation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;

/// Default cutoff of the continuous-variable curve family.
pub const DEFAULT_CV_CUTOFF_DB: f64 = 25.0;

fn default_cutoff() -> f64 {
    DEFAULT_CV_CUTOFF_DB
}

/// Secret-key rate as a function of link loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum RateCurve {
    /// Discrete-variable exponential fit `r0 * 10^(-eta * loss)`.
    Dv { r0_bps: f64, eta_per_db: f64 },
    /// Same family, collapsing to zero beyond `cutoff_db`.
    Cv {
        r0_bps: f64,
        eta_per_db: f64,
        #[serde(default = "default_cutoff")]
        cutoff_db: f64,
    },
    /// Measured `(loss dB, rate bit/s)` points, interpolated linearly.
    Tabulated { points: Vec<(f64, f64)> },
    /// Loss-independent supply of PQC handshake key material.
    #[serde(rename = "pqc")]
    PqcHandshake { hs_per_s: f64, bits_per_hs: f64 },
}

impl RateCurve {
    pub fn dv_default() -> Self {
        RateCurve::Dv { r0_bps: 1e6, eta_per_db: 0.1 }
    }

    pub fn is_pqc(&self) -> bool {
        matches!(self, RateCurve::PqcHandshake { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            RateCurve::Dv { r0_bps, eta_per_db } => *r0_bps > 0.0 && *eta_per_db > 0.0,
            RateCurve::Cv { r0_bps, eta_per_db, cutoff_db } => {
                *r0_bps > 0.0 && *eta_per_db > 0.0 && *cutoff_db > 0.0
            }
            RateCurve::Tabulated { points } => {
                !points.is_empty()
                    && points.iter().all(|&(l, r)| l >= 0.0 && r >= 0.0)
                    && points.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1)
            }
            RateCurve::PqcHandshake { hs_per_s, bits_per_hs } => {
                *hs_per_s >= 0.0 && *bits_per_hs >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid rate curve {self:?}")))
        }
    }
}

/// Key generation rate in bit/s at the given loss.
pub fn rate_from_loss(curve: &RateCurve, loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) {
        return Err(Error::usage(format!("loss must be non-negative, got {loss_db}")));
    }
    Ok(match curve {
        RateCurve::Dv { r0_bps, eta_per_db } => r0_bps * 10f64.powf(-eta_per_db * loss_db),
        RateCurve::Cv { r0_bps, eta_per_db, cutoff_db } => {
            if loss_db > *cutoff_db {
                0.0
            } else {
                r0_bps * 10f64.powf(-eta_per_db * loss_db)
            }
        }
        RateCurve::Tabulated { points } => interpolate(points, loss_db),
        RateCurve::PqcHandshake { hs_per_s, bits_per_hs } => hs_per_s * bits_per_hs,
    })
}

fn interpolate(points: &[(f64, f64)], loss: f64) -> f64 {
    let Some(&(first_l, first_r)) = points.first() else {
        return 0.0;
    };
    if loss <= first_l {
        return first_r;
    }
    for w in points.windows(2) {
        let ((l0, r0), (l1, r1)) = (w[0], w[1]);
        if loss <= l1 {
            return r0 + (r1 - r0) * (loss - l0) / (l1 - l0);
        }
    }
    0.0
}

/// Rate curves by id. PQC-only runs use the entry named [`PQC_CURVE_ID`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CurveSet {
    pub curves: BTreeMap<String, RateCurve>,
}

pub const PQC_CURVE_ID: &str = "pqc";

impl CurveSet {
    pub fn get(&self, id: &str) -> Result<&RateCurve> {
        self.curves
            .get(id)
            .ok_or_else(|| Error::config(format!("unknown rate curve {id}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.curves.values().try_for_each(RateCurve::validate)
    }

    pub fn synthetic_default() -> Self {
        let curves = [
            ("dv".to_string(), RateCurve::dv_default()),
            (
                "cv".to_string(),
                RateCurve::Cv { r0_bps: 3e6, eta_per_db: 0.12, cutoff_db: DEFAULT_CV_CUTOFF_DB },
            ),
            (
                PQC_CURVE_ID.to_string(),
                RateCurve::PqcHandshake { hs_per_s: 20.0, bits_per_hs: 256.0 },
            ),
        ];
        CurveSet { curves: curves.into_iter().collect() }
    }
}

/// How a link's key output reaches the buffers it feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SupplySharing {
    /// Every fed buffer receives the full link output (shared key pools at
    /// both ends of the link).
    #[default]
    Symmetric,
    /// Fed buffers split the link output under the allocation rule.
    Allocated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AllocationRule {
    #[default]
    MaxMin,
    Weighted,
}

/// Piecewise-constant key output of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: u64,
    pub end: u64,
    pub bits_per_step: f64,
    pub usable: bool,
}

/// Per-link, per-step key bits available after disturbances.
///
/// Stored as sorted, contiguous segments covering `[0, horizon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplySchedule {
    pub horizon: u64,
    pub links: Vec<Vec<Segment>>,
}

impl SupplySchedule {
    /// Constant output on every link.
    pub fn constant(bits_per_step: &[f64], horizon: u64) -> Self {
        SupplySchedule {
            horizon,
            links: bits_per_step
                .iter()
                .map(|&b| vec![Segment { start: 0, end: horizon, bits_per_step: b, usable: true }])
                .collect(),
        }
    }

    fn segment(&self, link: usize, t: u64) -> Option<&Segment> {
        let segs = &self.links[link];
        let i = segs.partition_point(|s| s.end <= t);
        segs.get(i).filter(|s| s.start <= t)
    }

    pub fn link_bits(&self, link: usize, t: u64) -> f64 {
        self.segment(link, t).map_or(0.0, |s| s.bits_per_step)
    }

    pub fn usable(&self, link: usize, t: u64) -> bool {
        self.segment(link, t).is_some_and(|s| s.usable)
    }

    pub fn cursor(&self) -> ScheduleCursor<'_> {
        ScheduleCursor { schedule: self, pos: vec![0; self.links.len()] }
    }
}

/// Sequential reader over a schedule, advancing one step at a time.
pub struct ScheduleCursor<'a> {
    schedule: &'a SupplySchedule,
    pos: Vec<usize>,
}

impl ScheduleCursor<'_> {
    /// Output of `link` at step `t`; `t` must not decrease between calls.
    #[inline]
    pub fn bits(&mut self, link: usize, t: u64) -> f64 {
        let segs = &self.schedule.links[link];
        let p = &mut self.pos[link];
        while *p < segs.len() && segs[*p].end <= t {
            *p += 1;
        }
        segs.get(*p).filter(|s| s.start <= t).map_or(0.0, |s| s.bits_per_step)
    }
}

/// Key bits reaching `node` at step `t`.
///
/// With [`SupplySharing::Allocated`] this applies the static weighted split
/// of each link; the simulator replaces it with per-step allocation.
pub fn node_supply(
    topology: &Topology,
    schedule: &SupplySchedule,
    node: &str,
    t: u64,
    sharing: SupplySharing,
) -> Result<f64> {
    if topology.node(node).is_none() {
        return Err(Error::usage(format!("unknown node {node}")));
    }
    let mut total = 0.0;
    for (li, link) in topology.links.iter().enumerate() {
        let Some(&w) = link.weights.get(node) else {
            continue;
        };
        let bits = schedule.link_bits(li, t);
        total += match sharing {
            SupplySharing::Symmetric => bits,
            SupplySharing::Allocated => {
                let sum: f64 = link.weights.values().sum();
                if sum > 0.0 {
                    bits * w / sum
                } else {
                    0.0
                }
            }
        };
    }
    Ok(total)
}

/// Progressive-filling max-min fair split of `budget` across `demands`.
pub fn allocate_maxmin(budget: f64, demands: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..demands.len()).collect();
    order.sort_by(|&a, &b| demands[a].total_cmp(&demands[b]));
    let mut out = vec![0.0; demands.len()];
    let mut remaining = budget.max(0.0);
    let n = order.len();
    for (rank, &i) in order.iter().enumerate() {
        let share = remaining / (n - rank) as f64;
        if demands[i] >= share {
            // water level reached: every larger demand gets the same share
            for &j in &order[rank..] {
                out[j] = share;
            }
            break;
        }
        out[i] = demands[i].max(0.0);
        remaining -= out[i];
    }
    out
}

/// Weighted water-filling: shares proportional to `weights`, capped at each
/// demand, with the excess redistributed. Zero-weight nodes only receive
/// what is left after every weighted node is satisfied.
pub fn allocate_weighted(budget: f64, demands: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if demands.len() != weights.len() {
        return Err(Error::usage("demands and weights differ in length"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::config("allocation weights must be non-negative"));
    }
    if !demands.is_empty() && weights.iter().all(|&w| w == 0.0) {
        return Err(Error::config("allocation weights are all zero"));
    }
    let mut weighted: Vec<usize> = (0..demands.len()).filter(|&i| weights[i] > 0.0).collect();
    weighted.sort_by(|&a, &b| {
        (demands[a] / weights[a]).total_cmp(&(demands[b] / weights[b]))
    });
    let mut out = vec![0.0; demands.len()];
    let mut remaining = budget.max(0.0);
    let mut w_left: f64 = weighted.iter().map(|&i| weights[i]).sum();
    for &i in &weighted {
        let share = remaining * weights[i] / w_left;
        let give = demands[i].max(0.0).min(share);
        out[i] = give;
        remaining -= give;
        w_left -= weights[i];
    }
    let unweighted: Vec<usize> = (0..demands.len()).filter(|&i| weights[i] == 0.0).collect();
    if remaining > 0.0 && !unweighted.is_empty() {
        let sub: Vec<f64> = unweighted.iter().map(|&i| demands[i]).collect();
        for (&i, v) in unweighted.iter().zip(allocate_maxmin(remaining, &sub)) {
            out[i] = v;
        }
    }
    Ok(out)
}
