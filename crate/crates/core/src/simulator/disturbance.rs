//! Disturbance scripts, their stochastic generator and schedule compilation.

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::architecture::Architecture;
use crate::error::{Error, Result};
use crate::rng::{key_hash, StreamFactory};
use crate::supply::{rate_from_loss, CurveSet, RateCurve, Segment, SupplySchedule, PQC_CURVE_ID};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisturbanceKind {
    /// Key production paused, e.g. for calibration.
    KeyRateOutage,
    /// Additional loss on the link.
    LossStep,
    /// Fibre interruption.
    LinkCut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceEvent {
    pub kind: DisturbanceKind,
    pub link: String,
    pub start_s: f64,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitude_db: Option<f64>,
}

impl DisturbanceEvent {
    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if topology.link(&self.link).is_none() {
            return Err(Error::config(format!("disturbance targets unknown link {}", self.link)));
        }
        if !(self.duration_s > 0.0) || !(self.start_s >= 0.0) {
            return Err(Error::config(format!("disturbance window on {} is empty or negative", self.link)));
        }
        if self.kind == DisturbanceKind::LossStep && !self.magnitude_db.is_some_and(|m| m > 0.0) {
            return Err(Error::config(format!("loss step on {} needs a positive magnitude", self.link)));
        }
        Ok(())
    }

    /// `[start, end)` in steps of `dt` seconds; at least one step long.
    pub fn window(&self, dt: f64) -> (u64, u64) {
        let start = (self.start_s / dt).floor() as u64;
        let len = ((self.duration_s / dt).ceil() as u64).max(1);
        (start, start.saturating_add(len))
    }
}

/// Poisson event arrivals with lognormal durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventProcess {
    pub rate_per_day: f64,
    pub median_duration_s: f64,
    #[serde(default)]
    pub sigma_log: f64,
    #[serde(default)]
    pub magnitude_db: Option<f64>,
}

/// Per-link stochastic disturbance script.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceGenerator {
    pub key_rate_outage: Option<EventProcess>,
    pub loss_step: Option<EventProcess>,
    pub link_cut: Option<EventProcess>,
}

impl DisturbanceGenerator {
    pub fn validate(&self) -> Result<()> {
        for (kind, p) in self.processes() {
            let ok = p.rate_per_day >= 0.0
                && p.median_duration_s > 0.0
                && p.sigma_log >= 0.0
                && (kind != DisturbanceKind::LossStep || p.magnitude_db.is_some_and(|m| m > 0.0));
            if !ok {
                return Err(Error::config(format!("invalid {kind:?} process {p:?}")));
            }
        }
        Ok(())
    }

    fn processes(&self) -> impl Iterator<Item = (DisturbanceKind, EventProcess)> + '_ {
        [
            (DisturbanceKind::KeyRateOutage, self.key_rate_outage),
            (DisturbanceKind::LossStep, self.loss_step),
            (DisturbanceKind::LinkCut, self.link_cut),
        ]
        .into_iter()
        .filter_map(|(k, p)| p.map(|p| (k, p)))
    }

    /// Events over `[0, horizon_s)`, drawn from one stream per link and kind.
    pub fn generate(&self, topology: &Topology, horizon_s: f64, streams: &StreamFactory) -> Result<Vec<DisturbanceEvent>> {
        self.validate()?;
        let mut events = Vec::new();
        for (kind, p) in self.processes() {
            if p.rate_per_day == 0.0 {
                continue;
            }
            let gap = Exp::new(p.rate_per_day / 86_400.0).map_err(|e| Error::config(e.to_string()))?;
            let dur = LogNormal::new(p.median_duration_s.ln(), p.sigma_log).map_err(|e| Error::config(e.to_string()))?;
            for link in &topology.links {
                let mut rng = streams.stream("disturbance", key_hash(&format!("{}/{kind:?}", link.id)));
                let mut t = gap.sample(&mut rng);
                while t < horizon_s {
                    let duration_s = dur.sample(&mut rng);
                    // keep the draw count independent of the magnitude setting
                    let _: f64 = rng.random();
                    events.push(DisturbanceEvent {
                        kind,
                        link: link.id.clone(),
                        start_s: t,
                        duration_s,
                        magnitude_db: p.magnitude_db,
                    });
                    t += duration_s + gap.sample(&mut rng);
                }
            }
        }
        Ok(events)
    }
}

/// Curve feeding `link` under the architecture.
pub fn link_curve<'a>(curves: &'a CurveSet, rate_curve: &str, arch: Architecture) -> Result<&'a RateCurve> {
    match arch {
        Architecture::PqcOnly => curves.get(PQC_CURVE_ID),
        _ => curves.get(rate_curve),
    }
}

/// Per-link key bits per step over `[0, horizon)` after applying `script`.
pub fn compile_schedule(
    topology: &Topology,
    curves: &CurveSet,
    arch: Architecture,
    script: &[DisturbanceEvent],
    horizon: u64,
    dt: f64,
) -> Result<SupplySchedule> {
    for e in script {
        e.validate(topology)?;
    }
    let mut links = Vec::with_capacity(topology.links.len());
    for link in &topology.links {
        let curve = link_curve(curves, &link.rate_curve, arch)?;
        let loss = topology.loss_db(link);
        let events: Vec<(&DisturbanceEvent, u64, u64)> = script
            .iter()
            .filter(|e| e.link == link.id)
            .map(|e| {
                let (s, end) = e.window(dt);
                (e, s.min(horizon), end.min(horizon))
            })
            .filter(|(_, s, e)| s < e)
            .collect();
        let mut cuts: Vec<u64> = vec![0, horizon];
        for &(_, s, e) in &events {
            cuts.push(s);
            cuts.push(e);
        }
        cuts.sort_unstable();
        cuts.dedup();
        let mut segs: Vec<Segment> = Vec::new();
        for w in cuts.windows(2) {
            let (start, end) = (w[0], w[1]);
            let active = events.iter().filter(|(_, s, e)| *s <= start && start < *e).map(|(ev, _, _)| *ev);
            let mut extra_db = 0.0;
            let mut zero = false;
            let mut usable = true;
            for ev in active {
                match ev.kind {
                    DisturbanceKind::LinkCut => {
                        zero = true;
                        usable = false;
                    }
                    DisturbanceKind::KeyRateOutage => zero |= !curve.is_pqc(),
                    DisturbanceKind::LossStep => extra_db += ev.magnitude_db.unwrap_or(0.0),
                }
            }
            let bits = if zero { 0.0 } else { rate_from_loss(curve, loss + extra_db)? * dt };
            match segs.last_mut() {
                Some(last) if last.bits_per_step == bits && last.usable == usable => last.end = end,
                _ => segs.push(Segment { start, end, bits_per_step: bits, usable }),
            }
        }
        links.push(segs);
    }
    Ok(SupplySchedule { horizon, links })
}
