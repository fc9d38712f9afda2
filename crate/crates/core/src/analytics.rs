//! Stability margin, underflow exponent and service-level metrics.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Propagation speed in fibre, km/s.
pub const FIBRE_KM_PER_S: f64 = 2.0e5;
/// Normal quantile of a two-sided 95% interval.

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub margin: f64,
    pub pass: bool,
}

/// `E[A] - E[D] - delta` and whether it is non-negative.
pub fn stability_margin(mean_supply: f64, mean_demand: f64, delta: f64) -> Margin {
    let margin = mean_supply - mean_demand - delta;
    Margin { margin, pass: margin >= 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ExponentError {
    #[error("no negative increments: underflow never happens")]
    NoUnderflowRisk,
    #[error("non-positive drift: the buffer drains")]
    Unstable,
    #[error("no samples")]
    Empty,
}

/// Empirical cumulant generating function `log E[exp(theta X)]`.
pub fn empirical_cgf(samples: &[f64], theta: f64) -> f64 {
    let max = samples.iter().map(|x| theta * x).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = samples.iter().map(|x| (theta * x - max).exp()).sum();
    max + (sum / samples.len() as f64).ln()
}

/// Decay rate `kappa > 0` of the underflow tail, the positive root of
/// `Lambda(-kappa) = 0` for the net increment `X = a - d_eff`.
pub fn underflow_exponent(samples: &[f64]) -> std::result::Result<f64, ExponentError> {
    if samples.is_empty() {
        return Err(ExponentError::Empty);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(ExponentError::Unstable);
    }
    if samples.iter().all(|&x| x >= 0.0) {
        return Err(ExponentError::NoUnderflowRisk);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let f = |k: f64| empirical_cgf(samples, -k);
    let mut hi = if var > 0.0 { 2.0 * mean / var } else { 1.0 };
    let mut lo = 0.0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    // Lambda(-k) is convex with Lambda(0) = 0 and negative slope at 0, so a
    // point below zero must be found before bisecting for the upper root.
    if lo == 0.0 {
        let mut probe = hi / 2.0;
        while f(probe) >= 0.0 {
            probe /= 2.0;
            if probe < 1e-300 {
                return Err(ExponentError::NoUnderflowRisk);
            }
        }
        lo = probe;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() < 1e-12 || hi - lo <= 1e-14 * hi {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `min(1, C exp(-kappa b_min))`.
pub fn underflow_bound(kappa: f64, c: f64, b_min: f64) -> f64 {
    (c * (-kappa * b_min).exp()).min(1.0)
}

/// Prefactor making the bound exact at the calibration threshold.
pub fn calibrate_prefactor(observed: f64, kappa: f64, b_min: f64) -> f64 {
    observed * (kappa * b_min).exp()
}

/// Net-increment moments plus the fitted exponent and prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgfEstimate {
    pub mean: f64,
    pub variance: f64,
    pub kappa: Option<f64>,
    pub prefactor: Option<f64>,
}

impl CgfEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        CgfEstimate { mean, variance, kappa: underflow_exponent(samples).ok(), prefactor: None }
    }
}

/// Fraction of post-warm-up levels below `b_min`.
pub fn outage_probability(levels: &[f64], b_min: f64, warmup: usize) -> Result<f64> {
    if levels.len() <= warmup {
        return Err(Error::usage(format!(
            "trace of {} steps does not outlast the {warmup}-step warm-up",
            levels.len()
        )));
    }
    let window = &levels[warmup..];
    Ok(window.iter().filter(|&&b| b < b_min).count() as f64 / window.len() as f64)
}

/// Mean with a normal-approximation 95% half-width across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// `None` when fewer than two values are available.
    pub ci95: Option<f64>,
}

impl Estimate {
    pub fn lower(&self) -> Option<f64> {
        self.ci95.map(|h| self.mean - h)
    }

    pub fn upper(&self) -> Option<f64> {
        self.ci95.map(|h| self.mean + h)
    }

    pub fn covers(&self, x: f64) -> bool {
        self.ci95.is_some_and(|h| (x - self.mean).abs() <= h)
    }
}

/// Two-sided 95% quantile of Student's t with `df` degrees of freedom.
fn t95(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1").inverse_cdf(0.975)
}

/// Sample mean with a Student-t 95% half-width.
pub fn mean_ci(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, ci95: None };
    }
    if values.iter().all(|&v| v == values[0]) {
        return Estimate { mean: values[0], ci95: (n > 1).then_some(0.0) };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Estimate { mean, ci95: None };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate { mean, ci95: Some(t95(n - 1) * (var / n as f64).sqrt()) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum QueueDist {
    Lognormal { mu_log: f64, sigma_log: f64 },
    Deterministic { s: f64 },
}

impl QueueDist {
    /// `Pr(T_queue > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        match *self {
            QueueDist::Deterministic { s } => f64::from(s > x),
            QueueDist::Lognormal { mu_log, sigma_log } => {
                if x <= 0.0 {
                    1.0
                } else {
                    0.5 * erfc((x.ln() - mu_log) / (sigma_log * std::f64::consts::SQRT_2))
                }
            }
        }
    }
}

/// Which handshake path the crypto processing time follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CryptoPath {
    Qkd,
    Pqc,
}

/// Delay components of one class; times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDelay {
    pub queue: QueueDist,
    pub t_crypto_qkd_s: f64,
    pub t_crypto_pqc_s: f64,
    /// Uniform jitter added to the crypto time, drawn from `[0, jitter_s)`.
    #[serde(default)]
    pub jitter_s: f64,
    pub t_fallback_s: f64,
}

impl ClassDelay {
    pub fn validate(&self) -> Result<()> {
        let q_ok = match self.queue {
            QueueDist::Lognormal { sigma_log, .. } => sigma_log >= 0.0,
            QueueDist::Deterministic { s } => s >= 0.0,
        };
        if q_ok
            && self.t_crypto_qkd_s >= 0.0
            && self.t_crypto_pqc_s >= 0.0
            && self.jitter_s >= 0.0
            && self.t_fallback_s >= 0.0
        {
            Ok(())
        } else {
            Err(Error::config(format!("invalid delay components {self:?}")))
        }
    }

    pub fn crypto(&self, path: CryptoPath) -> f64 {
        match path {
            CryptoPath::Qkd => self.t_crypto_qkd_s,
            CryptoPath::Pqc => self.t_crypto_pqc_s,
        }
    }
}

/// Per-class delay components; classes without an entry use `default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModel {
    pub default: ClassDelay,
    #[serde(default)]
    pub classes: BTreeMap<String, ClassDelay>,
}

impl DelayModel {
    pub fn class(&self, id: &str) -> &ClassDelay {
        self.classes.get(id).unwrap_or(&self.default)
    }

    pub fn validate(&self) -> Result<()> {
        self.default.validate()?;
        self.classes.values().try_for_each(ClassDelay::validate)
    }

    /// Sub-millisecond queueing, a 0.1 ms symmetric cipher path, a 1.5 ms
    /// handshake-inclusive PQC path and 1 ms switching into fallback.
    pub fn synthetic_default() -> Self {
        DelayModel {
            default: ClassDelay {
                queue: QueueDist::Lognormal { mu_log: (3e-4f64).ln(), sigma_log: 0.5 },
                t_crypto_qkd_s: 1e-4,
                t_crypto_pqc_s: 1.5e-3,
                jitter_s: 1e-4,
                t_fallback_s: 1e-3,
            },
            classes: BTreeMap::new(),
        }
    }
}

/// Draws for one delay sample, kept separate so that the fallback term can be
/// toggled on identical draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDraw {
    pub queue: f64,
    pub jitter: f64,
}

impl DelayDraw {
    pub fn sample<R: Rng + ?Sized>(d: &ClassDelay, rng: &mut R) -> Self {
        let queue = match d.queue {
            QueueDist::Deterministic { s } => {
                let _: f64 = rng.random();
                s
            }
            QueueDist::Lognormal { mu_log, sigma_log } => {
                // parameters were validated, so construction cannot fail
                LogNormal::new(mu_log, sigma_log).map_or(0.0, |ln| ln.sample(rng))
            }
        };
        let u: f64 = rng.random();
        DelayDraw { queue, jitter: u * d.jitter_s }
    }
}

/// `T_prop + T_queue + T_crypto + chi T_fallback` for given draws.
pub fn delay_from_draw(d: &ClassDelay, draw: DelayDraw, t_prop: f64, path: CryptoPath, chi: bool) -> f64 {
    let fb = if chi { d.t_fallback_s } else { 0.0 };
    t_prop + draw.queue + d.crypto(path) + draw.jitter + fb
}

pub fn sample_delay<R: Rng + ?Sized>(
    d: &ClassDelay,
    t_prop: f64,
    path: CryptoPath,
    chi: bool,
    rng: &mut R,
) -> f64 {
    delay_from_draw(d, DelayDraw::sample(d, rng), t_prop, path, chi)
}

/// `1 - Pr(out) - Pr(Delay > L | chi) Pr(chi)`, clamped to `[0, 1]`.
pub fn availability(p_out: f64, p_exceed_given_fb: f64, p_fb: f64) -> f64 {
    (1.0 - p_out - p_exceed_given_fb * p_fb).clamp(0.0, 1.0)
}

/// Union bound on `Pr(Delay > L | fallback)` splitting the budget at `tau`.
pub fn fallback_delay_bound(
    queue_tail: impl Fn(f64) -> f64,
    fb_tail: impl Fn(f64) -> f64,
    tau: f64,
    l: f64,
    t_prop: f64,
    t_crypto: f64,
) -> Result<f64> {
    let rest = l - t_prop - t_crypto;
    if !(tau > 0.0 && tau < rest) {
        return Err(Error::usage(format!("tau {tau} outside (0, {rest})")));
    }
    Ok((queue_tail(tau) + fb_tail(rest - tau)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSla {
    pub availability: f64,
    pub ci95: Option<f64>,
    pub delay_exceedance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSla {
    pub p_out: f64,
    pub ci95: Option<f64>,
    pub fb_occupancy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SlaReport {
    #[serde(rename = "class")]
    pub classes: BTreeMap<String, ClassSla>,
    #[serde(rename = "node")]
    pub nodes: BTreeMap<String, NodeSla>,
}

impl SlaReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Normal;

    #[test]
    fn margin_examples() {
        assert_eq!(stability_margin(100.0, 100.0, 0.0), Margin { margin: 0.0, pass: true });
        assert_eq!(stability_margin(100.0, 90.0, 5.0), Margin { margin: 5.0, pass: true });
        assert_eq!(stability_margin(100.0, 110.0, 0.0), Margin { margin: -10.0, pass: false });
    }

    #[test]
    fn exponent_signals() {
        assert_eq!(underflow_exponent(&[5.0; 100]), Err(ExponentError::NoUnderflowRisk));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let normal = Normal::new(-1.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        assert_eq!(underflow_exponent(&xs), Err(ExponentError::Unstable));
    }

    #[test]
    fn exponent_of_two_point_law() {
        // X = +2 or -1 with equal odds: E[e^{-kX}] = 1 at e^{k} = golden ratio.
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 2.0 } else { -1.0 }).collect();
        let k = underflow_exponent(&xs).unwrap();
        assert_relative_eq!(k, ((1.0 + 5f64.sqrt()) / 2.0).ln(), max_relative = 1e-9);
        assert!(empirical_cgf(&xs, -k).abs() < 1e-9);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(underflow_bound(0.5, 0.3, 0.0), 0.3);
        assert_relative_eq!(underflow_bound(0.001, 1.0, 10_000.0), 4.539_992_976e-5, max_relative = 1e-9);
        let (k, c, b) = (3e-4, 0.7, 4000.0);
        assert_relative_eq!(
            underflow_bound(k, c, 2.0 * b) / underflow_bound(k, c, b),
            (-k * b).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(underflow_bound(k, calibrate_prefactor(0.01, k, b), b), 0.01, max_relative = 1e-12);
    }

    #[test]
    fn outage_examples() {
        assert_eq!(outage_probability(&[5.0; 10], 1.0, 0).unwrap(), 0.0);
        assert_eq!(outage_probability(&[0.0; 10], 1.0, 0).unwrap(), 1.0);
        let mut levels = vec![10.0; 1000];
        levels[17..22].fill(0.0);
        assert_eq!(outage_probability(&levels, 1.0, 0).unwrap(), 0.005);
        assert!(matches!(outage_probability(&levels, 1.0, 1000), Err(Error::Usage(_))));
    }

    #[test]
    fn delay_examples() {
        let zero = ClassDelay {
            queue: QueueDist::Deterministic { s: 0.0 },
            t_crypto_qkd_s: 0.0,
            t_crypto_pqc_s: 0.0,
            jitter_s: 0.0,
            t_fallback_s: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_delay(&zero, 0.0, CryptoPath::Qkd, false, &mut rng), 0.0);
        let d = ClassDelay {
            queue: QueueDist::Deterministic { s: 2e-3 },
            t_crypto_qkd_s: 0.5e-3,
            t_fallback_s: 3e-3,
            ..zero
        };
        assert_relative_eq!(sample_delay(&d, 1e-3, CryptoPath::Qkd, true, &mut rng), 6.5e-3, max_relative = 1e-12);
        let ln = ClassDelay { queue: QueueDist::Lognormal { mu_log: -7.0, sigma_log: 0.5 }, ..d };
        let draw = DelayDraw::sample(&ln, &mut rng);
        let gap = delay_from_draw(&ln, draw, 1e-3, CryptoPath::Qkd, true)
            - delay_from_draw(&ln, draw, 1e-3, CryptoPath::Qkd, false);
        assert_relative_eq!(gap, 3e-3, max_relative = 1e-9);
    }

    #[test]
    fn availability_examples() {
        assert_eq!(availability(0.0, 0.0, 0.3), 1.0);
        assert_relative_eq!(availability(0.001, 0.1, 0.01), 0.998, max_relative = 1e-12);
        assert_eq!(availability(1.0, 0.5, 0.5), 0.0);
    }

    #[test]
    fn fallback_bound_examples() {
        assert_eq!(fallback_delay_bound(|_| 0.0, |_| 0.0, 1e-3, 4e-3, 1e-3, 1e-3).unwrap(), 0.0);
        assert_relative_eq!(
            fallback_delay_bound(|_| 0.02, |_| 0.03, 1e-3, 4e-3, 1e-3, 1e-3).unwrap(),
            0.05,
            max_relative = 1e-12
        );
        assert!(matches!(
            fallback_delay_bound(|_| 0.0, |_| 0.0, 3e-3, 4e-3, 1e-3, 1e-3),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn fallback_bound_dominates_simulation() {
        let d = ClassDelay {
            queue: QueueDist::Lognormal { mu_log: (8e-4f64).ln(), sigma_log: 0.6 },
            t_crypto_qkd_s: 2e-4,
            t_crypto_pqc_s: 1e-3,
            jitter_s: 0.0,
            t_fallback_s: 1.5e-3,
        };
        let (l, t_prop) = (3e-3, 3e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let exceed = (0..n)
            .filter(|_| sample_delay(&d, t_prop, CryptoPath::Qkd, true, &mut rng) > l)
            .count() as f64
            / n as f64;
        let fb = d.t_fallback_s;
        for tau in [2e-4, 5e-4, 9e-4] {
            let bound = fallback_delay_bound(
                |x| d.queue.tail(x),
                |x| f64::from(fb > x),
                tau,
                l,
                t_prop,
                d.t_crypto_qkd_s,
            )
            .unwrap();
            assert!(bound >= exceed, "tau {tau}: bound {bound} < simulated {exceed}");
        }
    }

    #[test]
    fn lognormal_tail_matches_sampling() {
        let q = QueueDist::Lognormal { mu_log: 0.0, sigma_log: 1.0 };
        assert_relative_eq!(q.tail(1.0), 0.5, max_relative = 1e-6);
        assert_relative_eq!(q.tail(std::f64::consts::E), 0.158_655_25, max_relative = 1e-5);
    }

    #[test]
    fn ci_examples() {
        let e = mean_ci(&[0.3; 10]);
        assert_eq!(e, Estimate { mean: 0.3, ci95: Some(0.0) });
        assert_eq!(mean_ci(&[0.5]).ci95, None);
        assert_eq!(mean_ci(&[1.0, 2.0, 6.0]).mean, 3.0);
        // s / sqrt(n) = 0.5 with one degree of freedom
        assert_relative_eq!(mean_ci(&[0.0, 1.0]).ci95.unwrap(), 12.706_204_736 * 0.5, epsilon = 1e-6);
    }

    #[test]
    fn sla_report_json_shape() {
        let mut r = SlaReport::default();
        r.classes.insert("PMU".into(), ClassSla { availability: 0.99, ci95: None, delay_exceedance: 0.0 });
        r.nodes.insert("s0".into(), NodeSla { p_out: 0.01, ci95: Some(0.001), fb_occupancy: 0.0 });
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["class"]["PMU"]["availability"], 0.99);
        assert_eq!(v["node"]["s0"]["ci95"], 0.001);
    }

    proptest! {
        #[test]
        fn availability_monotone(p in 0.0f64..1.0, e in 0.0f64..1.0, f in 0.0f64..1.0, dp in 0.0f64..0.1) {
            let a = availability(p, e, f);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(availability((p + dp).min(1.0), e, f) <= a);
            prop_assert!(availability(p, (e + dp).min(1.0), f) <= a);
            prop_assert!(availability(p, e, (f + dp).min(1.0)) <= a);
        }
    }
}
