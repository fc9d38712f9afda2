//! End-to-end acceptance checks. Runs as a plain binary so every check
//! reports a single pass/fail line with its measured runtime.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use qgs_core::analytics::{mean_ci, underflow_exponent, QueueDist};
use qgs_core::economics::{
    breakeven, cis, eac, evaluate, lcosec, present_value, Evaluation, Overrides, PriceBook, RatioError, ServiceOutcome,
};
use qgs_core::manifest::ExperimentManifest;
use qgs_core::rng::StreamFactory;
use qgs_core::simulator::output::{cell_min_critical_availability, write_results, write_summary};
use qgs_core::simulator::{
    monte_carlo, quantile, run_one, sweep, DisturbanceGenerator, EventProcess, Experiment, MonteCarloResult,
    SweepAxis,
};
use qgs_core::supply::{allocate_maxmin, RateCurve};
use qgs_core::topology::{build_distribution, build_longhaul, build_metro, Topology};
use qgs_core::traffic::{node_mean_demand, CRITICAL_CLASS_IDS};
use qgs_core::Architecture;

type Verdict = (bool, String);

/// Sizes the QKD curve so the median class-hosting node receives `qkd`
/// times its mean demand, and the PQC curve so it receives `pqc` times.
fn size_supply(e: &mut Experiment, qkd: f64, pqc: f64) {
    let topo = &e.topology;
    let mut gains = Vec::new();
    let mut links = Vec::new();
    let mut demand = 0.0;
    for n in topo.nodes.iter().filter(|n| !n.classes.is_empty()) {
        demand = node_mean_demand(n, &e.classes);
        let fed: Vec<_> = topo.links.iter().filter(|l| l.weights.contains_key(&n.id)).collect();
        gains.push(fed.iter().map(|l| 10f64.powf(-0.1 * topo.loss_db(l))).sum::<f64>());
        links.push(fed.len() as f64);
    }
    let g = quantile(&gains, 0.5);
    let k = quantile(&links, 0.5);
    e.curves.curves.insert("dv".into(), RateCurve::Dv { r0_bps: qkd * demand / g, eta_per_db: 0.1 });
    e.curves.curves.insert("pqc".into(), RateCurve::PqcHandshake { hs_per_s: pqc * demand / (256.0 * k), bits_per_hs: 256.0 });
}

/// Key-rate outages with the given long-run duty cycle.
fn outages(duty: f64, median_s: f64, sigma_log: f64) -> DisturbanceGenerator {
    DisturbanceGenerator {
        key_rate_outage: Some(EventProcess {
            rate_per_day: 86_400.0 * duty / ((1.0 - duty) * median_s),
            median_duration_s: median_s,
            sigma_log,
            magnitude_db: None,
        }),
        ..Default::default()
    }
}

fn experiment(topo: Topology, measured_s: u64, warmup_s: u64, seeds: u64) -> Experiment {
    let mut e = Experiment::synthetic(topo);
    e.sim.horizon_steps = measured_s + warmup_s;
    e.sim.warmup_steps = warmup_s;
    e.sim.seeds = (1..=seeds).collect();
    e
}

fn three_topologies() -> Vec<Topology> {
    vec![
        build_metro(20, 60.0, 2, 1).unwrap(),
        build_distribution(8, 4, 20.0, 1).unwrap(),
        build_longhaul(200.0, 1, false).unwrap(),
    ]
}

fn hosting_nodes(topo: &Topology) -> Vec<String> {
    topo.nodes.iter().filter(|n| !n.classes.is_empty()).map(|n| n.id.clone()).collect()
}

fn c1_gaussian_exponent() -> Verdict {
    let mut rng = StreamFactory::new(11).stream("acceptance.c1", 0);
    let normal = Normal::new(10.0, 5.0).unwrap();
    let samples: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut rng)).collect();
    let kappa = underflow_exponent(&samples).unwrap();
    let rel = (kappa - 0.8).abs() / 0.8;
    (rel <= 0.05, format!("kappa = {kappa:.4} vs 0.8 (rel err {:.2}%)", 100.0 * rel))
}

/// Probability that a buffer holding `u` kbit of reserve ever runs dry under
/// i.i.d. Gaussian net increments, for every reserve in `reserves`.
fn ruin_probabilities(mu: f64, sigma: f64, reserves: &[f64], paths: usize, seed: u64) -> Vec<f64> {
    let mut rng = StreamFactory::new(seed).stream("acceptance.c2", 0);
    let normal = Normal::new(mu, sigma).unwrap();
    let top = reserves.iter().copied().fold(0.0, f64::max);
    // from this height the chance of falling back below -top is < e^-20
    let escape = top + 20.0 * sigma * sigma / (2.0 * mu);
    let mut hits = vec![0usize; reserves.len()];
    for _ in 0..paths {
        let (mut s, mut low) = (0.0f64, f64::INFINITY);
        while s < escape {
            s += normal.sample(&mut rng);
            low = low.min(s);
        }
        for (h, &u) in hits.iter_mut().zip(reserves) {
            if low < -u {
                *h += 1;
            }
        }
    }
    hits.iter().map(|&h| h as f64 / paths as f64).collect()
}

fn c2_cramer_bound() -> Verdict {
    // increments in kbit per step
    let (mu, sigma) = (10.0, 30.0);
    let mut rng = StreamFactory::new(12).stream("acceptance.c2.kappa", 0);
    let normal = Normal::new(mu, sigma).unwrap();
    let increments: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut rng)).collect();
    let kappa = underflow_exponent(&increments).unwrap();
    let reserves: Vec<f64> = (0..=10).map(|i| 5.0 * i as f64).collect();
    let psi = ruin_probabilities(mu, sigma, &reserves, 400_000, 12);
    let c = psi[0];
    let mut worst = 0.0f64;
    let mut bound_ok = true;
    for (&u, &p) in reserves.iter().zip(&psi) {
        let bound = c * (-kappa * u).exp();
        worst = worst.max(p / bound);
        bound_ok &= p <= bound;
    }
    let xs = &reserves;
    let ys: Vec<f64> = psi.iter().map(|p| p.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let slope_rel = (slope + kappa).abs() / kappa;
    let slope_ok = slope_rel <= 0.15;
    (
        bound_ok && slope_ok,
        format!(
            "kappa = {kappa:.5}/kbit (closed form {:.5}); C = {c:.4}; max observed/bound = {worst:.4} ({}); \
             log-slope = {slope:.5} vs -kappa (rel err {:.1}%, {})",
            2.0 * mu / (sigma * sigma),
            if bound_ok { "bound holds" } else { "bound violated" },
            100.0 * slope_rel,
            if slope_ok { "ok" } else { "off" },
        ),
    )
}

/// Mean outage fraction and realized supply/demand ratio over hosting nodes.
fn stability_run(ratio: f64, delta: f64) -> (f64, f64) {
    let mut e = experiment(build_longhaul(200.0, 1, false).unwrap(), 100_000, 20_000, 1);
    e.sim.architecture = Architecture::QkdOnly;
    // unmodulated demand, so the deficit holds in every step rather than on average
    e.classes.classes.iter_mut().for_each(|c| c.beta = 1.0);
    let a = e.topology.node("A").unwrap();
    let demand = node_mean_demand(a, &e.classes);
    let link = &e.topology.links[0];
    let gain = 10f64.powf(-0.1 * e.topology.loss_db(link));
    e.curves.curves.insert("dv".into(), RateCurve::Dv { r0_bps: (ratio * demand + delta) / gain, eta_per_db: 0.1 });
    for n in &mut e.topology.nodes {
        n.b_max_bits = 100.0 * demand;
        n.b_min_bits = 2.0 * demand;
        n.delta_bits_per_s = delta;
    }
    let r = run_one(&e, 1).unwrap();
    let hosts = hosting_nodes(&e.topology);
    let n = hosts.len() as f64;
    let p_out = hosts.iter().map(|h| r.nodes[h].p_out).sum::<f64>() / n;
    let realized = hosts.iter().map(|h| r.nodes[h].mean_supply_bps / r.nodes[h].mean_demand_bps).sum::<f64>() / n;
    (p_out, realized)
}

fn c3_stability_dichotomy() -> Verdict {
    let (starved, r_starved) = stability_run(0.9, 0.0);
    let (stable, r_stable) = stability_run(1.2, 100.0);
    (
        starved > 0.99 && stable < 1e-3,
        format!(
            "outage fraction {starved:.5} at 0.9x demand (realized supply/demand {r_starved:.3}), \
             {stable:.2e} at 1.2x demand + 100 bit/s (realized {r_stable:.3})"
        ),
    )
}

fn c4_annuity() -> Verdict {
    let mut worst_t1 = 0.0f64;
    for &(npv, r) in &[(1000.0, 0.05), (535.0, 0.07), (1.0e6, 0.0123), (42.0, 0.3)] {
        let e = eac(npv, r, 1);
        worst_t1 = worst_t1.max((e - npv * (1.0 + r)).abs() / (npv * (1.0 + r)));
    }
    let mut worst_rt = 0.0f64;
    for &(c, r, t) in &[(100.0, 0.06, 10usize), (7.5, 0.03, 25), (1.0e5, 0.12, 40), (3.0, 0.01, 5)] {
        let mut flows = vec![c; t + 1];
        flows[0] = 0.0;
        let back = eac(present_value(&flows, r), r, t);
        worst_rt = worst_rt.max((back - c).abs() / c);
    }
    (
        worst_t1 <= 4.0 * f64::EPSILON && worst_rt <= 1e-9,
        format!("T=1 rel err {worst_t1:.1e}, round-trip rel err {worst_rt:.1e}"),
    )
}

fn c5_architecture_ordering() -> Verdict {
    let mut e = experiment(build_metro(20, 60.0, 2, 1).unwrap(), 2 * 86_400, 6 * 3600, 20);
    size_supply(&mut e, 1.2, 0.99);
    for n in &mut e.topology.nodes {
        n.b_max_bits = 8e6;
        n.b_min_bits = 2e6;
    }
    e.generator = Some(outages(0.1, 2400.0, 0.5));
    let hosts = hosting_nodes(&e.topology);
    let mut stats = BTreeMap::new();
    for arch in Architecture::ALL {
        let mc = monte_carlo(&e.with_arch(arch), None).unwrap();
        let p: Vec<f64> = mc.runs.iter().flat_map(|r| hosts.iter().map(|h| r.nodes[h].p_out)).collect();
        stats.insert(arch, (quantile(&p, 0.5), quantile(&p, 0.9)));
    }
    let (h, q, p) = (stats[&Architecture::Hybrid], stats[&Architecture::QkdOnly], stats[&Architecture::PqcOnly]);
    let ok = h.0 < q.0 && q.0 < p.0 && 5.0 * h.1 <= q.1;
    (
        ok,
        format!(
            "median p_out hybrid {:.2e} < qkd {:.2e} < pqc {:.2e}; p90 hybrid {:.2e} vs qkd {:.2e} ({:.0}x)",
            h.0,
            q.0,
            p.0,
            h.1,
            q.1,
            q.1 / h.1.max(f64::MIN_POSITIVE)
        ),
    )
}

fn c6_availability_dominance() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for topo in three_topologies() {
        let label = topo.kind.label();
        let mut e = experiment(topo, 86_400, 3600, 10);
        size_supply(&mut e, 1.2, 1.0);
        for n in &mut e.topology.nodes {
            n.b_max_bits = 8e6;
            n.b_min_bits = 2e6;
        }
        e.generator = Some(outages(0.1, 2400.0, 0.5));
        let runs: BTreeMap<Architecture, MonteCarloResult> =
            Architecture::ALL.iter().map(|&a| (a, monte_carlo(&e.with_arch(a), None).unwrap())).collect();
        let median = |a: Architecture, k: &str| quantile(&runs[&a].metric("availability", k), 0.5);
        let mut worst_gap = f64::INFINITY;
        for class in &e.classes.classes {
            let h = median(Architecture::Hybrid, &class.id);
            for other in [Architecture::QkdOnly, Architecture::PqcOnly] {
                let gap = h - median(other, &class.id);
                worst_gap = worst_gap.min(gap);
                ok &= gap >= 0.0;
            }
        }
        let g = |a| median(a, "GOOSE");
        notes.push(format!(
            "{label}: GOOSE hybrid {:.4} qkd {:.4} pqc {:.4}, min margin {worst_gap:.2e}",
            g(Architecture::Hybrid),
            g(Architecture::QkdOnly),
            g(Architecture::PqcOnly)
        ));
    }
    (ok, notes.join("; "))
}

fn c7_heatmap() -> Verdict {
    let mut e = experiment(build_longhaul(160.0, 1, false).unwrap(), 3 * 86_400, 3600, 8);
    e.sim.architecture = Architecture::Hybrid;
    e.curves.curves.insert("dv".into(), RateCurve::Dv { r0_bps: 4.68e6, eta_per_db: 0.1 });
    for n in &mut e.topology.nodes {
        n.phi = 0.5;
        n.b_min_bits = 5e6;
        n.b_max_bits = 25e6;
    }
    let det = QueueDist::Deterministic { s: 0.0 };
    e.delays.default.queue = det;
    e.delays.classes.values_mut().for_each(|c| c.queue = det);
    e.generator = Some(DisturbanceGenerator {
        link_cut: Some(EventProcess { rate_per_day: 2.0, median_duration_s: 600.0, sigma_log: 1.0, magnitude_db: None }),
        loss_step: Some(EventProcess { rate_per_day: 4.0, median_duration_s: 3600.0, sigma_log: 0.7, magnitude_db: Some(4.0) }),
        ..Default::default()
    });
    let alphas = vec![0.18, 0.20, 0.22, 0.25, 0.28];
    let reserves: Vec<f64> = [5.0, 10.0, 15.0, 20.0, 25.0, 35.0, 50.0].iter().map(|m| m * 1e6).collect();
    let axes = vec![
        SweepAxis { path: "topology.alpha_db_per_km".into(), values: alphas.clone() },
        SweepAxis { path: "node.reserve_bits".into(), values: reserves.clone() },
    ];
    let cells = sweep(&e, &axes, None).unwrap();
    let grid: Vec<Vec<f64>> = cells.chunks(reserves.len()).map(|row| row.iter().map(cell_min_critical_availability).collect()).collect();
    let mut violations = Vec::new();
    for i in 0..alphas.len() {
        for j in 0..reserves.len() {
            if i + 1 < alphas.len() && grid[i + 1][j] > grid[i][j] {
                violations.push(format!("alpha {} -> {} at {} Mbit: {:e}", alphas[i], alphas[i + 1], reserves[j] / 1e6, grid[i + 1][j] - grid[i][j]));
            }
            if j + 1 < reserves.len() && grid[i][j + 1] < grid[i][j] {
                violations.push(format!("{} -> {} Mbit at alpha {}: {:e}", reserves[j] / 1e6, reserves[j + 1] / 1e6, alphas[i], grid[i][j + 1] - grid[i][j]));
            }
        }
    }
    let mono = violations.is_empty();
    let required = |i: usize| reserves.iter().zip(&grid[i]).find(|(_, a)| **a >= 0.999).map(|(b, _)| *b);
    let (at20, at28) = (required(1), required(4));
    let tilt = match (at20, at28) {
        (Some(a), Some(b)) => b > a,
        (Some(_), None) => true,
        _ => false,
    };
    let mbit = |b: Option<f64>| b.map_or("beyond grid".to_string(), |b| format!("{} Mbit", b / 1e6));
    (
        mono && tilt,
        format!(
            "cell-wise monotone: {mono}{}; A=0.999 needs {} at alpha=0.20 and {} at alpha=0.28; corner values {:.5} / {:.5}",
            if mono { String::new() } else { format!(" ({})", violations.join(", ")) },
            mbit(at20),
            mbit(at28),
            grid[0][reserves.len() - 1],
            grid[alphas.len() - 1][0]
        ),
    )
}

fn c8_refresh_burst() -> Verdict {
    let mut e = experiment(build_longhaul(200.0, 1, false).unwrap(), 86_400, 3600, 20);
    e.sim.architecture = Architecture::QkdOnly;
    e.classes.classes.iter_mut().for_each(|c| c.f_hz = 5.0);
    size_supply(&mut e, 1.05, 1.0);
    e.classes.classes.iter_mut().for_each(|c| c.f_hz = 1.0);
    for n in &mut e.topology.nodes {
        n.b_max_bits = 150e3;
        n.b_min_bits = 40e3;
    }
    let fs = vec![0.1, 0.5, 1.0, 2.0, 5.0];
    let betas = vec![1.0, 1.5, 2.0, 3.0];
    let axes = vec![
        SweepAxis { path: "class.*.f_hz".into(), values: fs.clone() },
        SweepAxis { path: "class.*.beta".into(), values: betas.clone() },
    ];
    let cells = sweep(&e, &axes, None).unwrap();
    let mut mono = true;
    let mut width = BTreeMap::new();
    for class in CRITICAL_CLASS_IDS {
        for (fi, row) in cells.chunks(betas.len()).enumerate() {
            let med: Vec<f64> = row.iter().map(|c| quantile(&c.result.metric("availability", class), 0.5)).collect();
            mono &= med.windows(2).all(|w| w[1] <= w[0]);
            let last = row[betas.len() - 1].result.metric("availability", class);
            width.insert((class, fi), quantile(&last, 0.5) - quantile(&last, 0.05));
        }
    }
    let widen = CRITICAL_CLASS_IDS.iter().all(|c| width[&(*c, 4)] > width[&(*c, 2)]);
    (
        mono && widen,
        format!(
            "median non-increasing in beta: {mono}; PMU p50-p5 at beta=3: f=5 {:.5} vs f=1 {:.5}",
            width[&("PMU", 4)],
            width[&("PMU", 2)]
        ),
    )
}

struct EconCase {
    topology: Topology,
    outcomes: BTreeMap<Architecture, ServiceOutcome>,
}

fn econ_cases() -> Vec<EconCase> {
    three_topologies()
        .into_iter()
        .map(|topo| {
            let mut e = experiment(topo, 86_400, 3600, 4);
            size_supply(&mut e, 1.5, 1.02);
            e.generator = Some(outages(0.02, 300.0, 0.5));
            let outcomes = Architecture::ALL
                .iter()
                .map(|&a| (a, monte_carlo(&e.with_arch(a), None).unwrap().outcome()))
                .collect();
            EconCase { topology: e.topology, outcomes }
        })
        .collect()
}

fn evaluate_case(case: &EconCase, arch: Architecture, overrides: &Overrides) -> Evaluation {
    let prices = PriceBook::default();
    let classes = qgs_core::traffic::ClassTable::synthetic_default();
    let mut cost = prices.cost_model(&case.topology, arch);
    let mut risk = prices.risk_model(&case.topology, &classes);
    overrides.apply(&mut cost, &mut risk);
    let output = prices.output(&case.topology, &classes);
    evaluate(&cost, &risk, &output, arch, &case.outcomes[&arch]).unwrap()
}

fn c9_economics_ordering(cases: &[EconCase]) -> Verdict {
    let base = Overrides::default();
    let mut ok = true;
    let mut notes = Vec::new();
    let mut table = BTreeMap::new();
    for case in cases {
        let l = |a| evaluate_case(case, a, &base).lcosec.unwrap();
        let (p, q, h) = (l(Architecture::PqcOnly), l(Architecture::QkdOnly), l(Architecture::Hybrid));
        ok &= p < q && q <= h;
        table.insert(case.topology.kind.label(), (q, h));
        notes.push(format!("{}: pqc {p:.4} < qkd {q:.4} <= hybrid {h:.4}", case.topology.kind.label()));
    }
    let (mq, mh) = table["metro"];
    let (lq, lh) = table["longhaul"];
    ok &= lq > mq && lh > mh;
    notes.push(format!("longhaul over metro: qkd {:.2}x, hybrid {:.2}x", lq / mq, lh / mh));
    (ok, notes.join("; "))
}

fn c10_threat_escalation(cases: &[EconCase]) -> Verdict {
    let threat = Overrides { pqc_hazard: 5.0, ..Default::default() };
    let mut ok = true;
    let mut notes = Vec::new();
    for case in cases {
        let rise = |a| {
            let b = evaluate_case(case, a, &Overrides::default()).lcosec.unwrap();
            evaluate_case(case, a, &threat).lcosec.unwrap() / b - 1.0
        };
        let (p, q, h) = (rise(Architecture::PqcOnly), rise(Architecture::QkdOnly), rise(Architecture::Hybrid));
        ok &= p > h && p > q;
        notes.push(format!("{}: +{:.1}% pqc, +{:.2}% hybrid, +{:.2}% qkd", case.topology.kind.label(), 100.0 * p, 100.0 * h, 100.0 * q));
    }
    (ok, notes.join("; "))
}

fn c11_breakeven() -> Verdict {
    let mut ok = true;
    // (delta_npv, delta_pv): incremental cost ratios below, inside and above [0.8, 1.2]
    for &(dn, dp, at_08, at_12) in &[
        (50.0, 100.0, true, true),
        (100.0, 100.0, false, true),
        (90.0, 100.0, false, true),
        (119.0, 100.0, false, true),
        (150.0, 100.0, false, false),
        (-10.0, 100.0, true, true),
    ] {
        ok &= breakeven(0.8, dp, dn) == at_08 && breakeven(1.2, dp, dn) == at_12;
        let c = cis(dn, dp).unwrap();
        // the verdict flips exactly at the incremental cost ratio
        ok &= breakeven(c, dp, dn);
    }
    ok &= cis(10.0, 0.0) == Err(RatioError::NotComparable);
    ok &= cis(10.0, -5.0) == Err(RatioError::NotComparable);
    ok &= lcosec(10.0, 0.0) == Err(RatioError::Undefined);
    ok &= cis(120.0, 100.0) == Ok(1.2);
    (ok, "verdicts bracket at 0.8 and 1.2, flip at the CIS value, NotComparable and Undefined contracts hold".into())
}

fn c12_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    std::fs::write(
        &path,
        r#"{
            "scenario": "determinism",
            "topology": {"generator": "metro", "substations": 8, "ring_km": 40, "chords": 1, "seed": 3},
            "sim": {"horizon_steps": 7200, "warmup_steps": 3600, "seeds": [1, 2, 3, 4]},
            "architectures": ["pqc", "qkd", "hybrid"],
            "generator": {"key_rate_outage": {"rate_per_day": 24, "median_duration_s": 600, "sigma_log": 0.5}}
        }"#,
    )
    .unwrap();
    let tables = |threads: Option<usize>| {
        let loaded = ExperimentManifest::from_path(&path).unwrap();
        let results: Vec<_> = loaded.experiments().iter().map(|e| monte_carlo(e, threads).unwrap()).collect();
        let (mut r, mut s) = (Vec::new(), Vec::new());
        write_results(&mut r, &loaded.scenario, loaded.topology_label(), &results).unwrap();
        write_summary(&mut s, &loaded.scenario, loaded.topology_label(), &results).unwrap();
        (r, s)
    };
    let first = tables(None);
    let second = tables(None);
    let serial = tables(Some(1));
    let parallel = tables(Some(4));
    let ok = first == second && first == serial && serial == parallel;
    (ok, format!("{} bytes of results, repeated and serial/parallel tables identical: {ok}", first.0.len()))
}

/// Exact water-filling over rationals: the level L with sum min(d_i, L) = budget.
fn waterfill_oracle(budget: Ratio<i128>, demands: &[Ratio<i128>]) -> Vec<Ratio<i128>> {
    let total: Ratio<i128> = demands.iter().sum();
    if total <= budget {
        return demands.to_vec();
    }
    let n = demands.len();
    let mut sorted = demands.to_vec();
    sorted.sort();
    let mut below = Ratio::from_integer(0);
    for (k, d) in sorted.iter().enumerate() {
        let level = (budget - below) / Ratio::from_integer((n - k) as i128);
        if level <= *d {
            return demands.iter().map(|x| if *x < level { *x } else { level }).collect();
        }
        below += *d;
    }
    unreachable!("total exceeds budget, so some level is binding")
}

fn c13_allocation_oracle() -> Verdict {
    let mut rng = StreamFactory::new(13).stream("acceptance.c13", 0);
    let mut mismatches = 0;
    let mut saturated = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        // eighths of a bit keep every partial sum exact in f64
        let eighths: Vec<i128> = (0..n).map(|_| rng.random_range(0..=80_000)).collect();
        let budget_e: i128 = rng.random_range(0..=80_000 * n as i128);
        let demands: Vec<f64> = eighths.iter().map(|&e| e as f64 / 8.0).collect();
        let got = allocate_maxmin(budget_e as f64 / 8.0, &demands);
        let exact: Vec<Ratio<i128>> = eighths.iter().map(|&e| Ratio::new(e, 8)).collect();
        let want = waterfill_oracle(Ratio::new(budget_e, 8), &exact);
        if eighths.iter().sum::<i128>() > budget_e {
            saturated += 1;
        }
        let matches = got.iter().zip(&want).all(|(g, w)| *g == *w.numer() as f64 / *w.denom() as f64);
        if !matches {
            mismatches += 1;
        }
    }
    (mismatches == 0, format!("{mismatches} mismatches over 1000 instances ({saturated} budget-limited)"))
}

fn c14_ci_coverage() -> Verdict {
    let factory = StreamFactory::new(14);
    let mut covered = 0;
    for trial in 0..200 {
        let mut rng = factory.stream("acceptance.c14", trial);
        let values: Vec<f64> = (0..50).map(|_| if rng.random::<f64>() < 0.3 { 1.0 } else { 0.0 }).collect();
        if mean_ci(&values).covers(0.3) {
            covered += 1;
        }
    }
    let rate = covered as f64 / 200.0;
    ((0.90..=0.99).contains(&rate), format!("coverage {covered}/200 = {rate:.3}"))
}

struct Harness {
    failures: usize,
}

impl Harness {
    fn check<T>(&mut self, id: u32, name: &str, limit: Duration, f: impl FnOnce() -> (T, Verdict)) -> T {
        let start = Instant::now();
        let (keep, (pass, detail)) = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = pass && in_time;
        if !pass {
            self.failures += 1;
        }
        println!(
            "[{}] {id:>2} {name} ({:.1}s, limit {}s{}): {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
        keep
    }
}

fn main() -> ExitCode {
    let mut h = Harness { failures: 0 };
    let s = Duration::from_secs;
    h.check(1, "gaussian exponent oracle", s(10), || ((), c1_gaussian_exponent()));
    h.check(2, "cramer bound validity", s(120), || ((), c2_cramer_bound()));
    h.check(3, "stability dichotomy", s(60), || ((), c3_stability_dichotomy()));
    h.check(4, "annuity identities", s(1), || ((), c4_annuity()));
    h.check(5, "architecture ordering", s(600), || ((), c5_architecture_ordering()));
    h.check(6, "availability dominance", s(900), || ((), c6_availability_dominance()));
    h.check(7, "heatmap monotonicity", s(1200), || ((), c7_heatmap()));
    h.check(8, "refresh/burst sensitivity", s(900), || ((), c8_refresh_burst()));
    let sim_start = Instant::now();
    let cases = econ_cases();
    println!("      economics inputs simulated in {:.1}s", sim_start.elapsed().as_secs_f64());
    h.check(9, "economics ordering", s(300), || ((), c9_economics_ordering(&cases)));
    h.check(10, "threat-escalation asymmetry", s(60), || ((), c10_threat_escalation(&cases)));
    h.check(11, "break-even loci", s(1), || ((), c11_breakeven()));
    h.check(12, "determinism", s(120), || ((), c12_determinism()));
    h.check(13, "allocation oracle", s(10), || ((), c13_allocation_oracle()));
    h.check(14, "monte carlo ci coverage", s(10), || ((), c14_ci_coverage()));
    println!("{} of 14 criteria failed", h.failures);
    if h.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
