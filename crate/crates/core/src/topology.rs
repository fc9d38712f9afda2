//! Three-tier communication graph and the canonical topology generators.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamFactory;
use crate::traffic::DEFAULT_CLASS_IDS;

/// Relative length jitter applied to generated chords, taps and feeder links.
pub const LENGTH_JITTER: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    Backbone,
    Aggregation,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TopologyKind {
    Metro,
    Distribution,
    LongHaul,
}

impl TopologyKind {
    pub fn label(self) -> &'static str {
        match self {
            TopologyKind::Metro => "metro",
            TopologyKind::Distribution => "distribution",
            TopologyKind::LongHaul => "longhaul",
        }
    }
}

/// A communication site hosting a key buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub tier: Tier,
    pub b_max_bits: f64,
    pub b_min_bits: f64,
    /// Share of traffic moved to PQC while the node is in fallback.
    pub phi: f64,
    pub delta_bits_per_s: f64,
    #[serde(default)]
    pub classes: Vec<String>,
}

impl NodeSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.b_min_bits >= 0.0
            && self.b_min_bits <= self.b_max_bits
            && (0.0..=1.0).contains(&self.phi)
            && self.delta_bits_per_s >= 0.0;
        if !ok {
            return Err(Error::config(format!(
                "node {}: need 0 <= b_min <= b_max, phi in [0,1], delta >= 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// Optical QKD link between two sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub d_km: f64,
    pub l_fix_db: f64,
    pub rate_curve: String,
    /// Buffers fed by this link and their allocation weights.
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    /// Per-link attenuation override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_db_per_km: Option<f64>,
}

impl LinkSpec {
    fn new(id: String, from: &str, to: &str, d_km: f64, defaults: &LinkDefaults) -> Self {
        let weights = [(from.to_string(), 1.0), (to.to_string(), 1.0)]
            .into_iter()
            .collect();
        LinkSpec {
            id,
            from: from.to_string(),
            to: to.to_string(),
            d_km,
            l_fix_db: defaults.l_fix_db,
            rate_curve: defaults.rate_curve.clone(),
            weights,
            alpha_db_per_km: None,
        }
    }
}

/// Total optical loss of a link in dB.
pub fn link_loss(link: &LinkSpec, alpha_db_per_km: f64) -> f64 {
    alpha_db_per_km * link.d_km + link.l_fix_db
}

/// Buffer parameters stamped onto generated nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDefaults {
    pub b_max_bits: f64,
    pub b_min_bits: f64,
    pub phi: f64,
    pub delta_bits_per_s: f64,
}

impl Default for NodeDefaults {
    fn default() -> Self {
        NodeDefaults {
            b_max_bits: 32e6,
            b_min_bits: 8e6,
            phi: 1.0,
            delta_bits_per_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDefaults {
    pub l_fix_db: f64,
    pub rate_curve: String,
}

impl Default for LinkDefaults {
    fn default() -> Self {
        LinkDefaults {
            l_fix_db: 2.0,
            rate_curve: "dv".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub kind: TopologyKind,
    pub alpha_db_per_km: f64,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
}

pub const DEFAULT_ALPHA_DB_PER_KM: f64 = 0.2;

impl Topology {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn link(&self, id: &str) -> Option<&LinkSpec> {
        self.links.iter().find(|l| l.id == id)
    }

    /// Loss of a link using its attenuation override or the global value.
    pub fn loss_db(&self, link: &LinkSpec) -> f64 {
        link_loss(link, link.alpha_db_per_km.unwrap_or(self.alpha_db_per_km))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_db_per_km > 0.0) {
            return Err(Error::config("alpha_db_per_km must be positive"));
        }
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            n.validate()?;
            if !ids.insert(n.id.as_str()) {
                return Err(Error::config(format!("duplicate node id {}", n.id)));
            }
        }
        let mut link_ids = BTreeSet::new();
        for l in &self.links {
            if !link_ids.insert(l.id.as_str()) {
                return Err(Error::config(format!("duplicate link id {}", l.id)));
            }
            for end in [&l.from, &l.to] {
                if !ids.contains(end.as_str()) {
                    return Err(Error::config(format!(
                        "link {} references unknown node {end}",
                        l.id
                    )));
                }
            }
            if !(l.d_km > 0.0) || l.l_fix_db < 0.0 {
                return Err(Error::config(format!(
                    "link {}: need d_km > 0 and l_fix_db >= 0",
                    l.id
                )));
            }
            if matches!(l.alpha_db_per_km, Some(a) if !(a > 0.0)) {
                return Err(Error::config(format!("link {}: alpha must be positive", l.id)));
            }
            for (node, w) in &l.weights {
                if !ids.contains(node.as_str()) {
                    return Err(Error::config(format!(
                        "link {} feeds unknown node {node}",
                        l.id
                    )));
                }
                if !(*w >= 0.0) {
                    return Err(Error::config(format!("link {}: negative weight", l.id)));
                }
            }
        }
        if !self.is_connected() {
            return Err(Error::config("topology is not connected"));
        }
        Ok(())
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let index: BTreeMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for l in &self.links {
            if let (Some(&a), Some(&b)) = (index.get(l.from.as_str()), index.get(l.to.as_str())) {
                adj[a].push((b, l.d_km));
                adj[b].push((a, l.d_km));
            }
        }
        adj
    }

    /// Undirected reachability check from the first node.
    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn shortest_km_from(&self, adj: &[Vec<(usize, f64)>], src: usize) -> Vec<f64> {
        // Dijkstra over a few hundred nodes; a linear scan for the minimum is fine.
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[src] = 0.0;
        for _ in 0..n {
            let Some(u) = (0..n)
                .filter(|&i| !done[i] && dist[i].is_finite())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
            else {
                break;
            };
            done[u] = true;
            for &(v, w) in &adj[u] {
                if dist[u] + w < dist[v] {
                    dist[v] = dist[u] + w;
                }
            }
        }
        dist
    }

    /// Per-node fiber path length to the farthest backbone site, used as the
    /// propagation distance of that node's traffic.
    pub fn propagation_km(&self) -> Vec<f64> {
        let adj = self.adjacency();
        let mut out = vec![0.0f64; self.nodes.len()];
        for (b, node) in self.nodes.iter().enumerate() {
            if node.tier != Tier::Backbone {
                continue;
            }
            let dist = self.shortest_km_from(&adj, b);
            for (o, d) in out.iter_mut().zip(dist) {
                if d.is_finite() {
                    *o = o.max(d);
                }
            }
        }
        out
    }

    /// Overwrites the buffer parameters of every node.
    pub fn apply_node_defaults(&mut self, defaults: &NodeDefaults) {
        for n in &mut self.nodes {
            n.b_max_bits = defaults.b_max_bits;
            n.b_min_bits = defaults.b_min_bits;
            n.phi = defaults.phi;
            n.delta_bits_per_s = defaults.delta_bits_per_s;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let topo: Topology = serde_json::from_str(text)?;
        topo.validate()?;
        Ok(topo)
    }
}

fn node(id: String, tier: Tier, classes: bool) -> NodeSpec {
    let d = NodeDefaults::default();
    NodeSpec {
        id,
        tier,
        b_max_bits: d.b_max_bits,
        b_min_bits: d.b_min_bits,
        phi: d.phi,
        delta_bits_per_s: d.delta_bits_per_s,
        classes: if classes {
            DEFAULT_CLASS_IDS.iter().map(|s| s.to_string()).collect()
        } else {
            Vec::new()
        },
    }
}

fn jitter<R: Rng>(rng: &mut R) -> f64 {
    1.0 + rng.random_range(-LENGTH_JITTER..=LENGTH_JITTER)
}

/// Metro backbone: a ring of substations with seeded chords plus a control
/// center tapped onto the first substation.
///
/// Ring segments partition `ring_km` equally. Chords connect random
/// non-adjacent substations; their length is 70% of the shorter ring arc
/// with +-20% jitter.
pub fn build_metro(n_substations: usize, ring_km: f64, n_chords: usize, seed: u64) -> Result<Topology> {
    if n_substations < 3 {
        return Err(Error::config("metro ring needs at least 3 substations"));
    }
    if !(ring_km > 0.0) {
        return Err(Error::config("ring length must be positive"));
    }
    let n = n_substations;
    let max_chords = n * (n - 3) / 2;
    if n_chords > max_chords {
        return Err(Error::config(format!(
            "{n_chords} chords requested but a {n}-ring has only {max_chords} non-adjacent pairs"
        )));
    }
    let mut rng = StreamFactory::new(seed).stream("topology.metro", 0);
    let defaults = LinkDefaults::default();
    let seg = ring_km / n as f64;

    let mut nodes = vec![node("cc".into(), Tier::Backbone, false)];
    nodes.extend((0..n).map(|i| node(format!("s{i}"), Tier::Edge, true)));

    let mut links: Vec<LinkSpec> = (0..n)
        .map(|i| {
            LinkSpec::new(
                format!("r{i}"),
                &format!("s{i}"),
                &format!("s{}", (i + 1) % n),
                seg,
                &defaults,
            )
        })
        .collect();
    links.push(LinkSpec::new("tap".into(), "cc", "s0", seg * jitter(&mut rng), &defaults));

    let mut chosen = BTreeSet::new();
    while chosen.len() < n_chords {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let (i, j) = (a.min(b), a.max(b));
        let gap = j - i;
        if gap <= 1 || gap == n - 1 {
            continue;
        }
        if chosen.insert((i, j)) {
            let arc = gap.min(n - gap) as f64 * seg;
            links.push(LinkSpec::new(
                format!("c{}", chosen.len() - 1),
                &format!("s{i}"),
                &format!("s{j}"),
                0.7 * arc * jitter(&mut rng),
                &defaults,
            ));
        }
    }

    let topo = Topology {
        kind: TopologyKind::Metro,
        alpha_db_per_km: DEFAULT_ALPHA_DB_PER_KM,
        nodes,
        links,
    };
    topo.validate()?;
    Ok(topo)
}

/// Distribution feeder: neighborhoods hang off aggregation points, which hang
/// off a single station. Feeder links take 60% of `span_km`, neighborhood
/// links 40%, each with +-20% jitter.
pub fn build_distribution(
    n_neighborhoods: usize,
    agg_points: usize,
    span_km: f64,
    seed: u64,
) -> Result<Topology> {
    if agg_points == 0 || n_neighborhoods == 0 {
        return Err(Error::config("need at least one neighborhood and one aggregation point"));
    }
    if agg_points > n_neighborhoods {
        return Err(Error::config(format!(
            "{agg_points} aggregation points exceed {n_neighborhoods} neighborhoods"
        )));
    }
    if !(span_km > 0.0) {
        return Err(Error::config("span must be positive"));
    }
    if !(4..=8).contains(&agg_points) {
        warn!("{agg_points} aggregation points is outside the usual 4-8 range");
    }
    let mut rng = StreamFactory::new(seed).stream("topology.distribution", 0);
    let defaults = LinkDefaults::default();

    let mut nodes = vec![node("st".into(), Tier::Backbone, false)];
    nodes.extend((0..agg_points).map(|j| node(format!("a{j}"), Tier::Aggregation, false)));
    nodes.extend((0..n_neighborhoods).map(|i| node(format!("n{i}"), Tier::Edge, true)));

    let mut links: Vec<LinkSpec> = (0..agg_points)
        .map(|j| {
            LinkSpec::new(
                format!("f{j}"),
                "st",
                &format!("a{j}"),
                0.6 * span_km * jitter(&mut rng),
                &defaults,
            )
        })
        .collect();

    // Seeded shuffle, then round-robin so every aggregation point gets a leaf.
    let mut order: Vec<usize> = (0..n_neighborhoods).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    for (slot, &leaf) in order.iter().enumerate() {
        let agg = slot % agg_points;
        links.push(LinkSpec::new(
            format!("l{leaf}"),
            &format!("a{agg}"),
            &format!("n{leaf}"),
            0.4 * span_km * jitter(&mut rng),
            &defaults,
        ));
    }
    links.sort_by_key(|l| (l.id.starts_with('l'), l.id[1..].parse::<usize>().unwrap_or(0)));

    let topo = Topology {
        kind: TopologyKind::Distribution,
        alpha_db_per_km: DEFAULT_ALPHA_DB_PER_KM,
        nodes,
        links,
    };
    topo.validate()?;
    Ok(topo)
}

/// Long-haul intertie: two control areas joined by a chain of equal segments
/// through `n_trusted` trusted nodes. `dual_chain` duplicates every segment.
pub fn build_longhaul(total_km: f64, n_trusted: usize, dual_chain: bool) -> Result<Topology> {
    if !(total_km > 0.0) {
        return Err(Error::config("path length must be positive"));
    }
    if n_trusted > 3 {
        return Err(Error::config("at most 3 trusted nodes are supported"));
    }
    if !(150.0..=300.0).contains(&total_km) {
        warn!("{total_km} km is outside the usual 150-300 km long-haul range");
    }
    let defaults = LinkDefaults::default();
    let mut ids = vec!["A".to_string()];
    ids.extend((1..=n_trusted).map(|i| format!("T{i}")));
    ids.push("B".to_string());

    let nodes = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let end = i == 0 || i == ids.len() - 1;
            let tier = if end { Tier::Backbone } else { Tier::Aggregation };
            node(id.clone(), tier, end)
        })
        .collect();

    let seg = total_km / (n_trusted + 1) as f64;
    let mut links = Vec::new();
    for (i, pair) in ids.windows(2).enumerate() {
        links.push(LinkSpec::new(format!("h{i}"), &pair[0], &pair[1], seg, &defaults));
        if dual_chain {
            links.push(LinkSpec::new(format!("h{i}b"), &pair[0], &pair[1], seg, &defaults));
        }
    }

    let topo = Topology {
        kind: TopologyKind::LongHaul,
        alpha_db_per_km: DEFAULT_ALPHA_DB_PER_KM,
        nodes,
        links,
    };
    topo.validate()?;
    Ok(topo)
}
