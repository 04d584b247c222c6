//! Synthetic scenarios with planted ground truth.
//!
//! The generator plants `G` groups of prefixes. Routing side: every group
//! has a template vector of next-hop choices over a shared observer set,
//! realized as 2-hop AS paths (observer, chosen hop, group origin) so that
//! adjacency extraction reproduces the planned routing states exactly and
//! no sub-AS splitting is ever needed. Latency side: every group prefers
//! the server regions in a rotated order with a fixed step between
//! consecutive positions, plus uniform per-client jitter. Prefixes inherit
//! their group's template with every entry independently resampled with
//! probability `eps_r`.
//!
//! The sub-AS universe is observers + middle-hop pool + group origins and
//! its size is exactly `t_prime`, so distances and thresholds line up
//! with the requested scale.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::MeasurementSet;
use crate::rank::RegionId;
use crate::routing::{AsNum, AsPath, PrefixNet};

const OBSERVER_BASE: AsNum = 100_000;
const HOP_BASE: AsNum = 64_000;
const ORIGIN_BASE: AsNum = 65_000;
const COUNTRIES: &[&str] = &["DE", "FR", "GB", "NL", "SE", "PL", "ES", "IT"];

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
}

/// How group templates relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateMode {
    /// Templates differ in every observer coordinate; between-group RSD is
    /// maximal. Requires a hop pool at least as large as the group count.
    Distinct,
    /// Template overlap decays linearly with the distance between group
    /// positions on a line, giving a graded spectrum of rsim values.
    Graded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub groups: usize,
    pub prefixes_per_group: usize,
    pub clients_per_prefix: usize,
    /// Total sub-AS universe size (observers + hop pool + origins).
    pub t_prime: usize,
    /// Number of server regions (m).
    pub regions: u32,
    /// Measured regions per client (k); equal to `regions` for full
    /// measurement.
    pub known_per_client: u32,
    /// Middle-hop AS pool size.
    pub hop_pool: usize,
    /// Probability that a prefix's routing entry deviates from its group
    /// template.
    pub eps_r: f64,
    /// Per-(client, region) uniform latency jitter bound in ms.
    pub eps_l_ms: f64,
    /// Base latency gap between consecutive preference positions in ms.
    pub latency_step_ms: f64,
    pub templates: TemplateMode,
    pub seed: u64,
}

impl SyntheticSpec {
    fn observer_count(&self) -> usize {
        self.t_prime
            .saturating_sub(self.hop_pool)
            .saturating_sub(self.groups)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: &str| Err(SynthError::Infeasible(msg.to_string()));
        if self.groups == 0 {
            return fail("need at least one group");
        }
        if self.prefixes_per_group == 0 || self.clients_per_prefix == 0 {
            return fail("need at least one prefix per group and one client per prefix");
        }
        if self.groups > 250 || self.prefixes_per_group > 250 || self.clients_per_prefix > 250 {
            return fail("group, prefix and client counts are limited to 250");
        }
        if self.regions == 0 {
            return fail("need at least one server region");
        }
        if self.known_per_client == 0 || self.known_per_client > self.regions {
            return fail("known regions per client must be in 1..=regions");
        }
        if self.hop_pool < 2 || self.hop_pool > 999 {
            return fail("hop pool must be in 2..=999");
        }
        if matches!(self.templates, TemplateMode::Distinct) && self.hop_pool < self.groups {
            return fail("distinct templates need hop_pool >= groups");
        }
        if matches!(self.templates, TemplateMode::Graded) && self.groups < 2 {
            return fail("graded templates need at least two groups");
        }
        if self.observer_count() < self.hop_pool {
            return fail("t_prime too small: observers must cover the hop pool");
        }
        if !(0.0..=1.0).contains(&self.eps_r) {
            return fail("eps_r must be in [0, 1]");
        }
        if !self.eps_l_ms.is_finite() || self.eps_l_ms < 0.0 {
            return fail("eps_l_ms must be finite and non-negative");
        }
        if !self.latency_step_ms.is_finite() || self.latency_step_ms <= 0.0 {
            return fail("latency_step_ms must be positive");
        }
        Ok(())
    }
}

/// A fully realized scenario, ready to serialize or to feed the pipeline
/// directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub paths: Vec<AsPath>,
    pub measurements: MeasurementSet,
    pub geo: BTreeMap<PrefixNet, String>,
    /// Planted group per prefix.
    pub labels: BTreeMap<PrefixNet, usize>,
    /// Planned next hop per (prefix, observer index); adjacency extraction
    /// over `paths` must reproduce exactly this.
    pub observer_plan: BTreeMap<PrefixNet, Vec<AsNum>>,
    pub t_prime: usize,
    pub regions: u32,
    pub groups: usize,
}

impl Scenario {
    pub fn observer_as(index: usize) -> AsNum {
        OBSERVER_BASE + index as AsNum
    }

    pub fn origin_as(group: usize) -> AsNum {
        ORIGIN_BASE + group as AsNum
    }

    pub fn path_text(&self) -> String {
        crate::ingest::serialize_bgp_paths(&self.paths)
    }

    pub fn measurement_text(&self) -> String {
        crate::ingest::serialize_measurements(&self.measurements)
    }

    pub fn geo_text(&self) -> String {
        crate::ingest::serialize_geo(&self.geo)
    }

    pub fn labels_text(&self) -> String {
        let mut out = String::from(LABELS_HEADER);
        out.push('\n');
        for (net, group) in &self.labels {
            out.push_str(&format!("{net},{group}\n"));
        }
        out
    }
}

pub const LABELS_HEADER: &str = "prefix,group";

pub fn parse_labels(text: &str) -> crate::ingest::Parsed<BTreeMap<PrefixNet, usize>> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == LABELS_HEADER => {}
        _ => {
            errors.push(crate::ingest::LineError {
                line: 1,
                message: format!("missing header `{LABELS_HEADER}`"),
            });
            return crate::ingest::Parsed {
                records: map,
                errors,
            };
        }
    }
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed = trimmed.split_once(',').and_then(|(net, group)| {
            let net: PrefixNet = net.trim().parse().ok()?;
            let group: usize = group.trim().parse().ok()?;
            Some((net, group))
        });
        match parsed {
            Some((net, group)) => {
                map.insert(net, group);
            }
            None => errors.push(crate::ingest::LineError {
                line,
                message: "expected prefix,group".to_string(),
            }),
        }
    }
    crate::ingest::Parsed {
        records: map,
        errors,
    }
}

fn quantize_ms(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Group position on the unit line; drives both template overlap and the
/// preference-order rotation.
fn group_position(group: usize, groups: usize) -> f64 {
    if groups <= 1 {
        0.0
    } else {
        group as f64 / (groups - 1) as f64
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<Scenario, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let observers = spec.observer_count();
    let pool: Vec<AsNum> = (0..spec.hop_pool)
        .map(|w| HOP_BASE + w as AsNum)
        .collect();

    // Per-coordinate value choices. In graded mode coordinate i carries a
    // threshold and a (lo, hi) value pair; a group takes lo when its line
    // position is at or below the threshold. The pair table alone covers
    // the whole pool, which pins the universe size.
    let w = spec.hop_pool;
    let coord_pair: Vec<(AsNum, AsNum)> = (0..observers)
        .map(|i| {
            let lo = i % w;
            let hi = (lo + 1 + (i / w) % (w - 1)) % w;
            (pool[lo], pool[hi])
        })
        .collect();

    let template_entry = |group: usize, coord: usize| -> AsNum {
        match spec.templates {
            TemplateMode::Distinct => pool[(coord + group) % w],
            TemplateMode::Graded => {
                let theta = (coord as f64 + 0.5) / observers as f64;
                let z = group_position(group, spec.groups);
                if z <= theta {
                    coord_pair[coord].0
                } else {
                    coord_pair[coord].1
                }
            }
        }
    };

    // Routing realization: per-prefix plan plus 2-hop paths.
    let mut paths = Vec::new();
    let mut observer_plan = BTreeMap::new();
    let mut labels = BTreeMap::new();
    let mut geo = BTreeMap::new();
    let mut nets: Vec<Vec<PrefixNet>> = Vec::with_capacity(spec.groups);
    for group in 0..spec.groups {
        let mut group_nets = Vec::with_capacity(spec.prefixes_per_group);
        for j in 0..spec.prefixes_per_group {
            let net = PrefixNet::new(Ipv4Addr::new(10, group as u8, j as u8, 0), 24)
                .expect("aligned /24");
            let mut plan = Vec::with_capacity(observers);
            for coord in 0..observers {
                let planned = template_entry(group, coord);
                let value = if spec.eps_r > 0.0 && rng.random::<f64>() < spec.eps_r {
                    match spec.templates {
                        TemplateMode::Distinct => pool[rng.random_range(0..w)],
                        TemplateMode::Graded => {
                            if rng.random::<bool>() {
                                coord_pair[coord].0
                            } else {
                                coord_pair[coord].1
                            }
                        }
                    }
                } else {
                    planned
                };
                plan.push(value);
                paths.push(AsPath {
                    observer: Scenario::observer_as(coord),
                    net,
                    hops: vec![
                        Scenario::observer_as(coord),
                        value,
                        Scenario::origin_as(group),
                    ],
                });
            }
            observer_plan.insert(net, plan);
            labels.insert(net, group);
            geo.insert(net, COUNTRIES[group % COUNTRIES.len()].to_string());
            group_nets.push(net);
        }
        nets.push(group_nets);
    }

    // Latency realization: per group, a rotated preference order and a
    // measured-region subset shared by the group's clients.
    let m = spec.regions;
    let rotation_budget = (m / 2) as f64;
    let mut measurements = MeasurementSet::default();
    for group in 0..spec.groups {
        let rotation =
            (group_position(group, spec.groups) * rotation_budget).round() as u32 % m.max(1);
        // base latency position of region r in this group's order
        let position = |region: u32| -> u32 { (region + m - rotation) % m };
        let subset: Vec<u32> = if spec.known_per_client == m {
            (0..m).collect()
        } else {
            let mut ids: Vec<u32> = (0..m).collect();
            for i in 0..spec.known_per_client as usize {
                let j = rng.random_range(i..ids.len());
                ids.swap(i, j);
            }
            let mut subset = ids[..spec.known_per_client as usize].to_vec();
            subset.sort_unstable();
            subset
        };
        for net in &nets[group] {
            for c in 0..spec.clients_per_prefix {
                let ip = Ipv4Addr::new(
                    net.addr().octets()[0],
                    net.addr().octets()[1],
                    net.addr().octets()[2],
                    (c + 1) as u8,
                );
                let client = ip.to_string();
                for &region in &subset {
                    let base = 20.0 + spec.latency_step_ms * position(region) as f64;
                    let jitter = if spec.eps_l_ms > 0.0 {
                        rng.random::<f64>() * spec.eps_l_ms
                    } else {
                        0.0
                    };
                    measurements.insert_min(
                        client.clone(),
                        RegionId(region),
                        quantize_ms(base + jitter),
                    );
                }
            }
        }
    }

    Ok(Scenario {
        paths,
        measurements,
        geo,
        labels,
        observer_plan,
        t_prime: spec.t_prime,
        regions: m,
        groups: spec.groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::canonical_prefixes;
    use crate::routing::{build_routestates, extract_nexthops, rsd_normalized, split_sub_ases};

    fn base_spec() -> SyntheticSpec {
        SyntheticSpec {
            groups: 3,
            prefixes_per_group: 4,
            clients_per_prefix: 2,
            t_prime: 30,
            regions: 12,
            known_per_client: 12,
            hop_pool: 3,
            eps_r: 0.0,
            eps_l_ms: 0.0,
            latency_step_ms: 10.0,
            templates: TemplateMode::Distinct,
            seed: 11,
        }
    }

    fn pipeline(scenario: &Scenario) -> (Vec<crate::routing::RouteState>, usize) {
        let (prefixes, conflicts) = canonical_prefixes(&scenario.paths);
        assert_eq!(conflicts, 0);
        let obs = extract_nexthops(&scenario.paths);
        let split = split_sub_ases(&obs);
        let (states, unobserved) = build_routestates(&split, &prefixes);
        assert!(unobserved.is_empty());
        (states, split.space.t_prime())
    }

    #[test]
    fn rejects_infeasible_specs() {
        let mut s = base_spec();
        s.groups = 0;
        assert!(generate(&s).is_err());
        let mut s = base_spec();
        s.known_per_client = 13;
        assert!(generate(&s).is_err());
        let mut s = base_spec();
        s.t_prime = 7; // observers would not cover the hop pool
        assert!(generate(&s).is_err());
        let mut s = base_spec();
        s.hop_pool = 2; // < groups for distinct templates
        assert!(generate(&s).is_err());
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = SyntheticSpec {
            eps_r: 0.3,
            eps_l_ms: 4.0,
            ..base_spec()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.path_text(), b.path_text());
        assert_eq!(a.measurement_text(), b.measurement_text());
        let c = generate(&SyntheticSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn universe_size_matches_request() {
        let scenario = generate(&base_spec()).unwrap();
        let (_, t_prime) = pipeline(&scenario);
        assert_eq!(t_prime, 30);
    }

    #[test]
    fn extraction_reproduces_planned_routestates() {
        let spec = SyntheticSpec {
            eps_r: 0.2,
            ..base_spec()
        };
        let scenario = generate(&spec).unwrap();
        let obs = extract_nexthops(&scenario.paths);
        for (net, plan) in &scenario.observer_plan {
            for (coord, planned) in plan.iter().enumerate() {
                let hops = &obs.next[&(Scenario::observer_as(coord), *net)];
                assert_eq!(hops.len(), 1);
                assert!(hops.contains(planned));
            }
        }
    }

    #[test]
    fn noiseless_groups_are_rsd_tight_and_separated() {
        let scenario = generate(&base_spec()).unwrap();
        let (states, t_prime) = pipeline(&scenario);
        for (i, a) in states.iter().enumerate() {
            for b in states.iter().skip(i + 1) {
                let d = rsd_normalized(a, b, t_prime);
                if scenario.labels[&a.prefix.net] == scenario.labels[&b.prefix.net] {
                    assert_eq!(d, 0.0);
                } else {
                    assert_eq!(d, t_prime as f64);
                }
            }
        }
    }

    #[test]
    fn noiseless_rankings_are_identical_within_groups() {
        let scenario = generate(&base_spec()).unwrap();
        let m = scenario.measurements.region_universe();
        assert_eq!(m, 12);
        let rankings = scenario.measurements.rankings(m).unwrap();
        let client_group = |client: &str| -> usize {
            let ip: Ipv4Addr = client.parse().unwrap();
            ip.octets()[1] as usize
        };
        for a in &rankings {
            for b in &rankings {
                if client_group(a.client()) == client_group(b.client()) {
                    assert_eq!(a.known(), b.known());
                }
            }
        }
    }

    #[test]
    fn graded_templates_order_rsd_by_group_distance() {
        let spec = SyntheticSpec {
            groups: 3,
            hop_pool: 4,
            t_prime: 37,
            templates: TemplateMode::Graded,
            ..base_spec()
        };
        let scenario = generate(&spec).unwrap();
        let (states, t_prime) = pipeline(&scenario);
        let by_group = |g: usize| {
            states
                .iter()
                .find(|s| scenario.labels[&s.prefix.net] == g)
                .unwrap()
        };
        let near = rsd_normalized(by_group(0), by_group(1), t_prime);
        let far = rsd_normalized(by_group(0), by_group(2), t_prime);
        assert!(near < far, "near={near} far={far}");
        let same = rsd_normalized(
            by_group(0),
            states
                .iter()
                .filter(|s| scenario.labels[&s.prefix.net] == 0)
                .nth(1)
                .unwrap(),
            t_prime,
        );
        assert_eq!(same, 0.0);
    }

    #[test]
    fn labels_round_trip() {
        let scenario = generate(&base_spec()).unwrap();
        let parsed = parse_labels(&scenario.labels_text());
        assert!(parsed.errors.is_empty());
        assert_eq!(parsed.records, scenario.labels);
    }
}
