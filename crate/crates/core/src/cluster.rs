//! Partitionings of prefixes and clients.
//!
//! The main clustering is the randomized pivot scheme over the RSD matrix:
//! pick an unassigned prefix at random, absorb everything within `tau` of
//! it, repeat. The remaining constructors are benchmark partitionings:
//! grouping clients by their exact top-r server order, by longest-match
//! prefix, and grouping prefixes by origin AS, country, or at random.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rank::{ClientId, PartialRanking};
use crate::routing::{Prefix, PrefixNet, RsdMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("tau {tau} outside [0, {t_prime}]")]
    TauOutOfRange { tau: f64, t_prime: usize },
    #[error("top-r depth must be at least 1")]
    ZeroR,
    #[error("sweep needs at least one run")]
    ZeroRuns,
}

/// How a partitioning was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PivotRsd,
    ROptimal,
    ByPrefix,
    ByAs,
    ByCountry,
    Random,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::PivotRsd => "pivot-rsd",
            Method::ROptimal => "r-optimal",
            Method::ByPrefix => "by-prefix",
            Method::ByAs => "by-as",
            Method::ByCountry => "by-country",
            Method::Random => "random",
        };
        f.write_str(s)
    }
}

/// One cluster: a label for reports, the member set, and optionally the
/// pivot member it was grown from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster<M> {
    pub id: u32,
    pub label: String,
    pub members: Vec<M>,
    pub pivot: Option<M>,
}

impl<M> Cluster<M> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// A disjoint cover of some universe by clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partitioning<M> {
    pub method: Method,
    pub clusters: Vec<Cluster<M>>,
}

impl<M: Clone + Ord> Partitioning<M> {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn universe(&self) -> BTreeSet<M> {
        self.clusters
            .iter()
            .flat_map(|c| c.members.iter().cloned())
            .collect()
    }

    /// Cluster id per member; `None` for members outside the partitioning.
    pub fn assignment(&self) -> BTreeMap<M, u32> {
        let mut map = BTreeMap::new();
        for c in &self.clusters {
            for m in &c.members {
                map.insert(m.clone(), c.id);
            }
        }
        map
    }

    /// Checks the defining invariant: clusters are non-empty, pairwise
    /// disjoint, pivots sit inside their cluster, and the union equals
    /// `universe`.
    pub fn check_disjoint_cover(&self, universe: &BTreeSet<M>) -> bool {
        let mut seen = BTreeSet::new();
        for c in &self.clusters {
            if c.members.is_empty() {
                return false;
            }
            if let Some(p) = &c.pivot {
                if !c.members.contains(p) {
                    return false;
                }
            }
            for m in &c.members {
                if !seen.insert(m.clone()) {
                    return false;
                }
            }
        }
        seen == *universe
    }
}

/// Pivot clustering over an RSD matrix. Repeatedly picks a uniformly
/// random unassigned prefix `p` (driven by `seed`), forms the cluster of
/// all unassigned prefixes within `tau` of `p` (ties at exactly `tau`
/// included), and removes it. Deterministic for a fixed seed.
pub fn pivot_cluster(
    matrix: &RsdMatrix,
    tau: f64,
    seed: u64,
) -> Result<Partitioning<PrefixNet>, ClusterError> {
    let t_prime = matrix.t_prime();
    if !(tau >= 0.0 && tau <= t_prime as f64) {
        return Err(ClusterError::TauOutOfRange { tau, t_prime });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unassigned: Vec<usize> = (0..matrix.len()).collect();
    let mut clusters = Vec::new();
    while !unassigned.is_empty() {
        let pick = rng.random_range(0..unassigned.len());
        let pivot_idx = unassigned[pick];
        let members_idx: Vec<usize> = unassigned
            .iter()
            .copied()
            .filter(|&j| matrix.rsd(pivot_idx, j) <= tau)
            .collect();
        unassigned.retain(|j| !members_idx.contains(j));
        let pivot_net = matrix.prefixes()[pivot_idx];
        clusters.push(Cluster {
            id: clusters.len() as u32,
            label: pivot_net.to_string(),
            members: members_idx
                .iter()
                .map(|&j| matrix.prefixes()[j])
                .collect(),
            pivot: Some(pivot_net),
        });
    }
    Ok(Partitioning {
        method: Method::PivotRsd,
        clusters,
    })
}

/// One row of a tau sweep: cluster-count statistics over repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub runs: u32,
    pub mean_clusters: f64,
    pub ci95_half: f64,
}

/// Runs the pivot clustering `runs` times per tau (run `i` uses seed
/// `seed + i`) and reports the mean cluster count with a normal 95%
/// confidence interval.
pub fn tau_sweep(
    matrix: &RsdMatrix,
    taus: &[f64],
    runs: u32,
    seed: u64,
) -> Result<Vec<SweepRow>, ClusterError> {
    if runs == 0 {
        return Err(ClusterError::ZeroRuns);
    }
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let counts: Vec<f64> = (0..runs)
            .map(|i| {
                pivot_cluster(matrix, tau, seed.wrapping_add(i as u64))
                    .map(|p| p.len() as f64)
            })
            .collect::<Result<_, _>>()?;
        let (mean, ci) = mean_ci95(&counts);
        rows.push(SweepRow {
            tau,
            runs,
            mean_clusters: mean,
            ci95_half: ci,
        });
    }
    Ok(rows)
}

/// Sample mean and half-width of a normal-approximation 95% CI.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

/// Groups clients by the exact tuple of their top-r known regions (or by
/// the full known tuple for clients with fewer than `r` entries).
pub fn optimal_partition(
    rankings: &[PartialRanking],
    r: usize,
) -> Result<Partitioning<ClientId>, ClusterError> {
    if r == 0 {
        return Err(ClusterError::ZeroR);
    }
    let mut groups: BTreeMap<Vec<u32>, Vec<ClientId>> = BTreeMap::new();
    for ranking in rankings {
        let depth = r.min(ranking.k_effective());
        let key: Vec<u32> = ranking.known()[..depth].iter().map(|x| x.0).collect();
        groups.entry(key).or_default().push(ranking.client().clone());
    }
    let clusters = groups
        .into_iter()
        .enumerate()
        .map(|(i, (key, mut members))| {
            members.sort();
            Cluster {
                id: i as u32,
                label: key
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(">"),
                members,
                pivot: None,
            }
        })
        .collect();
    Ok(Partitioning {
        method: Method::ROptimal,
        clusters,
    })
}

/// Outcome of grouping clients by longest-match prefix: the partitioning
/// plus the clients whose address matched nothing.
#[derive(Debug, Clone)]
pub struct ByPrefixOutcome {
    pub partitioning: Partitioning<ClientId>,
    /// Cluster id -> the prefix that cluster represents.
    pub cluster_prefix: BTreeMap<u32, PrefixNet>,
    pub unmatched: Vec<ClientId>,
}

/// Groups clients by their longest matching prefix. Unmatched clients are
/// reported and excluded.
pub fn partition_by_prefix(
    clients: &[(ClientId, std::net::Ipv4Addr)],
    table: &crate::ingest::PrefixTable,
) -> ByPrefixOutcome {
    let mut groups: BTreeMap<PrefixNet, Vec<ClientId>> = BTreeMap::new();
    let mut unmatched = Vec::new();
    for (client, ip) in clients {
        match table.longest_match(*ip) {
            Some(prefix) => groups.entry(prefix.net).or_default().push(client.clone()),
            None => unmatched.push(client.clone()),
        }
    }
    let mut cluster_prefix = BTreeMap::new();
    let clusters = groups
        .into_iter()
        .enumerate()
        .map(|(i, (net, mut members))| {
            members.sort();
            cluster_prefix.insert(i as u32, net);
            Cluster {
                id: i as u32,
                label: net.to_string(),
                members,
                pivot: None,
            }
        })
        .collect();
    ByPrefixOutcome {
        partitioning: Partitioning {
            method: Method::ByPrefix,
            clusters,
        },
        cluster_prefix,
        unmatched,
    }
}

/// Groups prefixes by their origin AS.
pub fn partition_by_as(prefixes: &[Prefix]) -> Partitioning<PrefixNet> {
    let mut groups: BTreeMap<u32, Vec<PrefixNet>> = BTreeMap::new();
    for p in prefixes {
        groups.entry(p.origin_as).or_default().push(p.net);
    }
    let clusters = groups
        .into_iter()
        .enumerate()
        .map(|(i, (asn, mut members))| {
            members.sort();
            members.dedup();
            Cluster {
                id: i as u32,
                label: asn.to_string(),
                members,
                pivot: None,
            }
        })
        .collect();
    Partitioning {
        method: Method::ByAs,
        clusters,
    }
}

/// Groups prefixes by country code; prefixes missing from the geo map are
/// reported and excluded.
pub fn partition_by_country(
    prefixes: &[PrefixNet],
    geo: &BTreeMap<PrefixNet, String>,
) -> (Partitioning<PrefixNet>, Vec<PrefixNet>) {
    let mut groups: BTreeMap<&str, Vec<PrefixNet>> = BTreeMap::new();
    let mut missing = Vec::new();
    for p in prefixes {
        match geo.get(p) {
            Some(country) => groups.entry(country).or_default().push(*p),
            None => missing.push(*p),
        }
    }
    let clusters = groups
        .into_iter()
        .enumerate()
        .map(|(i, (country, mut members))| {
            members.sort();
            members.dedup();
            Cluster {
                id: i as u32,
                label: country.to_string(),
                members,
                pivot: None,
            }
        })
        .collect();
    (
        Partitioning {
            method: Method::ByCountry,
            clusters,
        },
        missing,
    )
}

/// Random partitioning with the same cluster-size profile as `like`, used
/// as a null baseline for scatter comparisons.
pub fn random_partition_like(
    universe: &[PrefixNet],
    like: &Partitioning<PrefixNet>,
    seed: u64,
) -> Partitioning<PrefixNet> {
    let mut shuffled: Vec<PrefixNet> = universe.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..shuffled.len()).rev() {
        let j = rng.random_range(0..=i);
        shuffled.swap(i, j);
    }
    let mut clusters = Vec::with_capacity(like.clusters.len());
    let mut at = 0usize;
    for c in &like.clusters {
        let take = c.members.len().min(shuffled.len() - at);
        let mut members: Vec<PrefixNet> = shuffled[at..at + take].to_vec();
        members.sort();
        at += take;
        clusters.push(Cluster {
            id: clusters.len() as u32,
            label: format!("random-{}", clusters.len()),
            members,
            pivot: None,
        });
    }
    clusters.retain(|c| !c.members.is_empty());
    Partitioning {
        method: Method::Random,
        clusters,
    }
}
