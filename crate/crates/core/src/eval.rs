//! Cluster quality statistics.
//!
//! Everything here treats clusters as opaque sets of prefixes whose
//! clients carry partial rankings: min/avg/max ranking distance between
//! two prefixes' client sets, growth of a cluster's diameter and average
//! pairwise distance relative to its widest member prefix, sampled
//! in-cluster vs. out-cluster distance distributions, distance statistics
//! bucketed by rsim or RSD, per-prefix-length summaries, and worst-case
//! latency penalties.
//!
//! Ratios with an empty or zero denominator are reported as `None` (NA in
//! the CSV output) rather than being clamped.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cluster::{mean_ci95, Partitioning};
use crate::ingest::MeasurementSet;
use crate::rank::{
    distance, ClientId, DistanceParams, Metric, PartialRanking, RankError, RegionId,
};
use crate::routing::{PrefixNet, RsdMatrix, RsimMatrix};

/// Rankings of every client, grouped under the client's longest-match
/// prefix.
pub type RankingsByPrefix = BTreeMap<PrefixNet, Vec<PartialRanking>>;

/// Builds per-client rankings from a measurement set and groups them by
/// longest-match prefix. Clients whose id is not an IPv4 address or whose
/// address matches no prefix are returned separately.
pub fn group_rankings_by_prefix(
    meas: &MeasurementSet,
    table: &crate::ingest::PrefixTable,
    m: u32,
) -> Result<(RankingsByPrefix, Vec<ClientId>), EvalError> {
    let mut map = RankingsByPrefix::new();
    let mut unmatched = Vec::new();
    for ranking in meas.rankings(m)? {
        let prefix = ranking
            .client()
            .parse::<std::net::Ipv4Addr>()
            .ok()
            .and_then(|ip| table.longest_match(ip));
        match prefix {
            Some(p) => map.entry(p.net).or_default().push(ranking),
            None => unmatched.push(ranking.client().clone()),
        }
    }
    Ok((map, unmatched))
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prefix has no client rankings")]
    EmptyClientSet,
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// Minimum, average and maximum distance between two client sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

/// Distance statistics between the clients of two distinct prefixes: all
/// cross pairs (X1 in p1, X2 in p2).
pub fn cross_pair_stats(
    p1: &[PartialRanking],
    p2: &[PartialRanking],
    metric: Metric,
    params: DistanceParams,
) -> Result<PairStats, EvalError> {
    if p1.is_empty() || p2.is_empty() {
        return Err(EvalError::EmptyClientSet);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for a in p1 {
        for b in p2 {
            let d = distance(metric, a, b, params)?;
            min = min.min(d);
            max = max.max(d);
            sum += d;
        }
    }
    Ok(PairStats {
        min,
        avg: sum / (p1.len() * p2.len()) as f64,
        max,
    })
}

/// Within-prefix distance statistics over distinct client pairs. The
/// average over unordered pairs equals the ordered-pair average with
/// denominator `t (t - 1)` because the metrics are symmetric. `None` when
/// the prefix has fewer than two clients.
pub fn within_pair_stats(
    clients: &[PartialRanking],
    metric: Metric,
    params: DistanceParams,
) -> Result<Option<PairStats>, EvalError> {
    if clients.len() < 2 {
        return Ok(None);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..clients.len() {
        for j in (i + 1)..clients.len() {
            let d = distance(metric, &clients[i], &clients[j], params)?;
            min = min.min(d);
            max = max.max(d);
            sum += d;
            count += 1;
        }
    }
    Ok(Some(PairStats {
        min,
        avg: sum / count as f64,
        max,
    }))
}

fn cluster_clients<'a>(
    members: &[PrefixNet],
    rankings: &'a RankingsByPrefix,
) -> Vec<&'a PartialRanking> {
    members
        .iter()
        .filter_map(|net| rankings.get(net))
        .flatten()
        .collect()
}

/// Growth of the diameter: the maximum pairwise distance over all clients
/// of the cluster over the largest within-prefix maximum among member
/// prefixes. `None` when the denominator is zero or undefined.
pub fn diameter_growth(
    members: &[PrefixNet],
    rankings: &RankingsByPrefix,
    metric: Metric,
    params: DistanceParams,
) -> Result<Option<f64>, EvalError> {
    let clients = cluster_clients(members, rankings);
    if clients.len() < 2 {
        return Ok(None);
    }
    let mut numerator = f64::NEG_INFINITY;
    for i in 0..clients.len() {
        for j in (i + 1)..clients.len() {
            numerator = numerator.max(distance(metric, clients[i], clients[j], params)?);
        }
    }
    let mut denominator: Option<f64> = None;
    for net in members {
        if let Some(clients) = rankings.get(net) {
            if let Some(stats) = within_pair_stats(clients, metric, params)? {
                denominator = Some(denominator.map_or(stats.max, |d: f64| d.max(stats.max)));
            }
        }
    }
    Ok(match denominator {
        Some(d) if d > 0.0 => Some(numerator / d),
        _ => None,
    })
}

/// Growth of the average pairwise distance: the cluster-wide average over
/// the largest within-prefix average among member prefixes. `None` when
/// the denominator is zero or undefined.
pub fn avg_growth(
    members: &[PrefixNet],
    rankings: &RankingsByPrefix,
    metric: Metric,
    params: DistanceParams,
) -> Result<Option<f64>, EvalError> {
    let clients = cluster_clients(members, rankings);
    if clients.len() < 2 {
        return Ok(None);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..clients.len() {
        for j in (i + 1)..clients.len() {
            sum += distance(metric, clients[i], clients[j], params)?;
            count += 1;
        }
    }
    let numerator = sum / count as f64;
    let mut denominator: Option<f64> = None;
    for net in members {
        if let Some(clients) = rankings.get(net) {
            if let Some(stats) = within_pair_stats(clients, metric, params)? {
                denominator = Some(denominator.map_or(stats.avg, |d: f64| d.max(stats.avg)));
            }
        }
    }
    Ok(match denominator {
        Some(d) if d > 0.0 => Some(numerator / d),
        _ => None,
    })
}

/// What a sampled pair spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairUnit {
    /// Pairs of prefixes; the value is the avg cross-prefix distance.
    PrefixAvg,
    /// Pairs of individual clients; the value is their distance.
    ClientPair,
}

/// Sampled in-cluster and out-cluster distance distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct InOutSample {
    pub in_values: Vec<f64>,
    pub out_values: Vec<f64>,
    /// Total pairs available in each class; when smaller than the
    /// requested sample, every pair was used.
    pub in_available: usize,
    pub out_available: usize,
}

/// Samples `sample` same-cluster and `sample` cross-cluster pairs
/// uniformly without replacement (all pairs when fewer exist) and returns
/// their distance distributions. With a single cluster the out-cluster
/// side comes back empty with `out_available == 0`.
pub fn in_out_cluster(
    part: &Partitioning<PrefixNet>,
    rankings: &RankingsByPrefix,
    metric: Metric,
    params: DistanceParams,
    unit: PairUnit,
    sample: usize,
    seed: u64,
) -> Result<InOutSample, EvalError> {
    // Elements: (cluster index, payload index); payloads are either
    // prefixes or individual clients depending on the unit.
    let mut element_cluster: Vec<usize> = Vec::new();
    let mut prefixes: Vec<PrefixNet> = Vec::new();
    let mut clients: Vec<&PartialRanking> = Vec::new();
    for (ci, cluster) in part.clusters.iter().enumerate() {
        for net in &cluster.members {
            let Some(list) = rankings.get(net) else { continue };
            if list.is_empty() {
                continue;
            }
            match unit {
                PairUnit::PrefixAvg => {
                    prefixes.push(*net);
                    element_cluster.push(ci);
                }
                PairUnit::ClientPair => {
                    for r in list {
                        clients.push(r);
                        element_cluster.push(ci);
                    }
                }
            }
        }
    }
    let n = element_cluster.len();
    let value = |i: usize, j: usize| -> Result<f64, EvalError> {
        match unit {
            PairUnit::PrefixAvg => Ok(cross_pair_stats(
                &rankings[&prefixes[i]],
                &rankings[&prefixes[j]],
                metric,
                params,
            )?
            .avg),
            PairUnit::ClientPair => Ok(distance(metric, clients[i], clients[j], params)?),
        }
    };

    let mut per_cluster: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, ci) in element_cluster.iter().enumerate() {
        per_cluster.entry(*ci).or_default().push(i);
    }
    let in_available: usize = per_cluster
        .values()
        .map(|v| v.len() * v.len().saturating_sub(1) / 2)
        .sum();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let out_available = total_pairs - in_available;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_values = Vec::new();
    if sample > 0 && in_available > 0 {
        if in_available <= sample {
            for members in per_cluster.values() {
                for a in 0..members.len() {
                    for b in (a + 1)..members.len() {
                        in_values.push(value(members[a], members[b])?);
                    }
                }
            }
        } else {
            // cluster chosen proportionally to its pair count, then a
            // uniform pair within it
            let weights: Vec<usize> = per_cluster
                .values()
                .map(|v| v.len() * (v.len() - 1) / 2)
                .collect();
            let lists: Vec<&Vec<usize>> = per_cluster.values().collect();
            let total: usize = weights.iter().sum();
            let mut taken: HashSet<(usize, usize)> = HashSet::new();
            while taken.len() < sample {
                let mut pick = rng.random_range(0..total);
                let mut which = 0usize;
                while pick >= weights[which] {
                    pick -= weights[which];
                    which += 1;
                }
                let members = lists[which];
                let a = members[rng.random_range(0..members.len())];
                let mut b = members[rng.random_range(0..members.len())];
                while b == a {
                    b = members[rng.random_range(0..members.len())];
                }
                let key = (a.min(b), a.max(b));
                if taken.insert(key) {
                    in_values.push(value(key.0, key.1)?);
                }
            }
        }
    }

    let mut out_values = Vec::new();
    if sample > 0 && out_available > 0 {
        if out_available <= sample {
            for i in 0..n {
                for j in (i + 1)..n {
                    if element_cluster[i] != element_cluster[j] {
                        out_values.push(value(i, j)?);
                    }
                }
            }
        } else {
            let mut taken: HashSet<(usize, usize)> = HashSet::new();
            while taken.len() < sample {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                if i == j || element_cluster[i] == element_cluster[j] {
                    continue;
                }
                let key = (i.min(j), i.max(j));
                if taken.insert(key) {
                    out_values.push(value(key.0, key.1)?);
                }
            }
        }
    }

    Ok(InOutSample {
        in_values,
        out_values,
        in_available,
        out_available,
    })
}

/// Mean plus half-width of a normal 95% confidence interval.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub ci95_half: f64,
}

/// One bucket of pair statistics. `stats` holds, in order, the mean and
/// CI of ps min/avg/max then g min/avg/max; `None` for empty buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketRow {
    pub lo: f64,
    pub hi: f64,
    pub pairs: usize,
    pub stats: Option<[MeanCi; 6]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSeries {
    pub rows: Vec<BucketRow>,
}

/// How prefix pairs are assigned to buckets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BucketMode {
    /// Fixed-width rsim buckets `[0, w), [w, 2w), ...`.
    Rsim { width: usize },
    /// RSD buckets `0-50, 50-200, 200-400, ...` up to the universe size.
    Rsd,
}

/// Bucket edges for [`BucketMode::Rsd`]: 0-50, 50-200, then steps of 200
/// until the universe size is covered.
pub fn rsd_bucket_edges(t_prime: usize) -> Vec<f64> {
    let mut edges = vec![0.0, 50.0];
    let mut next = 200.0;
    while edges[edges.len() - 1] < t_prime as f64 {
        edges.push(next);
        next += 200.0;
    }
    edges
}

/// Assigns every prefix pair to a bucket by its rsim or RSD value and
/// reports the per-bucket mean and 95% CI of the six distance statistics
/// (ps and g, each min/avg/max). Prefixes without client rankings are
/// skipped.
pub fn correlation_buckets(
    matrix: &RsdMatrix,
    rsims: &RsimMatrix,
    rankings: &RankingsByPrefix,
    params: DistanceParams,
    mode: BucketMode,
) -> Result<BucketSeries, EvalError> {
    let active: Vec<usize> = (0..matrix.len())
        .filter(|i| {
            rankings
                .get(&matrix.prefixes()[*i])
                .is_some_and(|l| !l.is_empty())
        })
        .collect();

    let edges: Vec<f64> = match mode {
        BucketMode::Rsim { width } => {
            let width = width.max(1);
            let max_rsim = active
                .iter()
                .enumerate()
                .flat_map(|(pos, &i)| {
                    active[pos + 1..]
                        .iter()
                        .map(move |&j| rsims.rsim(i, j))
                })
                .max()
                .unwrap_or(0);
            let buckets = max_rsim / width + 1;
            (0..=buckets).map(|b| (b * width) as f64).collect()
        }
        BucketMode::Rsd => rsd_bucket_edges(matrix.t_prime()),
    };
    let nbuckets = edges.len() - 1;
    let mut per_bucket: Vec<[Vec<f64>; 6]> = (0..nbuckets).map(|_| Default::default()).collect();

    for (pos, &i) in active.iter().enumerate() {
        for &j in &active[pos + 1..] {
            let v = match mode {
                BucketMode::Rsim { .. } => rsims.rsim(i, j) as f64,
                BucketMode::Rsd => matrix.rsd(i, j),
            };
            let mut b = nbuckets - 1;
            for (bi, w) in edges.windows(2).enumerate() {
                if v >= w[0] && v < w[1] {
                    b = bi;
                    break;
                }
            }
            let ps = cross_pair_stats(
                &rankings[&matrix.prefixes()[i]],
                &rankings[&matrix.prefixes()[j]],
                Metric::PartialFootrule,
                params,
            )?;
            let g = cross_pair_stats(
                &rankings[&matrix.prefixes()[i]],
                &rankings[&matrix.prefixes()[j]],
                Metric::Geometric,
                params,
            )?;
            let slot = &mut per_bucket[b];
            slot[0].push(ps.min);
            slot[1].push(ps.avg);
            slot[2].push(ps.max);
            slot[3].push(g.min);
            slot[4].push(g.avg);
            slot[5].push(g.max);
        }
    }

    let rows = per_bucket
        .into_iter()
        .enumerate()
        .map(|(b, values)| {
            let pairs = values[0].len();
            let stats = if pairs == 0 {
                None
            } else {
                let mut out = [MeanCi::default(); 6];
                for (slot, vals) in out.iter_mut().zip(&values) {
                    let (mean, ci) = mean_ci95(vals);
                    *slot = MeanCi {
                        mean,
                        ci95_half: ci,
                    };
                }
                Some(out)
            };
            BucketRow {
                lo: edges[b],
                hi: edges[b + 1],
                pairs,
                stats,
            }
        })
        .collect();
    Ok(BucketSeries { rows })
}

/// Which server stands in for a client's own best choice when computing
/// latency penalties.
#[derive(Debug, Clone, PartialEq)]
pub enum LatencyAnchor {
    /// For each client, the worst-latency server among the top-1 choices
    /// of the *other* clients in the group.
    GroupWorst,
    /// The top-1 server of a designated representative client.
    RepresentativeTop1(ClientId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyDiffOutcome {
    pub diffs: Vec<(ClientId, f64)>,
    /// Clients skipped for missing measurements.
    pub skipped: usize,
}

fn top1_of(meas: &MeasurementSet, client: &str) -> Option<(RegionId, f64)> {
    let lat = meas.client_latencies(client)?;
    lat.iter()
        .map(|(r, l)| (*r, *l))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
}

/// Millisecond penalties a group of clients would pay if served by the
/// anchor server instead of their own top-1. Clients lacking the anchor
/// measurement (or any measurements) are skipped and counted.
pub fn latency_difference(
    group: &[ClientId],
    meas: &MeasurementSet,
    anchor: &LatencyAnchor,
) -> LatencyDiffOutcome {
    let mut diffs = Vec::new();
    let mut skipped = 0usize;
    match anchor {
        LatencyAnchor::GroupWorst => {
            let top1: BTreeMap<&ClientId, RegionId> = group
                .iter()
                .filter_map(|c| top1_of(meas, c).map(|(r, _)| (c, r)))
                .collect();
            for client in group {
                let Some((own_region, own_lat)) = top1_of(meas, client) else {
                    skipped += 1;
                    continue;
                };
                let _ = own_region;
                let worst = group
                    .iter()
                    .filter(|other| *other != client)
                    .filter_map(|other| top1.get(other))
                    .filter_map(|region| meas.latency(client, *region).map(|l| (l, *region)))
                    .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                match worst {
                    Some((lat, _)) => diffs.push((client.clone(), lat - own_lat)),
                    None => skipped += 1,
                }
            }
        }
        LatencyAnchor::RepresentativeTop1(rep) => {
            let Some((rep_top, _)) = top1_of(meas, rep) else {
                return LatencyDiffOutcome {
                    diffs,
                    skipped: group.len(),
                };
            };
            for client in group {
                if client == rep {
                    continue;
                }
                let Some((_, own_lat)) = top1_of(meas, client) else {
                    skipped += 1;
                    continue;
                };
                match meas.latency(client, rep_top) {
                    Some(lat) => diffs.push((client.clone(), lat - own_lat)),
                    None => skipped += 1,
                }
            }
        }
    }
    LatencyDiffOutcome { diffs, skipped }
}

/// Per-prefix-length summary: mean within-prefix avg distances and mean
/// worst-case latency penalty, grouped by mask length.
pub fn prefix_length_series(
    rankings: &RankingsByPrefix,
    meas: &MeasurementSet,
    params: DistanceParams,
) -> Result<Vec<crate::ingest::PrefixLengthRow>, EvalError> {
    struct Acc {
        prefixes: usize,
        ps: Vec<f64>,
        g: Vec<f64>,
        lat: Vec<f64>,
    }
    let mut by_len: BTreeMap<u8, Acc> = BTreeMap::new();
    for (net, clients) in rankings {
        if clients.is_empty() {
            continue;
        }
        let acc = by_len.entry(net.prefix_len()).or_insert(Acc {
            prefixes: 0,
            ps: Vec::new(),
            g: Vec::new(),
            lat: Vec::new(),
        });
        acc.prefixes += 1;
        if let Some(stats) = within_pair_stats(clients, Metric::PartialFootrule, params)? {
            acc.ps.push(stats.avg);
        }
        if let Some(stats) = within_pair_stats(clients, Metric::Geometric, params)? {
            acc.g.push(stats.avg);
        }
        let ids: Vec<ClientId> = clients.iter().map(|c| c.client().clone()).collect();
        let outcome = latency_difference(&ids, meas, &LatencyAnchor::GroupWorst);
        if !outcome.diffs.is_empty() {
            let mean =
                outcome.diffs.iter().map(|(_, d)| *d).sum::<f64>() / outcome.diffs.len() as f64;
            acc.lat.push(mean);
        }
    }
    Ok(by_len
        .into_iter()
        .map(|(length, acc)| crate::ingest::PrefixLengthRow {
            length,
            prefixes: acc.prefixes,
            ps_avg_mean: mean_of(&acc.ps),
            g_avg_mean: mean_of(&acc.g),
            latency_diff_mean: mean_of(&acc.lat),
        })
        .collect())
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Scatter data comparing a routing-state partitioning against a baseline
/// partitioning: for each prefix, the mean over its cluster peers of the
/// avg cross-prefix distance, under both clusterings and both metrics.
pub fn baseline_scatter(
    rs: &Partitioning<PrefixNet>,
    baseline: &Partitioning<PrefixNet>,
    rankings: &RankingsByPrefix,
    params: DistanceParams,
) -> Result<Vec<crate::ingest::BaselineRow>, EvalError> {
    let peer_mean = |part: &Partitioning<PrefixNet>,
                     net: &PrefixNet,
                     metric: Metric|
     -> Result<Option<f64>, EvalError> {
        let Some(cluster) = part.clusters.iter().find(|c| c.members.contains(net)) else {
            return Ok(None);
        };
        let mut values = Vec::new();
        for peer in &cluster.members {
            if peer == net {
                continue;
            }
            let (Some(a), Some(b)) = (rankings.get(net), rankings.get(peer)) else {
                continue;
            };
            if a.is_empty() || b.is_empty() {
                continue;
            }
            values.push(cross_pair_stats(a, b, metric, params)?.avg);
        }
        Ok(mean_of(&values))
    };

    let mut rows = Vec::new();
    for net in rankings.keys() {
        if rankings[net].is_empty() {
            continue;
        }
        rows.push(crate::ingest::BaselineRow {
            prefix: *net,
            rs_ps_avg: peer_mean(rs, net, Metric::PartialFootrule)?,
            base_ps_avg: peer_mean(baseline, net, Metric::PartialFootrule)?,
            rs_g_avg: peer_mean(rs, net, Metric::Geometric)?,
            base_g_avg: peer_mean(baseline, net, Metric::Geometric)?,
        });
    }
    Ok(rows)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_rankings() -> impl Strategy<Value = (RankingsByPrefix, u32)> {
        let m = 6u32;
        let ranking = proptest::sample::subsequence((0..m).collect::<Vec<u32>>(), 1..=m as usize)
            .prop_shuffle();
        let clients = proptest::collection::vec(ranking, 1..5);
        proptest::collection::vec(clients, 1..4).prop_map(move |prefixes| {
            let mut map = RankingsByPrefix::new();
            for (p, clients) in prefixes.into_iter().enumerate() {
                let net = PrefixNet::new(std::net::Ipv4Addr::new(10, 0, p as u8, 0), 24).unwrap();
                let list = clients
                    .into_iter()
                    .enumerate()
                    .map(|(c, known)| {
                        PartialRanking::new(
                            format!("p{p}c{c}"),
                            m,
                            known.into_iter().map(RegionId).collect(),
                        )
                        .unwrap()
                    })
                    .collect();
                map.insert(net, list);
            }
            (map, m)
        })
    }

    fn arb_measurements() -> impl Strategy<Value = MeasurementSet> {
        let row = (0..8u8, 0..5u32, 0.0..500.0f64);
        proptest::collection::vec(row, 1..40).prop_map(|rows| {
            let mut meas = MeasurementSet::default();
            for (client, region, latency) in rows {
                meas.insert_min(format!("c{client}"), RegionId(region), latency);
            }
            meas
        })
    }

    proptest! {
        #[test]
        fn pair_stats_are_ordered((rankings, _) in arb_rankings(), k in 1u32..5) {
            let params = DistanceParams::new(k).unwrap();
            let nets: Vec<PrefixNet> = rankings.keys().copied().collect();
            for metric in [Metric::PartialFootrule, Metric::Geometric] {
                for a in &nets {
                    for b in &nets {
                        let s = cross_pair_stats(&rankings[a], &rankings[b], metric, params)
                            .unwrap();
                        prop_assert!(s.min <= s.avg + 1e-12 && s.avg <= s.max + 1e-12);
                    }
                    if let Some(s) = within_pair_stats(&rankings[a], metric, params).unwrap() {
                        prop_assert!(s.min <= s.avg + 1e-12 && s.avg <= s.max + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn growth_ratios_are_bounded((rankings, _) in arb_rankings(), k in 1u32..5) {
            let params = DistanceParams::new(k).unwrap();
            let members: Vec<PrefixNet> = rankings.keys().copied().collect();
            for metric in [Metric::PartialFootrule, Metric::Geometric] {
                if let Some(dg) = diameter_growth(&members, &rankings, metric, params).unwrap() {
                    // the cluster maximum runs over a superset of every
                    // prefix's pairs
                    prop_assert!(dg >= 1.0 - 1e-12);
                }
                if let Some(ag) = avg_growth(&members, &rankings, metric, params).unwrap() {
                    prop_assert!(ag >= 0.0);
                }
            }
        }

        #[test]
        fn latency_penalties_are_nonnegative(meas in arb_measurements()) {
            let group: Vec<ClientId> = meas.clients().cloned().collect();
            let worst = latency_difference(&group, &meas, &LatencyAnchor::GroupWorst);
            prop_assert!(worst.diffs.iter().all(|(_, d)| *d >= 0.0));
            let rep = group[0].clone();
            let follow =
                latency_difference(&group, &meas, &LatencyAnchor::RepresentativeTop1(rep));
            prop_assert!(follow.diffs.iter().all(|(_, d)| *d >= 0.0));
        }
    }
}
