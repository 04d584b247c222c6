//! Server-region rankings and the distance metrics between them.
//!
//! A client's preference order over server regions is usually known only
//! for the subset of regions that was actually measured. The two metrics
//! here are built for that situation: the partial Spearman footrule pads
//! unmeasured regions with a fixed rank and normalizes into `[0, 1]`,
//! while the geometric distance rewards agreement at the top of the lists
//! with exponentially decaying position weights.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Identifier of a CDN server region. Ids are dense in `[0, m)` for a
/// scenario with `m` regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque client identifier. In measurement files this is the client's
/// IPv4 address rendered as text, but nothing in this module assumes so.
pub type ClientId = String;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("no measurements")]
    NoMeasurements,
    #[error("invalid latency {latency} for region {region}")]
    InvalidLatency { region: u32, latency: f64 },
    #[error("ranking for {client}: duplicate region {region}")]
    DuplicateRegion { client: String, region: u32 },
    #[error("ranking for {client}: region {region} outside universe of {m}")]
    RegionOutOfRange { client: String, region: u32, m: u32 },
    #[error("ranking for {client} has no known regions")]
    EmptyRanking { client: String },
    #[error("rankings cover different universes ({a} vs {b} regions)")]
    UniverseMismatch { a: u32, b: u32 },
    #[error("rankings are not permutations of the same element set")]
    ElementSetMismatch,
    #[error("padding parameter k must be at least 1")]
    ZeroK,
}

/// A client's preference order over the regions it has measurements for,
/// best first. Positions are 1-based: `known[0]` holds rank 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialRanking {
    client: ClientId,
    m: u32,
    known: Vec<RegionId>,
}

impl PartialRanking {
    pub fn new(client: ClientId, m: u32, known: Vec<RegionId>) -> Result<Self, RankError> {
        if known.is_empty() {
            return Err(RankError::EmptyRanking { client });
        }
        let mut seen = Vec::with_capacity(known.len());
        for r in &known {
            if r.0 >= m {
                return Err(RankError::RegionOutOfRange {
                    client,
                    region: r.0,
                    m,
                });
            }
            if seen.contains(r) {
                return Err(RankError::DuplicateRegion {
                    client,
                    region: r.0,
                });
            }
            seen.push(*r);
        }
        Ok(Self { client, m, known })
    }

    pub fn client(&self) -> &ClientId {
        &self.client
    }

    /// Total number of server regions in the scenario, measured or not.
    pub fn universe(&self) -> u32 {
        self.m
    }

    /// Regions in preference order, best first.
    pub fn known(&self) -> &[RegionId] {
        &self.known
    }

    pub fn k_effective(&self) -> usize {
        self.known.len()
    }

    /// The client's best measured region.
    pub fn top1(&self) -> RegionId {
        self.known[0]
    }

    /// The known list cut to at most `k` entries.
    pub fn truncated(&self, k: u32) -> &[RegionId] {
        let n = self.known.len().min(k as usize);
        &self.known[..n]
    }

    /// Padded rank of `region` under parameter `k`: its 1-based position
    /// in the truncated known list, or `k + 1` when absent.
    pub fn padded_rank(&self, region: RegionId, k: u32) -> u32 {
        match self.truncated(k).iter().position(|r| *r == region) {
            Some(i) => i as u32 + 1,
            None => k + 1,
        }
    }
}

/// Builds a ranking from measured latencies: regions sorted by ascending
/// latency, equal latencies broken by ascending region id.
pub fn ranking_from_latencies(
    client: ClientId,
    latencies: &BTreeMap<RegionId, f64>,
    m: u32,
) -> Result<PartialRanking, RankError> {
    if latencies.is_empty() {
        return Err(RankError::NoMeasurements);
    }
    for (region, lat) in latencies {
        if !lat.is_finite() || *lat < 0.0 {
            return Err(RankError::InvalidLatency {
                region: region.0,
                latency: *lat,
            });
        }
    }
    let mut order: Vec<(RegionId, f64)> = latencies.iter().map(|(r, l)| (*r, *l)).collect();
    order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    PartialRanking::new(client, m, order.into_iter().map(|(r, _)| r).collect())
}

/// Padding parameter for the partial footrule: unmeasured regions receive
/// rank `k + 1` and distances are normalized by `k * (k + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceParams {
    k: u32,
}

impl DistanceParams {
    pub fn new(k: u32) -> Result<Self, RankError> {
        if k == 0 {
            return Err(RankError::ZeroK);
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn normalizer(&self) -> f64 {
        self.k as f64 * (self.k as f64 + 1.0)
    }
}

/// Classic Spearman footrule between two complete rankings of the same
/// element set: the l1 distance between their position vectors.
pub fn spearman_footrule(a: &[RegionId], b: &[RegionId]) -> Result<u64, RankError> {
    if a.len() != b.len() {
        return Err(RankError::ElementSetMismatch);
    }
    let mut sa: Vec<RegionId> = a.to_vec();
    let mut sb: Vec<RegionId> = b.to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    sa.dedup();
    if sa.len() != a.len() || sa != sb {
        return Err(RankError::ElementSetMismatch);
    }
    let mut total = 0u64;
    for (i, r) in a.iter().enumerate() {
        let j = b.iter().position(|x| x == r).unwrap();
        total += (i as i64 - j as i64).unsigned_abs();
    }
    Ok(total)
}

/// Partial Spearman footrule distance in `[0, 1]`.
///
/// Each ranking is truncated to its top `k` entries; the element at
/// position `i` gets rank `i` and every other element of the universe gets
/// rank `k + 1`. The distance is the l1 difference of the two padded rank
/// vectors over `k * (k + 1)`, which is the value attained when the two
/// truncated lists hold `k` mutually disjoint entries each.
pub fn partial_footrule(
    a: &PartialRanking,
    b: &PartialRanking,
    params: DistanceParams,
) -> Result<f64, RankError> {
    if a.m != b.m {
        return Err(RankError::UniverseMismatch { a: a.m, b: b.m });
    }
    let k = params.k;
    let pad = k + 1;
    let ta = a.truncated(k);
    let tb = b.truncated(k);
    let mut total = 0u64;
    for (i, r) in ta.iter().enumerate() {
        let ra = i as u32 + 1;
        let rb = match tb.iter().position(|x| x == r) {
            Some(j) => j as u32 + 1,
            None => pad,
        };
        total += (ra as i64 - rb as i64).unsigned_abs();
    }
    // Elements known only to b; everything unknown to both contributes 0.
    for (j, r) in tb.iter().enumerate() {
        if !ta.contains(r) {
            total += (pad - (j as u32 + 1)) as u64;
        }
    }
    Ok(total as f64 / params.normalizer())
}

/// Geometric distance in `(0, 1]`: one minus the sum of `2^-i` over the
/// positions `i` where both rankings name the same region. A shared rank-1
/// region alone already caps the distance at 0.5.
pub fn geometric_distance(a: &PartialRanking, b: &PartialRanking) -> Result<f64, RankError> {
    if a.m != b.m {
        return Err(RankError::UniverseMismatch { a: a.m, b: b.m });
    }
    let n = a.known.len().min(b.known.len());
    let mut agreement = 0.0;
    let mut weight = 0.5;
    for i in 0..n {
        if a.known[i] == b.known[i] {
            agreement += weight;
        }
        weight *= 0.5;
    }
    Ok(1.0 - agreement)
}

/// Which of the two ranking metrics to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Partial Spearman footrule (`ps`).
    PartialFootrule,
    /// Geometric distance (`g`).
    Geometric,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::PartialFootrule => "ps",
            Metric::Geometric => "g",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Metric dispatch; `params` only affects the partial footrule.
pub fn distance(
    metric: Metric,
    a: &PartialRanking,
    b: &PartialRanking,
    params: DistanceParams,
) -> Result<f64, RankError> {
    match metric {
        Metric::PartialFootrule => partial_footrule(a, b, params),
        Metric::Geometric => geometric_distance(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(client: &str, m: u32, known: &[u32]) -> PartialRanking {
        PartialRanking::new(
            client.to_string(),
            m,
            known.iter().map(|r| RegionId(*r)).collect(),
        )
        .unwrap()
    }

    fn lat(entries: &[(u32, f64)]) -> BTreeMap<RegionId, f64> {
        entries.iter().map(|(r, l)| (RegionId(*r), *l)).collect()
    }

    #[test]
    fn ranking_orders_by_ascending_latency() {
        let r = ranking_from_latencies("x6".into(), &lat(&[(0, 34.0), (1, 40.0), (2, 80.0), (3, 65.0)]), 4)
            .unwrap();
        assert_eq!(r.known(), &[RegionId(0), RegionId(1), RegionId(3), RegionId(2)]);
    }

    #[test]
    fn ranking_single_measurement() {
        let r = ranking_from_latencies("c".into(), &lat(&[(0, 5.0)]), 4).unwrap();
        assert_eq!(r.known(), &[RegionId(0)]);
        assert_eq!(r.k_effective(), 1);
    }

    #[test]
    fn ranking_breaks_latency_ties_by_region_id() {
        let r = ranking_from_latencies("c".into(), &lat(&[(0, 10.0), (1, 10.0), (2, 7.0)]), 3).unwrap();
        assert_eq!(r.known(), &[RegionId(2), RegionId(0), RegionId(1)]);
    }

    #[test]
    fn ranking_rejects_empty_and_invalid() {
        assert_eq!(
            ranking_from_latencies("c".into(), &BTreeMap::new(), 4),
            Err(RankError::NoMeasurements)
        );
        let err = ranking_from_latencies("c".into(), &lat(&[(0, -3.0)]), 4).unwrap_err();
        assert!(matches!(err, RankError::InvalidLatency { region: 0, .. }));
        let err = ranking_from_latencies("c".into(), &lat(&[(0, f64::NAN)]), 4).unwrap_err();
        assert!(matches!(err, RankError::InvalidLatency { .. }));
    }

    #[test]
    fn footrule_identity_is_zero() {
        let a = [RegionId(0), RegionId(1), RegionId(2)];
        assert_eq!(spearman_footrule(&a, &a).unwrap(), 0);
    }

    #[test]
    fn footrule_reverse_of_three() {
        let a = [RegionId(0), RegionId(1), RegionId(2)];
        let b = [RegionId(2), RegionId(1), RegionId(0)];
        // positionwise: |1-3| + |2-2| + |3-1|
        assert_eq!(spearman_footrule(&a, &b).unwrap(), 4);
    }

    #[test]
    fn footrule_pairwise_swap() {
        let a = [RegionId(0), RegionId(1), RegionId(2), RegionId(3)];
        let b = [RegionId(1), RegionId(0), RegionId(3), RegionId(2)];
        assert_eq!(spearman_footrule(&a, &b).unwrap(), 4);
    }

    #[test]
    fn footrule_reversal_attains_the_maximum() {
        fn permutations(ids: &[u32]) -> Vec<Vec<u32>> {
            if ids.len() <= 1 {
                return vec![ids.to_vec()];
            }
            let mut out = Vec::new();
            for (i, &head) in ids.iter().enumerate() {
                let mut rest = ids.to_vec();
                rest.remove(i);
                for mut tail in permutations(&rest) {
                    tail.insert(0, head);
                    out.push(tail);
                }
            }
            out
        }
        for m in 2..=5u32 {
            let ids: Vec<u32> = (0..m).collect();
            let perms: Vec<Vec<RegionId>> = permutations(&ids)
                .into_iter()
                .map(|p| p.into_iter().map(RegionId).collect())
                .collect();
            for a in &perms {
                let max = perms
                    .iter()
                    .map(|b| spearman_footrule(a, b).unwrap())
                    .max()
                    .unwrap();
                let reversed: Vec<RegionId> = a.iter().rev().copied().collect();
                assert_eq!(spearman_footrule(a, &reversed).unwrap(), max);
            }
        }
    }

    #[test]
    fn footrule_rejects_mismatched_sets() {
        let a = [RegionId(0), RegionId(1)];
        let b = [RegionId(0), RegionId(2)];
        assert_eq!(spearman_footrule(&a, &b), Err(RankError::ElementSetMismatch));
        let c = [RegionId(0), RegionId(0)];
        assert_eq!(spearman_footrule(&c, &c), Err(RankError::ElementSetMismatch));
    }

    #[test]
    fn partial_footrule_shared_head() {
        let k = DistanceParams::new(2).unwrap();
        let a = pr("a", 4, &[0, 1]);
        let b = pr("b", 4, &[0, 2]);
        // padded ranks: region0 |1-1|, region1 |2-3|, region2 |3-2|, region3 |3-3|
        let d = partial_footrule(&a, &b, k).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn partial_footrule_identical_is_zero() {
        let k = DistanceParams::new(2).unwrap();
        let a = pr("a", 4, &[0, 1]);
        let b = pr("b", 4, &[0, 1]);
        assert_eq!(partial_footrule(&a, &b, k).unwrap(), 0.0);
    }

    #[test]
    fn partial_footrule_disjoint_is_one() {
        let k = DistanceParams::new(2).unwrap();
        let a = pr("a", 4, &[0, 1]);
        let b = pr("b", 4, &[2, 3]);
        assert_eq!(partial_footrule(&a, &b, k).unwrap(), 1.0);
    }

    #[test]
    fn partial_footrule_truncates_to_k() {
        let k = DistanceParams::new(2).unwrap();
        let a = pr("a", 5, &[0, 1, 2, 3]);
        let b = pr("b", 5, &[0, 1, 4, 3]);
        // beyond the top 2 nothing counts
        assert_eq!(partial_footrule(&a, &b, k).unwrap(), 0.0);
    }

    #[test]
    fn partial_footrule_rejects_universe_mismatch() {
        let k = DistanceParams::new(2).unwrap();
        let a = pr("a", 4, &[0, 1]);
        let b = pr("b", 5, &[0, 1]);
        assert_eq!(
            partial_footrule(&a, &b, k),
            Err(RankError::UniverseMismatch { a: 4, b: 5 })
        );
    }

    #[test]
    fn zero_k_is_rejected() {
        assert_eq!(DistanceParams::new(0), Err(RankError::ZeroK));
    }

    #[test]
    fn geometric_full_agreement() {
        let a = pr("a", 3, &[0, 1, 2]);
        assert_eq!(geometric_distance(&a, &a).unwrap(), 1.0 / 8.0);
    }

    #[test]
    fn geometric_shared_top_only() {
        let a = pr("a", 4, &[0, 1, 2]);
        let b = pr("b", 4, &[0, 2, 1]);
        assert_eq!(geometric_distance(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn geometric_no_agreement() {
        let a = pr("a", 4, &[0, 1]);
        let b = pr("b", 4, &[2, 3]);
        assert_eq!(geometric_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn padded_rank_matches_truncation() {
        let a = pr("a", 6, &[4, 2, 0]);
        assert_eq!(a.padded_rank(RegionId(4), 2), 1);
        assert_eq!(a.padded_rank(RegionId(2), 2), 2);
        assert_eq!(a.padded_rank(RegionId(0), 2), 3); // truncated away
        assert_eq!(a.padded_rank(RegionId(5), 2), 3);
    }
}
