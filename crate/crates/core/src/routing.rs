//! Per-prefix routing state and the routing state distance (RSD).
//!
//! The routing state of a prefix is the vector of interdomain next-hop
//! choices toward it, one entry per (sub-)AS. An AS whose observed next
//! hop toward some prefix is ambiguous (e.g. hot-potato routing) is split
//! into the minimal number of sub-ASes so that every (sub-AS, prefix) pair
//! has a unique next hop. Two prefixes are then compared by how many
//! sub-ASes pick the same next hop for both (`rsim`) and by the normalized
//! count of disagreements (`rsd_normalized`), which ranges from 0 to the
//! size of the sub-AS universe.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

pub type AsNum = u32;

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("prefix length {0} out of range (1..=32)")]
    BadPrefixLength(u8),
    #[error("prefix {addr}/{len} has host bits set")]
    HostBitsSet { addr: Ipv4Addr, len: u8 },
    #[error("invalid prefix syntax: {0}")]
    BadPrefixSyntax(String),
}

/// An IPv4 network: address plus mask length. This is the identity of a
/// prefix; the announcing AS travels alongside in [`Prefix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrefixNet {
    addr: Ipv4Addr,
    len: u8,
}

impl PrefixNet {
    pub fn new(addr: Ipv4Addr, len: u8) -> Result<Self, RoutingError> {
        if len == 0 || len > 32 {
            return Err(RoutingError::BadPrefixLength(len));
        }
        let bits = u32::from(addr);
        if bits & !Self::mask(len) != 0 {
            return Err(RoutingError::HostBitsSet { addr, len });
        }
        Ok(Self { addr, len })
    }

    fn mask(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - len)
        }
    }

    pub fn addr(&self) -> Ipv4Addr {
        self.addr
    }

    pub fn prefix_len(&self) -> u8 {
        self.len
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        u32::from(ip) & Self::mask(self.len) == u32::from(self.addr)
    }
}

impl fmt::Display for PrefixNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl FromStr for PrefixNet {
    type Err = RoutingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| RoutingError::BadPrefixSyntax(s.to_string()))?;
        let addr: Ipv4Addr = addr
            .parse()
            .map_err(|_| RoutingError::BadPrefixSyntax(s.to_string()))?;
        let len: u8 = len
            .parse()
            .map_err(|_| RoutingError::BadPrefixSyntax(s.to_string()))?;
        PrefixNet::new(addr, len)
    }
}

/// A BGP prefix: the network plus the AS announcing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    pub net: PrefixNet,
    pub origin_as: AsNum,
}

/// One observed AS path toward a prefix. The observer column is kept for
/// provenance only; adjacency is read off `hops` (nearest AS first, origin
/// last).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsPath {
    pub observer: AsNum,
    pub net: PrefixNet,
    pub hops: Vec<AsNum>,
}

/// A copy of an AS after splitting; `replica` 0 always exists for every
/// AS seen on any path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubAsId {
    pub asn: AsNum,
    pub replica: u16,
}

impl fmt::Display for SubAsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.replica == 0 {
            write!(f, "{}", self.asn)
        } else {
            write!(f, "{}.{}", self.asn, self.replica)
        }
    }
}

/// Raw next-hop observations: for each (AS, prefix), the set of next hops
/// seen across all paths.
#[derive(Debug, Default, Clone)]
pub struct NextHopObservations {
    pub next: BTreeMap<(AsNum, PrefixNet), BTreeSet<AsNum>>,
    /// Paths skipped because they had no hops at all.
    pub skipped_empty: usize,
}

/// Extracts next-hop choices from AS-path adjacency. Every AS at position
/// `j` on a path gains the AS at `j + 1` as a next hop toward the path's
/// prefix, and the final (origin) AS maps to itself. Adjacent duplicate
/// ASes (prepending) are collapsed first.
pub fn extract_nexthops<'a, I>(paths: I) -> NextHopObservations
where
    I: IntoIterator<Item = &'a AsPath>,
{
    let mut obs = NextHopObservations::default();
    for path in paths {
        let mut collapsed: Vec<AsNum> = Vec::with_capacity(path.hops.len());
        for &hop in &path.hops {
            if collapsed.last() != Some(&hop) {
                collapsed.push(hop);
            }
        }
        let Some(&origin) = collapsed.last() else {
            obs.skipped_empty += 1;
            continue;
        };
        for w in collapsed.windows(2) {
            obs.next.entry((w[0], path.net)).or_default().insert(w[1]);
        }
        obs.next.entry((origin, path.net)).or_default().insert(origin);
    }
    obs
}

/// The sub-AS universe after splitting, in a fixed sorted order. Its size
/// is the maximum possible RSD value for the scenario.
#[derive(Debug, Clone)]
pub struct SubAsSpace {
    ids: Vec<SubAsId>,
    index: HashMap<SubAsId, usize>,
}

impl SubAsSpace {
    fn new(ids: Vec<SubAsId>) -> Self {
        let index = ids.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Self { ids, index }
    }

    pub fn t_prime(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[SubAsId] {
        &self.ids
    }

    pub fn index_of(&self, id: SubAsId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Number of distinct base ASes behind the sub-AS universe.
    pub fn base_as_count(&self) -> usize {
        let mut ases: Vec<AsNum> = self.ids.iter().map(|s| s.asn).collect();
        ases.dedup();
        ases.len()
    }
}

/// Result of sub-AS splitting: the universe plus the unique next hop for
/// each (sub-AS, prefix) pair that was observed.
#[derive(Debug, Clone)]
pub struct SubAsSplit {
    pub space: SubAsSpace,
    pub assign: BTreeMap<(SubAsId, PrefixNet), AsNum>,
}

/// Splits every AS into the minimal number of sub-ASes such that each
/// (sub-AS, prefix) pair has a single next hop. An AS observed with `r`
/// distinct next hops toward some prefix needs exactly `r` replicas; for
/// each prefix the distinct next hops are assigned to replicas `0..r` in
/// ascending AS-number order, which makes the split deterministic.
pub fn split_sub_ases(obs: &NextHopObservations) -> SubAsSplit {
    let mut replicas: BTreeMap<AsNum, u16> = BTreeMap::new();
    for ((asn, _), hops) in &obs.next {
        let need = hops.len() as u16;
        let entry = replicas.entry(*asn).or_insert(0);
        if need > *entry {
            *entry = need;
        }
    }
    let mut ids = Vec::new();
    for (asn, count) in &replicas {
        for replica in 0..*count.max(&1) {
            ids.push(SubAsId { asn: *asn, replica });
        }
    }
    let mut assign = BTreeMap::new();
    for ((asn, net), hops) in &obs.next {
        for (replica, hop) in hops.iter().enumerate() {
            let id = SubAsId {
                asn: *asn,
                replica: replica as u16,
            };
            assign.insert((id, *net), *hop);
        }
    }
    SubAsSplit {
        space: SubAsSpace::new(ids),
        assign,
    }
}

/// The routing state of one prefix: its next hop per sub-AS, indexed by
/// the position of the sub-AS in the shared [`SubAsSpace`]. Entries are
/// `None` where no observation exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteState {
    pub prefix: Prefix,
    next: Vec<Option<AsNum>>,
}

impl RouteState {
    pub fn new(prefix: Prefix, next: Vec<Option<AsNum>>) -> Self {
        Self { prefix, next }
    }

    pub fn nexthops(&self) -> &[Option<AsNum>] {
        &self.next
    }

    pub fn known_count(&self) -> usize {
        self.next.iter().filter(|h| h.is_some()).count()
    }
}

/// Builds one routing state per prefix from the split observations.
/// Prefixes without any observation come back with an empty vector and
/// are additionally reported in the second return value.
pub fn build_routestates(
    split: &SubAsSplit,
    prefixes: &[Prefix],
) -> (Vec<RouteState>, Vec<PrefixNet>) {
    let mut states = Vec::with_capacity(prefixes.len());
    let mut unobserved = Vec::new();
    for prefix in prefixes {
        let mut next = vec![None; split.space.t_prime()];
        let mut any = false;
        for (i, id) in split.space.ids().iter().enumerate() {
            if let Some(hop) = split.assign.get(&(*id, prefix.net)) {
                next[i] = Some(*hop);
                any = true;
            }
        }
        if !any {
            unobserved.push(prefix.net);
        }
        states.push(RouteState::new(*prefix, next));
    }
    (states, unobserved)
}

/// Number of sub-ASes whose next hop toward both prefixes is known and
/// identical.
pub fn rsim(a: &RouteState, b: &RouteState) -> usize {
    a.next
        .iter()
        .zip(&b.next)
        .filter(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        })
        .count()
}

/// Normalized routing state distance in `[0, t_prime]`: the fraction of
/// commonly known next hops that differ, scaled by the universe size.
/// Pairs with no commonly known sub-AS are treated as maximally distant.
pub fn rsd_normalized(a: &RouteState, b: &RouteState, t_prime: usize) -> f64 {
    let mut common = 0usize;
    let mut differ = 0usize;
    for (x, y) in a.next.iter().zip(&b.next) {
        if let (Some(x), Some(y)) = (x, y) {
            common += 1;
            if x != y {
                differ += 1;
            }
        }
    }
    if common == 0 {
        t_prime as f64
    } else {
        differ as f64 / common as f64 * t_prime as f64
    }
}

/// Symmetric matrix of pairwise RSD values with a zero diagonal, stored
/// as the upper triangle and indexed by prefix network.
#[derive(Debug, Clone, PartialEq)]
pub struct RsdMatrix {
    prefixes: Vec<PrefixNet>,
    t_prime: usize,
    values: Vec<f64>,
}

impl RsdMatrix {
    pub fn from_states(states: &[RouteState], t_prime: usize) -> Self {
        let n = states.len();
        let mut values = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                values.push(rsd_normalized(&states[i], &states[j], t_prime));
            }
        }
        Self {
            prefixes: states.iter().map(|s| s.prefix.net).collect(),
            t_prime,
            values,
        }
    }

    /// Builds a matrix directly from precomputed pairwise values; mainly
    /// useful for tests and small synthetic instances. `values[i][j]` for
    /// i < j feeds the upper triangle.
    pub fn from_values(prefixes: Vec<PrefixNet>, t_prime: usize, full: &[Vec<f64>]) -> Self {
        let n = prefixes.len();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                values.push(full[i][j]);
            }
        }
        Self {
            prefixes,
            t_prime,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }

    pub fn prefixes(&self) -> &[PrefixNet] {
        &self.prefixes
    }

    pub fn t_prime(&self) -> usize {
        self.t_prime
    }

    pub fn rsd(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let n = self.prefixes.len();
        self.values[i * n - i * (i + 1) / 2 + (j - i - 1)]
    }
}

/// Pairwise rsim values in the same condensed layout as [`RsdMatrix`].
#[derive(Debug, Clone)]
pub struct RsimMatrix {
    n: usize,
    values: Vec<usize>,
}

impl RsimMatrix {
    pub fn from_states(states: &[RouteState]) -> Self {
        let n = states.len();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                values.push(rsim(&states[i], &states[j]));
            }
        }
        Self { n, values }
    }

    pub fn rsim(&self, i: usize, j: usize) -> usize {
        assert_ne!(i, j, "rsim matrix has no diagonal");
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.values[i * self.n - i * (i + 1) / 2 + (j - i - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn net(s: &str) -> PrefixNet {
        s.parse().unwrap()
    }

    fn path(observer: AsNum, net_s: &str, hops: &[AsNum]) -> AsPath {
        AsPath {
            observer,
            net: net(net_s),
            hops: hops.to_vec(),
        }
    }

    fn prefix(net_s: &str, origin: AsNum) -> Prefix {
        Prefix {
            net: net(net_s),
            origin_as: origin,
        }
    }

    #[test]
    fn prefix_net_validation() {
        assert!(PrefixNet::new(Ipv4Addr::new(10, 0, 0, 0), 8).is_ok());
        assert_eq!(
            PrefixNet::new(Ipv4Addr::new(10, 0, 0, 0), 0),
            Err(RoutingError::BadPrefixLength(0))
        );
        assert_eq!(
            PrefixNet::new(Ipv4Addr::new(10, 0, 0, 0), 33),
            Err(RoutingError::BadPrefixLength(33))
        );
        assert!(matches!(
            PrefixNet::new(Ipv4Addr::new(10, 0, 0, 1), 8),
            Err(RoutingError::HostBitsSet { .. })
        ));
    }

    #[test]
    fn prefix_net_round_trips_text() {
        let p = net("192.0.2.0/25");
        assert_eq!(p.to_string(), "192.0.2.0/25");
        assert!(p.contains(Ipv4Addr::new(192, 0, 2, 5)));
        assert!(!p.contains(Ipv4Addr::new(192, 0, 2, 200)));
    }

    #[test]
    fn extract_single_path() {
        let obs = extract_nexthops(&[path(3, "10.0.0.0/8", &[3, 2, 1])]);
        let p = net("10.0.0.0/8");
        assert_eq!(obs.next[&(3, p)], BTreeSet::from([2]));
        assert_eq!(obs.next[&(2, p)], BTreeSet::from([1]));
        assert_eq!(obs.next[&(1, p)], BTreeSet::from([1]));
    }

    #[test]
    fn extract_unions_over_paths() {
        let obs = extract_nexthops(&[
            path(3, "10.0.0.0/8", &[3, 2, 1]),
            path(3, "10.0.0.0/8", &[3, 4, 1]),
        ]);
        assert_eq!(obs.next[&(3, net("10.0.0.0/8"))], BTreeSet::from([2, 4]));
    }

    #[test]
    fn extract_collapses_prepending() {
        let obs = extract_nexthops(&[path(5, "10.0.0.0/8", &[5, 5, 2, 1])]);
        let p = net("10.0.0.0/8");
        assert_eq!(obs.next[&(5, p)], BTreeSet::from([2]));
        assert!(!obs.next.contains_key(&(5, net("10.0.0.0/8"))) || obs.next[&(5, p)].len() == 1);
        assert_eq!(obs.skipped_empty, 0);
    }

    #[test]
    fn extract_skips_empty_paths() {
        let obs = extract_nexthops(&[path(5, "10.0.0.0/8", &[])]);
        assert!(obs.next.is_empty());
        assert_eq!(obs.skipped_empty, 1);
    }

    #[test]
    fn split_creates_replicas_for_ambiguous_as() {
        // AS 9 sees {7} for p1 and {7, 8} for p2.
        let obs = extract_nexthops(&[
            path(9, "10.0.0.0/8", &[9, 7, 1]),
            path(9, "10.1.0.0/16", &[9, 7, 2]),
            path(9, "10.1.0.0/16", &[9, 8, 2]),
        ]);
        let split = split_sub_ases(&obs);
        let nine0 = SubAsId { asn: 9, replica: 0 };
        let nine1 = SubAsId { asn: 9, replica: 1 };
        assert!(split.space.index_of(nine1).is_some());
        assert_eq!(split.assign[&(nine0, net("10.0.0.0/8"))], 7);
        assert_eq!(split.assign[&(nine0, net("10.1.0.0/16"))], 7);
        assert_eq!(split.assign[&(nine1, net("10.1.0.0/16"))], 8);
        assert!(!split.assign.contains_key(&(nine1, net("10.0.0.0/8"))));
    }

    #[test]
    fn split_without_ambiguity_keeps_replica_zero() {
        let obs = extract_nexthops(&[path(3, "10.0.0.0/8", &[3, 2, 1])]);
        let split = split_sub_ases(&obs);
        assert!(split.space.ids().iter().all(|s| s.replica == 0));
        assert_eq!(split.space.t_prime(), 3);
    }

    #[test]
    fn split_assigns_sorted_hops_per_prefix() {
        // AS 9: {7, 8} for p1 and {8, 6} for p2 -> 2 replicas; per prefix
        // the sorted hops go to replicas 0, 1 in order.
        let obs = extract_nexthops(&[
            path(9, "10.0.0.0/8", &[9, 7, 1]),
            path(9, "10.0.0.0/8", &[9, 8, 1]),
            path(9, "10.1.0.0/16", &[9, 8, 2]),
            path(9, "10.1.0.0/16", &[9, 6, 2]),
        ]);
        let split = split_sub_ases(&obs);
        let nine0 = SubAsId { asn: 9, replica: 0 };
        let nine1 = SubAsId { asn: 9, replica: 1 };
        assert_eq!(split.assign[&(nine0, net("10.0.0.0/8"))], 7);
        assert_eq!(split.assign[&(nine1, net("10.0.0.0/8"))], 8);
        assert_eq!(split.assign[&(nine0, net("10.1.0.0/16"))], 6);
        assert_eq!(split.assign[&(nine1, net("10.1.0.0/16"))], 8);
    }

    #[test]
    fn routestates_cover_known_pairs_only() {
        let obs = extract_nexthops(&[
            path(3, "10.0.0.0/8", &[3, 2, 1]),
            path(4, "10.0.0.0/8", &[4, 2, 1]),
            path(3, "10.1.0.0/16", &[3, 2, 2]),
        ]);
        let split = split_sub_ases(&obs);
        let prefixes = [prefix("10.0.0.0/8", 1), prefix("10.1.0.0/16", 2)];
        let (states, unobserved) = build_routestates(&split, &prefixes);
        assert!(unobserved.is_empty());
        // ASes on paths: 1, 2, 3, 4 -> p1 known from all four, p2 from 2 and 3.
        assert_eq!(states[0].known_count(), 4);
        assert_eq!(states[1].known_count(), 2);
    }

    #[test]
    fn routestates_flag_unobserved_prefix() {
        let obs = extract_nexthops(&[path(3, "10.0.0.0/8", &[3, 1])]);
        let split = split_sub_ases(&obs);
        let prefixes = [prefix("10.0.0.0/8", 1), prefix("192.0.2.0/24", 7)];
        let (states, unobserved) = build_routestates(&split, &prefixes);
        assert_eq!(unobserved, vec![net("192.0.2.0/24")]);
        assert_eq!(states[1].known_count(), 0);
    }

    fn state(prefix_s: &str, origin: AsNum, next: &[Option<AsNum>]) -> RouteState {
        RouteState::new(prefix(prefix_s, origin), next.to_vec())
    }

    #[test]
    fn rsim_counts_shared_known_hops() {
        let a = state("10.0.0.0/8", 1, &[Some(7), Some(8), None, Some(9), None]);
        let b = state("10.1.0.0/16", 2, &[Some(7), Some(5), None, Some(9), None]);
        assert_eq!(rsim(&a, &b), 2);
        assert_eq!(rsim(&a, &a), 3);
    }

    #[test]
    fn rsim_disjoint_known_sets_is_zero() {
        let a = state("10.0.0.0/8", 1, &[Some(7), None, None]);
        let b = state("10.1.0.0/16", 2, &[None, Some(7), None]);
        assert_eq!(rsim(&a, &b), 0);
    }

    #[test]
    fn rsd_scales_disagreement_fraction() {
        let a = state("10.0.0.0/8", 1, &[Some(7), Some(8), None, Some(9), None]);
        let b = state("10.1.0.0/16", 2, &[Some(7), Some(5), None, Some(9), None]);
        let d = rsd_normalized(&a, &b, 5);
        assert!((d - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(rsd_normalized(&a, &a, 5), 0.0);
    }

    #[test]
    fn rsd_no_common_knowledge_is_maximal() {
        let a = state("10.0.0.0/8", 1, &[Some(7), None, None]);
        let b = state("10.1.0.0/16", 2, &[None, Some(7), None]);
        assert_eq!(rsd_normalized(&a, &b, 3), 3.0);
    }

    #[test]
    fn rsd_is_not_universe_minus_rsim_under_partial_observation() {
        let t = 3;
        let a = state("10.0.0.0/8", 1, &[Some(7), None, None]);
        let b = state("10.1.0.0/16", 2, &[Some(7), Some(8), None]);
        assert_eq!(rsim(&a, &b), 1);
        assert_eq!(rsd_normalized(&a, &b, t), 0.0);
        assert_ne!(rsd_normalized(&a, &b, t), (t - rsim(&a, &b)) as f64);
        // With fully known identical domains the identity does hold.
        let c = state("10.2.0.0/16", 3, &[Some(7), Some(8), Some(9)]);
        let d = state("10.3.0.0/16", 4, &[Some(7), Some(5), Some(9)]);
        assert_eq!(rsd_normalized(&c, &d, t), (t - rsim(&c, &d)) as f64);
    }

    #[test]
    fn matrix_matches_pairwise_calls() {
        let states = vec![
            state("10.0.0.0/8", 1, &[Some(7), Some(8), Some(9)]),
            state("10.1.0.0/16", 2, &[Some(7), Some(5), Some(9)]),
            state("10.2.0.0/16", 3, &[Some(1), Some(2), None]),
        ];
        let m = RsdMatrix::from_states(&states, 3);
        for i in 0..3 {
            assert_eq!(m.rsd(i, i), 0.0);
            for j in 0..3 {
                if i != j {
                    assert_eq!(m.rsd(i, j), rsd_normalized(&states[i], &states[j], 3));
                    assert_eq!(m.rsd(i, j), m.rsd(j, i));
                }
            }
        }
        let identical = vec![states[0].clone(), states[0].clone()];
        let m2 = RsdMatrix::from_states(&identical, 3);
        assert_eq!(m2.rsd(0, 1), 0.0);
    }
}
