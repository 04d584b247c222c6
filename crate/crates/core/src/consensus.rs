//! Rank aggregation per cluster and representative-client selection.
//!
//! Borda scores every region by the sum of the (padded) rank values its
//! voters assign and orders ascending; Plurality fills position after
//! position with the region holding the most votes for that position.
//! Both tie-break by ascending region id, return a permutation of exactly
//! the regions ranked by at least one member, and are invariant under
//! voter order.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cluster::Cluster;
use crate::eval::RankingsByPrefix;
use crate::rank::{
    distance, ClientId, DistanceParams, Metric, PartialRanking, RankError, RegionId,
};
use crate::routing::PrefixNet;

#[derive(Debug, Error, PartialEq)]
pub enum ConsensusError {
    #[error("consensus needs at least one ranking")]
    EmptyInput,
    #[error("cluster has no clients")]
    NoClients,
    #[error("representative {0} is not in the cluster")]
    RepresentativeMissing(String),
    #[error(transparent)]
    Rank(#[from] RankError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusMethod {
    Borda,
    Plurality,
}

impl std::fmt::Display for ConsensusMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConsensusMethod::Borda => "borda",
            ConsensusMethod::Plurality => "plurality",
        })
    }
}

/// An aggregated ranking over the regions that at least one member
/// ranked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusRanking {
    pub method: ConsensusMethod,
    pub order: Vec<RegionId>,
}

impl ConsensusRanking {
    /// View as a partial ranking so it can be compared to members with
    /// the usual metrics.
    pub fn to_ranking(&self, m: u32) -> Result<PartialRanking, RankError> {
        PartialRanking::new("<consensus>".to_string(), m, self.order.clone())
    }
}

fn region_union(rankings: &[PartialRanking]) -> Vec<RegionId> {
    let mut regions: Vec<RegionId> = rankings
        .iter()
        .flat_map(|r| r.known().iter().copied())
        .collect();
    regions.sort_unstable();
    regions.dedup();
    regions
}

/// Borda count: each region's score is the sum over voters of its padded
/// rank (position if measured within the top k, `k + 1` otherwise);
/// regions are ordered by ascending score, then by id. The lowest score
/// wins position 1.
pub fn borda_consensus(
    rankings: &[PartialRanking],
    params: DistanceParams,
) -> Result<ConsensusRanking, ConsensusError> {
    if rankings.is_empty() {
        return Err(ConsensusError::EmptyInput);
    }
    let mut scored: Vec<(u64, RegionId)> = region_union(rankings)
        .into_iter()
        .map(|region| {
            let score: u64 = rankings
                .iter()
                .map(|r| r.padded_rank(region, params.k()) as u64)
                .sum();
            (score, region)
        })
        .collect();
    scored.sort_unstable();
    Ok(ConsensusRanking {
        method: ConsensusMethod::Borda,
        order: scored.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Plurality: position 1 goes to the region with the most rank-1 votes,
/// position 2 to the region with the most rank-2 votes among the rest,
/// and so on; regions never winning a position are appended by id.
pub fn plurality_consensus(
    rankings: &[PartialRanking],
) -> Result<ConsensusRanking, ConsensusError> {
    if rankings.is_empty() {
        return Err(ConsensusError::EmptyInput);
    }
    let mut remaining = region_union(rankings);
    let max_len = rankings.iter().map(|r| r.k_effective()).max().unwrap();
    let mut order = Vec::with_capacity(remaining.len());
    for position in 0..max_len {
        if remaining.is_empty() {
            break;
        }
        let mut votes: BTreeMap<RegionId, usize> = BTreeMap::new();
        for r in rankings {
            if let Some(region) = r.known().get(position) {
                if remaining.contains(region) {
                    *votes.entry(*region).or_insert(0) += 1;
                }
            }
        }
        // most votes wins; BTreeMap order makes the tie-break the lowest id
        let winner = votes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(region, _)| *region);
        if let Some(region) = winner {
            remaining.retain(|r| *r != region);
            order.push(region);
        }
    }
    order.extend(remaining); // already sorted by id
    Ok(ConsensusRanking {
        method: ConsensusMethod::Plurality,
        order,
    })
}

/// How the representative client is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionStrategy {
    /// Uniformly among all clients of the cluster.
    RandomAll,
    /// Uniformly among the clients of the pivot prefix.
    RandomPivot,
}

impl std::fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectionStrategy::RandomAll => "random-all",
            SelectionStrategy::RandomPivot => "random-pivot",
        })
    }
}

/// Chosen representative; `fallback` is set when the pivot strategy had
/// to fall back to the whole cluster because the pivot prefix has no
/// clients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Representative {
    pub client: ClientId,
    pub fallback: bool,
}

fn sorted_clients(members: &[PrefixNet], rankings: &RankingsByPrefix) -> Vec<ClientId> {
    let mut clients: Vec<ClientId> = members
        .iter()
        .filter_map(|net| rankings.get(net))
        .flatten()
        .map(|r| r.client().clone())
        .collect();
    clients.sort();
    clients
}

/// Seeded uniform choice of a representative client from the cluster.
pub fn select_representative(
    cluster: &Cluster<PrefixNet>,
    rankings: &RankingsByPrefix,
    strategy: SelectionStrategy,
    seed: u64,
) -> Result<Representative, ConsensusError> {
    let all = sorted_clients(&cluster.members, rankings);
    if all.is_empty() {
        return Err(ConsensusError::NoClients);
    }
    let (pool, fallback) = match strategy {
        SelectionStrategy::RandomAll => (all, false),
        SelectionStrategy::RandomPivot => {
            let pivot_clients = cluster
                .pivot
                .map(|p| sorted_clients(&[p], rankings))
                .unwrap_or_default();
            if pivot_clients.is_empty() {
                (all, true)
            } else {
                (pivot_clients, false)
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let client = pool[rng.random_range(0..pool.len())].clone();
    Ok(Representative { client, fallback })
}

/// Average distance of the consensus and of the representative to the
/// cluster members: the x and y coordinates of the quality scatter. Both
/// averages run over all member clients; the representative's pairing
/// with itself contributes nothing, so a representative whose ranking
/// equals the consensus lands exactly on the x = y line.
pub fn evaluate_representative(
    members: &[PrefixNet],
    rankings: &RankingsByPrefix,
    consensus: &ConsensusRanking,
    representative: &ClientId,
    metric: Metric,
    params: DistanceParams,
) -> Result<(f64, f64), ConsensusError> {
    let clients: Vec<&PartialRanking> = members
        .iter()
        .filter_map(|net| rankings.get(net))
        .flatten()
        .collect();
    if clients.is_empty() {
        return Err(ConsensusError::NoClients);
    }
    let rep = clients
        .iter()
        .find(|r| r.client() == representative)
        .ok_or_else(|| ConsensusError::RepresentativeMissing(representative.clone()))?;
    let m = clients[0].universe();
    let consensus_ranking = consensus.to_ranking(m)?;
    let mut consensus_sum = 0.0;
    let mut rep_sum = 0.0;
    for client in &clients {
        consensus_sum += distance(metric, &consensus_ranking, client, params)?;
        if client.client() != representative {
            rep_sum += distance(metric, rep, client, params)?;
        }
    }
    let n = clients.len() as f64;
    Ok((consensus_sum / n, rep_sum / n))
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn voters() -> impl Strategy<Value = Vec<PartialRanking>> {
        let m = 5u32;
        let ranking = proptest::sample::subsequence((0..m).collect::<Vec<u32>>(), 1..=m as usize)
            .prop_shuffle()
            .prop_map(move |known| {
                PartialRanking::new("v".into(), m, known.into_iter().map(RegionId).collect())
                    .unwrap()
            });
        proptest::collection::vec(ranking, 1..6)
    }

    proptest! {
        #[test]
        fn consensus_is_voter_order_invariant(mut voters in voters(), seed in 0u64..500) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let params = DistanceParams::new(3).unwrap();
            let borda_a = borda_consensus(&voters, params).unwrap();
            let plural_a = plurality_consensus(&voters).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            voters.shuffle(&mut rng);
            prop_assert_eq!(borda_a, borda_consensus(&voters, params).unwrap());
            prop_assert_eq!(plural_a, plurality_consensus(&voters).unwrap());
        }

        #[test]
        fn consensus_is_permutation_of_ranked_regions(voters in voters()) {
            let params = DistanceParams::new(3).unwrap();
            let mut expected: Vec<RegionId> = voters
                .iter()
                .flat_map(|v| v.known().iter().copied())
                .collect();
            expected.sort_unstable();
            expected.dedup();
            for order in [
                borda_consensus(&voters, params).unwrap().order,
                plurality_consensus(&voters).unwrap().order,
            ] {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), order.len());
                prop_assert_eq!(sorted, expected.clone());
            }
        }

        #[test]
        fn unanimous_voters_get_their_ranking_back(
            known in proptest::sample::subsequence((0..6u32).collect::<Vec<u32>>(), 1..=6)
                .prop_shuffle(),
            copies in 1usize..5
        ) {
            let ranking = PartialRanking::new(
                "v".into(),
                6,
                known.iter().copied().map(RegionId).collect(),
            )
            .unwrap();
            let voters = vec![ranking.clone(); copies];
            let params = DistanceParams::new(6).unwrap();
            let borda = borda_consensus(&voters, params).unwrap();
            let plural = plurality_consensus(&voters).unwrap();
            prop_assert_eq!(borda.order.as_slice(), ranking.known());
            prop_assert_eq!(plural.order.as_slice(), ranking.known());
        }

        #[test]
        fn borda_order_is_shift_invariant(voters in voters(), shift in 1u32..4) {
            // adding a constant to every padded rank shifts all scores by
            // the same amount, so the order cannot change
            let params = DistanceParams::new(3).unwrap();
            let base = borda_consensus(&voters, params).unwrap();
            let mut shifted: Vec<(u64, RegionId)> = base
                .order
                .iter()
                .map(|region| {
                    let score: u64 = voters
                        .iter()
                        .map(|v| (v.padded_rank(*region, params.k()) + shift) as u64)
                        .sum();
                    (score, *region)
                })
                .collect();
            shifted.sort_unstable();
            let reordered: Vec<RegionId> = shifted.into_iter().map(|(_, r)| r).collect();
            prop_assert_eq!(reordered, base.order);
        }
    }
}
