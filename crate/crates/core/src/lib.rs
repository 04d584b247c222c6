//! Clustering of the IPv4 address space by interdomain routing state.
//!
//! The library groups BGP prefixes whose traffic is routed the same way by
//! the rest of the Internet, on the premise that clients behind similarly
//! routed prefixes rank a CDN's server regions similarly. It provides:
//!
//! - partial-ranking distance metrics over server preference orders
//!   ([`rank`]),
//! - routing-state vectors, sub-AS splitting and the routing state
//!   distance (RSD) between prefixes ([`routing`]),
//! - pivot clustering over RSD plus baseline partitionings ([`cluster`]),
//! - cluster quality statistics ([`eval`]),
//! - rank aggregation and representative-client selection ([`consensus`]),
//! - file formats, longest-prefix matching and report serialization
//!   ([`ingest`]),
//! - a synthetic scenario generator with planted ground truth ([`synth`]).
//!
//! # Example
//!
//! ```
//! use rsclust_core::rank::{
//!     geometric_distance, partial_footrule, ranking_from_latencies, DistanceParams, RegionId,
//! };
//! use std::collections::BTreeMap;
//!
//! // two clients, each with latencies to a measured subset of 4 regions
//! let a: BTreeMap<RegionId, f64> =
//!     [(RegionId(0), 34.0), (RegionId(1), 40.0), (RegionId(3), 65.0)]
//!         .into_iter()
//!         .collect();
//! let b: BTreeMap<RegionId, f64> =
//!     [(RegionId(0), 12.0), (RegionId(3), 20.0), (RegionId(2), 80.0)]
//!         .into_iter()
//!         .collect();
//! let a = ranking_from_latencies("a".into(), &a, 4).unwrap();
//! let b = ranking_from_latencies("b".into(), &b, 4).unwrap();
//! assert_eq!(a.known(), &[RegionId(0), RegionId(1), RegionId(3)]);
//! assert_eq!(b.known(), &[RegionId(0), RegionId(3), RegionId(2)]);
//!
//! let params = DistanceParams::new(3).unwrap();
//! let ps = partial_footrule(&a, &b, params).unwrap();
//! assert!((ps - 4.0 / 12.0).abs() < 1e-12);
//! // both rank region 0 first, so the geometric distance is at most 0.5
//! assert_eq!(geometric_distance(&a, &b).unwrap(), 0.5);
//! ```

pub mod cluster;
pub mod consensus;
pub mod eval;
pub mod ingest;
pub mod rank;
pub mod routing;
pub mod synth;
