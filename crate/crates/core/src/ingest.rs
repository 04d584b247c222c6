//! File formats, longest-prefix matching, and report serialization.
//!
//! All formats are plain text so scenarios can be produced and consumed
//! without any proprietary tooling:
//!
//! - path table: `observer_as|A.B.C.D/len|space-separated AS path`, with
//!   `#` comments and blank lines ignored;
//! - measurements: CSV `client,region,latency_ms`, repeated rows
//!   min-aggregated per (client, region);
//! - geo: CSV `prefix,country` (ISO 3166-1 alpha-2);
//! - cluster assignments: CSV `prefix,cluster_id,is_pivot`;
//! - report tables: CSV with fixed headers, floats printed with six
//!   significant digits, missing statistics as `NA`.
//!
//! Parsers never abort on a malformed line; bad lines are collected with
//! their line numbers and exact counts.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use crate::cluster::{Cluster, Method, Partitioning};
use crate::rank::{ClientId, PartialRanking, RankError, RegionId};
use crate::routing::{AsPath, Prefix, PrefixNet};

/// A malformed input line: 1-based line number plus what went wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Parse outcome: whatever could be read, plus per-line errors.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: T,
    pub errors: Vec<LineError>,
}

impl<T> Parsed<T> {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

fn err(line: usize, message: impl Into<String>) -> LineError {
    LineError {
        line,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// BGP path table
// ---------------------------------------------------------------------------

pub fn parse_bgp_paths(text: &str) -> Parsed<Vec<AsPath>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split('|').collect();
        if parts.len() != 3 {
            errors.push(err(line, "expected observer_as|prefix|path"));
            continue;
        }
        let observer: u32 = match parts[0].trim().parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(err(line, "invalid observer AS"));
                continue;
            }
        };
        let net: PrefixNet = match parts[1].trim().parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(err(line, "invalid prefix"));
                continue;
            }
        };
        let mut hops = Vec::new();
        let mut bad_hop = false;
        for tok in parts[2].split_whitespace() {
            match tok.parse::<u32>() {
                Ok(asn) => hops.push(asn),
                Err(_) => {
                    bad_hop = true;
                    break;
                }
            }
        }
        if bad_hop {
            errors.push(err(line, "invalid AS in path"));
            continue;
        }
        if hops.is_empty() {
            errors.push(err(line, "empty path"));
            continue;
        }
        // Prepending collapses silently; any remaining repeat is a loop.
        let mut collapsed: Vec<u32> = Vec::with_capacity(hops.len());
        for &h in &hops {
            if collapsed.last() != Some(&h) {
                collapsed.push(h);
            }
        }
        let mut sorted = collapsed.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != collapsed.len() {
            errors.push(err(line, "AS loop in path"));
            continue;
        }
        records.push(AsPath {
            observer,
            net,
            hops,
        });
    }
    Parsed { records, errors }
}

pub fn serialize_bgp_paths(paths: &[AsPath]) -> String {
    let mut out = String::new();
    for p in paths {
        let hops: Vec<String> = p.hops.iter().map(|h| h.to_string()).collect();
        out.push_str(&format!("{}|{}|{}\n", p.observer, p.net, hops.join(" ")));
    }
    out
}

/// One prefix per distinct network, with the origin AS taken from the
/// last hop of the first path seen for it. Later paths ending in a
/// different AS are counted as origin conflicts.
pub fn canonical_prefixes(paths: &[AsPath]) -> (Vec<Prefix>, usize) {
    let mut origin: BTreeMap<PrefixNet, u32> = BTreeMap::new();
    let mut conflicts = 0usize;
    for p in paths {
        let Some(&last) = p.hops.last() else { continue };
        match origin.get(&p.net) {
            None => {
                origin.insert(p.net, last);
            }
            Some(&existing) if existing != last => conflicts += 1,
            _ => {}
        }
    }
    let prefixes = origin
        .into_iter()
        .map(|(net, origin_as)| Prefix { net, origin_as })
        .collect();
    (prefixes, conflicts)
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

pub const MEASUREMENT_HEADER: &str = "client,region,latency_ms";

/// Latencies from server regions to clients. Per (client, region) the
/// stored value is the minimum over all rows seen for that pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementSet {
    per_client: BTreeMap<ClientId, BTreeMap<RegionId, f64>>,
}

impl MeasurementSet {
    pub fn insert_min(&mut self, client: ClientId, region: RegionId, latency_ms: f64) {
        let slot = self
            .per_client
            .entry(client)
            .or_default()
            .entry(region)
            .or_insert(f64::INFINITY);
        if latency_ms < *slot {
            *slot = latency_ms;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.per_client.is_empty()
    }

    pub fn client_count(&self) -> usize {
        self.per_client.len()
    }

    pub fn record_count(&self) -> usize {
        self.per_client.values().map(|m| m.len()).sum()
    }

    pub fn clients(&self) -> impl Iterator<Item = &ClientId> {
        self.per_client.keys()
    }

    pub fn client_latencies(&self, client: &str) -> Option<&BTreeMap<RegionId, f64>> {
        self.per_client.get(client)
    }

    pub fn latency(&self, client: &str, region: RegionId) -> Option<f64> {
        self.per_client.get(client)?.get(&region).copied()
    }

    /// Smallest dense universe covering every region id seen.
    pub fn region_universe(&self) -> u32 {
        self.per_client
            .values()
            .flat_map(|m| m.keys())
            .map(|r| r.0 + 1)
            .max()
            .unwrap_or(0)
    }

    /// One ranking per client over a universe of `m` regions.
    pub fn rankings(&self, m: u32) -> Result<Vec<PartialRanking>, RankError> {
        self.per_client
            .iter()
            .map(|(client, lat)| crate::rank::ranking_from_latencies(client.clone(), lat, m))
            .collect()
    }
}

pub fn parse_measurements(text: &str) -> Parsed<MeasurementSet> {
    let mut set = MeasurementSet::default();
    let mut errors = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == MEASUREMENT_HEADER => {}
        _ => {
            errors.push(err(1, format!("missing header `{MEASUREMENT_HEADER}`")));
            return Parsed {
                records: set,
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
        let parts: Vec<&str> = trimmed.split(',').collect();
        if parts.len() != 3 {
            errors.push(err(line, "expected client,region,latency_ms"));
            continue;
        }
        let client = parts[0].trim();
        if client.is_empty() {
            errors.push(err(line, "empty client id"));
            continue;
        }
        let region: u32 = match parts[1].trim().parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(err(line, "invalid region id"));
                continue;
            }
        };
        let latency: f64 = match parts[2].trim().parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(err(line, "invalid latency"));
                continue;
            }
        };
        if !latency.is_finite() || latency < 0.0 {
            errors.push(err(line, "invalid latency"));
            continue;
        }
        set.insert_min(client.to_string(), RegionId(region), latency);
    }
    Parsed {
        records: set,
        errors,
    }
}

pub fn serialize_measurements(set: &MeasurementSet) -> String {
    let mut out = String::from(MEASUREMENT_HEADER);
    out.push('\n');
    for (client, lat) in &set.per_client {
        for (region, ms) in lat {
            out.push_str(&format!("{client},{region},{}\n", fmt_g6(*ms)));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Geo map
// ---------------------------------------------------------------------------

pub const GEO_HEADER: &str = "prefix,country";

pub fn parse_geo(text: &str) -> Parsed<BTreeMap<PrefixNet, String>> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == GEO_HEADER => {}
        _ => {
            errors.push(err(1, format!("missing header `{GEO_HEADER}`")));
            return Parsed {
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
        let Some((prefix, country)) = trimmed.split_once(',') else {
            errors.push(err(line, "expected prefix,country"));
            continue;
        };
        let net: PrefixNet = match prefix.trim().parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(err(line, "invalid prefix"));
                continue;
            }
        };
        let country = country.trim();
        if country.len() != 2 || !country.chars().all(|c| c.is_ascii_uppercase()) {
            errors.push(err(line, "invalid country code"));
            continue;
        }
        map.insert(net, country.to_string());
    }
    Parsed {
        records: map,
        errors,
    }
}

pub fn serialize_geo(geo: &BTreeMap<PrefixNet, String>) -> String {
    let mut out = String::from(GEO_HEADER);
    out.push('\n');
    for (net, country) in geo {
        out.push_str(&format!("{net},{country}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Cluster assignments
// ---------------------------------------------------------------------------

pub const ASSIGNMENT_HEADER: &str = "prefix,cluster_id,is_pivot";

pub fn serialize_assignments(part: &Partitioning<PrefixNet>) -> String {
    let mut out = String::from(ASSIGNMENT_HEADER);
    out.push('\n');
    for cluster in &part.clusters {
        for member in &cluster.members {
            let is_pivot = cluster.pivot.as_ref() == Some(member);
            out.push_str(&format!(
                "{member},{},{}\n",
                cluster.id,
                if is_pivot { 1 } else { 0 }
            ));
        }
    }
    out
}

pub fn parse_assignments(text: &str, method: Method) -> Parsed<Partitioning<PrefixNet>> {
    let mut errors = Vec::new();
    let mut by_cluster: BTreeMap<u32, (Vec<PrefixNet>, Option<PrefixNet>)> = BTreeMap::new();
    let mut seen: BTreeMap<PrefixNet, usize> = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == ASSIGNMENT_HEADER => {}
        _ => {
            errors.push(err(1, format!("missing header `{ASSIGNMENT_HEADER}`")));
            return Parsed {
                records: Partitioning {
                    method,
                    clusters: Vec::new(),
                },
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
        let parts: Vec<&str> = trimmed.split(',').collect();
        if parts.len() != 3 {
            errors.push(err(line, "expected prefix,cluster_id,is_pivot"));
            continue;
        }
        let net: PrefixNet = match parts[0].trim().parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(err(line, "invalid prefix"));
                continue;
            }
        };
        let cluster_id: u32 = match parts[1].trim().parse() {
            Ok(v) => v,
            Err(_) => {
                errors.push(err(line, "invalid cluster id"));
                continue;
            }
        };
        let is_pivot = match parts[2].trim() {
            "0" => false,
            "1" => true,
            _ => {
                errors.push(err(line, "is_pivot must be 0 or 1"));
                continue;
            }
        };
        if let Some(first) = seen.get(&net) {
            errors.push(err(line, format!("prefix already assigned at line {first}")));
            continue;
        }
        seen.insert(net, line);
        let entry = by_cluster.entry(cluster_id).or_default();
        entry.0.push(net);
        if is_pivot {
            if entry.1.is_some() {
                errors.push(err(line, "cluster has two pivots"));
                continue;
            }
            entry.1 = Some(net);
        }
    }
    let clusters = by_cluster
        .into_iter()
        .map(|(id, (mut members, pivot))| {
            members.sort();
            Cluster {
                id,
                label: pivot
                    .map(|p| p.to_string())
                    .unwrap_or_else(|| id.to_string()),
                members,
                pivot,
            }
        })
        .collect();
    Parsed {
        records: Partitioning { method, clusters },
        errors,
    }
}

// ---------------------------------------------------------------------------
// RSD matrix
// ---------------------------------------------------------------------------

pub const RSD_MATRIX_HEADER: &str = "prefix_a,prefix_b,t_prime,rsd";

/// One row per unordered prefix pair including the zero diagonal, in
/// matrix index order, so the prefix ordering survives a round trip.
pub fn serialize_rsd_matrix(matrix: &crate::routing::RsdMatrix) -> String {
    let mut out = String::from(RSD_MATRIX_HEADER);
    out.push('\n');
    let prefixes = matrix.prefixes();
    for i in 0..matrix.len() {
        for j in i..matrix.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                prefixes[i],
                prefixes[j],
                matrix.t_prime(),
                fmt_g6(matrix.rsd(i, j))
            ));
        }
    }
    out
}

pub fn parse_rsd_matrix(text: &str) -> Parsed<crate::routing::RsdMatrix> {
    let mut errors = Vec::new();
    let mut order: Vec<PrefixNet> = Vec::new();
    let mut values: BTreeMap<(PrefixNet, PrefixNet), f64> = BTreeMap::new();
    let mut t_prime: Option<usize> = None;
    let rows = read_rows(text, RSD_MATRIX_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(err(line, "expected 4 columns"));
        }
        let a: PrefixNet = parts[0]
            .trim()
            .parse()
            .map_err(|_| err(line, "invalid prefix_a"))?;
        let b: PrefixNet = parts[1]
            .trim()
            .parse()
            .map_err(|_| err(line, "invalid prefix_b"))?;
        let t = parse_usize(parts[2], line, "t_prime")?;
        let rsd = parse_f64(parts[3], line, "rsd")?;
        if !(0.0..=t as f64).contains(&rsd) {
            return Err(err(line, "rsd outside [0, t_prime]"));
        }
        Ok((a, b, t, rsd, line))
    });
    errors.extend(rows.errors);
    for (a, b, t, rsd, line) in rows.records {
        match t_prime {
            None => t_prime = Some(t),
            Some(existing) if existing != t => {
                errors.push(err(line, "inconsistent t_prime"));
                continue;
            }
            _ => {}
        }
        for p in [a, b] {
            if !order.contains(&p) {
                order.push(p);
            }
        }
        let key = (a.min(b), a.max(b));
        if values.insert(key, rsd).is_some() {
            errors.push(err(line, "duplicate pair"));
        }
    }
    let t_prime = t_prime.unwrap_or(0);
    let n = order.len();
    let mut full = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let key = (order[i].min(order[j]), order[i].max(order[j]));
            match values.get(&key) {
                Some(v) => {
                    full[i][j] = *v;
                    full[j][i] = *v;
                }
                None => errors.push(LineError {
                    line: 0,
                    message: format!("missing pair {},{}", order[i], order[j]),
                }),
            }
        }
    }
    Parsed {
        records: crate::routing::RsdMatrix::from_values(order, t_prime, &full),
        errors,
    }
}

// ---------------------------------------------------------------------------
// Longest-prefix matching
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
struct TrieNode {
    child: [Option<Box<TrieNode>>; 2],
    entry: Option<Prefix>,
}

/// Binary trie over IPv4 address bits for longest-prefix lookups.
#[derive(Debug, Default)]
pub struct PrefixTable {
    root: TrieNode,
    len: usize,
}

impl PrefixTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_prefixes<I: IntoIterator<Item = Prefix>>(prefixes: I) -> Self {
        let mut table = Self::new();
        for p in prefixes {
            table.insert(p);
        }
        table
    }

    /// Inserts a prefix, returning the previous entry for the same
    /// network if there was one.
    pub fn insert(&mut self, prefix: Prefix) -> Option<Prefix> {
        let bits = u32::from(prefix.net.addr());
        let mut node = &mut self.root;
        for i in 0..prefix.net.prefix_len() {
            let bit = ((bits >> (31 - i)) & 1) as usize;
            node = node.child[bit].get_or_insert_with(Box::default);
        }
        let old = node.entry.replace(prefix);
        if old.is_none() {
            self.len += 1;
        }
        old
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The longest prefix containing `ip`, if any.
    pub fn longest_match(&self, ip: Ipv4Addr) -> Option<&Prefix> {
        let bits = u32::from(ip);
        let mut node = &self.root;
        let mut best = self.root.entry.as_ref();
        for i in 0..32 {
            let bit = ((bits >> (31 - i)) & 1) as usize;
            match &node.child[bit] {
                Some(next) => {
                    node = next;
                    if node.entry.is_some() {
                        best = node.entry.as_ref();
                    }
                }
                None => break,
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Float formatting for reports
// ---------------------------------------------------------------------------

/// Formats with six significant digits, C `%g` style: plain decimal for
/// moderate magnitudes, scientific otherwise, trailing zeros stripped.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        let s = format!("{:.5e}", x);
        let (mantissa, exponent) = s.split_once('e').unwrap();
        let mantissa = strip_zeros(mantissa);
        format!("{mantissa}e{exponent}")
    } else {
        let decimals = (5 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x))
    }
}

fn strip_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

/// `NA`-aware float formatting for report cells.
pub fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt_g6(v),
        None => "NA".to_string(),
    }
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64, LineError> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| err(line, format!("invalid {what}")))
}

fn parse_opt_f64(tok: &str, line: usize, what: &str) -> Result<Option<f64>, LineError> {
    let tok = tok.trim();
    if tok == "NA" {
        return Ok(None);
    }
    parse_f64(tok, line, what).map(Some)
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, LineError> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| err(line, format!("invalid {what}")))
}

// ---------------------------------------------------------------------------
// Report tables
// ---------------------------------------------------------------------------

/// Generic CSV body reader: applies `row` to every non-comment line after
/// the mandatory header.
fn read_rows<T>(
    text: &str,
    header: &str,
    mut row: impl FnMut(usize, &str) -> Result<T, LineError>,
) -> Parsed<Vec<T>> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => {
            errors.push(err(1, format!("missing header `{header}`")));
            return Parsed { records, errors };
        }
    }
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match row(line, trimmed) {
            Ok(v) => records.push(v),
            Err(e) => errors.push(e),
        }
    }
    Parsed { records, errors }
}

pub const SWEEP_HEADER: &str = "tau,runs,mean_clusters,ci95_half";

pub fn serialize_sweep(rows: &[crate::cluster::SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_g6(r.tau),
            r.runs,
            fmt_g6(r.mean_clusters),
            fmt_g6(r.ci95_half)
        ));
    }
    out
}

pub fn parse_sweep(text: &str) -> Parsed<Vec<crate::cluster::SweepRow>> {
    read_rows(text, SWEEP_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(err(line, "expected 4 columns"));
        }
        Ok(crate::cluster::SweepRow {
            tau: parse_f64(parts[0], line, "tau")?,
            runs: parse_usize(parts[1], line, "runs")? as u32,
            mean_clusters: parse_f64(parts[2], line, "mean")?,
            ci95_half: parse_f64(parts[3], line, "ci")?,
        })
    })
}

/// Row of the r-optimal sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimalRow {
    pub r: usize,
    pub partitions: usize,
}

pub const OPTIMAL_HEADER: &str = "r,partitions";

pub fn serialize_optimal(rows: &[OptimalRow]) -> String {
    let mut out = String::from(OPTIMAL_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{}\n", r.r, r.partitions));
    }
    out
}

pub fn parse_optimal(text: &str) -> Parsed<Vec<OptimalRow>> {
    read_rows(text, OPTIMAL_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 2 {
            return Err(err(line, "expected 2 columns"));
        }
        Ok(OptimalRow {
            r: parse_usize(parts[0], line, "r")?,
            partitions: parse_usize(parts[1], line, "partitions")?,
        })
    })
}

pub const BUCKETS_HEADER: &str = "bucket_lo,bucket_hi,pairs,ps_min_mean,ps_min_ci,ps_avg_mean,ps_avg_ci,ps_max_mean,ps_max_ci,g_min_mean,g_min_ci,g_avg_mean,g_avg_ci,g_max_mean,g_max_ci";

pub fn serialize_buckets(series: &crate::eval::BucketSeries) -> String {
    let mut out = String::from(BUCKETS_HEADER);
    out.push('\n');
    for row in &series.rows {
        out.push_str(&format!("{},{},{}", fmt_g6(row.lo), fmt_g6(row.hi), row.pairs));
        match &row.stats {
            Some(stats) => {
                for s in stats {
                    out.push_str(&format!(",{},{}", fmt_g6(s.mean), fmt_g6(s.ci95_half)));
                }
            }
            None => out.push_str(&",NA".repeat(12)),
        }
        out.push('\n');
    }
    out
}

pub fn parse_buckets(text: &str) -> Parsed<crate::eval::BucketSeries> {
    let rows = read_rows(text, BUCKETS_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 15 {
            return Err(err(line, "expected 15 columns"));
        }
        let lo = parse_f64(parts[0], line, "bucket_lo")?;
        let hi = parse_f64(parts[1], line, "bucket_hi")?;
        let pairs = parse_usize(parts[2], line, "pairs")?;
        let stats = if parts[3].trim() == "NA" {
            for p in &parts[3..] {
                if p.trim() != "NA" {
                    return Err(err(line, "mixed NA and values"));
                }
            }
            None
        } else {
            let mut stats = [crate::eval::MeanCi::default(); 6];
            for (i, slot) in stats.iter_mut().enumerate() {
                slot.mean = parse_f64(parts[3 + 2 * i], line, "mean")?;
                slot.ci95_half = parse_f64(parts[4 + 2 * i], line, "ci")?;
            }
            Some(stats)
        };
        Ok(crate::eval::BucketRow {
            lo,
            hi,
            pairs,
            stats,
        })
    });
    Parsed {
        records: crate::eval::BucketSeries {
            rows: rows.records,
        },
        errors: rows.errors,
    }
}

/// Per-cluster growth statistics row.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStatsRow {
    pub cluster_id: u32,
    pub prefixes: usize,
    pub clients: usize,
    pub dg_ps: Option<f64>,
    pub ag_ps: Option<f64>,
    pub dg_g: Option<f64>,
    pub ag_g: Option<f64>,
}

pub const CLUSTER_STATS_HEADER: &str = "cluster_id,prefixes,clients,dg_ps,ag_ps,dg_g,ag_g";

pub fn serialize_cluster_stats(rows: &[ClusterStatsRow]) -> String {
    let mut out = String::from(CLUSTER_STATS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.cluster_id,
            r.prefixes,
            r.clients,
            fmt_opt(r.dg_ps),
            fmt_opt(r.ag_ps),
            fmt_opt(r.dg_g),
            fmt_opt(r.ag_g)
        ));
    }
    out
}

pub fn parse_cluster_stats(text: &str) -> Parsed<Vec<ClusterStatsRow>> {
    read_rows(text, CLUSTER_STATS_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 7 {
            return Err(err(line, "expected 7 columns"));
        }
        Ok(ClusterStatsRow {
            cluster_id: parse_usize(parts[0], line, "cluster_id")? as u32,
            prefixes: parse_usize(parts[1], line, "prefixes")?,
            clients: parse_usize(parts[2], line, "clients")?,
            dg_ps: parse_opt_f64(parts[3], line, "dg_ps")?,
            ag_ps: parse_opt_f64(parts[4], line, "ag_ps")?,
            dg_g: parse_opt_f64(parts[5], line, "dg_g")?,
            ag_g: parse_opt_f64(parts[6], line, "ag_g")?,
        })
    })
}

/// One sampled pair distance, labeled in- or out-cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct InOutRow {
    pub kind: InOutKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InOutKind {
    In,
    Out,
}

pub const IN_OUT_HEADER: &str = "kind,value";

pub fn serialize_in_out(rows: &[InOutRow]) -> String {
    let mut out = String::from(IN_OUT_HEADER);
    out.push('\n');
    for r in rows {
        let kind = match r.kind {
            InOutKind::In => "in",
            InOutKind::Out => "out",
        };
        out.push_str(&format!("{kind},{}\n", fmt_g6(r.value)));
    }
    out
}

pub fn parse_in_out(text: &str) -> Parsed<Vec<InOutRow>> {
    read_rows(text, IN_OUT_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 2 {
            return Err(err(line, "expected 2 columns"));
        }
        let kind = match parts[0].trim() {
            "in" => InOutKind::In,
            "out" => InOutKind::Out,
            _ => return Err(err(line, "kind must be in or out")),
        };
        Ok(InOutRow {
            kind,
            value: parse_f64(parts[1], line, "value")?,
        })
    })
}

/// Consensus / representative comparison row, one per cluster, method and
/// selection strategy. Averages are over cluster members; `NA` marks
/// clusters without enough data.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRow {
    pub cluster_id: u32,
    pub method: String,
    pub strategy: String,
    pub representative: String,
    pub fallback: bool,
    pub consensus_order: Vec<u32>,
    pub ps_consensus_avg: Option<f64>,
    pub ps_representative_avg: Option<f64>,
    pub g_consensus_avg: Option<f64>,
    pub g_representative_avg: Option<f64>,
}

pub const CONSENSUS_HEADER: &str = "cluster_id,method,strategy,representative,fallback,consensus_order,ps_consensus_avg,ps_representative_avg,g_consensus_avg,g_representative_avg";

pub fn serialize_consensus(rows: &[ConsensusRow]) -> String {
    let mut out = String::from(CONSENSUS_HEADER);
    out.push('\n');
    for r in rows {
        let order: Vec<String> = r.consensus_order.iter().map(|x| x.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.cluster_id,
            r.method,
            r.strategy,
            r.representative,
            if r.fallback { 1 } else { 0 },
            order.join(" "),
            fmt_opt(r.ps_consensus_avg),
            fmt_opt(r.ps_representative_avg),
            fmt_opt(r.g_consensus_avg),
            fmt_opt(r.g_representative_avg)
        ));
    }
    out
}

pub fn parse_consensus(text: &str) -> Parsed<Vec<ConsensusRow>> {
    read_rows(text, CONSENSUS_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 10 {
            return Err(err(line, "expected 10 columns"));
        }
        let mut order = Vec::new();
        for tok in parts[5].split_whitespace() {
            order.push(
                tok.parse::<u32>()
                    .map_err(|_| err(line, "invalid consensus order"))?,
            );
        }
        Ok(ConsensusRow {
            cluster_id: parse_usize(parts[0], line, "cluster_id")? as u32,
            method: parts[1].trim().to_string(),
            strategy: parts[2].trim().to_string(),
            representative: parts[3].trim().to_string(),
            fallback: match parts[4].trim() {
                "0" => false,
                "1" => true,
                _ => return Err(err(line, "fallback must be 0 or 1")),
            },
            consensus_order: order,
            ps_consensus_avg: parse_opt_f64(parts[6], line, "ps_consensus_avg")?,
            ps_representative_avg: parse_opt_f64(parts[7], line, "ps_representative_avg")?,
            g_consensus_avg: parse_opt_f64(parts[8], line, "g_consensus_avg")?,
            g_representative_avg: parse_opt_f64(parts[9], line, "g_representative_avg")?,
        })
    })
}

/// Latency penalty row: what a client loses when served by a ranking
/// that is not its own.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyDiffRow {
    pub cluster_id: u32,
    pub strategy: String,
    pub client: String,
    pub diff_ms: f64,
}

pub const LATENCY_DIFF_HEADER: &str = "cluster_id,strategy,client,diff_ms";

pub fn serialize_latency_diff(rows: &[LatencyDiffRow]) -> String {
    let mut out = String::from(LATENCY_DIFF_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.cluster_id,
            r.strategy,
            r.client,
            fmt_g6(r.diff_ms)
        ));
    }
    out
}

pub fn parse_latency_diff(text: &str) -> Parsed<Vec<LatencyDiffRow>> {
    read_rows(text, LATENCY_DIFF_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(err(line, "expected 4 columns"));
        }
        Ok(LatencyDiffRow {
            cluster_id: parse_usize(parts[0], line, "cluster_id")? as u32,
            strategy: parts[1].trim().to_string(),
            client: parts[2].trim().to_string(),
            diff_ms: parse_f64(parts[3], line, "diff_ms")?,
        })
    })
}

/// Scatter row comparing the routing-state clustering against a baseline
/// partitioning of the same prefixes: mean distance to the prefix's own
/// RS-cluster peers (x) vs. its baseline peers (y).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub prefix: PrefixNet,
    pub rs_ps_avg: Option<f64>,
    pub base_ps_avg: Option<f64>,
    pub rs_g_avg: Option<f64>,
    pub base_g_avg: Option<f64>,
}

pub const BASELINE_HEADER: &str = "prefix,rs_ps_avg,base_ps_avg,rs_g_avg,base_g_avg";

pub fn serialize_baseline(rows: &[BaselineRow]) -> String {
    let mut out = String::from(BASELINE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.prefix,
            fmt_opt(r.rs_ps_avg),
            fmt_opt(r.base_ps_avg),
            fmt_opt(r.rs_g_avg),
            fmt_opt(r.base_g_avg)
        ));
    }
    out
}

pub fn parse_baseline(text: &str) -> Parsed<Vec<BaselineRow>> {
    read_rows(text, BASELINE_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 5 {
            return Err(err(line, "expected 5 columns"));
        }
        Ok(BaselineRow {
            prefix: parts[0]
                .trim()
                .parse()
                .map_err(|_| err(line, "invalid prefix"))?,
            rs_ps_avg: parse_opt_f64(parts[1], line, "rs_ps_avg")?,
            base_ps_avg: parse_opt_f64(parts[2], line, "base_ps_avg")?,
            rs_g_avg: parse_opt_f64(parts[3], line, "rs_g_avg")?,
            base_g_avg: parse_opt_f64(parts[4], line, "base_g_avg")?,
        })
    })
}

/// Distance and latency statistics grouped by prefix length.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixLengthRow {
    pub length: u8,
    pub prefixes: usize,
    pub ps_avg_mean: Option<f64>,
    pub g_avg_mean: Option<f64>,
    pub latency_diff_mean: Option<f64>,
}

pub const PREFIX_LENGTH_HEADER: &str = "length,prefixes,ps_avg_mean,g_avg_mean,latency_diff_mean";

pub fn serialize_prefix_length(rows: &[PrefixLengthRow]) -> String {
    let mut out = String::from(PREFIX_LENGTH_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.length,
            r.prefixes,
            fmt_opt(r.ps_avg_mean),
            fmt_opt(r.g_avg_mean),
            fmt_opt(r.latency_diff_mean)
        ));
    }
    out
}

pub fn parse_prefix_length(text: &str) -> Parsed<Vec<PrefixLengthRow>> {
    read_rows(text, PREFIX_LENGTH_HEADER, |line, s| {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 5 {
            return Err(err(line, "expected 5 columns"));
        }
        Ok(PrefixLengthRow {
            length: parse_usize(parts[0], line, "length")? as u8,
            prefixes: parse_usize(parts[1], line, "prefixes")?,
            ps_avg_mean: parse_opt_f64(parts[2], line, "ps_avg_mean")?,
            g_avg_mean: parse_opt_f64(parts[3], line, "g_avg_mean")?,
            latency_diff_mean: parse_opt_f64(parts[4], line, "latency_diff_mean")?,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(s: &str) -> PrefixNet {
        s.parse().unwrap()
    }

    #[test]
    fn paths_parse_basic_record() {
        let parsed = parse_bgp_paths("64500|10.1.0.0/16|64500 64496 64499\n");
        assert!(parsed.is_clean());
        assert_eq!(parsed.records.len(), 1);
        let r = &parsed.records[0];
        assert_eq!(r.observer, 64500);
        assert_eq!(r.net, net("10.1.0.0/16"));
        assert_eq!(r.hops, vec![64500, 64496, 64499]);
    }

    #[test]
    fn paths_skip_comments_and_blanks() {
        let parsed = parse_bgp_paths("# comment\n\n64500|10.1.0.0/16|64500 64499\n");
        assert!(parsed.is_clean());
        assert_eq!(parsed.records.len(), 1);
    }

    #[test]
    fn paths_report_line_errors() {
        let parsed = parse_bgp_paths("x|10.1.0.0/16|1 2\n1|bogus|1 2\n1|10.0.0.0/8|\n1|10.0.0.0/8|1 2 1\n");
        assert_eq!(parsed.records.len(), 0);
        assert_eq!(parsed.errors.len(), 4);
        assert_eq!(parsed.errors[0].message, "invalid observer AS");
        assert_eq!(parsed.errors[0].line, 1);
        assert_eq!(parsed.errors[1].message, "invalid prefix");
        assert_eq!(parsed.errors[2].message, "empty path");
        assert_eq!(parsed.errors[3].message, "AS loop in path");
    }

    #[test]
    fn paths_round_trip() {
        let text = "64500|10.1.0.0/16|64500 64496 64499\n64501|10.2.0.0/16|64501 64499\n";
        let parsed = parse_bgp_paths(text);
        assert!(parsed.is_clean());
        assert_eq!(serialize_bgp_paths(&parsed.records), text);
    }

    #[test]
    fn canonical_prefixes_take_first_origin() {
        let parsed = parse_bgp_paths(
            "1|10.0.0.0/8|1 5\n2|10.0.0.0/8|2 5\n3|10.0.0.0/8|3 6\n4|10.1.0.0/16|4 7\n",
        );
        let (prefixes, conflicts) = canonical_prefixes(&parsed.records);
        assert_eq!(conflicts, 1);
        assert_eq!(prefixes.len(), 2);
        assert_eq!(prefixes[0].origin_as, 5);
        assert_eq!(prefixes[1].origin_as, 7);
    }

    #[test]
    fn measurements_keep_minimum() {
        let parsed = parse_measurements("client,region,latency_ms\nc1,0,12.0\nc1,0,9.5\nc1,0,11.0\n");
        assert!(parsed.is_clean());
        assert_eq!(parsed.records.latency("c1", RegionId(0)), Some(9.5));
        assert_eq!(parsed.records.record_count(), 1);
    }

    #[test]
    fn measurements_empty_after_header() {
        let parsed = parse_measurements("client,region,latency_ms\n");
        assert!(parsed.is_clean());
        assert!(parsed.records.is_empty());
    }

    #[test]
    fn measurements_reject_bad_rows() {
        let parsed =
            parse_measurements("client,region,latency_ms\nc1,0,-3\nc1,x,4\n,1,4\nc1,1,nan\n");
        assert_eq!(parsed.errors.len(), 4);
        assert_eq!(parsed.records.record_count(), 0);
    }

    #[test]
    fn measurements_require_header() {
        let parsed = parse_measurements("c1,0,12.0\n");
        assert_eq!(parsed.errors.len(), 1);
        assert!(parsed.errors[0].message.contains("header"));
    }

    #[test]
    fn measurements_round_trip() {
        let mut set = MeasurementSet::default();
        set.insert_min("a".into(), RegionId(0), 12.5);
        set.insert_min("a".into(), RegionId(2), 7.25);
        set.insert_min("b".into(), RegionId(1), 100.0);
        let text = serialize_measurements(&set);
        let back = parse_measurements(&text);
        assert!(back.is_clean());
        assert_eq!(back.records, set);
    }

    #[test]
    fn geo_parses_and_validates() {
        let parsed = parse_geo("prefix,country\n10.0.0.0/8,FR\n10.1.0.0/16,DEU\nbogus,DE\n");
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[&net("10.0.0.0/8")], "FR");
        assert_eq!(parsed.errors.len(), 2);
    }

    #[test]
    fn assignments_round_trip() {
        let part = Partitioning {
            method: Method::PivotRsd,
            clusters: vec![
                Cluster {
                    id: 0,
                    label: "10.0.0.0/24".to_string(),
                    members: vec![net("10.0.0.0/24"), net("10.0.1.0/24")],
                    pivot: Some(net("10.0.0.0/24")),
                },
                Cluster {
                    id: 1,
                    label: "10.9.0.0/24".to_string(),
                    members: vec![net("10.9.0.0/24")],
                    pivot: Some(net("10.9.0.0/24")),
                },
            ],
        };
        let text = serialize_assignments(&part);
        let back = parse_assignments(&text, Method::PivotRsd);
        assert!(back.is_clean());
        assert_eq!(back.records, part);
    }

    #[test]
    fn assignments_report_duplicates() {
        let text = "prefix,cluster_id,is_pivot\n10.0.0.0/24,0,1\n10.0.0.0/24,1,0\n";
        let back = parse_assignments(text, Method::PivotRsd);
        assert_eq!(back.errors.len(), 1);
        assert_eq!(back.records.clusters.len(), 1);
    }

    #[test]
    fn rsd_matrix_round_trip() {
        let prefixes = vec![net("10.0.0.0/24"), net("10.2.0.0/24"), net("10.1.0.0/24")];
        let full = vec![
            vec![0.0, 2.5, 7.0],
            vec![2.5, 0.0, 4.0],
            vec![7.0, 4.0, 0.0],
        ];
        let matrix = crate::routing::RsdMatrix::from_values(prefixes, 10, &full);
        let text = serialize_rsd_matrix(&matrix);
        let back = parse_rsd_matrix(&text);
        assert!(back.is_clean(), "{:?}", back.errors);
        assert_eq!(back.records, matrix);
        // single-prefix matrices survive via the diagonal row
        let lonely = crate::routing::RsdMatrix::from_values(vec![net("10.0.0.0/24")], 5, &[vec![0.0]]);
        let back = parse_rsd_matrix(&serialize_rsd_matrix(&lonely));
        assert!(back.is_clean());
        assert_eq!(back.records, lonely);
    }

    #[test]
    fn rsd_matrix_parse_rejects_bad_rows() {
        let text = "prefix_a,prefix_b,t_prime,rsd\n10.0.0.0/24,10.1.0.0/24,10,11\n";
        let back = parse_rsd_matrix(text);
        assert_eq!(back.errors.len(), 1);
        let text = "prefix_a,prefix_b,t_prime,rsd\n10.0.0.0/24,10.0.0.0/24,10,0\n10.0.0.0/24,10.1.0.0/24,9,1\n";
        let back = parse_rsd_matrix(text);
        assert!(back.errors.iter().any(|e| e.message.contains("inconsistent")));
    }

    #[test]
    fn trie_prefers_longest_match() {
        let table = PrefixTable::from_prefixes([
            Prefix { net: net("10.0.0.0/8"), origin_as: 1 },
            Prefix { net: net("10.1.0.0/16"), origin_as: 2 },
        ]);
        let hit = table.longest_match(Ipv4Addr::new(10, 1, 2, 3)).unwrap();
        assert_eq!(hit.net, net("10.1.0.0/16"));
        let hit = table.longest_match(Ipv4Addr::new(10, 9, 2, 3)).unwrap();
        assert_eq!(hit.net, net("10.0.0.0/8"));
    }

    #[test]
    fn trie_misses_outside_coverage() {
        let table = PrefixTable::new();
        assert!(table.longest_match(Ipv4Addr::new(192, 0, 2, 1)).is_none());
        let table = PrefixTable::from_prefixes([Prefix { net: net("10.0.0.0/8"), origin_as: 1 }]);
        assert!(table.longest_match(Ipv4Addr::new(11, 0, 0, 1)).is_none());
    }

    #[test]
    fn trie_agrees_with_linear_scan_on_small_sample() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut prefixes = Vec::new();
        for i in 0..50u32 {
            let len = rng.random_range(9..=28u8);
            let raw: u32 = rng.random();
            let masked = raw & (u32::MAX << (32 - len));
            let netp = PrefixNet::new(Ipv4Addr::from(masked), len).unwrap();
            prefixes.push(Prefix { net: netp, origin_as: i });
        }
        prefixes.sort();
        prefixes.dedup_by_key(|p| p.net);
        let table = PrefixTable::from_prefixes(prefixes.iter().copied());
        for _ in 0..500 {
            let ip = Ipv4Addr::from(rng.random::<u32>());
            let expect = prefixes
                .iter()
                .filter(|p| p.net.contains(ip))
                .max_by_key(|p| p.net.prefix_len());
            assert_eq!(table.longest_match(ip), expect);
        }
    }

    #[test]
    fn g6_formatting() {
        assert_eq!(fmt_g6(0.0), "0");
        assert_eq!(fmt_g6(1.0), "1");
        assert_eq!(fmt_g6(0.5), "0.5");
        assert_eq!(fmt_g6(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_g6(123.456), "123.456");
        assert_eq!(fmt_g6(-123.456), "-123.456");
        assert_eq!(fmt_g6(120.0), "120");
        assert_eq!(fmt_g6(1234567.0), "1.23457e6");
        assert_eq!(fmt_g6(0.00001234567), "1.23457e-5");
        assert_eq!(fmt_g6(0.001234567), "0.00123457");
    }

    #[test]
    fn sweep_round_trip() {
        let rows = vec![
            crate::cluster::SweepRow { tau: 0.0, runs: 10, mean_clusters: 42.5, ci95_half: 1.25 },
            crate::cluster::SweepRow { tau: 200.0, runs: 10, mean_clusters: 6.0, ci95_half: 0.0 },
        ];
        let text = serialize_sweep(&rows);
        let back = parse_sweep(&text);
        assert!(back.is_clean());
        assert_eq!(back.records, rows);
    }

    #[test]
    fn cluster_stats_round_trip_with_na() {
        let rows = vec![ClusterStatsRow {
            cluster_id: 3,
            prefixes: 2,
            clients: 10,
            dg_ps: Some(1.5),
            ag_ps: None,
            dg_g: Some(1.0),
            ag_g: Some(0.875),
        }];
        let text = serialize_cluster_stats(&rows);
        let back = parse_cluster_stats(&text);
        assert!(back.is_clean());
        assert_eq!(back.records, rows);
    }
}
