//! Command-line front end for the routing-state clustering pipeline.
//!
//! Subcommands mirror the stages of an analysis: `synth` fabricates a
//! scenario with planted ground truth, `cluster` runs the pivot
//! clustering over RSD, `evaluate` and `consensus` score the clusters,
//! `sweep` and `optimal` produce the parameter-sweep tables, and `report`
//! chains all of them into one output directory.
//!
//! Flag precedence is command line over `RSCLUST_*` environment variables
//! over the optional `key = value` config file over built-in defaults.
//! Every randomized step requires an explicit seed, and a rerun with the
//! same inputs and seed produces byte-identical outputs. Diagnostics go
//! to stderr; CSV outputs never mix with them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rsclust_core::cluster::{
    optimal_partition, partition_by_as, partition_by_country, pivot_cluster,
    random_partition_like, tau_sweep, Method, Partitioning,
};
use rsclust_core::consensus::{
    borda_consensus, evaluate_representative, plurality_consensus, select_representative,
    ConsensusRanking, SelectionStrategy,
};
use rsclust_core::eval::{
    avg_growth, baseline_scatter, correlation_buckets, diameter_growth, group_rankings_by_prefix,
    in_out_cluster, latency_difference, prefix_length_series, BucketMode, LatencyAnchor, PairUnit,
    RankingsByPrefix,
};
use rsclust_core::ingest::{
    canonical_prefixes, fmt_g6, parse_assignments, parse_bgp_paths, parse_geo,
    parse_measurements, serialize_assignments, serialize_baseline, serialize_buckets,
    serialize_cluster_stats, serialize_consensus, serialize_in_out, serialize_latency_diff,
    serialize_optimal, serialize_prefix_length, serialize_sweep, ClusterStatsRow, ConsensusRow,
    InOutKind, InOutRow, LatencyDiffRow, LineError, MeasurementSet, OptimalRow, PrefixTable,
};
use rsclust_core::rank::{ClientId, DistanceParams, Metric};
use rsclust_core::routing::{
    build_routestates, extract_nexthops, split_sub_ases, Prefix, PrefixNet, RouteState,
    RsdMatrix, RsimMatrix,
};
use rsclust_core::synth::{generate, SyntheticSpec, TemplateMode};

#[derive(Parser)]
#[command(
    name = "rsclust",
    version,
    about = "Partition the IPv4 address space by interdomain routing state and \
             evaluate how similarly each cluster ranks CDN server regions"
)]
struct Cli {
    /// Config file with `key = value` lines; consulted for any flag not
    /// given on the command line or environment.
    #[arg(long, global = true, env = "RSCLUST_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario with planted clusters.
    Synth(SynthArgs),
    /// Parse paths, build routing states and run the pivot clustering.
    Cluster(ClusterArgs),
    /// Score an existing clustering against client rankings.
    Evaluate(EvaluateArgs),
    /// Aggregate per-cluster rankings and pick representative clients.
    Consensus(ConsensusArgs),
    /// Cluster-count statistics over a range of tau thresholds.
    Sweep(SweepArgs),
    /// Partition counts of the exact top-r grouping over a range of r.
    Optimal(OptimalArgs),
    /// Run cluster, evaluate, consensus, sweep and optimal in one go.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// BGP path table (`observer_as|prefix|as path` lines).
    #[arg(long, env = "RSCLUST_PATHS")]
    paths: Option<PathBuf>,

    /// Latency measurements CSV (`client,region,latency_ms`).
    #[arg(long, env = "RSCLUST_MEASUREMENTS")]
    measurements: Option<PathBuf>,

    /// Prefix-to-country CSV (`prefix,country`).
    #[arg(long, env = "RSCLUST_GEO")]
    geo: Option<PathBuf>,

    /// Tolerate malformed input lines (they are counted and reported on
    /// stderr). Without this flag any malformed line is fatal.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Output directory; all files are written with fixed names.
    #[arg(long, env = "RSCLUST_OUT")]
    out: Option<PathBuf>,

    /// RSD threshold for the pivot clustering.
    #[arg(long, env = "RSCLUST_TAU")]
    tau: Option<f64>,

    /// Padding rank parameter: unmeasured regions rank k+1.
    #[arg(long, env = "RSCLUST_K")]
    k: Option<u32>,

    /// Ranking metric for sampled distributions.
    #[arg(long, value_enum, env = "RSCLUST_METRIC")]
    metric: Option<MetricArg>,

    /// Seed for every randomized step.
    #[arg(long, env = "RSCLUST_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, env = "RSCLUST_GROUPS")]
    groups: Option<usize>,
    #[arg(long, env = "RSCLUST_PREFIXES_PER_GROUP")]
    prefixes_per_group: Option<usize>,
    #[arg(long, env = "RSCLUST_CLIENTS_PER_PREFIX")]
    clients_per_prefix: Option<usize>,
    /// Sub-AS universe size.
    #[arg(long, env = "RSCLUST_T_PRIME")]
    t_prime: Option<usize>,
    /// Number of server regions.
    #[arg(long, env = "RSCLUST_REGIONS")]
    regions: Option<u32>,
    /// Measured regions per client.
    #[arg(long, env = "RSCLUST_KNOWN")]
    known: Option<u32>,
    /// Middle-hop AS pool size.
    #[arg(long, env = "RSCLUST_HOP_POOL")]
    hop_pool: Option<usize>,
    /// Per-entry routing noise probability.
    #[arg(long, env = "RSCLUST_EPS_R")]
    eps_r: Option<f64>,
    /// Per-(client, region) latency jitter bound in ms.
    #[arg(long, env = "RSCLUST_EPS_L")]
    eps_l: Option<f64>,
    /// Latency gap between consecutive preference positions in ms.
    #[arg(long, env = "RSCLUST_STEP")]
    step: Option<f64>,
    /// Template mode: distinct groups or a graded overlap spectrum.
    #[arg(long, value_enum, env = "RSCLUST_MODE")]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the pairwise RSD matrix (quadratic in the prefix
    /// count) as rsd_matrix.csv.
    #[arg(long)]
    emit_rsd: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Cluster assignment CSV produced by `cluster`.
    #[arg(long, env = "RSCLUST_ASSIGNMENTS")]
    assignments: Option<PathBuf>,
    /// Sample size for in/out-cluster distributions.
    #[arg(long, env = "RSCLUST_SAMPLE")]
    sample: Option<usize>,
    /// rsim bucket width.
    #[arg(long, env = "RSCLUST_BUCKETS")]
    buckets: Option<usize>,
}

#[derive(Args)]
struct ConsensusArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, env = "RSCLUST_ASSIGNMENTS")]
    assignments: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated tau values; defaults to nine values evenly spaced
    /// over [0, t'].
    #[arg(long, env = "RSCLUST_TAUS")]
    taus: Option<String>,
    /// Pivot runs per tau.
    #[arg(long, env = "RSCLUST_RUNS")]
    runs: Option<u32>,
}

#[derive(Args)]
struct OptimalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, env = "RSCLUST_R_MIN")]
    r_min: Option<usize>,
    #[arg(long, env = "RSCLUST_R_MAX")]
    r_max: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, env = "RSCLUST_TAUS")]
    taus: Option<String>,
    #[arg(long, env = "RSCLUST_RUNS")]
    runs: Option<u32>,
    #[arg(long, env = "RSCLUST_SAMPLE")]
    sample: Option<usize>,
    #[arg(long, env = "RSCLUST_BUCKETS")]
    buckets: Option<usize>,
    #[arg(long, env = "RSCLUST_R_MIN")]
    r_min: Option<usize>,
    #[arg(long, env = "RSCLUST_R_MAX")]
    r_max: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Ps,
    G,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Ps => Metric::PartialFootrule,
            MetricArg::G => Metric::Geometric,
        }
    }
}

impl std::str::FromStr for MetricArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ps" => Ok(MetricArg::Ps),
            "g" => Ok(MetricArg::G),
            _ => Err(format!("unknown metric `{s}` (expected ps or g)")),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Distinct,
    Graded,
}

impl std::str::FromStr for ModeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "distinct" => Ok(ModeArg::Distinct),
            "graded" => Ok(ModeArg::Graded),
            _ => Err(format!("unknown mode `{s}` (expected distinct or graded)")),
        }
    }
}

/// `key = value` config file; lowest-precedence source for flag values.
#[derive(Default)]
struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {} is not `key = value`", idx + 1))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| anyhow!("config value for `{key}` is invalid: {raw}")),
        }
    }
}

fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &ConfigFile,
    key: &str,
    default: Option<T>,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(v) = cfg.get::<T>(key)? {
        return Ok(v);
    }
    default.ok_or_else(|| anyhow!("`--{key}` is required (flag, RSCLUST env var, or config)"))
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    let outputs = match cli.command {
        Command::Synth(args) => cmd_synth(&args, &cfg)?,
        Command::Cluster(args) => cmd_cluster(&args, &cfg)?,
        Command::Evaluate(args) => cmd_evaluate(&args, &cfg)?,
        Command::Consensus(args) => cmd_consensus(&args, &cfg)?,
        Command::Sweep(args) => cmd_sweep(&args, &cfg)?,
        Command::Optimal(args) => cmd_optimal(&args, &cfg)?,
        Command::Report(args) => cmd_report(&args, &cfg)?,
    };
    write_outputs(&outputs)
}

/// Outputs are accumulated in memory and written only after the whole
/// command succeeded, so a failing run leaves no partial files.
struct Output {
    path: PathBuf,
    text: String,
    echo: bool,
}

fn out_file(dir: &Path, name: &str, text: String) -> Output {
    Output {
        path: dir.join(name),
        text,
        echo: false,
    }
}

fn write_outputs(outputs: &[Output]) -> Result<()> {
    for output in outputs {
        if let Some(parent) = output.path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
        fs::write(&output.path, &output.text)
            .with_context(|| format!("cannot write {}", output.path.display()))?;
        if output.echo {
            print!("{}", output.text);
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn check_line_errors(what: &str, errors: &[LineError], lenient: bool) -> Result<()> {
    if errors.is_empty() {
        return Ok(());
    }
    for e in errors.iter().take(10) {
        eprintln!("{what}: line {}: {}", e.line, e.message);
    }
    if errors.len() > 10 {
        eprintln!("{what}: ... {} malformed lines total", errors.len());
    }
    if lenient {
        eprintln!("{what}: continuing despite {} malformed lines (--lenient)", errors.len());
        Ok(())
    } else {
        bail!("{what}: {} malformed lines (use --lenient to continue)", errors.len());
    }
}

/// Everything the routing side of the pipeline produces in one pass.
struct RoutingData {
    prefixes: Vec<Prefix>,
    states: Vec<RouteState>,
    t_prime: usize,
    base_ases: usize,
    origin_conflicts: usize,
    parsed_paths: usize,
}

fn load_routing(input: &InputArgs, cfg: &ConfigFile) -> Result<RoutingData> {
    let path = resolve(input.paths.clone(), cfg, "paths", None)?;
    let text = read_input(&path)?;
    let parsed = parse_bgp_paths(&text);
    check_line_errors("paths", &parsed.errors, input.lenient)?;
    if parsed.records.is_empty() {
        bail!("no usable path records in {}", path.display());
    }
    let (prefixes, origin_conflicts) = canonical_prefixes(&parsed.records);
    let obs = extract_nexthops(&parsed.records);
    if obs.skipped_empty > 0 {
        eprintln!("paths: skipped {} empty paths", obs.skipped_empty);
    }
    let split = split_sub_ases(&obs);
    let t_prime = split.space.t_prime();
    let base_ases = split.space.base_as_count();
    let (states, unobserved) = build_routestates(&split, &prefixes);
    if !unobserved.is_empty() {
        eprintln!("paths: {} prefixes without observations", unobserved.len());
    }
    Ok(RoutingData {
        prefixes,
        states,
        t_prime,
        base_ases,
        origin_conflicts,
        parsed_paths: parsed.records.len(),
    })
}

fn load_measurements(input: &InputArgs, cfg: &ConfigFile) -> Result<MeasurementSet> {
    let path = resolve(input.measurements.clone(), cfg, "measurements", None)?;
    let text = read_input(&path)?;
    let parsed = parse_measurements(&text);
    check_line_errors("measurements", &parsed.errors, input.lenient)?;
    if parsed.records.is_empty() {
        bail!("no usable measurement rows in {}", path.display());
    }
    Ok(parsed.records)
}

fn load_rankings(
    routing: &RoutingData,
    meas: &MeasurementSet,
) -> Result<(RankingsByPrefix, u32)> {
    let table = PrefixTable::from_prefixes(routing.prefixes.iter().copied());
    let m = meas.region_universe();
    let (rankings, unmatched) = group_rankings_by_prefix(meas, &table, m)?;
    if !unmatched.is_empty() {
        eprintln!(
            "measurements: {} clients matched no prefix and were excluded",
            unmatched.len()
        );
    }
    Ok((rankings, m))
}

fn load_assignments(
    path_flag: Option<PathBuf>,
    cfg: &ConfigFile,
    lenient: bool,
    routing: &RoutingData,
) -> Result<Partitioning<PrefixNet>> {
    let path = resolve(path_flag, cfg, "assignments", None)?;
    let text = read_input(&path)?;
    let parsed = parse_assignments(&text, Method::PivotRsd);
    check_line_errors("assignments", &parsed.errors, lenient)?;
    let universe: std::collections::BTreeSet<PrefixNet> =
        routing.prefixes.iter().map(|p| p.net).collect();
    if !parsed.records.check_disjoint_cover(&universe) {
        bail!("assignments are not a disjoint cover of the prefixes in the path table");
    }
    Ok(parsed.records)
}

fn default_params(common: &CommonArgs, cfg: &ConfigFile) -> Result<DistanceParams> {
    let k = resolve(common.k, cfg, "k", Some(20))?;
    DistanceParams::new(k).map_err(|e| anyhow!(e))
}

fn resolve_metric(common: &CommonArgs, cfg: &ConfigFile) -> Result<Metric> {
    resolve(common.metric, cfg, "metric", Some(MetricArg::Ps)).map(Metric::from)
}

fn required_seed(common: &CommonArgs, cfg: &ConfigFile) -> Result<u64> {
    resolve(common.seed, cfg, "seed", None)
        .map_err(|_| anyhow!("a `--seed` is required for randomized steps"))
}

fn out_dir(common: &CommonArgs, cfg: &ConfigFile) -> Result<PathBuf> {
    resolve(common.out.clone(), cfg, "out", None)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

fn cmd_synth(args: &SynthArgs, cfg: &ConfigFile) -> Result<Vec<Output>> {
    let out = out_dir(&args.common, cfg)?;
    let groups = resolve(args.groups, cfg, "groups", Some(5))?;
    let mode = match resolve(args.mode, cfg, "mode", Some(ModeArg::Distinct))? {
        ModeArg::Distinct => TemplateMode::Distinct,
        ModeArg::Graded => TemplateMode::Graded,
    };
    let spec = SyntheticSpec {
        groups,
        prefixes_per_group: resolve(args.prefixes_per_group, cfg, "prefixes_per_group", Some(20))?,
        clients_per_prefix: resolve(args.clients_per_prefix, cfg, "clients_per_prefix", Some(5))?,
        t_prime: resolve(args.t_prime, cfg, "t_prime", Some(100))?,
        regions: resolve(args.regions, cfg, "regions", Some(20))?,
        known_per_client: resolve(args.known, cfg, "known", Some(20))?,
        hop_pool: resolve(args.hop_pool, cfg, "hop_pool", Some(groups.max(4)))?,
        eps_r: resolve(args.eps_r, cfg, "eps_r", Some(0.0))?,
        eps_l_ms: resolve(args.eps_l, cfg, "eps_l", Some(0.0))?,
        latency_step_ms: resolve(args.step, cfg, "step", Some(10.0))?,
        templates: mode,
        seed: required_seed(&args.common, cfg)?,
    };
    let scenario = generate(&spec).map_err(|e| anyhow!(e))?;
    Ok(vec![
        out_file(&out, "paths.txt", scenario.path_text()),
        out_file(&out, "measurements.csv", scenario.measurement_text()),
        out_file(&out, "geo.csv", scenario.geo_text()),
        out_file(&out, "labels.csv", scenario.labels_text()),
    ])
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

fn cluster_summary(
    routing: &RoutingData,
    part: &Partitioning<PrefixNet>,
    tau: f64,
    seed: u64,
) -> String {
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &part.clusters {
        *histogram.entry(c.members.len()).or_insert(0) += 1;
    }
    let reduction = 100.0 * (1.0 - part.len() as f64 / routing.prefixes.len() as f64);
    let mut s = String::new();
    s.push_str(&format!("parsed_paths: {}\n", routing.parsed_paths));
    s.push_str(&format!("origin_conflicts: {}\n", routing.origin_conflicts));
    s.push_str(&format!("prefixes: {}\n", routing.prefixes.len()));
    s.push_str(&format!("base_ases: {}\n", routing.base_ases));
    s.push_str(&format!("sub_ases: {}\n", routing.t_prime));
    s.push_str(&format!("tau: {}\n", fmt_g6(tau)));
    s.push_str(&format!("seed: {seed}\n"));
    s.push_str(&format!("clusters: {}\n", part.len()));
    s.push_str(&format!("reduction_pct: {}\n", fmt_g6(reduction)));
    s.push_str("size_histogram:\n");
    for (size, count) in histogram {
        s.push_str(&format!("  size={size}: {count}\n"));
    }
    s
}

fn cmd_cluster(args: &ClusterArgs, cfg: &ConfigFile) -> Result<Vec<Output>> {
    let out = out_dir(&args.common, cfg)?;
    let routing = load_routing(&args.input, cfg)?;
    let tau = resolve(args.common.tau, cfg, "tau", Some(200.0))?;
    let seed = required_seed(&args.common, cfg)?;
    let matrix = RsdMatrix::from_states(&routing.states, routing.t_prime);
    let part = pivot_cluster(&matrix, tau, seed).map_err(|e| anyhow!(e))?;
    let summary = cluster_summary(&routing, &part, tau, seed);
    let mut outputs = vec![
        out_file(&out, "assignments.csv", serialize_assignments(&part)),
        out_file(&out, "summary.txt", summary),
    ];
    outputs[1].echo = true;
    if args.emit_rsd {
        outputs.push(out_file(
            &out,
            "rsd_matrix.csv",
            rsclust_core::ingest::serialize_rsd_matrix(&matrix),
        ));
    }
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn cmd_evaluate(args: &EvaluateArgs, cfg: &ConfigFile) -> Result<Vec<Output>> {
    let out = out_dir(&args.common, cfg)?;
    let routing = load_routing(&args.input, cfg)?;
    let meas = load_measurements(&args.input, cfg)?;
    let part = load_assignments(args.assignments.clone(), cfg, args.input.lenient, &routing)?;
    let params = default_params(&args.common, cfg)?;
    let metric = resolve_metric(&args.common, cfg)?;
    let seed = required_seed(&args.common, cfg)?;
    let sample = resolve(args.sample, cfg, "sample", Some(1000))?;
    let bucket_width = resolve(args.buckets, cfg, "buckets", Some(10))?;
    let (rankings, _) = load_rankings(&routing, &meas)?;

    let without_clients = part
        .clusters
        .iter()
        .flat_map(|c| c.members.iter())
        .filter(|net| !rankings.contains_key(*net))
        .count();
    if without_clients > 0 {
        eprintln!("evaluate: {without_clients} prefixes have no measured clients");
    }

    // per-cluster growth statistics
    let mut stats_rows = Vec::new();
    for cluster in &part.clusters {
        let clients: usize = cluster
            .members
            .iter()
            .filter_map(|net| rankings.get(net))
            .map(|l| l.len())
            .sum();
        stats_rows.push(ClusterStatsRow {
            cluster_id: cluster.id,
            prefixes: cluster.members.len(),
            clients,
            dg_ps: diameter_growth(&cluster.members, &rankings, Metric::PartialFootrule, params)?,
            ag_ps: avg_growth(&cluster.members, &rankings, Metric::PartialFootrule, params)?,
            dg_g: diameter_growth(&cluster.members, &rankings, Metric::Geometric, params)?,
            ag_g: avg_growth(&cluster.members, &rankings, Metric::Geometric, params)?,
        });
    }

    // in/out distributions: prefix pairs within the clustering, client
    // pairs within the prefix pre-clustering
    let in_out = in_out_cluster(
        &part,
        &rankings,
        metric,
        params,
        PairUnit::PrefixAvg,
        sample,
        seed,
    )?;
    if in_out.out_available == 0 {
        eprintln!("evaluate: single cluster, out-cluster distribution is empty");
    }
    let mut in_out_rows: Vec<InOutRow> = Vec::new();
    in_out_rows.extend(in_out.in_values.iter().map(|v| InOutRow {
        kind: InOutKind::In,
        value: *v,
    }));
    in_out_rows.extend(in_out.out_values.iter().map(|v| InOutRow {
        kind: InOutKind::Out,
        value: *v,
    }));

    let by_prefix = Partitioning {
        method: Method::ByPrefix,
        clusters: rankings
            .keys()
            .enumerate()
            .map(|(i, net)| rsclust_core::cluster::Cluster {
                id: i as u32,
                label: net.to_string(),
                members: vec![*net],
                pivot: None,
            })
            .collect(),
    };
    let client_in_out = in_out_cluster(
        &by_prefix,
        &rankings,
        metric,
        params,
        PairUnit::ClientPair,
        sample,
        seed.wrapping_add(1),
    )?;
    let mut client_rows: Vec<InOutRow> = Vec::new();
    client_rows.extend(client_in_out.in_values.iter().map(|v| InOutRow {
        kind: InOutKind::In,
        value: *v,
    }));
    client_rows.extend(client_in_out.out_values.iter().map(|v| InOutRow {
        kind: InOutKind::Out,
        value: *v,
    }));

    // correlation buckets over rsim and RSD
    let matrix = RsdMatrix::from_states(&routing.states, routing.t_prime);
    let rsims = RsimMatrix::from_states(&routing.states);
    let rsim_series = correlation_buckets(
        &matrix,
        &rsims,
        &rankings,
        params,
        BucketMode::Rsim {
            width: bucket_width,
        },
    )?;
    let rsd_series = correlation_buckets(&matrix, &rsims, &rankings, params, BucketMode::Rsd)?;

    // prefix-length analysis
    let length_rows = prefix_length_series(&rankings, &meas, params)?;

    // baselines: origin AS, country when geo is available, and a random
    // size-matched null
    let universe: Vec<PrefixNet> = routing.prefixes.iter().map(|p| p.net).collect();
    let as_part = partition_by_as(&routing.prefixes);
    let as_rows = baseline_scatter(&part, &as_part, &rankings, params)?;
    let random_part = random_partition_like(&universe, &part, seed.wrapping_add(2));
    let random_rows = baseline_scatter(&part, &random_part, &rankings, params)?;

    let mut outputs = vec![
        out_file(&out, "cluster_stats.csv", serialize_cluster_stats(&stats_rows)),
        out_file(&out, "in_out.csv", serialize_in_out(&in_out_rows)),
        out_file(&out, "in_out_clients.csv", serialize_in_out(&client_rows)),
        out_file(&out, "buckets_rsim.csv", serialize_buckets(&rsim_series)),
        out_file(&out, "buckets_rsd.csv", serialize_buckets(&rsd_series)),
        out_file(&out, "prefix_length.csv", serialize_prefix_length(&length_rows)),
        out_file(&out, "baseline_as.csv", serialize_baseline(&as_rows)),
        out_file(&out, "baseline_random.csv", serialize_baseline(&random_rows)),
    ];

    if let Ok(geo_path) = resolve(args.input.geo.clone(), cfg, "geo", None) {
        let parsed = parse_geo(&read_input(&geo_path)?);
        check_line_errors("geo", &parsed.errors, args.input.lenient)?;
        let (country_part, missing) = partition_by_country(&universe, &parsed.records);
        if !missing.is_empty() {
            eprintln!("geo: {} prefixes without a country, excluded", missing.len());
        }
        let rows = baseline_scatter(&part, &country_part, &rankings, params)?;
        outputs.push(out_file(&out, "baseline_country.csv", serialize_baseline(&rows)));
    }

    Ok(outputs)
}

// ---------------------------------------------------------------------------
// consensus
// ---------------------------------------------------------------------------

fn cmd_consensus(args: &ConsensusArgs, cfg: &ConfigFile) -> Result<Vec<Output>> {
    let out = out_dir(&args.common, cfg)?;
    let routing = load_routing(&args.input, cfg)?;
    let meas = load_measurements(&args.input, cfg)?;
    let part = load_assignments(args.assignments.clone(), cfg, args.input.lenient, &routing)?;
    let params = default_params(&args.common, cfg)?;
    let seed = required_seed(&args.common, cfg)?;
    let (rankings, _) = load_rankings(&routing, &meas)?;

    let mut consensus_rows: Vec<ConsensusRow> = Vec::new();
    let mut latency_rows: Vec<LatencyDiffRow> = Vec::new();
    let mut skipped_clusters = 0usize;
    let mut skipped_latency = 0usize;
    for cluster in &part.clusters {
        let voters: Vec<_> = cluster
            .members
            .iter()
            .filter_map(|net| rankings.get(net))
            .flatten()
            .cloned()
            .collect();
        if voters.is_empty() {
            skipped_clusters += 1;
            continue;
        }
        let consensuses: Vec<ConsensusRanking> = vec![
            borda_consensus(&voters, params).map_err(|e| anyhow!(e))?,
            plurality_consensus(&voters).map_err(|e| anyhow!(e))?,
        ];
        for strategy in [SelectionStrategy::RandomAll, SelectionStrategy::RandomPivot] {
            let rep = select_representative(
                cluster,
                &rankings,
                strategy,
                seed.wrapping_add(cluster.id as u64),
            )
            .map_err(|e| anyhow!(e))?;
            for consensus in &consensuses {
                let (ps_cons, ps_rep) = evaluate_representative(
                    &cluster.members,
                    &rankings,
                    consensus,
                    &rep.client,
                    Metric::PartialFootrule,
                    params,
                )
                .map_err(|e| anyhow!(e))?;
                let (g_cons, g_rep) = evaluate_representative(
                    &cluster.members,
                    &rankings,
                    consensus,
                    &rep.client,
                    Metric::Geometric,
                    params,
                )
                .map_err(|e| anyhow!(e))?;
                consensus_rows.push(ConsensusRow {
                    cluster_id: cluster.id,
                    method: consensus.method.to_string(),
                    strategy: strategy.to_string(),
                    representative: rep.client.clone(),
                    fallback: rep.fallback,
                    consensus_order: consensus.order.iter().map(|r| r.0).collect(),
                    ps_consensus_avg: Some(ps_cons),
                    ps_representative_avg: Some(ps_rep),
                    g_consensus_avg: Some(g_cons),
                    g_representative_avg: Some(g_rep),
                });
            }
            let clients: Vec<ClientId> = voters.iter().map(|v| v.client().clone()).collect();
            let outcome = latency_difference(
                &clients,
                &meas,
                &LatencyAnchor::RepresentativeTop1(rep.client.clone()),
            );
            skipped_latency += outcome.skipped;
            latency_rows.extend(outcome.diffs.into_iter().map(|(client, diff_ms)| {
                LatencyDiffRow {
                    cluster_id: cluster.id,
                    strategy: strategy.to_string(),
                    client,
                    diff_ms,
                }
            }));
        }
    }
    if skipped_clusters > 0 {
        eprintln!("consensus: {skipped_clusters} clusters without clients skipped");
    }
    if skipped_latency > 0 {
        eprintln!("consensus: {skipped_latency} latency comparisons skipped for missing measurements");
    }
    Ok(vec![
        out_file(&out, "consensus.csv", serialize_consensus(&consensus_rows)),
        out_file(&out, "latency_diff.csv", serialize_latency_diff(&latency_rows)),
    ])
}

// ---------------------------------------------------------------------------
// sweep / optimal
// ---------------------------------------------------------------------------

fn parse_taus(raw: Option<String>, cfg: &ConfigFile, t_prime: usize) -> Result<Vec<f64>> {
    let raw = match raw {
        Some(r) => Some(r),
        None => cfg.get::<String>("taus")?,
    };
    match raw {
        Some(list) => list
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| anyhow!("invalid tau value `{tok}`"))
            })
            .collect(),
        None => Ok((0..=8).map(|i| t_prime as f64 * i as f64 / 8.0).collect()),
    }
}

fn cmd_sweep(args: &SweepArgs, cfg: &ConfigFile) -> Result<Vec<Output>> {
    let out = out_dir(&args.common, cfg)?;
    let routing = load_routing(&args.input, cfg)?;
    let seed = required_seed(&args.common, cfg)?;
    let runs = resolve(args.runs, cfg, "runs", Some(10))?;
    let taus = parse_taus(args.taus.clone(), cfg, routing.t_prime)?;
    let matrix = RsdMatrix::from_states(&routing.states, routing.t_prime);
    let rows = tau_sweep(&matrix, &taus, runs, seed).map_err(|e| anyhow!(e))?;
    Ok(vec![out_file(&out, "sweep.csv", serialize_sweep(&rows))])
}

fn cmd_optimal(args: &OptimalArgs, cfg: &ConfigFile) -> Result<Vec<Output>> {
    let out = out_dir(&args.common, cfg)?;
    let meas = load_measurements(&args.input, cfg)?;
    let r_min = resolve(args.r_min, cfg, "r_min", Some(1))?;
    let r_max = resolve(args.r_max, cfg, "r_max", Some(8))?;
    if r_min == 0 || r_min > r_max {
        bail!("need 1 <= r_min <= r_max");
    }
    let m = meas.region_universe();
    let rankings = meas.rankings(m).map_err(|e| anyhow!(e))?;
    let rows: Vec<OptimalRow> = (r_min..=r_max)
        .map(|r| {
            optimal_partition(&rankings, r).map(|p| OptimalRow {
                r,
                partitions: p.len(),
            })
        })
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!(e))?;
    Ok(vec![out_file(&out, "optimal.csv", serialize_optimal(&rows))])
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(args: &ReportArgs, cfg: &ConfigFile) -> Result<Vec<Output>> {
    let out = out_dir(&args.common, cfg)?;
    let seed = required_seed(&args.common, cfg)?;

    let cluster_args = ClusterArgs {
        input: args.input.clone(),
        common: args.common.clone(),
        emit_rsd: false,
    };
    let mut outputs = cmd_cluster(&cluster_args, cfg)?;
    // later stages read the assignments we just computed, which are not
    // on disk yet; write them first
    write_outputs(&outputs)?;
    for o in &mut outputs {
        o.echo = false;
    }
    let assignments = Some(out.join("assignments.csv"));

    let evaluate_args = EvaluateArgs {
        input: args.input.clone(),
        common: args.common.clone(),
        assignments: assignments.clone(),
        sample: args.sample,
        buckets: args.buckets,
    };
    outputs.extend(cmd_evaluate(&evaluate_args, cfg)?);

    let consensus_args = ConsensusArgs {
        input: args.input.clone(),
        common: CommonArgs {
            seed: Some(seed.wrapping_add(1)),
            ..args.common.clone()
        },
        assignments,
    };
    outputs.extend(cmd_consensus(&consensus_args, cfg)?);

    let sweep_args = SweepArgs {
        input: args.input.clone(),
        common: CommonArgs {
            seed: Some(seed.wrapping_add(2)),
            ..args.common.clone()
        },
        taus: args.taus.clone(),
        runs: args.runs,
    };
    outputs.extend(cmd_sweep(&sweep_args, cfg)?);

    let optimal_args = OptimalArgs {
        input: args.input.clone(),
        common: args.common.clone(),
        r_min: args.r_min,
        r_max: args.r_max,
    };
    outputs.extend(cmd_optimal(&optimal_args, cfg)?);

    Ok(outputs)
}
