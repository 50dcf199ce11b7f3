//! The `polyfit` command-line tool: build piecewise-polynomial indexes from
//! CSV, query them with absolute/relative guarantees, benchmark, sweep the
//! deg/delta tuning grid, and inspect serialized index files.
//!
//! Exit codes: 1 usage, 2 I/O, 3 guarantee mismatch, 4 data error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use polyfit_cli::csv::CsvError;
use polyfit_cli::format::{self, FormatError, LoadedIndex};
use polyfit_cli::report::{write_bench_report, write_sweep_report, BenchRow};
use polyfit_cli::workload::{generate_workload_1d, generate_workload_2d, Rect};
use polyfit_cli::{read_csv_1d, read_csv_2d};
use polyfit_core::{
    build_index, build_quad_index, exact_count_2d, ingest, tune, AggregateKind, BuildError,
    ErrorSpec, FitError, ModelError, QueryError,
};

#[derive(Parser)]
#[command(name = "polyfit", version, about = "Piecewise-polynomial range aggregate index")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from a CSV file and serialize it.
    Build {
        #[arg(long)]
        input: PathBuf,
        /// Aggregate: sum | count | min | max.
        #[arg(long)]
        agg: String,
        /// Number of keys: 1 or 2 (dim 2 supports count only).
        #[arg(long, default_value_t = 1)]
        dim: u8,
        #[arg(long)]
        deg: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one range query against a serialized index.
    Query {
        #[arg(long)]
        index: PathBuf,
        /// Key range "l:u".
        #[arg(long)]
        range: String,
        /// Second key range "l:u" (2-D indexes).
        #[arg(long)]
        range2: Option<String>,
        /// Guarantee mode: abs | rel.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        eps: f64,
        /// Re-compute the exact answer from this CSV and report the error.
        #[arg(long)]
        verify: Option<PathBuf>,
    },
    /// Run a seeded random workload and emit a CSV benchmark report.
    Bench {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 42)]
        workload_seed: u64,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        /// Also benchmark relative mode at this epsilon.
        #[arg(long)]
        eps_rel: Option<f64>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Build across a deg x delta grid and report tuning measurements.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "sum")]
        agg: String,
        /// Comma-separated degrees, e.g. 1,2,3.
        #[arg(long, default_value = "1,2,3")]
        degs: String,
        /// Comma-separated deviation thresholds.
        #[arg(long, default_value = "25,50,100,200,500,1000")]
        deltas: String,
        #[arg(long, default_value_t = 0.01)]
        eps_rel: f64,
        #[arg(long, default_value_t = 42)]
        workload_seed: u64,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long)]
        report: PathBuf,
    },
    /// Dump a serialized index's header and structural statistics.
    Inspect {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = false)]
        json: bool,
    },
}

/// Print a line, treating a closed pipe downstream as a clean exit.
fn emit(args: std::fmt::Arguments) {
    let mut out = std::io::stdout().lock();
    if out
        .write_fmt(args)
        .and_then(|()| out.write_all(b"\n"))
        .is_err()
    {
        std::process::exit(0);
    }
}

macro_rules! outln {
    ($($t:tt)*) => { emit(format_args!($($t)*)) };
}

enum CliError {
    Usage(String),
    Io(String),
    Guarantee(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Guarantee(_) => 3,
            CliError::Data(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Guarantee(m) | CliError::Data(m) => m,
        }
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> CliError {
        match e {
            CsvError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> CliError {
        match e {
            FormatError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> CliError {
        match e {
            BuildError::Fit(FitError::DegreeOutOfRange { .. }) | BuildError::NonPositiveDelta(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<QueryError> for CliError {
    fn from(e: QueryError) -> CliError {
        match e {
            QueryError::InvalidRange { .. } => CliError::Usage(e.to_string()),
            QueryError::GuaranteeMismatch { .. } => CliError::Guarantee(e.to_string()),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful outputs, not usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Command::Build {
            input,
            agg,
            dim,
            deg,
            delta,
            out,
        } => cmd_build(&input, &agg, dim, deg, delta, &out),
        Command::Query {
            index,
            range,
            range2,
            mode,
            eps,
            verify,
        } => cmd_query(&index, &range, range2.as_deref(), &mode, eps, verify.as_deref()),
        Command::Bench {
            index,
            workload_seed,
            queries,
            eps_rel,
            report,
        } => cmd_bench(&index, workload_seed, queries, eps_rel, &report),
        Command::Sweep {
            input,
            agg,
            degs,
            deltas,
            eps_rel,
            workload_seed,
            queries,
            report,
        } => cmd_sweep(
            &input,
            &agg,
            &degs,
            &deltas,
            eps_rel,
            workload_seed,
            queries,
            &report,
        ),
        Command::Inspect { index, json } => cmd_inspect(&index, json),
    }
}

fn parse_agg(s: &str) -> Result<AggregateKind, CliError> {
    s.parse::<AggregateKind>().map_err(CliError::Usage)
}

fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("range must be \"l:u\", got {s:?}"));
    let (l, u) = s.split_once(':').ok_or_else(bad)?;
    let l: f64 = l.trim().parse().map_err(|_| bad())?;
    let u: f64 = u.trim().parse().map_err(|_| bad())?;
    if !l.is_finite() || !u.is_finite() {
        return Err(bad());
    }
    Ok((l, u))
}

fn load_index(path: &Path) -> Result<LoadedIndex, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(format::deserialize(&bytes)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_build(
    input: &Path,
    agg: &str,
    dim: u8,
    deg: usize,
    delta: f64,
    out: &Path,
) -> Result<(), CliError> {
    let agg = parse_agg(agg)?;
    match dim {
        1 => {
            let rows = read_csv_1d(input)?;
            let dataset = ingest(&rows, agg)?;
            let idx = build_index(&dataset, agg, deg, delta)?;
            let bytes = format::serialize_1d(&idx);
            write_file(out, &bytes)?;
            outln!("segments: {}", idx.segments().len());
            outln!("bytes: {}", bytes.len());
        }
        2 => {
            if agg != AggregateKind::Count {
                return Err(CliError::Usage(
                    "two-key indexes support --agg count only".into(),
                ));
            }
            let points = read_csv_2d(input)?;
            if points.is_empty() {
                return Err(CliError::Data("input is empty".into()));
            }
            if let Some(i) = points
                .iter()
                .position(|p| !p.u.is_finite() || !p.v.is_finite() || !p.w.is_finite())
            {
                return Err(CliError::Data(format!("non-finite value at row {i}")));
            }
            let idx = build_quad_index(&points, deg, delta)?;
            let bytes = format::serialize_2d(&idx);
            write_file(out, &bytes)?;
            outln!("segments: {}", idx.leaf_count());
            outln!("bytes: {}", bytes.len());
        }
        other => return Err(CliError::Usage(format!("--dim must be 1 or 2, got {other}"))),
    }
    Ok(())
}

fn cmd_query(
    index: &Path,
    range: &str,
    range2: Option<&str>,
    mode: &str,
    eps: f64,
    verify: Option<&Path>,
) -> Result<(), CliError> {
    let (l, u) = parse_range(range)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Usage(format!("--eps must be positive, got {eps}")));
    }
    let spec = match mode {
        "abs" => ErrorSpec::Abs(eps),
        "rel" => ErrorSpec::Rel(eps),
        other => return Err(CliError::Usage(format!("--mode must be abs or rel, got {other:?}"))),
    };
    match load_index(index)? {
        LoadedIndex::One(idx) => {
            if range2.is_some() {
                return Err(CliError::Usage("--range2 given for a 1-key index".into()));
            }
            let out = if idx.agg().is_cumulative() {
                idx.query_sum(l, u, spec)?
            } else {
                idx.query_max(l, u, spec)?
            };
            outln!("value: {}", out.value);
            outln!("refined: {}", out.refined);
            if let Some(csv) = verify {
                let rows = read_csv_1d(csv)?;
                let exact = brute_force_1d(&rows, idx.agg(), l, u);
                outln!("exact: {exact}");
                outln!("abs_error: {}", (out.value - exact).abs());
            }
        }
        LoadedIndex::Two(idx) => {
            let (l2, u2) = parse_range(
                range2.ok_or_else(|| CliError::Usage("--range2 required for a 2-key index".into()))?,
            )?;
            let out = idx.query_count(l, u, l2, u2, spec)?;
            outln!("value: {}", out.value);
            outln!("refined: {}", out.refined);
            if let Some(csv) = verify {
                let points = read_csv_2d(csv)?;
                let exact = points
                    .iter()
                    .filter(|p| p.u >= l && p.u <= u && p.v >= l2 && p.v <= u2)
                    .count() as f64;
                outln!("exact: {exact}");
                outln!("abs_error: {}", (out.value - exact).abs());
            }
        }
    }
    Ok(())
}

fn brute_force_1d(rows: &[(f64, f64)], agg: AggregateKind, l: f64, u: f64) -> f64 {
    let in_range = rows.iter().filter(|r| r.0 >= l && r.0 <= u);
    match agg {
        AggregateKind::Sum => in_range.map(|r| r.1).sum(),
        AggregateKind::Count => in_range.count() as f64,
        AggregateKind::Max => in_range.map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
        AggregateKind::Min => in_range.map(|r| r.1).fold(f64::INFINITY, f64::min),
    }
}

fn bench_threads() -> usize {
    std::env::var("POLYFIT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

struct BenchMeasurement {
    latencies_ns: Vec<f64>,
    refined: usize,
    max_abs_err: f64,
    max_rel_err: f64,
}

/// Run `query` then `exact` for every workload entry; only the query is
/// timed, the exact oracle feeds the error columns.
fn measure<Q, E>(queries: usize, threads: usize, query: Q, exact: E) -> BenchMeasurement
where
    Q: Fn(usize) -> (f64, bool) + Sync,
    E: Fn(usize) -> f64 + Sync,
{
    let chunk = queries.div_ceil(threads);
    let results: Vec<BenchMeasurement> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let query = &query;
            let exact = &exact;
            handles.push(scope.spawn(move || {
                let lo = t * chunk;
                let hi = ((t + 1) * chunk).min(queries);
                let mut m = BenchMeasurement {
                    latencies_ns: Vec::with_capacity(hi.saturating_sub(lo)),
                    refined: 0,
                    max_abs_err: 0.0,
                    max_rel_err: 0.0,
                };
                for i in lo..hi {
                    let start = Instant::now();
                    let (value, refined) = query(i);
                    m.latencies_ns.push(start.elapsed().as_secs_f64() * 1e9);
                    if refined {
                        m.refined += 1;
                    }
                    let exact = exact(i);
                    let err = (value - exact).abs();
                    m.max_abs_err = m.max_abs_err.max(err);
                    if exact != 0.0 {
                        m.max_rel_err = m.max_rel_err.max(err / exact.abs());
                    }
                }
                m
            }));
        }
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut merged = BenchMeasurement {
        latencies_ns: Vec::with_capacity(queries),
        refined: 0,
        max_abs_err: 0.0,
        max_rel_err: 0.0,
    };
    for r in results {
        merged.latencies_ns.extend(r.latencies_ns);
        merged.refined += r.refined;
        merged.max_abs_err = merged.max_abs_err.max(r.max_abs_err);
        merged.max_rel_err = merged.max_rel_err.max(r.max_rel_err);
    }
    merged.latencies_ns.sort_by(|a, b| a.partial_cmp(b).unwrap());
    merged
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() as f64 * p).ceil() as usize).clamp(1, sorted.len());
    sorted[idx - 1]
}

fn cmd_bench(
    index: &Path,
    seed: u64,
    queries: usize,
    eps_rel: Option<f64>,
    report: &Path,
) -> Result<(), CliError> {
    if let Some(eps) = eps_rel {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(CliError::Usage(format!("--eps-rel must be positive, got {eps}")));
        }
    }
    let file_bytes = std::fs::read(index)
        .map_err(|e| CliError::Io(format!("{}: {e}", index.display())))?;
    let loaded = format::deserialize(&file_bytes)?;
    let threads = bench_threads();
    let mut rows = Vec::new();

    match &loaded {
        LoadedIndex::One(idx) => {
            let workload = generate_workload_1d(idx.keys(), queries, seed);
            let coupling = if idx.agg().is_cumulative() { 2.0 } else { 1.0 };
            let eps_abs = coupling * idx.delta();
            let mut specs = vec![("abs", ErrorSpec::Abs(eps_abs))];
            if let Some(eps) = eps_rel {
                specs.push(("rel", ErrorSpec::Rel(eps)));
            }
            for (mode, spec) in specs {
                let m = measure(
                    workload.len(),
                    threads,
                    |i| {
                        let (l, u) = workload[i];
                        let out = if idx.agg().is_cumulative() {
                            idx.query_sum(l, u, spec)
                        } else {
                            idx.query_max(l, u, spec)
                        }
                        .expect("workload in domain, coupling checked");
                        (out.value, out.refined)
                    },
                    |i| {
                        let (l, u) = workload[i];
                        idx.exact(l, u)
                    },
                );
                rows.push(BenchRow {
                    deg: idx.deg(),
                    delta: idx.delta(),
                    eps: spec.epsilon(),
                    mode,
                    segment_count: idx.segments().len(),
                    index_bytes: file_bytes.len(),
                    build_ms: 0.0,
                    median_query_ns: percentile(&m.latencies_ns, 0.5),
                    p99_query_ns: percentile(&m.latencies_ns, 0.99),
                    refinement_rate: m.refined as f64 / workload.len().max(1) as f64,
                    max_abs_err: m.max_abs_err,
                    max_rel_err: m.max_rel_err,
                });
            }
        }
        LoadedIndex::Two(idx) => {
            let workload: Vec<Rect> = generate_workload_2d(idx.points(), queries, seed);
            let eps_abs = 4.0 * idx.delta();
            let mut specs = vec![("abs", ErrorSpec::Abs(eps_abs))];
            if let Some(eps) = eps_rel {
                specs.push(("rel", ErrorSpec::Rel(eps)));
            }
            for (mode, spec) in specs {
                let m = measure(
                    workload.len(),
                    threads,
                    |i| {
                        let r = workload[i];
                        let out = idx
                            .query_count(r.l1, r.u1, r.l2, r.u2, spec)
                            .expect("workload in domain, coupling checked");
                        (out.value, out.refined)
                    },
                    |i| {
                        let r = workload[i];
                        exact_count_2d(idx.fallback(), r.l1, r.u1, r.l2, r.u2) as f64
                    },
                );
                rows.push(BenchRow {
                    deg: idx.deg(),
                    delta: idx.delta(),
                    eps: spec.epsilon(),
                    mode,
                    segment_count: idx.leaf_count(),
                    index_bytes: file_bytes.len(),
                    build_ms: 0.0,
                    median_query_ns: percentile(&m.latencies_ns, 0.5),
                    p99_query_ns: percentile(&m.latencies_ns, 0.99),
                    refinement_rate: m.refined as f64 / workload.len().max(1) as f64,
                    max_abs_err: m.max_abs_err,
                    max_rel_err: m.max_rel_err,
                });
            }
        }
    }

    let mut buf = Vec::new();
    write_bench_report(&mut buf, &rows).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(report, &buf)?;
    outln!("wrote {} rows to {}", rows.len(), report.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| CliError::Usage(format!("bad {what} entry: {p:?}")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    input: &Path,
    agg: &str,
    degs: &str,
    deltas: &str,
    eps_rel: f64,
    seed: u64,
    queries: usize,
    report: &Path,
) -> Result<(), CliError> {
    let agg = parse_agg(agg)?;
    let degrees: Vec<usize> = parse_list(degs, "--degs")?;
    let deltas: Vec<f64> = parse_list(deltas, "--deltas")?;
    if degrees.is_empty() || deltas.is_empty() {
        return Err(CliError::Usage("--degs and --deltas must be non-empty".into()));
    }
    if !(eps_rel > 0.0 && eps_rel.is_finite()) {
        return Err(CliError::Usage(format!("--eps-rel must be positive, got {eps_rel}")));
    }
    let rows = read_csv_1d(input)?;
    let dataset = ingest(&rows, agg)?;
    let keys: Vec<f64> = dataset.keys().collect();
    let workload = generate_workload_1d(&keys, queries, seed);
    let tuned = tune(&dataset, agg, &degrees, &deltas, eps_rel, &workload)?;
    let mut buf = Vec::new();
    write_sweep_report(&mut buf, &tuned).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(report, &buf)?;
    outln!("wrote {} rows to {}", tuned.len(), report.display());
    Ok(())
}

fn error_histogram(errors: &[f64], delta: f64, buckets: usize) -> Vec<usize> {
    let mut hist = vec![0usize; buckets];
    for &e in errors {
        let frac = (e / delta).clamp(0.0, 1.0);
        let b = ((frac * buckets as f64) as usize).min(buckets - 1);
        hist[b] += 1;
    }
    hist
}

fn cmd_inspect(index: &Path, json: bool) -> Result<(), CliError> {
    let bytes = std::fs::read(index)
        .map_err(|e| CliError::Io(format!("{}: {e}", index.display())))?;
    let header = format::read_header(&bytes)?;
    let loaded = format::deserialize(&bytes)?;

    let (units, count, depth, model_bytes, fallback_bytes, errors): (
        &str,
        usize,
        usize,
        usize,
        usize,
        Vec<f64>,
    ) = match &loaded {
        LoadedIndex::One(idx) => (
            "segments",
            idx.segments().len(),
            idx.height(),
            idx.model_bytes(),
            idx.fallback_bytes(),
            idx.segments().iter().map(|s| s.certified_error).collect(),
        ),
        LoadedIndex::Two(idx) => {
            let mut errs = Vec::new();
            idx.root().for_each_leaf(&mut |_, _, e| errs.push(e));
            (
                "leaves",
                idx.leaf_count(),
                idx.depth(),
                idx.model_bytes(),
                idx.points().len() * 24,
                errs,
            )
        }
    };
    let hist = error_histogram(&errors, header.delta, 8);

    if json {
        let mut out = String::new();
        let _ = write!(
            out,
            "{{\"magic\":\"PFIX\",\"version\":{},\"agg\":\"{}\",\"dim\":{},\"deg\":{},\"delta\":{},\"n\":{},\"checksum\":{},\"{}\":{},\"depth\":{},\"model_bytes\":{},\"fallback_bytes\":{},\"file_bytes\":{},\"error_histogram\":[{}]}}",
            FORMAT_VERSION_FOR_DISPLAY,
            header.agg.as_str(),
            header.dim,
            header.deg,
            header.delta,
            header.n,
            header.checksum,
            units,
            count,
            depth,
            model_bytes,
            fallback_bytes,
            bytes.len(),
            hist.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        outln!("{out}");
    } else {
        outln!("magic: PFIX");
        outln!("version: {FORMAT_VERSION_FOR_DISPLAY}");
        outln!("agg: {}", header.agg.as_str());
        outln!("dim: {}", header.dim);
        outln!("deg: {}", header.deg);
        outln!("delta: {}", header.delta);
        outln!("n: {}", header.n);
        outln!("checksum: {:#010x}", header.checksum);
        outln!("{units}: {count}");
        outln!("depth: {depth}");
        outln!("model_bytes: {model_bytes}");
        outln!("fallback_bytes: {fallback_bytes}");
        outln!("file_bytes: {}", bytes.len());
        for (i, c) in hist.iter().enumerate() {
            let lo = i as f64 / 8.0;
            let hi = (i + 1) as f64 / 8.0;
            outln!("errors[{:.3}d..{:.3}d]: {c}", lo, hi);
        }
    }
    Ok(())
}

const FORMAT_VERSION_FOR_DISPLAY: u32 = format::FORMAT_VERSION;
