//! Machine-parseable CSV reports with fixed header rows.

use std::io::Write;

use polyfit_core::TuneRow;

pub const BENCH_HEADER: &str = "deg,delta,eps,mode,segment_count,index_bytes,build_ms,median_query_ns,p99_query_ns,refinement_rate,max_abs_err,max_rel_err";

pub const SWEEP_HEADER: &str =
    "deg,delta,segment_count,model_bytes,build_ms,mean_query_ns,median_query_ns,refinement_rate";

/// One benchmark measurement row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub deg: usize,
    pub delta: f64,
    pub eps: f64,
    pub mode: &'static str,
    pub segment_count: usize,
    pub index_bytes: usize,
    pub build_ms: f64,
    pub median_query_ns: f64,
    pub p99_query_ns: f64,
    pub refinement_rate: f64,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

pub fn write_bench_report(mut out: impl Write, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "{BENCH_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.3},{:.1},{:.1},{:.4},{},{}",
            r.deg,
            r.delta,
            r.eps,
            r.mode,
            r.segment_count,
            r.index_bytes,
            r.build_ms,
            r.median_query_ns,
            r.p99_query_ns,
            r.refinement_rate,
            r.max_abs_err,
            r.max_rel_err,
        )?;
    }
    Ok(())
}

pub fn write_sweep_report(mut out: impl Write, rows: &[TuneRow]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.3},{:.1},{:.1},{:.4}",
            r.deg,
            r.delta,
            r.segment_count,
            r.model_bytes,
            r.build_ms,
            r.mean_query_ns,
            r.median_query_ns,
            r.refinement_rate,
        )?;
    }
    Ok(())
}
