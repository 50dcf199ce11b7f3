//! I/O companion to `polyfit-core`: CSV ingestion, the PFIX binary index
//! format, deterministic workload generation, and CSV report emission.

#![forbid(unsafe_code)]

pub mod csv;
pub mod format;
pub mod report;
pub mod rng;
pub mod workload;

pub use csv::{read_csv_1d, read_csv_2d, CsvError};
pub use format::{
    deserialize, read_header, serialize_1d, serialize_2d, FormatError, IndexHeader, LoadedIndex,
};
pub use report::{write_bench_report, write_sweep_report, BenchRow};
pub use rng::SplitMix64;
pub use workload::{generate_workload_1d, generate_workload_2d, Rect};
