//! Trace files, CSV exports and run manifests.

pub mod csv;
pub mod manifest;
pub mod tracefile;

pub use csv::{export_cdf_csv, export_sir_csv, export_spectrum_csv, import_cdf_csv};
pub use manifest::{manifest_path, RunManifest};
pub use tracefile::{
    read_header, read_trace, write_trace, PayloadKind, TraceFile, TraceHeader, TraceRef,
};
