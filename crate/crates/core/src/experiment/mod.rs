//! Experiment protocol: train one autoencoder on a workload, write a bundle
//! of CSV/JSON artifacts, and compare bundles.
//!
//! A bundle directory holds `trace.csv`, `theta_opt.json`,
//! `fidelities.csv`, `trash_density.csv`, `cost_report.csv` and, for
//! digits, `reconstructed.csv`.

mod compare;
mod config;
mod run;

pub use compare::{
    compare_runs, export_trash_density, Check, ComparisonReport, FidelityDelta, Probe, RunDigest, Thresholds,
};
pub use config::{parse_config_text, DatasetConfig, ExperimentConfig, RunMode, Workload, DEFAULT_RESTARTS};
pub use run::{
    build_datasets, ising_probe_tag, load_theta_file, run_experiment, theta_path, trash_density, write_density_csv,
    Datasets, FidelityRow, RunSummary, ThetaFile, COST_REPORT_FILE, FIDELITIES_FILE, ISING_PROBES, RECONSTRUCTED_FILE,
    THETA_FILE, TRACE_FILE, TRASH_DENSITY_FILE,
};
