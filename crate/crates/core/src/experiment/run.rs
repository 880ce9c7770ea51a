//! Training runs and the on-disk bundle they produce.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetConfig, ExperimentConfig, RunMode, Workload};
use crate::ansatz::{apply_encoder, bind, reconstruct, AnsatzSpec, FeatureVector, ParameterVector};
use crate::cost::{averaged_cost, CostReport};
use crate::dataset::TrainingSet;
use crate::digits::{build_digits_training_set, bundled_test, bundled_train, load_digits, DigitImage, SIDE};
use crate::error::{QaeError, Result};
use crate::ising::{build_ising_test_set, build_ising_training_set, ground_state, IsingSpec};
use crate::optimize::{CostTrace, OptimizationResult, OptimizerConfig, Termination};
use crate::statevector::{DensityMatrix, StateVector};
use crate::training::{init_parameters, train, InitStrategy};

pub const TRACE_FILE: &str = "trace.csv";
pub const THETA_FILE: &str = "theta_opt.json";
pub const FIDELITIES_FILE: &str = "fidelities.csv";
pub const TRASH_DENSITY_FILE: &str = "trash_density.csv";
pub const COST_REPORT_FILE: &str = "cost_report.csv";
pub const RECONSTRUCTED_FILE: &str = "reconstructed.csv";

/// Transverse fields at which the Ising runs record the trash state.
pub const ISING_PROBES: [f64; 2] = [0.60, 0.75];

/// Contents of `theta_opt.json`. `spec` and `theta` rebuild the trained
/// circuit exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaFile {
    pub mode: RunMode,
    pub workload: Workload,
    pub spec: AnsatzSpec,
    pub theta: Vec<f64>,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Evaluations of the kept run.
    pub evaluations: usize,
    /// Evaluations summed over all restarts.
    pub total_evaluations: usize,
    pub termination: Termination,
    pub seed: u64,
    pub restarts: usize,
    /// Index of the kept restart; its seed is `seed + best_restart`.
    pub best_restart: usize,
    pub optimizer: OptimizerConfig,
    pub dataset: DatasetConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub tag: String,
    pub set: String,
    pub feature: String,
    pub fidelity: f64,
}

/// Everything a run wrote, kept in memory for callers.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub theta: ThetaFile,
    pub trace: CostTrace,
    pub fidelities: Vec<FidelityRow>,
    pub trash_densities: Vec<(String, DensityMatrix)>,
    pub cost_report: CostReport,
}

impl RunSummary {
    pub fn mean_fidelity(&self, set: &str) -> f64 {
        let rows: Vec<f64> = self
            .fidelities
            .iter()
            .filter(|r| r.set == set)
            .map(|r| r.fidelity)
            .collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    }

    pub fn trash_density(&self, probe: &str) -> Option<&DensityMatrix> {
        self.trash_densities.iter().find(|(p, _)| p == probe).map(|(_, m)| m)
    }
}

/// Training and test data of a workload, plus the raw images for digits.
pub struct Datasets {
    pub train: TrainingSet,
    pub test: TrainingSet,
    pub train_images: Vec<DigitImage>,
    pub test_images: Vec<DigitImage>,
}

pub fn build_datasets(n_qubits: usize, dataset: &DatasetConfig) -> Result<Datasets> {
    match dataset {
        DatasetConfig::Ising {
            lambda_min,
            lambda_max,
            n_train,
            n_test,
            boundary,
        } => {
            let template = IsingSpec {
                n_sites: n_qubits,
                lambda: *lambda_min,
                boundary: *boundary,
            };
            Ok(Datasets {
                train: build_ising_training_set(*n_train, *lambda_min, *lambda_max, &template)?,
                test: build_ising_test_set(*n_test, *lambda_min, *lambda_max, &template)?,
                train_images: Vec::new(),
                test_images: Vec::new(),
            })
        }
        DatasetConfig::Digits { train, test } => {
            let train_images = match train {
                Some(p) => load_digits(p)?,
                None => bundled_train(),
            };
            let test_images = match test {
                Some(p) => load_digits(p)?,
                None => bundled_test(),
            };
            Ok(Datasets {
                train: build_digits_training_set(&train_images)?,
                test: build_digits_training_set(&test_images)?,
                train_images,
                test_images,
            })
        }
    }
}

/// `theta_opt.json` inside `path` when it is a directory, else `path`.
pub fn theta_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(THETA_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn load_theta_file(path: &Path) -> Result<ThetaFile> {
    let path = theta_path(path);
    let text = fs::read_to_string(&path).map_err(|e| QaeError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| QaeError::Report(format!("{}: {e}", path.display())))
}

/// Reduced density matrix of the trash register after encoding `state`.
pub fn trash_density(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    feature: &FeatureVector,
    state: &StateVector,
) -> Result<DensityMatrix> {
    let encoded = apply_encoder(&bind(spec, theta, feature)?, state)?;
    encoded.partial_trace(spec.trash_qubits())
}

/// Long-format matrix CSV: `probe,row,col,re,im`, basis states labeled by
/// their integer value with the lowest trash qubit as the high bit.
pub fn write_density_csv<W: Write>(rows: &[(String, DensityMatrix)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "probe,row,col,re,im")?;
    for (probe, rho) in rows {
        for r in 0..rho.dim() {
            for c in 0..rho.dim() {
                let z = rho.get(r, c);
                writeln!(out, "{probe},{r},{c},{},{}", z.re, z.im)?;
            }
        }
    }
    out.flush()
}

pub fn ising_probe_tag(lambda: f64) -> String {
    format!("lambda={lambda:.2}")
}

fn spec_for(config: &ExperimentConfig) -> Result<AnsatzSpec> {
    match config.mode {
        RunMode::Qae => AnsatzSpec::qae(config.n_qubits, config.n_trash, config.n_layers),
        RunMode::EfQae | RunMode::EfQaeStar => AnsatzSpec::ef_qae(config.n_qubits, config.n_trash, config.n_layers, 1),
    }
}

fn load_warm_start(config: &ExperimentConfig, spec: &AnsatzSpec) -> Result<InitStrategy> {
    let path = config
        .warm_start
        .as_deref()
        .ok_or_else(|| QaeError::Config("mode ef_qae_star needs warm_start".into()))?;
    let file = theta_path(path);
    if !file.is_file() {
        return Err(QaeError::Config(format!(
            "warm-start file {} does not exist",
            file.display()
        )));
    }
    let source = load_theta_file(&file).map_err(|e| QaeError::Config(format!("warm start: {e}")))?;
    if source.mode != RunMode::Qae {
        return Err(QaeError::Config(format!(
            "warm start must come from a qae run, {} holds {}",
            file.display(),
            source.mode
        )));
    }
    if source.workload != config.workload {
        return Err(QaeError::Config(format!(
            "warm start was trained on {}, this run is {}",
            source.workload, config.workload
        )));
    }
    let strategy = InitStrategy::WarmStart {
        source: source.spec,
        theta: ParameterVector(source.theta),
    };
    init_parameters(spec, config.seed, &strategy).map_err(|e| QaeError::Config(format!("warm start: {e}")))?;
    Ok(strategy)
}

/// Runs every start and keeps the lowest final cost, the earliest start
/// winning ties.
fn train_restarts(
    spec: &AnsatzSpec,
    set: &TrainingSet,
    starts: &[ParameterVector],
    optimizer: &OptimizerConfig,
) -> Result<(OptimizationResult, usize, usize)> {
    let runs = starts
        .par_iter()
        .map(|theta0| train(spec, set, theta0, optimizer))
        .collect::<Result<Vec<_>>>()?;
    let total = runs.iter().map(|r| r.evaluations).sum();
    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.final_cost < runs[best].final_cost {
            best = k;
        }
    }
    let kept = runs.into_iter().nth(best).expect("at least one start");
    Ok((kept, best, total))
}

/// Trains the configured autoencoder and writes its bundle into
/// `config.output_dir`. Either every file is written or the directory is
/// left as it was.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let spec = spec_for(config)?;
    let mut optimizer = config.optimizer.clone();
    optimizer.seed = config.seed;

    let starts = match config.mode {
        RunMode::EfQaeStar => vec![init_parameters(&spec, config.seed, &load_warm_start(config, &spec)?)?],
        RunMode::Qae | RunMode::EfQae => (0..config.restarts as u64)
            .map(|k| init_parameters(&spec, config.seed + k, &InitStrategy::RandomUniform))
            .collect::<Result<Vec<_>>>()?,
    };

    let data = build_datasets(config.n_qubits, &config.dataset)?;
    let (result, best_restart, total_evaluations) = train_restarts(&spec, &data.train, &starts, &optimizer)?;
    let theta = ParameterVector(result.theta_opt.clone());

    let mut fidelities = fidelity_rows(&spec, &theta, &data.train, "train")?;
    fidelities.extend(fidelity_rows(&spec, &theta, &data.test, "test")?);

    let trash_densities = match &config.dataset {
        DatasetConfig::Ising {
            lambda_min,
            lambda_max,
            boundary,
            ..
        } => ISING_PROBES
            .iter()
            .filter(|&&l| (*lambda_min..=*lambda_max).contains(&l))
            .map(|&l| {
                let gs = ground_state(&IsingSpec {
                    n_sites: config.n_qubits,
                    lambda: l,
                    boundary: *boundary,
                })?;
                Ok((
                    ising_probe_tag(l),
                    trash_density(&spec, &theta, &FeatureVector::scalar(l), &gs.state)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        DatasetConfig::Digits { .. } => {
            let mut rows = Vec::new();
            for label in [crate::digits::DigitLabel::Zero, crate::digits::DigitLabel::One] {
                if let Some(i) = data.test_images.iter().position(|img| img.label() == label) {
                    let entry = &data.test.entries()[i];
                    rows.push((
                        entry.tag.clone(),
                        trash_density(&spec, &theta, &entry.feature, &entry.state)?,
                    ));
                }
            }
            rows
        }
    };

    let cost_report = averaged_cost(&spec, &theta, &data.train)?;

    let theta_file = ThetaFile {
        mode: config.mode,
        workload: config.workload,
        spec: spec.clone(),
        theta: result.theta_opt.clone(),
        initial_cost: result.trace.first_cost().unwrap_or(result.final_cost),
        final_cost: result.final_cost,
        evaluations: result.evaluations,
        total_evaluations,
        termination: result.termination,
        seed: config.seed,
        restarts: starts.len(),
        best_restart,
        optimizer,
        dataset: config.dataset.clone(),
    };

    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    let mut buf = Vec::new();
    result
        .trace
        .write_csv(&mut buf)
        .map_err(|e| QaeError::io(TRACE_FILE, e))?;
    files.push((TRACE_FILE, buf));
    let mut json = serde_json::to_vec_pretty(&theta_file).map_err(|e| QaeError::Report(e.to_string()))?;
    json.push(b'\n');
    files.push((THETA_FILE, json));
    files.push((FIDELITIES_FILE, fidelities_csv(&fidelities)?));
    let mut buf = Vec::new();
    write_density_csv(&trash_densities, &mut buf).map_err(|e| QaeError::io(TRASH_DENSITY_FILE, e))?;
    files.push((TRASH_DENSITY_FILE, buf));
    let mut buf = Vec::new();
    cost_report.write_csv(spec.trash_qubits(), &mut buf)?;
    files.push((COST_REPORT_FILE, buf));
    if config.workload == Workload::Digits {
        files.push((RECONSTRUCTED_FILE, reconstructed_csv(&spec, &theta, &data)?));
    }
    write_bundle(&config.output_dir, &files)?;

    Ok(RunSummary {
        output_dir: config.output_dir.clone(),
        theta: theta_file,
        trace: result.trace,
        fidelities,
        trash_densities,
        cost_report,
    })
}

fn fidelity_rows(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    set: &TrainingSet,
    name: &str,
) -> Result<Vec<FidelityRow>> {
    set.entries()
        .par_iter()
        .map(|e| {
            Ok(FidelityRow {
                tag: e.tag.clone(),
                set: name.to_string(),
                feature: e.feature.to_string(),
                fidelity: reconstruct(spec, theta, &e.feature, &e.state)?.fidelity,
            })
        })
        .collect()
}

fn fidelities_csv(rows: &[FidelityRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| QaeError::Report(e.to_string()))?;
    }
    w.into_inner().map_err(|e| QaeError::Report(e.to_string()))
}

/// Input and output 8×8 grids of every digit, one CSV row per image row.
/// Output amplitudes are rescaled by the input norm back to gray levels.
fn reconstructed_csv(spec: &AnsatzSpec, theta: &ParameterVector, data: &Datasets) -> Result<Vec<u8>> {
    let mut out = String::from("tag,set,grid,row");
    for c in 0..SIDE {
        out.push_str(&format!(",c{c}"));
    }
    out.push('\n');
    let sets = [
        ("train", &data.train, &data.train_images),
        ("test", &data.test, &data.test_images),
    ];
    for (name, set, images) in sets {
        for (entry, img) in set.iter().zip(images.iter()) {
            let rec = reconstruct(spec, theta, &entry.feature, &entry.state)?;
            let norm = img.norm();
            for r in 0..SIDE {
                out.push_str(&format!("{},{name},input,{r}", entry.tag));
                for c in 0..SIDE {
                    out.push_str(&format!(",{}", img.pixel(r, c)));
                }
                out.push('\n');
            }
            for r in 0..SIDE {
                out.push_str(&format!("{},{name},output,{r}", entry.tag));
                for c in 0..SIDE {
                    out.push_str(&format!(",{}", rec.output.amplitudes()[r * SIDE + c].re * norm));
                }
                out.push('\n');
            }
        }
    }
    Ok(out.into_bytes())
}

/// Writes `files` into a fresh sibling directory and renames it onto `out`.
/// An existing `out` is replaced only if it is empty or a previous bundle.
pub(crate) fn write_bundle(out: &Path, files: &[(&str, Vec<u8>)]) -> Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| QaeError::io(&parent, e))?;
    if out.exists() {
        let reusable = out.is_dir()
            && (out.join(THETA_FILE).is_file()
                || fs::read_dir(out).map_err(|e| QaeError::io(out, e))?.next().is_none());
        if !reusable {
            return Err(QaeError::Config(format!(
                "{} exists and is not a run bundle",
                out.display()
            )));
        }
    }
    let staging = tempfile::Builder::new()
        .prefix(".qae-bundle-")
        .tempdir_in(&parent)
        .map_err(|e| QaeError::io(&parent, e))?;
    for (name, bytes) in files {
        let path = staging.path().join(name);
        fs::write(&path, bytes).map_err(|e| QaeError::io(&path, e))?;
    }
    if out.exists() {
        fs::remove_dir_all(out).map_err(|e| QaeError::io(out, e))?;
    }
    let staged = staging.keep();
    fs::rename(&staged, out).map_err(|e| {
        let _ = fs::remove_dir_all(&staged);
        QaeError::io(out, e)
    })
}
