//! Side-by-side comparison of two finished runs, and trash-state export
//! from a bundle.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{DatasetConfig, Workload};
use super::run::{
    build_datasets, ising_probe_tag, load_theta_file, trash_density, FidelityRow, ThetaFile, FIDELITIES_FILE,
};
use crate::ansatz::{FeatureVector, ParameterVector};
use crate::error::{QaeError, Result};
use crate::ising::{ground_state, IsingSpec};
use crate::statevector::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Pass when `final_cost_a / final_cost_b` is strictly below this.
    pub max_cost_ratio: f64,
    /// Pass when mean test fidelity of A minus that of B is at least this.
    pub min_mean_test_fidelity_delta: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            max_cost_ratio: 1.0,
            min_mean_test_fidelity_delta: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDigest {
    pub path: String,
    pub mode: String,
    pub final_cost: f64,
    pub mean_train_fidelity: f64,
    pub mean_test_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityDelta {
    pub tag: String,
    pub set: String,
    pub a: f64,
    pub b: f64,
    /// `a − b`.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub workload: Workload,
    pub run_a: RunDigest,
    pub run_b: RunDigest,
    /// `final_cost_a / final_cost_b`; 1 when both are zero.
    pub cost_ratio: f64,
    pub fidelity_deltas: Vec<FidelityDelta>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn read_fidelities(run: &Path) -> Result<Vec<FidelityRow>> {
    let path = run.join(FIDELITIES_FILE);
    let text = fs::read_to_string(&path).map_err(|e| QaeError::Report(format!("{}: {e}", path.display())))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| QaeError::Report(format!("{}: {e}", path.display())))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["tag", "set", "feature", "fidelity"] {
        return Err(QaeError::Report(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<FidelityRow>, _>>()
        .map_err(|e| QaeError::Report(format!("{}: {e}", path.display())))
}

fn mean(rows: &[FidelityRow], set: &str) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.set == set).map(|r| r.fidelity).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Compares run A against run B. Both must cover the same workload and
/// the same train/test states.
pub fn compare_runs(run_a: &Path, run_b: &Path, thresholds: &Thresholds) -> Result<ComparisonReport> {
    let load = |p: &Path| {
        load_theta_file(p).map_err(|e| match e {
            QaeError::Io { path, source } => QaeError::Report(format!("{}: {source}", path.display())),
            other => other,
        })
    };
    let (ta, tb) = (load(run_a)?, load(run_b)?);
    if ta.workload != tb.workload {
        return Err(QaeError::Report(format!(
            "runs cover different workloads ({} vs {})",
            ta.workload, tb.workload
        )));
    }
    let (fa, fb) = (read_fidelities(run_a)?, read_fidelities(run_b)?);
    let keys = |rows: &[FidelityRow]| rows.iter().map(|r| (r.tag.clone(), r.set.clone())).collect::<Vec<_>>();
    if keys(&fa) != keys(&fb) {
        return Err(QaeError::Report("runs were evaluated on different states".into()));
    }

    let cost_ratio = if ta.final_cost == 0.0 && tb.final_cost == 0.0 {
        1.0
    } else {
        ta.final_cost / tb.final_cost
    };
    let fidelity_deltas: Vec<FidelityDelta> = fa
        .iter()
        .zip(&fb)
        .map(|(a, b)| FidelityDelta {
            tag: a.tag.clone(),
            set: a.set.clone(),
            a: a.fidelity,
            b: b.fidelity,
            delta: a.fidelity - b.fidelity,
        })
        .collect();
    let digest = |p: &Path, t: &ThetaFile, rows: &[FidelityRow]| RunDigest {
        path: p.display().to_string(),
        mode: t.mode.to_string(),
        final_cost: t.final_cost,
        mean_train_fidelity: mean(rows, "train"),
        mean_test_fidelity: mean(rows, "test"),
    };
    let run_a_digest = digest(run_a, &ta, &fa);
    let run_b_digest = digest(run_b, &tb, &fb);
    let fidelity_gap = run_a_digest.mean_test_fidelity - run_b_digest.mean_test_fidelity;
    let checks = vec![
        Check {
            name: "cost_ratio".into(),
            value: cost_ratio,
            threshold: thresholds.max_cost_ratio,
            passed: cost_ratio < thresholds.max_cost_ratio,
        },
        Check {
            name: "mean_test_fidelity_delta".into(),
            value: fidelity_gap,
            threshold: thresholds.min_mean_test_fidelity_delta,
            passed: fidelity_gap >= thresholds.min_mean_test_fidelity_delta,
        },
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(ComparisonReport {
        workload: ta.workload,
        run_a: run_a_digest,
        run_b: run_b_digest,
        cost_ratio,
        fidelity_deltas,
        checks,
        passed,
    })
}

/// Input whose trash state is exported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Probe {
    /// Ising ground state at this transverse field, inside the trained range.
    Lambda(f64),
    /// Position in the run's digit test set.
    TestDigit(usize),
}

/// Trash density matrix of `probe` under the trained parameters of `run`.
pub fn export_trash_density(run: &Path, probe: Probe) -> Result<(String, DensityMatrix)> {
    let t = load_theta_file(run)?;
    let theta = ParameterVector(t.theta.clone());
    match (probe, &t.dataset) {
        (
            Probe::Lambda(l),
            DatasetConfig::Ising {
                lambda_min,
                lambda_max,
                boundary,
                ..
            },
        ) => {
            if !(*lambda_min..=*lambda_max).contains(&l) {
                return Err(QaeError::invalid(format!(
                    "probe λ={l} lies outside the trained range [{lambda_min}, {lambda_max}]"
                )));
            }
            let gs = ground_state(&IsingSpec {
                n_sites: t.spec.n_qubits(),
                lambda: l,
                boundary: *boundary,
            })?;
            let rho = trash_density(&t.spec, &theta, &FeatureVector::scalar(l), &gs.state)?;
            Ok((ising_probe_tag(l), rho))
        }
        (Probe::TestDigit(i), DatasetConfig::Digits { .. }) => {
            let data = build_datasets(t.spec.n_qubits(), &t.dataset)?;
            let entry = data.test.entries().get(i).ok_or_else(|| {
                QaeError::invalid(format!("test digit {i} out of range ({} images)", data.test.len()))
            })?;
            let rho = trash_density(&t.spec, &theta, &entry.feature, &entry.state)?;
            Ok((entry.tag.clone(), rho))
        }
        (Probe::Lambda(_), _) => Err(QaeError::invalid("λ probes need an ising run")),
        (Probe::TestDigit(_), _) => Err(QaeError::invalid("digit probes need a digits run")),
    }
}
