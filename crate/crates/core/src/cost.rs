//! Local trash-qubit cost, its training-set average, and the analytic effect
//! of global depolarizing noise on it.
//!
//! For trash qubits `T` the cost of one encoded state is
//! `C = ½ Σ_{k∈T} (1 − ⟨Z_k⟩)`, which equals the expected Hamming distance of
//! a trash measurement outcome from `0…0`. It vanishes exactly when the trash
//! register is in `|0…0⟩`.

use std::io::Write;

use rayon::prelude::*;

use crate::ansatz::{apply_encoder, bind, AnsatzSpec, FeatureVector, ParameterVector};
use crate::dataset::TrainingSet;
use crate::error::{QaeError, Result};
use crate::statevector::StateVector;

/// `½ Σ_k (1 − ⟨Z_k⟩)` over the trash qubits.
pub fn local_cost(encoded: &StateVector, trash_qubits: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    for &k in trash_qubits {
        sum += 1.0 - encoded.expectation_z(k)?;
    }
    Ok(0.5 * sum)
}

/// `Σ_outcomes P(outcome) · hamming(outcome, 0…0)` over the trash register.
pub fn hamming_weighted_cost(encoded: &StateVector, trash_qubits: &[usize]) -> Result<f64> {
    let n_t = trash_qubits.len();
    let mut total = 0.0;
    for outcome in 0..1usize << n_t {
        let distance = outcome.count_ones();
        if distance == 0 {
            continue;
        }
        let bits: Vec<u8> = (0..n_t).map(|k| ((outcome >> (n_t - 1 - k)) & 1) as u8).collect();
        total += f64::from(distance) * encoded.bitstring_probability(trash_qubits, &bits)?;
    }
    Ok(total)
}

/// Per-state costs over a training set and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub tags: Vec<String>,
    pub features: Vec<FeatureVector>,
    pub per_state_costs: Vec<f64>,
    pub averaged_cost: f64,
    /// `⟨Z_k⟩` for every state (rows) and trash qubit (columns).
    pub per_trash_qubit_z: Vec<Vec<f64>>,
    /// Depth of the bound circuit, used by the noise model.
    pub circuit_depth: usize,
}

impl CostReport {
    /// One row per state (`index,tag,feature,cost,z_<q>…`) followed by a
    /// `mean` summary row.
    pub fn write_csv<W: Write>(&self, trash_qubits: &[usize], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string(), "tag".into(), "feature".into(), "cost".into()];
        header.extend(trash_qubits.iter().map(|q| format!("z_q{q}")));
        w.write_record(&header).map_err(csv_err)?;
        for (i, ((tag, feature), (cost, zs))) in self
            .tags
            .iter()
            .zip(&self.features)
            .zip(self.per_state_costs.iter().zip(&self.per_trash_qubit_z))
            .enumerate()
        {
            let mut row = vec![i.to_string(), tag.clone(), feature.to_string(), cost.to_string()];
            row.extend(zs.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        let mut summary = vec![
            "mean".to_string(),
            String::new(),
            String::new(),
            self.averaged_cost.to_string(),
        ];
        for k in 0..trash_qubits.len() {
            let mean = self.per_trash_qubit_z.iter().map(|z| z[k]).sum::<f64>() / self.per_state_costs.len() as f64;
            summary.push(mean.to_string());
        }
        w.write_record(&summary).map_err(csv_err)?;
        w.flush().map_err(|e| QaeError::io("<cost report>", e))
    }
}

fn csv_err(e: csv::Error) -> QaeError {
    QaeError::io("<csv>", std::io::Error::other(e))
}

/// Cost of each entry under `U(θ, x_i)` and their mean. Entries are
/// evaluated in parallel and reduced in index order.
pub fn averaged_cost(spec: &AnsatzSpec, theta: &ParameterVector, set: &TrainingSet) -> Result<CostReport> {
    if set.is_empty() {
        return Err(QaeError::invalid("training set is empty"));
    }
    let rows = set
        .entries()
        .par_iter()
        .map(|entry| {
            let circuit = bind(spec, theta, &entry.feature)?;
            let encoded = apply_encoder(&circuit, &entry.state)?;
            let zs = spec
                .trash_qubits()
                .iter()
                .map(|&k| encoded.expectation_z(k))
                .collect::<Result<Vec<f64>>>()?;
            let cost = 0.5 * zs.iter().map(|z| 1.0 - z).sum::<f64>();
            Ok((cost, zs, circuit.depth()))
        })
        .collect::<Result<Vec<_>>>()?;

    let circuit_depth = rows.first().map(|r| r.2).unwrap_or(0);
    let per_state_costs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let averaged_cost = per_state_costs.iter().sum::<f64>() / per_state_costs.len() as f64;
    if !averaged_cost.is_finite() {
        return Err(QaeError::Numeric("averaged cost is not finite".into()));
    }
    Ok(CostReport {
        tags: set.iter().map(|e| e.tag.clone()).collect(),
        features: set.iter().map(|e| e.feature.clone()).collect(),
        per_state_costs,
        averaged_cost,
        per_trash_qubit_z: rows.into_iter().map(|r| r.1).collect(),
        circuit_depth,
    })
}

/// Global depolarizing channel `ρ → qρ + (1 − q)𝟙/d` applied after each of
/// `depth` circuit steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    q: f64,
    depth: usize,
}

impl NoiseModel {
    pub fn new(q: f64, depth: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(QaeError::invalid(format!("survival probability {q} outside [0, 1]")));
        }
        if depth == 0 {
            return Err(QaeError::invalid("circuit depth must be positive"));
        }
        Ok(Self { q, depth })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Factor `q^D` by which every Pauli expectation shrinks.
    pub fn damping(&self) -> f64 {
        self.q.powi(self.depth as i32)
    }
}

/// `½ Σ_k (1 − q^D ζ_k)`: the maximally mixed component contributes zero to
/// every `⟨Z_k⟩`, so noisy expectations are the clean ones scaled by `q^D`.
pub fn noisy_cost(clean_z_expectations: &[f64], noise: &NoiseModel) -> Result<f64> {
    if let Some(z) = clean_z_expectations
        .iter()
        .find(|z| !(-1.0 - 1e-12..=1.0 + 1e-12).contains(*z))
    {
        return Err(QaeError::invalid(format!("expectation {z} outside [-1, 1]")));
    }
    let damping = noise.damping();
    Ok(0.5 * clean_z_expectations.iter().map(|z| 1.0 - damping * z).sum::<f64>())
}

/// Training-set mean of [`noisy_cost`].
pub fn averaged_noisy_cost(report: &CostReport, noise: &NoiseModel) -> Result<f64> {
    let mut total = 0.0;
    for zs in &report.per_trash_qubit_z {
        total += noisy_cost(zs, noise)?;
    }
    Ok(total / report.per_trash_qubit_z.len() as f64)
}
