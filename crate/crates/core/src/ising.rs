//! Transverse-field Ising chain `H = Σ_j Z_j Z_{j+1} + λ Σ_j X_j` and its
//! exact ground states.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::FeatureVector;
use crate::dataset::{TrainingEntry, TrainingSet};
use crate::error::{QaeError, Result};
use crate::linalg::SymmetricMatrix;
use crate::statevector::StateVector;

/// Largest chain assembled as a dense matrix.
pub const MAX_DENSE_SITES: usize = 14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Bonds `(j, j+1)` for `j < n-1`.
    #[default]
    Open,
    /// Open bonds plus `(n-1, 0)`.
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = QaeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Boundary::Open),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(QaeError::invalid(format!("unknown boundary `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingSpec {
    pub n_sites: usize,
    pub lambda: f64,
    pub boundary: Boundary,
}

impl IsingSpec {
    pub fn open(n_sites: usize, lambda: f64) -> Self {
        Self {
            n_sites,
            lambda,
            boundary: Boundary::Open,
        }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(QaeError::invalid("an Ising chain needs at least two sites"));
        }
        if self.n_sites > MAX_DENSE_SITES {
            return Err(QaeError::Capacity {
                what: "dense Ising chain",
                size: self.n_sites,
                max: MAX_DENSE_SITES,
            });
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(QaeError::invalid(format!(
                "transverse field must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        let mut bonds: Vec<(usize, usize)> = (0..n - 1).map(|j| (j, j + 1)).collect();
        if self.boundary == Boundary::Periodic {
            bonds.push((n - 1, 0));
        }
        bonds
    }
}

/// Dense Hamiltonian in the computational basis, site 0 on the most
/// significant bit.
pub fn build_ising_hamiltonian(spec: &IsingSpec) -> Result<SymmetricMatrix> {
    spec.validate()?;
    let n = spec.n_sites;
    let dim = 1usize << n;
    let bit = |state: usize, site: usize| (state >> (n - 1 - site)) & 1;
    let bonds = spec.bonds();
    let mut h = SymmetricMatrix::zeros(dim);
    for s in 0..dim {
        let diag: f64 = bonds
            .iter()
            .map(|&(a, b)| if bit(s, a) == bit(s, b) { 1.0 } else { -1.0 })
            .sum();
        h.set(s, s, diag);
        if spec.lambda != 0.0 {
            for site in 0..n {
                h.add(s ^ (1 << (n - 1 - site)), s, spec.lambda);
            }
        }
    }
    Ok(h)
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    /// `‖H v − E v‖₂`.
    pub residual: f64,
}

/// Lowest eigenpair of the chain. The eigenvector's global sign is fixed so
/// that its first non-negligible amplitude is positive.
pub fn ground_state(spec: &IsingSpec) -> Result<GroundState> {
    let h = build_ising_hamiltonian(spec)?;
    let eig = h.eigen()?;
    let energy = eig.values[0];
    let mut v = eig.vectors.into_iter().next().expect("non-empty spectrum");

    let largest = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let pivot = v.iter().find(|x| x.abs() > 1e-10 * largest).copied().unwrap_or(1.0);
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }

    let hv = h.matvec(&v);
    let residual = hv
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - energy * b).powi(2))
        .sum::<f64>()
        .sqrt();
    if !residual.is_finite() {
        return Err(QaeError::Numeric("ground-state residual is not finite".into()));
    }
    let state = StateVector::from_real_unnormalized(&v)?;
    Ok(GroundState {
        energy,
        state,
        residual,
    })
}

fn ising_set(template: &IsingSpec, lambdas: Vec<f64>) -> Result<TrainingSet> {
    let entries = lambdas
        .into_par_iter()
        .map(|lambda| {
            let gs = ground_state(&template.with_lambda(lambda))?;
            Ok(TrainingEntry {
                state: gs.state,
                feature: FeatureVector::scalar(lambda),
                tag: format!("lambda={lambda:.6}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TrainingSet::new(entries)
}

fn check_range(n_states: usize, lambda_min: f64, lambda_max: f64, min_states: usize) -> Result<()> {
    if n_states < min_states {
        return Err(QaeError::invalid(format!(
            "need at least {min_states} states, got {n_states}"
        )));
    }
    if !(lambda_min.is_finite() && lambda_max.is_finite() && 0.0 <= lambda_min && lambda_min < lambda_max) {
        return Err(QaeError::invalid(format!(
            "invalid field range [{lambda_min}, {lambda_max}]"
        )));
    }
    Ok(())
}

/// `n_states` ground states with λ equispaced over `[lambda_min,
/// lambda_max]`, endpoints included. The feature of each entry is `(λ)`.
pub fn build_ising_training_set(
    n_states: usize,
    lambda_min: f64,
    lambda_max: f64,
    template: &IsingSpec,
) -> Result<TrainingSet> {
    check_range(n_states, lambda_min, lambda_max, 2)?;
    let step = (lambda_max - lambda_min) / (n_states - 1) as f64;
    let lambdas = (0..n_states)
        .map(|k| {
            if k == n_states - 1 {
                lambda_max
            } else {
                lambda_min + k as f64 * step
            }
        })
        .collect();
    ising_set(template, lambdas)
}

/// `n_states` ground states at the midpoints of `n_states` equal cells of
/// `[lambda_min, lambda_max]`, offset from the training grid.
pub fn build_ising_test_set(
    n_states: usize,
    lambda_min: f64,
    lambda_max: f64,
    template: &IsingSpec,
) -> Result<TrainingSet> {
    check_range(n_states, lambda_min, lambda_max, 1)?;
    let width = (lambda_max - lambda_min) / n_states as f64;
    let lambdas = (0..n_states).map(|k| lambda_min + (k as f64 + 0.5) * width).collect();
    ising_set(template, lambdas)
}
