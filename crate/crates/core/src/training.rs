//! Glue between the autoencoder cost and the optimizer.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::{AnsatzSpec, Mode, ParameterVector};
use crate::cost::averaged_cost;
use crate::dataset::TrainingSet;
use crate::error::{QaeError, Result};
use crate::gradient::{gradient_parameter_shift, shift_evaluations};
use crate::optimize::{bfgs_minimize_with_sink, Objective, OptimizationResult, OptimizerConfig, TraceRecord};

/// Averaged trash cost over a training set as a function of θ.
pub struct AutoencoderObjective<'a> {
    spec: &'a AnsatzSpec,
    set: &'a TrainingSet,
}

impl<'a> AutoencoderObjective<'a> {
    pub fn new(spec: &'a AnsatzSpec, set: &'a TrainingSet) -> Result<Self> {
        if set.is_empty() {
            return Err(QaeError::invalid("training set is empty"));
        }
        if set.n_qubits() != Some(spec.n_qubits()) {
            return Err(QaeError::invalid(format!(
                "training states have {:?} qubits, ansatz expects {}",
                set.n_qubits(),
                spec.n_qubits()
            )));
        }
        if spec.mode() == Mode::EfQae && set.feature_dim() != Some(spec.feature_dim()) {
            return Err(QaeError::invalid(format!(
                "training features have length {:?}, ansatz expects {}",
                set.feature_dim(),
                spec.feature_dim()
            )));
        }
        Ok(Self { spec, set })
    }
}

impl Objective for AutoencoderObjective<'_> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        Ok(averaged_cost(self.spec, &ParameterVector(x.to_vec()), self.set)?.averaged_cost)
    }

    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        gradient_parameter_shift(self.spec, &ParameterVector(x.to_vec()), self.set)
    }

    fn gradient_evaluations(&self) -> usize {
        shift_evaluations(self.spec)
    }
}

#[derive(Clone, Debug)]
pub enum InitStrategy {
    /// Each parameter drawn from `U(0, 2π)`.
    RandomUniform,
    /// Embed trained QAE parameters as the biases of an EF-QAE with zero
    /// feature weights, so both compute the same circuit.
    WarmStart { source: AnsatzSpec, theta: ParameterVector },
}

pub fn init_parameters(spec: &AnsatzSpec, seed: u64, strategy: &InitStrategy) -> Result<ParameterVector> {
    match strategy {
        InitStrategy::RandomUniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(ParameterVector(
                (0..spec.total_parameter_count())
                    .map(|_| rng.gen_range(0.0..TAU))
                    .collect(),
            ))
        }
        InitStrategy::WarmStart { source, theta } => {
            if source.mode() != Mode::Qae || spec.mode() != Mode::EfQae {
                return Err(QaeError::invalid(format!(
                    "warm start maps a QAE into an EF-QAE, got {} -> {}",
                    source.mode(),
                    spec.mode()
                )));
            }
            if source.n_qubits() != spec.n_qubits()
                || source.trash_qubits() != spec.trash_qubits()
                || source.n_layers() != spec.n_layers()
            {
                return Err(QaeError::invalid("warm-start source has a different circuit shape"));
            }
            if theta.len() != source.total_parameter_count() {
                return Err(QaeError::invalid(format!(
                    "warm-start source has {} parameters, expected {}",
                    theta.len(),
                    source.total_parameter_count()
                )));
            }
            let d = spec.feature_dim();
            let mut out = Vec::with_capacity(spec.total_parameter_count());
            for &bias in theta.as_slice() {
                out.extend(std::iter::repeat_n(0.0, d));
                out.push(bias);
            }
            Ok(ParameterVector(out))
        }
    }
}

/// Runs BFGS on the averaged cost, streaming trace records to `sink`.
pub fn train_with_sink(
    spec: &AnsatzSpec,
    set: &TrainingSet,
    theta0: &ParameterVector,
    config: &OptimizerConfig,
    sink: impl FnMut(&TraceRecord),
) -> Result<OptimizationResult> {
    if theta0.len() != spec.total_parameter_count() {
        return Err(QaeError::invalid(format!(
            "expected {} initial parameters, got {}",
            spec.total_parameter_count(),
            theta0.len()
        )));
    }
    let mut objective = AutoencoderObjective::new(spec, set)?;
    bfgs_minimize_with_sink(&mut objective, theta0.as_slice(), config, sink)
}

pub fn train(
    spec: &AnsatzSpec,
    set: &TrainingSet,
    theta0: &ParameterVector,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    train_with_sink(spec, set, theta0, config, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_init_is_seeded_and_in_range() {
        let spec = AnsatzSpec::ef_qae(6, 2, 3, 1).unwrap();
        let a = init_parameters(&spec, 7, &InitStrategy::RandomUniform).unwrap();
        let b = init_parameters(&spec, 7, &InitStrategy::RandomUniform).unwrap();
        let c = init_parameters(&spec, 8, &InitStrategy::RandomUniform).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 40);
        assert!(a.as_slice().iter().all(|v| (0.0..TAU).contains(v)));
    }

    #[test]
    fn warm_start_layout() {
        let qae = AnsatzSpec::qae(4, 1, 1).unwrap();
        let ef = qae.with_mode(Mode::EfQae, 2).unwrap();
        let theta = ParameterVector(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let warm = init_parameters(
            &ef,
            0,
            &InitStrategy::WarmStart {
                source: qae.clone(),
                theta,
            },
        )
        .unwrap();
        assert_eq!(
            warm.as_slice(),
            &[0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 4.0, 0.0, 0.0, 5.0]
        );
    }

    #[test]
    fn warm_start_shape_errors() {
        let qae = AnsatzSpec::qae(4, 1, 1).unwrap();
        let ef_other = AnsatzSpec::ef_qae(4, 1, 2, 1).unwrap();
        let strategy = InitStrategy::WarmStart {
            source: qae.clone(),
            theta: ParameterVector::zeros(5),
        };
        assert!(init_parameters(&ef_other, 0, &strategy).is_err());
        assert!(init_parameters(&qae, 0, &strategy).is_err());
        let short = InitStrategy::WarmStart {
            source: qae.clone(),
            theta: ParameterVector::zeros(4),
        };
        assert!(init_parameters(&qae.with_mode(Mode::EfQae, 1).unwrap(), 0, &short).is_err());
    }
}
