//! Parameter-shift gradient of the averaged cost.
//!
//! Every rotation is `exp(-iφY/2)`, so for the angle `φ` of a single gate
//! `dC/dφ = [C(φ + π/2) − C(φ − π/2)] / 2` exactly. The affine angle map then
//! gives `dC/dw_j = x_j dC/dφ` and `dC/db = dC/dφ`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::ansatz::{bind_angles, resolve_angles, AnsatzSpec, Gate, Mode, ParameterVector};
use crate::cost::local_cost;
use crate::dataset::TrainingSet;
use crate::error::{QaeError, Result};
use crate::statevector::StateVector;

/// Shifted cost evaluations spent by one gradient call (two per rotation).
pub fn shift_evaluations(spec: &AnsatzSpec) -> usize {
    2 * spec.rotation_gate_count()
}

/// `dC_N/dθ` for the training-set mean cost.
pub fn gradient_parameter_shift(spec: &AnsatzSpec, theta: &ParameterVector, set: &TrainingSet) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(QaeError::invalid("training set is empty"));
    }
    let per_entry = set
        .entries()
        .par_iter()
        .map(|entry| {
            let angles = resolve_angles(spec, theta, &entry.feature)?;
            angle_derivatives(spec, &angles, &entry.state)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let per_gate = spec.parameters_per_gate();
    let n = set.len() as f64;
    let mut grad = vec![0.0; spec.total_parameter_count()];
    for (entry, dphi) in set.iter().zip(&per_entry) {
        for (slot, &d) in dphi.iter().enumerate() {
            let block = &mut grad[slot * per_gate..(slot + 1) * per_gate];
            match spec.mode() {
                Mode::Qae => block[0] += d / n,
                Mode::EfQae => {
                    let (weights, bias) = block.split_at_mut(spec.feature_dim());
                    for (w, x) in weights.iter_mut().zip(entry.feature.as_slice()) {
                        *w += x * d / n;
                    }
                    bias[0] += d / n;
                }
            }
        }
    }
    Ok(grad)
}

/// `dC/dφ_g` for every rotation slot `g` of one input state.
fn angle_derivatives(spec: &AnsatzSpec, angles: &[f64], input: &StateVector) -> Result<Vec<f64>> {
    let circuit = bind_angles(spec, angles)?;
    let gates = circuit.gates();
    let trash = spec.trash_qubits();

    let mut prefix = input.clone();
    let mut cursor = 0;
    let mut out = Vec::with_capacity(angles.len());
    for (pos, gate) in gates.iter().enumerate() {
        let Gate::Ry { qubit, angle } = *gate else {
            continue;
        };
        for g in &gates[cursor..pos] {
            apply(g, &mut prefix)?;
        }
        cursor = pos;

        let shifted_cost = |delta: f64| -> Result<f64> {
            let mut s = prefix.clone();
            s.apply_ry(qubit, angle + delta)?;
            for g in &gates[pos + 1..] {
                apply(g, &mut s)?;
            }
            local_cost(&s, trash)
        };
        let plus = shifted_cost(FRAC_PI_2)?;
        let minus = shifted_cost(-FRAC_PI_2)?;
        out.push(0.5 * (plus - minus));
    }
    Ok(out)
}

fn apply(gate: &Gate, state: &mut StateVector) -> Result<()> {
    match *gate {
        Gate::Ry { qubit, angle } => state.apply_ry(qubit, angle),
        Gate::Cz { control, target } => state.apply_cz(control, target),
    }
}
