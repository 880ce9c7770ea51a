//! Layered Ry/CZ encoder circuit and its binding to parameters and features.
//!
//! Each layer rotates every qubit with `Ry`, entangles consecutive trash
//! qubits with `CZ`, then runs a `CZ` cascade from the trash qubits onto the
//! latent qubits. A last column of `Ry` rotations acts on the trash qubits.
//!
//! In feature-enhanced mode every rotation angle is an affine function of the
//! feature vector, `angle = Σ_j w_j x_j + b`, so a gate carries
//! `feature_dim + 1` trainable parameters instead of one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QaeError, Result};
use crate::statevector::StateVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Standard autoencoder, one angle per rotation gate.
    Qae,
    /// Feature-enhanced autoencoder, `feature_dim + 1` parameters per gate.
    EfQae,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Qae => "qae",
            Mode::EfQae => "ef_qae",
        })
    }
}

/// Classical side information attached to an input state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn scalar(x: f64) -> Self {
        Self(vec![x])
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Trainable parameters in layout order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Shape of the encoder circuit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    n_qubits: usize,
    trash_qubits: Vec<usize>,
    n_layers: usize,
    mode: Mode,
    feature_dim: usize,
}

impl AnsatzSpec {
    pub fn new(
        n_qubits: usize,
        trash_qubits: Vec<usize>,
        n_layers: usize,
        mode: Mode,
        feature_dim: usize,
    ) -> Result<Self> {
        let spec = Self {
            n_qubits,
            trash_qubits,
            n_layers,
            mode,
            feature_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Standard autoencoder with trash on qubits `0..n_trash`.
    pub fn qae(n_qubits: usize, n_trash: usize, n_layers: usize) -> Result<Self> {
        Self::new(n_qubits, (0..n_trash).collect(), n_layers, Mode::Qae, 0)
    }

    /// Feature-enhanced autoencoder with trash on qubits `0..n_trash`.
    pub fn ef_qae(n_qubits: usize, n_trash: usize, n_layers: usize, feature_dim: usize) -> Result<Self> {
        Self::new(n_qubits, (0..n_trash).collect(), n_layers, Mode::EfQae, feature_dim)
    }

    /// Re-checks the invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n_t = self.trash_qubits.len();
        if self.n_qubits < 2 {
            return Err(QaeError::invalid("an autoencoder needs at least two qubits"));
        }
        if n_t == 0 || n_t >= self.n_qubits {
            return Err(QaeError::invalid(format!(
                "need 1 <= trash qubits < {}, got {n_t}",
                self.n_qubits
            )));
        }
        for (i, &q) in self.trash_qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(QaeError::IndexOutOfRange {
                    index: q,
                    n_qubits: self.n_qubits,
                });
            }
            if self.trash_qubits[..i].contains(&q) {
                return Err(QaeError::invalid(format!("trash qubit {q} listed twice")));
            }
        }
        if self.n_layers == 0 {
            return Err(QaeError::invalid("at least one layer is required"));
        }
        match (self.mode, self.feature_dim) {
            (Mode::Qae, 0) => Ok(()),
            (Mode::Qae, d) => Err(QaeError::invalid(format!(
                "QAE mode takes no features, got feature_dim {d}"
            ))),
            (Mode::EfQae, 0) => Err(QaeError::invalid("EF-QAE mode needs feature_dim >= 1")),
            (Mode::EfQae, _) => Ok(()),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn trash_qubits(&self) -> &[usize] {
        &self.trash_qubits
    }

    /// Latent qubits, ascending.
    pub fn latent_qubits(&self) -> Vec<usize> {
        (0..self.n_qubits).filter(|q| !self.trash_qubits.contains(q)).collect()
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn rotation_gate_count(&self) -> usize {
        self.n_layers * self.n_qubits + self.trash_qubits.len()
    }

    pub fn parameters_per_gate(&self) -> usize {
        match self.mode {
            Mode::Qae => 1,
            Mode::EfQae => self.feature_dim + 1,
        }
    }

    pub fn total_parameter_count(&self) -> usize {
        self.rotation_gate_count() * self.parameters_per_gate()
    }

    /// Same circuit shape in the other mode.
    pub fn with_mode(&self, mode: Mode, feature_dim: usize) -> Result<Self> {
        Self::new(
            self.n_qubits,
            self.trash_qubits.clone(),
            self.n_layers,
            mode,
            feature_dim,
        )
    }
}

/// A gate of the symbolic layout. `Ry::slot` is the rotation's position in
/// parameter order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateTemplate {
    Ry { qubit: usize, slot: usize },
    Cz { control: usize, target: usize },
}

/// The symbolic gate sequence for `spec`.
///
/// Rotation slots are numbered layer-major, qubit-ascending, with the final
/// trash rotations last. The latent qubit at position `c` of the ascending
/// latent list is paired with trash qubit `trash[c mod n_t]` in the cascade.
pub fn build_layout(spec: &AnsatzSpec) -> Vec<GateTemplate> {
    let trash = spec.trash_qubits();
    let latent = spec.latent_qubits();
    let mut gates = Vec::new();
    let mut slot = 0;
    for _ in 0..spec.n_layers() {
        for qubit in 0..spec.n_qubits() {
            gates.push(GateTemplate::Ry { qubit, slot });
            slot += 1;
        }
        for pair in trash.windows(2) {
            gates.push(GateTemplate::Cz {
                control: pair[0],
                target: pair[1],
            });
        }
        for (c, &target) in latent.iter().enumerate() {
            gates.push(GateTemplate::Cz {
                control: trash[c % trash.len()],
                target,
            });
        }
    }
    for &qubit in trash {
        gates.push(GateTemplate::Ry { qubit, slot });
        slot += 1;
    }
    debug_assert_eq!(slot, spec.rotation_gate_count());
    gates
}

/// Angle of one rotation gate from its parameter slice.
///
/// With `slice.len() == x.len() + 1` the angle is `Σ_j slice[j] x[j] +
/// slice[last]`. A lone parameter is used directly, whatever `x` holds.
pub fn resolve_angle(slice: &[f64], x: &FeatureVector) -> Result<f64> {
    if slice.len() == x.len() + 1 {
        let (weights, bias) = slice.split_at(x.len());
        Ok(weights.iter().zip(x.as_slice()).map(|(w, v)| w * v).sum::<f64>() + bias[0])
    } else if slice.len() == 1 {
        Ok(slice[0])
    } else {
        Err(QaeError::invalid(format!(
            "parameter slice of length {} does not fit a feature vector of length {}",
            slice.len(),
            x.len()
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Ry { qubit: usize, angle: f64 },
    Cz { control: usize, target: usize },
}

impl Gate {
    fn apply(&self, state: &mut StateVector, inverse: bool) -> Result<()> {
        match *self {
            Gate::Ry { qubit, angle } => state.apply_ry(qubit, if inverse { -angle } else { angle }),
            Gate::Cz { control, target } => state.apply_cz(control, target),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Ry { qubit, angle } => write!(f, "RY q{qubit} {angle}"),
            Gate::Cz { control, target } => write!(f, "CZ q{control} q{target}"),
        }
    }
}

/// Concrete circuit with every angle resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    depth: usize,
}

impl BoundCircuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut frontier = vec![0usize; n_qubits];
        for gate in &gates {
            match *gate {
                Gate::Ry { qubit, angle } => {
                    check_index(qubit, n_qubits)?;
                    if !angle.is_finite() {
                        return Err(QaeError::Numeric(format!("non-finite rotation angle on qubit {qubit}")));
                    }
                    frontier[qubit] += 1;
                }
                Gate::Cz { control, target } => {
                    check_index(control, n_qubits)?;
                    check_index(target, n_qubits)?;
                    if control == target {
                        return Err(QaeError::invalid("CZ on a single qubit"));
                    }
                    let step = frontier[control].max(frontier[target]) + 1;
                    frontier[control] = step;
                    frontier[target] = step;
                }
            }
        }
        let depth = frontier.into_iter().max().unwrap_or(0);
        Ok(Self { n_qubits, gates, depth })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Number of parallel gate steps (ASAP scheduling).
    pub fn depth(&self) -> usize {
        self.depth
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(QaeError::invalid(format!(
                "circuit acts on {} qubits, state has {}",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        Ok(())
    }

    /// Runs the gates in order on `state`.
    pub fn apply_in_place(&self, state: &mut StateVector) -> Result<()> {
        self.check_state(state)?;
        for gate in &self.gates {
            gate.apply(state, false)?;
        }
        Ok(())
    }

    /// Runs the adjoint circuit (reverse order, negated angles) on `state`.
    pub fn apply_inverse_in_place(&self, state: &mut StateVector) -> Result<()> {
        self.check_state(state)?;
        for gate in self.gates.iter().rev() {
            gate.apply(state, true)?;
        }
        Ok(())
    }
}

impl fmt::Display for BoundCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for gate in &self.gates {
            writeln!(f, "{gate}")?;
        }
        Ok(())
    }
}

fn check_index(index: usize, n_qubits: usize) -> Result<()> {
    if index >= n_qubits {
        return Err(QaeError::IndexOutOfRange { index, n_qubits });
    }
    Ok(())
}

/// Resolved rotation angles in slot order.
pub fn resolve_angles(spec: &AnsatzSpec, theta: &ParameterVector, x: &FeatureVector) -> Result<Vec<f64>> {
    if theta.len() != spec.total_parameter_count() {
        return Err(QaeError::invalid(format!(
            "expected {} parameters, got {}",
            spec.total_parameter_count(),
            theta.len()
        )));
    }
    let empty = FeatureVector::empty();
    let features = match spec.mode() {
        Mode::Qae => &empty,
        Mode::EfQae => {
            if x.len() != spec.feature_dim() {
                return Err(QaeError::invalid(format!(
                    "expected a feature vector of length {}, got {}",
                    spec.feature_dim(),
                    x.len()
                )));
            }
            x
        }
    };
    theta
        .as_slice()
        .chunks_exact(spec.parameters_per_gate())
        .map(|slice| resolve_angle(slice, features))
        .collect()
}

/// Builds the concrete circuit `U(θ, x)`. In QAE mode `x` is ignored.
pub fn bind(spec: &AnsatzSpec, theta: &ParameterVector, x: &FeatureVector) -> Result<BoundCircuit> {
    let angles = resolve_angles(spec, theta, x)?;
    bind_angles(spec, &angles)
}

/// Builds the circuit from already-resolved angles in slot order.
pub fn bind_angles(spec: &AnsatzSpec, angles: &[f64]) -> Result<BoundCircuit> {
    if angles.len() != spec.rotation_gate_count() {
        return Err(QaeError::invalid(format!(
            "expected {} angles, got {}",
            spec.rotation_gate_count(),
            angles.len()
        )));
    }
    let gates = build_layout(spec)
        .into_iter()
        .map(|t| match t {
            GateTemplate::Ry { qubit, slot } => Gate::Ry {
                qubit,
                angle: angles[slot],
            },
            GateTemplate::Cz { control, target } => Gate::Cz { control, target },
        })
        .collect();
    BoundCircuit::new(spec.n_qubits(), gates)
}

/// `U|ψ⟩`.
pub fn apply_encoder(circuit: &BoundCircuit, input: &StateVector) -> Result<StateVector> {
    let mut state = input.clone();
    circuit.apply_in_place(&mut state)?;
    Ok(state)
}

/// `U†|ψ⟩`.
pub fn apply_decoder(circuit: &BoundCircuit, latent: &StateVector) -> Result<StateVector> {
    let mut state = latent.clone();
    circuit.apply_inverse_in_place(&mut state)?;
    Ok(state)
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub output: StateVector,
    pub fidelity: f64,
    /// Probability of finding the trash register in `|0…0⟩` after encoding.
    pub trash_zero_probability: f64,
}

/// Encode, reset the trash register to `|0…0⟩` by projection, decode.
pub fn reconstruct(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    x: &FeatureVector,
    input: &StateVector,
) -> Result<Reconstruction> {
    let circuit = bind(spec, theta, x)?;
    let encoded = apply_encoder(&circuit, input)?;
    let (latent, trash_zero_probability) = encoded.project_zero(spec.trash_qubits())?;
    let output = apply_decoder(&circuit, &latent)?;
    let fidelity = output.fidelity(input)?;
    Ok(Reconstruction {
        output,
        fidelity,
        trash_zero_probability,
    })
}
