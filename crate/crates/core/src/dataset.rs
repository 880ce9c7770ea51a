use crate::ansatz::FeatureVector;
use crate::error::{QaeError, Result};
use crate::statevector::StateVector;

#[derive(Clone, Debug)]
pub struct TrainingEntry {
    pub state: StateVector,
    pub feature: FeatureVector,
    /// Provenance label, e.g. `lambda=0.5` or `zero-03`.
    pub tag: String,
}

/// Input states paired with their feature vectors. All states share a
/// register size and all features share a length.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    entries: Vec<TrainingEntry>,
}

impl TrainingSet {
    pub fn new(entries: Vec<TrainingEntry>) -> Result<Self> {
        if let Some(first) = entries.first() {
            let n = first.state.n_qubits();
            let d = first.feature.len();
            for e in &entries {
                if e.state.n_qubits() != n {
                    return Err(QaeError::invalid(format!(
                        "entry {} has {} qubits, expected {n}",
                        e.tag,
                        e.state.n_qubits()
                    )));
                }
                if e.feature.len() != d {
                    return Err(QaeError::invalid(format!(
                        "entry {} has feature length {}, expected {d}",
                        e.tag,
                        e.feature.len()
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TrainingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.entries.first().map(|e| e.state.n_qubits())
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.entries.first().map(|e| e.feature.len())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TrainingEntry> {
        self.entries.iter()
    }
}

impl<'a> IntoIterator for &'a TrainingSet {
    type Item = &'a TrainingEntry;
    type IntoIter = std::slice::Iter<'a, TrainingEntry>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}
