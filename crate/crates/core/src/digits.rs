//! 8×8 handwritten digits and their amplitude encoding on six qubits.
//!
//! File format: one image per line, 65 comma-separated integers. The first
//! 64 are row-major gray levels in `[0, 16]`, the last is the label (0 or 1).
//! No header.

use std::fmt;
use std::path::Path;

use crate::ansatz::FeatureVector;
use crate::dataset::{TrainingEntry, TrainingSet};
use crate::error::{QaeError, Result};
use crate::statevector::StateVector;

pub const SIDE: usize = 8;
pub const PIXELS: usize = SIDE * SIDE;
pub const MAX_LEVEL: u8 = 16;

/// 10 zeros then 10 ones.
pub const BUNDLED_TRAIN: &str = include_str!("../data/digits_train.csv");
/// 30 zeros then 30 ones.
pub const BUNDLED_TEST: &str = include_str!("../data/digits_test.csv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DigitLabel {
    Zero,
    One,
}

impl DigitLabel {
    /// Feature value fed to the enhanced encoder: 1 for zeros, 2 for ones.
    pub fn feature(self) -> f64 {
        match self {
            DigitLabel::Zero => 1.0,
            DigitLabel::One => 2.0,
        }
    }
}

impl fmt::Display for DigitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DigitLabel::Zero => "zero",
            DigitLabel::One => "one",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitImage {
    pixels: [u8; PIXELS],
    label: DigitLabel,
}

impl DigitImage {
    pub fn new(pixels: [u8; PIXELS], label: DigitLabel) -> Result<Self> {
        if let Some(p) = pixels.iter().find(|&&p| p > MAX_LEVEL) {
            return Err(QaeError::invalid(format!("pixel value {p} exceeds {MAX_LEVEL}")));
        }
        if pixels.iter().all(|&p| p == 0) {
            return Err(QaeError::invalid("image has no nonzero pixel"));
        }
        Ok(Self { pixels, label })
    }

    pub fn pixels(&self) -> &[u8; PIXELS] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * SIDE + col]
    }

    pub fn label(&self) -> DigitLabel {
        self.label
    }

    /// Euclidean norm of the pixel vector.
    pub fn norm(&self) -> f64 {
        self.pixels
            .iter()
            .map(|&p| f64::from(p) * f64::from(p))
            .sum::<f64>()
            .sqrt()
    }
}

/// Row-major pixels divided by their Euclidean norm, as a 6-qubit state.
pub fn amplitude_encode(img: &DigitImage) -> Result<StateVector> {
    let values: Vec<f64> = img.pixels.iter().map(|&p| f64::from(p)).collect();
    StateVector::from_real_unnormalized(&values)
}

/// Parses the digits CSV format. `origin` names the source in errors.
pub fn parse_digits(text: &str, origin: &str) -> Result<Vec<DigitImage>> {
    let mut images = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| QaeError::Parse {
            path: origin.to_string(),
            line: line_no,
            message,
        };
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != PIXELS + 1 {
            return Err(err(format!("expected {} fields, found {}", PIXELS + 1, fields.len())));
        }
        let mut pixels = [0u8; PIXELS];
        for (k, field) in fields[..PIXELS].iter().enumerate() {
            let value: u8 = field
                .trim()
                .parse()
                .map_err(|_| err(format!("pixel {k}: `{field}` is not an integer in [0, 16]")))?;
            if value > MAX_LEVEL {
                return Err(err(format!("pixel {k}: value {value} is outside [0, 16]")));
            }
            pixels[k] = value;
        }
        let label = match fields[PIXELS].trim() {
            "0" => DigitLabel::Zero,
            "1" => DigitLabel::One,
            other => return Err(err(format!("unknown label `{other}`"))),
        };
        images.push(DigitImage::new(pixels, label).map_err(|e| err(e.to_string()))?);
    }
    Ok(images)
}

pub fn load_digits(path: impl AsRef<Path>) -> Result<Vec<DigitImage>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| QaeError::io(path, e))?;
    parse_digits(&text, &path.display().to_string())
}

pub fn bundled_train() -> Vec<DigitImage> {
    parse_digits(BUNDLED_TRAIN, "digits_train.csv").expect("bundled fixture parses")
}

pub fn bundled_test() -> Vec<DigitImage> {
    parse_digits(BUNDLED_TEST, "digits_test.csv").expect("bundled fixture parses")
}

/// Amplitude-encoded images with feature `(1)` for zeros and `(2)` for
/// ones. Tags read `<label>-<index>`, the index being the position in
/// `images`.
pub fn build_digits_training_set(images: &[DigitImage]) -> Result<TrainingSet> {
    if images.is_empty() {
        return Err(QaeError::invalid("no digit images supplied"));
    }
    let entries = images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            Ok(TrainingEntry {
                state: amplitude_encode(img)?,
                feature: FeatureVector::scalar(img.label().feature()),
                tag: format!("{}-{i:02}", img.label()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TrainingSet::new(entries)
}
