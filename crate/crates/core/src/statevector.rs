//! Dense statevector simulation.
//!
//! Qubit 0 is the most significant bit of the basis-state index, so the
//! amplitude of `|q0 q1 … q(n-1)⟩` sits at the index whose binary expansion
//! reads `q0 q1 … q(n-1)` left to right. Every module in the crate uses this
//! convention.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{QaeError, Result};
use crate::linalg::SymmetricMatrix;

/// Tolerance on the squared norm accepted at construction.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 26;

/// A normalized pure state over `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// Computational basis state with the given index.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(QaeError::invalid(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Wraps an amplitude array. The length must be a power of two and the
    /// squared norm must equal 1 within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QaeError::invalid(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_register(n_qubits)?;
        let norm = norm_sqr(&amplitudes);
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QaeError::invalid(format!(
                "state is not normalized (squared norm {norm})"
            )));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    /// Real amplitudes, rescaled to unit norm.
    pub fn from_real_unnormalized(values: &[f64]) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QaeError::invalid("cannot normalize a zero vector"));
        }
        Self::from_amplitudes(values.iter().map(|v| Complex64::new(v / norm, 0.0)).collect())
    }

    /// Tensor product `self ⊗ other`, with `self` on the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        check_register(self.n_qubits + other.n_qubits)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(Self {
            n_qubits: self.n_qubits + other.n_qubits,
            amplitudes,
        })
    }

    /// Draws a state with i.i.d. Gaussian real and imaginary parts, then
    /// normalizes it (Haar-distributed on the unit sphere).
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut amplitudes: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = norm_sqr(&amplitudes).sqrt();
        for a in &mut amplitudes {
            *a /= norm;
        }
        Self::from_amplitudes(amplitudes)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    /// Bit mask selecting `qubit` in a basis index.
    pub fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(QaeError::IndexOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies `Ry(angle) = exp(-i angle Y / 2)` to `qubit` in place.
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        let (s, c) = (angle / 2.0).sin_cos();
        let stride = self.mask(qubit);
        for block in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = x0 * c - x1 * s;
                *a1 = x0 * s + x1 * c;
            }
        }
        debug_assert!((self.norm_sqr() - 1.0).abs() < 1e-9);
        Ok(())
    }

    /// Applies a controlled-Z between two distinct qubits in place.
    pub fn apply_cz(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(QaeError::invalid(format!(
                "CZ needs two distinct qubits, got {control} twice"
            )));
        }
        let both = self.mask(control) | self.mask(target);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & both == both {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// `⟨Z⟩` on one qubit.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = self.mask(qubit);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// Reduced density matrix on `keep`, traced over every other qubit.
    ///
    /// Kept qubits are ordered ascending, so the first kept qubit is the most
    /// significant bit of the reduced basis index.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(QaeError::invalid("partial trace needs at least one kept qubit"));
        }
        let mut kept = keep.to_vec();
        kept.sort_unstable();
        for pair in kept.windows(2) {
            if pair[0] == pair[1] {
                return Err(QaeError::invalid(format!("qubit {} kept twice", pair[0])));
            }
        }
        for &q in &kept {
            self.check_qubit(q)?;
        }
        let traced: Vec<usize> = (0..self.n_qubits).filter(|q| !kept.contains(q)).collect();
        let kept_offsets = self.subsystem_offsets(&kept);
        let traced_offsets = self.subsystem_offsets(&traced);

        let dim = kept_offsets.len();
        let mut elements = vec![Complex64::new(0.0, 0.0); dim * dim];
        for &env in &traced_offsets {
            for (r, &row_off) in kept_offsets.iter().enumerate() {
                let a = self.amplitudes[row_off | env];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (c, &col_off) in kept_offsets.iter().enumerate() {
                    elements[r * dim + c] += a * self.amplitudes[col_off | env].conj();
                }
            }
        }
        Ok(DensityMatrix {
            n_qubits: kept.len(),
            elements,
        })
    }

    /// Full-register index offsets for every configuration of `qubits`,
    /// enumerated with `qubits[0]` as the most significant bit.
    fn subsystem_offsets(&self, qubits: &[usize]) -> Vec<usize> {
        let k = qubits.len();
        (0..1usize << k)
            .map(|sub| {
                qubits
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| sub & (1 << (k - 1 - pos)) != 0)
                    .fold(0, |acc, (_, &q)| acc | self.mask(q))
            })
            .collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(QaeError::invalid(format!(
                "qubit count mismatch: {} vs {}",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`, clamped to `[0, 1]`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// Marginal probability that measuring `qubits` yields `bits`.
    pub fn bitstring_probability(&self, qubits: &[usize], bits: &[u8]) -> Result<f64> {
        if qubits.len() != bits.len() {
            return Err(QaeError::invalid(format!(
                "{} qubits but {} bits",
                qubits.len(),
                bits.len()
            )));
        }
        let mut select = 0usize;
        let mut expect = 0usize;
        for (i, (&q, &b)) in qubits.iter().zip(bits).enumerate() {
            self.check_qubit(q)?;
            if qubits[..i].contains(&q) {
                return Err(QaeError::invalid(format!("qubit {q} listed twice")));
            }
            if b > 1 {
                return Err(QaeError::invalid(format!("bit value {b} is not 0 or 1")));
            }
            select |= self.mask(q);
            if b == 1 {
                expect |= self.mask(q);
            }
        }
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & select == expect)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects `qubits` onto `|0…0⟩` and renormalizes. Returns the
    /// projected state and the probability of the projection.
    pub fn project_zero(&self, qubits: &[usize]) -> Result<(StateVector, f64)> {
        let mut select = 0usize;
        for &q in qubits {
            self.check_qubit(q)?;
            select |= self.mask(q);
        }
        let mut amplitudes = self.amplitudes.clone();
        for (i, a) in amplitudes.iter_mut().enumerate() {
            if i & select != 0 {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let probability = norm_sqr(&amplitudes);
        if probability < 1e-12 {
            return Err(QaeError::DegenerateProjection { probability });
        }
        let scale = probability.sqrt();
        for a in &mut amplitudes {
            *a /= scale;
        }
        Ok((
            StateVector {
                n_qubits: self.n_qubits,
                amplitudes,
            },
            probability,
        ))
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(QaeError::invalid("a register needs at least one qubit"));
    }
    if n_qubits > MAX_QUBITS {
        return Err(QaeError::Capacity {
            what: "register",
            size: n_qubits,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

fn norm_sqr(amplitudes: &[Complex64]) -> f64 {
    amplitudes.iter().map(Complex64::norm_sqr).sum()
}

/// A `2^n × 2^n` density matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    elements: Vec<Complex64>,
}

impl DensityMatrix {
    /// `|ψ⟩⟨ψ|`.
    pub fn projector(state: &StateVector) -> Self {
        let dim = state.dim();
        let amps = state.amplitudes();
        let elements = (0..dim * dim).map(|k| amps[k / dim] * amps[k % dim].conj()).collect();
        Self {
            n_qubits: state.n_qubits(),
            elements,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.elements[row * self.dim() + col]
    }

    pub fn elements(&self) -> &[Complex64] {
        &self.elements
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .map(|(r, c)| (self.get(r, c) - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `Tr(Z_k ρ)` for a qubit of the reduced register.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(QaeError::IndexOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let mask = 1 << (self.n_qubits - 1 - qubit);
        Ok((0..self.dim())
            .map(|i| {
                let d = self.get(i, i).re;
                if i & mask == 0 {
                    d
                } else {
                    -d
                }
            })
            .sum())
    }

    /// Frobenius norm of `self − other`.
    pub fn frobenius_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.n_qubits != other.n_qubits {
            return Err(QaeError::invalid("density matrices have different sizes"));
        }
        Ok(self
            .elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Eigenvalues in ascending order.
    ///
    /// The Hermitian matrix `A + iB` is embedded as the real symmetric
    /// `[[A, −B], [B, A]]`, whose spectrum is that of `ρ` with every
    /// eigenvalue doubled; every second value is kept.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let dim = self.dim();
        let mut embedded = SymmetricMatrix::zeros(2 * dim);
        for r in 0..dim {
            for c in 0..dim {
                // symmetrize to absorb rounding in the input
                let z = (self.get(r, c) + self.get(c, r).conj()) * 0.5;
                embedded.set(r, c, z.re);
                embedded.set(r + dim, c + dim, z.re);
                embedded.set(r + dim, c, z.im);
                embedded.set(r, c + dim, -z.im);
            }
        }
        let eig = embedded.eigen()?;
        Ok(eig.values.iter().step_by(2).copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn plus() -> StateVector {
        StateVector::from_amplitudes(vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]).unwrap()
    }

    fn assert_state_eq(a: &StateVector, b: &StateVector, tol: f64) {
        assert_eq!(a.n_qubits(), b.n_qubits());
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() <= tol, "{x} != {y}");
        }
    }

    #[test]
    fn ry_examples() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply_ry(0, 0.0).unwrap();
        assert_state_eq(&s, &StateVector::zero(1).unwrap(), 1e-15);

        let mut s = StateVector::zero(1).unwrap();
        s.apply_ry(0, PI).unwrap();
        assert_state_eq(&s, &StateVector::basis(1, 1).unwrap(), 1e-15);

        let mut s = StateVector::zero(1).unwrap();
        s.apply_ry(0, PI / 2.0).unwrap();
        assert_state_eq(&s, &plus(), 1e-15);
    }

    #[test]
    fn ry_rejects_bad_qubit() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(matches!(
            s.apply_ry(2, 0.1),
            Err(QaeError::IndexOutOfRange { index: 2, n_qubits: 2 })
        ));
    }

    #[test]
    fn ry_acts_on_most_significant_bit_for_qubit_zero() {
        let mut s = StateVector::zero(3).unwrap();
        s.apply_ry(0, PI).unwrap();
        assert_state_eq(&s, &StateVector::basis(3, 0b100).unwrap(), 1e-15);
    }

    #[test]
    fn cz_examples() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply_cz(0, 1).unwrap();
        assert_state_eq(&s, &StateVector::zero(2).unwrap(), 0.0);

        let mut s = StateVector::basis(2, 3).unwrap();
        s.apply_cz(0, 1).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[3].re, -1.0);

        let h = FRAC_1_SQRT_2;
        let mut s = StateVector::from_amplitudes(vec![c(0.0), c(0.0), c(h), c(h)]).unwrap();
        s.apply_cz(1, 0).unwrap();
        let expected = StateVector::from_amplitudes(vec![c(0.0), c(0.0), c(h), c(-h)]).unwrap();
        assert_state_eq(&s, &expected, 0.0);
    }

    #[test]
    fn cz_rejects_equal_indices() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(matches!(s.apply_cz(1, 1), Err(QaeError::InvalidArgument(_))));
    }

    #[test]
    fn expectation_z_examples() {
        assert_eq!(StateVector::zero(1).unwrap().expectation_z(0).unwrap(), 1.0);
        assert_eq!(StateVector::basis(1, 1).unwrap().expectation_z(0).unwrap(), -1.0);
        assert_abs_diff_eq!(plus().expectation_z(0).unwrap(), 0.0, epsilon = 1e-15);
        assert!(plus().expectation_z(1).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        // |00⟩ ⊗ random
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = StateVector::random(2, &mut rng).unwrap();
        let s = StateVector::zero(2).unwrap().tensor(&phi).unwrap();
        let rho = s.partial_trace(&[0, 1]).unwrap();
        let proj = DensityMatrix::projector(&StateVector::zero(2).unwrap());
        assert!(rho.frobenius_distance(&proj).unwrap() < 1e-12);

        let h = FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(vec![c(h), c(0.0), c(0.0), c(h)]).unwrap();
        let rho = bell.partial_trace(&[0]).unwrap();
        assert_abs_diff_eq!(rho.get(0, 0).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.get(1, 1).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.get(0, 1).norm(), 0.0);

        let s = plus().tensor(&StateVector::zero(1).unwrap()).unwrap();
        let rho = s.partial_trace(&[0]).unwrap();
        for e in rho.elements() {
            assert_abs_diff_eq!(e.re, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn partial_trace_full_set_is_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = StateVector::random(3, &mut rng).unwrap();
        let rho = s.partial_trace(&[2, 0, 1]).unwrap();
        assert!(rho.frobenius_distance(&DensityMatrix::projector(&s)).unwrap() < 1e-14);
    }

    #[test]
    fn partial_trace_rejects_empty_keep() {
        let s = StateVector::zero(2).unwrap();
        assert!(matches!(s.partial_trace(&[]), Err(QaeError::InvalidArgument(_))));
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = StateVector::random(4, &mut rng).unwrap();
        assert_abs_diff_eq!(psi.fidelity(&psi).unwrap(), 1.0, epsilon = 1e-12);
        let zero = StateVector::zero(1).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert_eq!(zero.fidelity(&one).unwrap(), 0.0);
        assert_abs_diff_eq!(zero.fidelity(&plus()).unwrap(), 0.5, epsilon = 1e-15);
        assert!(zero.fidelity(&psi).is_err());
    }

    #[test]
    fn bitstring_probability_examples() {
        let s = StateVector::basis(2, 0b01).unwrap();
        assert_eq!(s.bitstring_probability(&[0, 1], &[0, 1]).unwrap(), 1.0);

        let s = plus().tensor(&StateVector::zero(1).unwrap()).unwrap();
        assert_abs_diff_eq!(s.bitstring_probability(&[0], &[1]).unwrap(), 0.5, epsilon = 1e-15);

        let h = FRAC_1_SQRT_2;
        let mut amps = vec![c(0.0); 8];
        amps[0] = c(h);
        amps[7] = c(h);
        let ghz = StateVector::from_amplitudes(amps).unwrap();
        assert_eq!(ghz.bitstring_probability(&[0, 1], &[0, 1]).unwrap(), 0.0);

        assert!(matches!(
            ghz.bitstring_probability(&[1, 1], &[0, 0]),
            Err(QaeError::InvalidArgument(_))
        ));
    }

    #[test]
    fn construction_rejects_unnormalized_and_bad_lengths() {
        assert!(StateVector::from_amplitudes(vec![c(1.0), c(1.0)]).is_err());
        assert!(StateVector::from_amplitudes(vec![c(1.0), c(0.0), c(0.0)]).is_err());
        assert!(StateVector::zero(0).is_err());
    }

    #[test]
    fn project_zero_reports_degenerate_projection() {
        let s = StateVector::basis(2, 0b10).unwrap();
        assert!(matches!(
            s.project_zero(&[0]),
            Err(QaeError::DegenerateProjection { .. })
        ));
        let (p, prob) = s.project_zero(&[1]).unwrap();
        assert_eq!(prob, 1.0);
        assert_eq!(p, s);
    }

    #[test]
    fn density_eigenvalues_of_mixed_state() {
        let h = FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(vec![c(h), c(0.0), c(0.0), c(h)]).unwrap();
        let ev = bell.partial_trace(&[1]).unwrap().eigenvalues().unwrap();
        assert_abs_diff_eq!(ev[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 0.5, epsilon = 1e-12);
    }
}
