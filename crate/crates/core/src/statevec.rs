//! Dense statevector simulator.
//!
//! Basis convention: qubit 1 is the least significant bit of the basis index,
//! so the state with only qubit `q` excited has index `1 << (q - 1)`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Largest register the dense simulator will allocate.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum GateKind {
    Ry,
    Rz,
    /// Controlled-Z, `diag(1, 1, 1, -1)`.
    Cphase,
}

/// A gate on one-based qubit indices.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub qubits: [usize; 2],
    pub angle: f64,
}

impl GateOp {
    pub fn ry(qubit: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Ry,
            qubits: [qubit, 0],
            angle,
        }
    }

    pub fn rz(qubit: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Rz,
            qubits: [qubit, 0],
            angle,
        }
    }

    pub fn cphase(a: usize, b: usize) -> Self {
        Self {
            kind: GateKind::Cphase,
            qubits: [a, b],
            angle: 0.0,
        }
    }

    pub fn inverse(&self) -> Self {
        match self.kind {
            GateKind::Cphase => *self,
            _ => Self {
                angle: -self.angle,
                ..*self
            },
        }
    }

    pub fn targets(&self) -> &[usize] {
        match self.kind {
            GateKind::Cphase => &self.qubits[..],
            _ => &self.qubits[..1],
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for &q in self.targets() {
            if q == 0 || q > n_qubits {
                return Err(Error::QubitIndex { index: q, n_qubits });
            }
        }
        if self.kind == GateKind::Cphase && self.qubits[0] == self.qubits[1] {
            return Err(Error::InvalidArgument(format!(
                "CPHASE on repeated qubit {}",
                self.qubits[0]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_capacity(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Capacity(n_qubits));
    }
    Ok(())
}

/// `|0…0⟩` on `n_qubits` qubits.
pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::basis(n_qubits, 0)
}

impl StateVector {
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Shape {
                expected: dim,
                got: index,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes. No normalization is applied.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() {
            return Err(Error::Shape {
                expected: dim.next_power_of_two(),
                got: dim,
            });
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_capacity(n_qubits)?;
        Ok(Self { n_qubits, amplitudes })
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

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &GateOp) {
        match gate.kind {
            GateKind::Ry => {
                let (s, c) = (gate.angle / 2.0).sin_cos();
                let mask = 1usize << (gate.qubits[0] - 1);
                self.for_each_pair(mask, |a0, a1| {
                    let (x, y) = (*a0, *a1);
                    *a0 = x * c - y * s;
                    *a1 = x * s + y * c;
                });
            }
            GateKind::Rz => {
                let (s, c) = (gate.angle / 2.0).sin_cos();
                let lo = Complex64::new(c, -s);
                let hi = Complex64::new(c, s);
                let mask = 1usize << (gate.qubits[0] - 1);
                self.for_each_pair(mask, |a0, a1| {
                    *a0 *= lo;
                    *a1 *= hi;
                });
            }
            GateKind::Cphase => {
                let mask = (1usize << (gate.qubits[0] - 1)) | (1usize << (gate.qubits[1] - 1));
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & mask == mask {
                        *a = -*a;
                    }
                }
            }
        }
    }

    /// Applies the Pauli `σ^y` (for `Ry`) or `σ^z` (for `Rz`) generator of a
    /// rotation gate on its qubit.
    pub(crate) fn apply_generator(&mut self, kind: GateKind, qubit: usize) {
        let mask = 1usize << (qubit - 1);
        match kind {
            GateKind::Ry => {
                let i = Complex64::new(0.0, 1.0);
                self.for_each_pair(mask, |a0, a1| {
                    let (x, y) = (*a0, *a1);
                    *a0 = -i * y;
                    *a1 = i * x;
                });
            }
            GateKind::Rz => self.for_each_pair(mask, |_, a1| *a1 = -*a1),
            GateKind::Cphase => unreachable!("CPHASE has no parameter"),
        }
    }

    fn for_each_pair(&mut self, mask: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        // blocks of 2*mask: the lower half has the bit clear, the upper half set
        for block in self.amplitudes.chunks_exact_mut(mask << 1) {
            let (lo, hi) = block.split_at_mut(mask);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a0, a1);
            }
        }
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }
}

/// Returns `gate · state`.
pub fn apply_gate(mut state: StateVector, gate: &GateOp) -> Result<StateVector> {
    state.apply(gate)?;
    Ok(state)
}

/// `⟨a|b⟩`, conjugating `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::Shape {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(dot(&a.amplitudes, &b.amplitudes))
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr())
}

/// Draws `shots` computational-basis outcomes from `|amplitude|²`.
///
/// Uses the conditional-binomial decomposition of the multinomial, so the
/// cost is linear in the dimension rather than in `shots`.
pub fn sample_basis(state: &StateVector, shots: u64, seed: u64) -> Result<BTreeMap<usize, u64>> {
    sample_probabilities(&state.probabilities(), shots, &mut rng::stream(seed, 0))
}

pub(crate) fn sample_probabilities(probs: &[f64], shots: u64, rng: &mut rng::Rng) -> Result<BTreeMap<usize, u64>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let total: f64 = probs.iter().sum();
    let mut counts = BTreeMap::new();
    let mut remaining = shots;
    let mut mass = total;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let k = if mass <= p || i + 1 == probs.len() {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng)
        };
        if k > 0 {
            counts.insert(i, k);
        }
        remaining -= k;
        mass -= p;
    }
    Ok(counts)
}

/// Haar-random pure state: normalized vector of i.i.d. standard complex Gaussians.
pub fn random_haar_state(n_qubits: usize, seed: u64) -> Result<StateVector> {
    random_haar_state_with(n_qubits, &mut rng::stream(seed, 0))
}

pub fn random_haar_state_with(n_qubits: usize, rng: &mut rng::Rng) -> Result<StateVector> {
    check_capacity(n_qubits)?;
    let dim = 1usize << n_qubits;
    let mut amps: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    Ok(StateVector {
        n_qubits,
        amplitudes: amps,
    })
}
