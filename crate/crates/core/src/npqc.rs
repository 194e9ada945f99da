//! Construction of the natural parameterized quantum circuit.
//!
//! Parameter layout (version 1): layer-major; within a layer, ascending qubit;
//! per qubit `y` before `z`. Layer 1 covers every qubit, deeper layers cover
//! the odd qubits `1, 3, …, N-1` only. The `YOnly` variant drops every `z`
//! entry.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Deref, DerefMut};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::circuit::ParamCircuit;
use crate::error::{Error, Result};
use crate::rng;
use crate::statevec::{GateKind, GateOp, StateVector, MAX_QUBITS};

pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    Full,
    YOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Y,
    Z,
}

impl Axis {
    pub fn gate_kind(self) -> GateKind {
        match self {
            Axis::Y => GateKind::Ry,
            Axis::Z => GateKind::Rz,
        }
    }
}

/// Where one entry of the parameter vector lives in the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamSlot {
    pub layer: usize,
    pub qubit: usize,
    pub axis: Axis,
}

/// How the next element of the shift pool is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftOrder {
    #[default]
    Ascending,
    /// Pick order is a seeded permutation of the pool.
    Seeded(u64),
}

/// Shift factors for entangling layers `2..=p` (one value per layer).
pub fn shift_sequence(n_qubits: usize, p: usize) -> Result<Vec<usize>> {
    shift_sequence_with(n_qubits, p, ShiftOrder::Ascending)
}

pub fn shift_sequence_with(n_qubits: usize, p: usize, order: ShiftOrder) -> Result<Vec<usize>> {
    check_qubits(n_qubits)?;
    if p == 0 {
        return Err(Error::InvalidSpec("at least one layer is required".into()));
    }
    let p_max = p_max(n_qubits);
    if p > p_max {
        return Err(Error::Depth { p, p_max });
    }
    let mut pool: Vec<usize> = (0..n_qubits / 2).collect();
    if let ShiftOrder::Seeded(seed) = order {
        pool.shuffle(&mut rng::stream(seed, 0));
    }
    let want = p - 1;
    let mut seq: Vec<usize> = Vec::with_capacity(want.max(1));
    let mut s = 1usize;
    for r in pool {
        if seq.len() >= want {
            break;
        }
        // seq holds a_1..a_{s-1}; append a_s = r then a_{s+q} = a_q
        seq.push(r);
        for q in 0..s - 1 {
            seq.push(seq[q]);
        }
        s *= 2;
    }
    seq.truncate(want);
    Ok(seq)
}

/// `2^{N/2}`, saturating for registers beyond any practical depth.
pub fn p_max(n_qubits: usize) -> usize {
    1usize.checked_shl((n_qubits / 2) as u32).unwrap_or(usize::MAX)
}

fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits < 2 || !n_qubits.is_multiple_of(2) {
        return Err(Error::InvalidSpec(format!(
            "qubit count must be even and ≥ 2, got {n_qubits}"
        )));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity(n_qubits));
    }
    Ok(())
}

/// One-based wrap of CPHASE targets onto `1..=N`.
pub fn wrap_qubit(m: usize, n_qubits: usize) -> usize {
    (m - 1) % n_qubits + 1
}

/// Immutable NPQC description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpqcSpec {
    n_qubits: usize,
    n_layers: usize,
    variant: Variant,
    shifts: Vec<usize>,
}

impl NpqcSpec {
    pub fn new(n_qubits: usize, n_layers: usize, variant: Variant) -> Result<Self> {
        Self::with_shift_order(n_qubits, n_layers, variant, ShiftOrder::Ascending)
    }

    pub fn full(n_qubits: usize, n_layers: usize) -> Result<Self> {
        Self::new(n_qubits, n_layers, Variant::Full)
    }

    pub fn y_only(n_qubits: usize, n_layers: usize) -> Result<Self> {
        Self::new(n_qubits, n_layers, Variant::YOnly)
    }

    pub fn with_shift_order(n_qubits: usize, n_layers: usize, variant: Variant, order: ShiftOrder) -> Result<Self> {
        let shifts = shift_sequence_with(n_qubits, n_layers, order)?;
        Ok(Self {
            n_qubits,
            n_layers,
            variant,
            shifts,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn shift_sequence(&self) -> &[usize] {
        &self.shifts
    }

    pub fn num_params(&self) -> usize {
        num_params(self)
    }

    fn axes(&self) -> &'static [Axis] {
        match self.variant {
            Variant::Full => &[Axis::Y, Axis::Z],
            Variant::YOnly => &[Axis::Y],
        }
    }

    /// Canonical parameter layout.
    pub fn layout(&self) -> Vec<ParamSlot> {
        let mut slots = Vec::with_capacity(self.num_params());
        for layer in 1..=self.n_layers {
            let qubits: Vec<usize> = if layer == 1 {
                (1..=self.n_qubits).collect()
            } else {
                (1..=self.n_qubits).step_by(2).collect()
            };
            for qubit in qubits {
                for &axis in self.axes() {
                    slots.push(ParamSlot { layer, qubit, axis });
                }
            }
        }
        slots
    }

    pub fn reference_params(&self) -> ParamVector {
        reference_params(self)
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        let m = self.num_params();
        if theta.len() != m {
            return Err(Error::Shape {
                expected: m,
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// `U(θ)` as a parameterized circuit (no dressing).
    pub fn circuit(&self) -> ParamCircuit {
        let n = self.n_qubits;
        let mut c = ParamCircuit::new(n, self.num_params());
        let mut idx = 0usize;
        let push_rot = |c: &mut ParamCircuit, qubit: usize, idx: &mut usize| {
            for &axis in self.axes() {
                c.push_rotation(axis.gate_kind(), qubit, *idx).expect("layout is valid");
                *idx += 1;
            }
        };
        for qubit in 1..=n {
            push_rot(&mut c, qubit, &mut idx);
        }
        for &a in &self.shifts {
            for k in 1..=n / 2 {
                let ctrl = 2 * k - 1;
                c.push_fixed(GateOp::ry(ctrl, FRAC_PI_2)).expect("valid qubit");
                c.push_fixed(GateOp::cphase(ctrl, wrap_qubit(2 * k + 2 * a, n)))
                    .expect("valid qubit");
            }
            for k in 1..=n / 2 {
                push_rot(&mut c, 2 * k - 1, &mut idx);
            }
        }
        debug_assert_eq!(idx, self.num_params());
        c
    }

    /// `V_ref · U(θ_r)† · U(θ)` as a parameterized circuit.
    pub fn dressed_circuit(&self, v_ref: Option<&[GateOp]>) -> Result<ParamCircuit> {
        let mut c = self.circuit();
        let fixed = circuit_gates(self, &self.reference_params())?;
        let inverse: Vec<GateOp> = fixed.iter().rev().map(GateOp::inverse).collect();
        c.extend_fixed(&inverse)?;
        if let Some(v) = v_ref {
            c.extend_fixed(v)?;
        }
        Ok(c)
    }
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    n_qubits: usize,
    n_layers: usize,
    variant: Variant,
    layout_version: u32,
}

impl Serialize for NpqcSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecRepr {
            n_qubits: self.n_qubits,
            n_layers: self.n_layers,
            variant: self.variant,
            layout_version: LAYOUT_VERSION,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NpqcSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SpecRepr::deserialize(d)?;
        if r.layout_version != LAYOUT_VERSION {
            return Err(serde::de::Error::custom(format!(
                "unsupported layout_version {}",
                r.layout_version
            )));
        }
        NpqcSpec::new(r.n_qubits, r.n_layers, r.variant).map_err(serde::de::Error::custom)
    }
}

/// Flat parameter vector in the canonical layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self + scale · direction`.
    pub fn offset(&self, direction: &[f64], scale: f64) -> ParamVector {
        ParamVector(self.0.iter().zip(direction).map(|(a, d)| a + scale * d).collect())
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

pub fn num_params(spec: &NpqcSpec) -> usize {
    let n = spec.n_qubits;
    let p = spec.n_layers;
    match spec.variant {
        Variant::Full => n * (p + 1),
        Variant::YOnly => n / 2 * (p + 1),
    }
}

/// `π/2` on every `y` entry, `0` on every `z` entry.
pub fn reference_params(spec: &NpqcSpec) -> ParamVector {
    ParamVector(
        spec.layout()
            .iter()
            .map(|s| match s.axis {
                Axis::Y => FRAC_PI_2,
                Axis::Z => 0.0,
            })
            .collect(),
    )
}

/// Gate list realizing `U(θ)`, in action order.
pub fn circuit_gates(spec: &NpqcSpec, theta: &[f64]) -> Result<Vec<GateOp>> {
    spec.check(theta)?;
    spec.circuit().bind(theta)
}

/// `V_ref · U(θ_r)† · U(θ)|0⟩`.
pub fn prepare_state(spec: &NpqcSpec, theta: &[f64], v_ref: Option<&[GateOp]>) -> Result<StateVector> {
    spec.check(theta)?;
    spec.dressed_circuit(v_ref)?.state(theta)
}

/// `U_y(θ_r)† · U_y(θ)|0⟩` on a `YOnly` spec.
pub fn prepare_y_state(spec: &NpqcSpec, theta: &[f64]) -> Result<StateVector> {
    if spec.variant != Variant::YOnly {
        return Err(Error::Variant { expected: "Y_ONLY" });
    }
    prepare_state(spec, theta, None)
}
