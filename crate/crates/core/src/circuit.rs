//! Generic circuits built from fixed gates and parameterized Pauli rotations
//! `exp(-i θ/2 P)`, with `P` one of `σ^y`, `σ^z` on a single qubit.

use crate::error::{Error, Result};
use crate::statevec::{zero_state, GateKind, GateOp, StateVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Fixed(GateOp),
    Rotation { kind: GateKind, qubit: usize, param: usize },
}

/// Gate list in action order: `ops[0]` acts first on `|0…0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCircuit {
    n_qubits: usize,
    n_params: usize,
    ops: Vec<Op>,
}

impl ParamCircuit {
    pub fn new(n_qubits: usize, n_params: usize) -> Self {
        Self {
            n_qubits,
            n_params,
            ops: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn push_fixed(&mut self, gate: GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.ops.push(Op::Fixed(gate));
        Ok(())
    }

    pub fn extend_fixed<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for g in gates {
            self.push_fixed(*g)?;
        }
        Ok(())
    }

    pub fn push_rotation(&mut self, kind: GateKind, qubit: usize, param: usize) -> Result<()> {
        if kind == GateKind::Cphase {
            return Err(Error::InvalidArgument("CPHASE cannot carry a parameter".into()));
        }
        if param >= self.n_params {
            return Err(Error::Shape {
                expected: self.n_params,
                got: param + 1,
            });
        }
        GateOp {
            kind,
            qubits: [qubit, 0],
            angle: 0.0,
        }
        .validate(self.n_qubits)?;
        self.ops.push(Op::Rotation { kind, qubit, param });
        Ok(())
    }

    pub fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::Shape {
                expected: self.n_params,
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn bind_op(op: &Op, theta: &[f64]) -> GateOp {
        match *op {
            Op::Fixed(g) => g,
            Op::Rotation { kind, qubit, param } => GateOp {
                kind,
                qubits: [qubit, 0],
                angle: theta[param],
            },
        }
    }

    /// Concrete gate list for `theta`.
    pub fn bind(&self, theta: &[f64]) -> Result<Vec<GateOp>> {
        self.check_params(theta)?;
        Ok(self.ops.iter().map(|op| Self::bind_op(op, theta)).collect())
    }

    /// `U(θ)|0…0⟩`.
    pub fn state(&self, theta: &[f64]) -> Result<StateVector> {
        self.check_params(theta)?;
        let mut psi = zero_state(self.n_qubits)?;
        self.run_range(&mut psi, theta, 0..self.ops.len());
        Ok(psi)
    }

    pub(crate) fn run_range(&self, psi: &mut StateVector, theta: &[f64], range: std::ops::Range<usize>) {
        for op in &self.ops[range] {
            psi.apply_unchecked(&Self::bind_op(op, theta));
        }
    }

    /// Positions in `ops` of every rotation driven by each parameter.
    pub(crate) fn param_positions(&self) -> Vec<Vec<usize>> {
        let mut pos = vec![Vec::new(); self.n_params];
        for (k, op) in self.ops.iter().enumerate() {
            if let Op::Rotation { param, .. } = op {
                pos[*param].push(k);
            }
        }
        pos
    }

    pub fn count_rotations(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, Op::Rotation { .. })).count()
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.ops
            .iter()
            .filter(|op| match op {
                Op::Fixed(g) => g.kind == kind,
                Op::Rotation { kind: k, .. } => *k == kind,
            })
            .count()
    }
}
