//! State gradients, the quantum Fisher information matrix and the Gaussian
//! fidelity model built on it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng as _;

use crate::circuit::{Op, ParamCircuit};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::npqc::NpqcSpec;
use crate::rng;
use crate::statevec::{dot, StateVector};

/// Eigenvalues below this are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Anything that can be lowered to a parameterized circuit.
pub trait Ansatz {
    fn param_circuit(&self) -> Result<ParamCircuit>;
}

impl Ansatz for ParamCircuit {
    fn param_circuit(&self) -> Result<ParamCircuit> {
        Ok(self.clone())
    }
}

/// The dressed NPQC `U(θ_r)† U(θ)` (or `U_y(θ_r)† U_y(θ)` for the y-only variant).
impl Ansatz for NpqcSpec {
    fn param_circuit(&self) -> Result<ParamCircuit> {
        self.dressed_circuit(None)
    }
}

/// `∂_i|ψ(θ)⟩` for every parameter, unnormalized.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub states: Vec<StateVector>,
}

impl GradientSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn gradient_states(ansatz: &impl Ansatz, theta: &[f64]) -> Result<GradientSet> {
    gradient_states_with(ansatz, theta, Exec::default())
}

/// Pauli-insertion derivative: for each rotation driven by parameter `i`, run
/// the circuit up to and including that rotation, apply `-i/2 · P`, then run
/// the rest of the circuit.
pub fn gradient_states_with(ansatz: &impl Ansatz, theta: &[f64], exec: Exec) -> Result<GradientSet> {
    let circuit = ansatz.param_circuit()?;
    circuit.check_params(theta)?;
    let positions = circuit.param_positions();
    let n_ops = circuit.ops().len();
    let half = Complex64::new(0.0, -0.5);
    let states = exec.try_map(positions.len(), |i| -> Result<StateVector> {
        let mut acc: Option<StateVector> = None;
        for &k in &positions[i] {
            let mut s = crate::statevec::zero_state(circuit.n_qubits())?;
            circuit.run_range(&mut s, theta, 0..k + 1);
            if let Op::Rotation { kind, qubit, .. } = circuit.ops()[k] {
                s.apply_generator(kind, qubit);
            }
            s.scale(half);
            circuit.run_range(&mut s, theta, k + 1..n_ops);
            acc = Some(match acc {
                None => s,
                Some(mut a) => {
                    for (x, y) in a.amplitudes_mut().iter_mut().zip(s.amplitudes()) {
                        *x += y;
                    }
                    a
                }
            });
        }
        match acc {
            Some(s) => Ok(s),
            // parameter not used by any gate
            None => StateVector::from_amplitudes(vec![Complex64::new(0.0, 0.0); 1 << circuit.n_qubits()]),
        }
    })?;
    Ok(GradientSet { states })
}

/// Real symmetric M×M metric.
#[derive(Debug, Clone, PartialEq)]
pub struct QfimMatrix(pub DMatrix<f64>);

impl QfimMatrix {
    pub fn identity(m: usize) -> Self {
        QfimMatrix(DMatrix::identity(m, m))
    }

    pub fn from_fn(m: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        QfimMatrix(DMatrix::from_fn(m, m, f))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `Tr(F²)`.
    pub fn trace_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Number of eigenvalues above [`EIGEN_FLOOR`].
    pub fn rank(&self) -> usize {
        self.eigenvalues().iter().filter(|&&l| l > EIGEN_FLOOR).count()
    }

    /// `Tr(F⁻¹)`, or `None` when an eigenvalue falls below [`EIGEN_FLOOR`].
    pub fn inverse_trace(&self) -> Option<f64> {
        let ev = self.eigenvalues();
        if ev.iter().any(|&l| l <= EIGEN_FLOOR) {
            return None;
        }
        Some(ev.iter().map(|l| 1.0 / l).sum())
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.0 - self.0.transpose()).abs().max()
    }

    /// `max |F - I|` elementwise.
    pub fn max_deviation_from_identity(&self) -> f64 {
        let m = self.dim();
        (&self.0 - DMatrix::<f64>::identity(m, m)).abs().max()
    }

    /// `vᵀ F v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        (v.transpose() * &self.0 * &v)[(0, 0)]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// `F_ij = 4 Re[⟨∂_iψ|∂_jψ⟩ − ⟨∂_iψ|ψ⟩⟨ψ|∂_jψ⟩]`.
pub fn qfim(ansatz: &impl Ansatz, theta: &[f64]) -> Result<QfimMatrix> {
    qfim_with(ansatz, theta, Exec::default())
}

pub fn qfim_with(ansatz: &impl Ansatz, theta: &[f64], exec: Exec) -> Result<QfimMatrix> {
    let circuit = ansatz.param_circuit()?;
    let psi = circuit.state(theta)?;
    let grads = gradient_states_with(&circuit, theta, exec)?;
    Ok(qfim_from_states(&psi, &grads, exec))
}

pub fn qfim_from_states(psi: &StateVector, grads: &GradientSet, exec: Exec) -> QfimMatrix {
    let m = grads.len();
    let overlaps: Vec<Complex64> = grads
        .states
        .iter()
        .map(|g| dot(g.amplitudes(), psi.amplitudes()))
        .collect();
    // upper triangle, row by row
    let rows = exec.map(m, |i| {
        (i..m)
            .map(|j| {
                let gij = dot(grads.states[i].amplitudes(), grads.states[j].amplitudes());
                4.0 * (gij - overlaps[i] * overlaps[j].conj()).re
            })
            .collect::<Vec<f64>>()
    });
    let mut f = DMatrix::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    QfimMatrix(f)
}

/// Quantum natural gradient: solves `(F + ridge·I) x = gradient`.
pub fn qng(gradient: &[f64], f: &QfimMatrix, ridge: f64) -> Result<Vec<f64>> {
    let m = f.dim();
    if gradient.len() != m {
        return Err(Error::Shape {
            expected: m,
            got: gradient.len(),
        });
    }
    if ridge < 0.0 {
        return Err(Error::InvalidArgument("ridge must be non-negative".into()));
    }
    let a = &f.0 + DMatrix::<f64>::identity(m, m) * ridge;
    let lmin = QfimMatrix(a.clone()).min_eigenvalue();
    if lmin <= EIGEN_FLOOR {
        return Err(Error::Singular(lmin));
    }
    let b = DVector::from_column_slice(gradient);
    let x = a.cholesky().ok_or(Error::Singular(lmin))?.solve(&b);
    Ok(x.iter().copied().collect())
}

/// Exact `K_t(θ) = |⟨ψ_t|ψ(θ)⟩|²` and its gradient, by reverse-mode
/// (adjoint) propagation through the circuit.
pub fn fidelity_and_gradient(ansatz: &impl Ansatz, theta: &[f64], target: &StateVector) -> Result<(f64, Vec<f64>)> {
    let circuit = ansatz.param_circuit()?;
    fidelity_and_gradient_circuit(&circuit, theta, target)
}

pub fn fidelity_and_gradient_circuit(
    circuit: &ParamCircuit,
    theta: &[f64],
    target: &StateVector,
) -> Result<(f64, Vec<f64>)> {
    let mut phi = circuit.state(theta)?;
    if target.n_qubits() != phi.n_qubits() {
        return Err(Error::Shape {
            expected: phi.dim(),
            got: target.dim(),
        });
    }
    let t_psi = dot(target.amplitudes(), phi.amplitudes());
    let k = t_psi.norm_sqr();
    let mut lambda = target.clone();
    let mut grad = vec![0.0; circuit.n_params()];
    let mut scratch = lambda.clone();
    for op in circuit.ops().iter().rev() {
        let gate = ParamCircuit::bind_op(op, theta);
        if let Op::Rotation { kind, qubit, param } = *op {
            scratch.amplitudes_mut().copy_from_slice(lambda.amplitudes());
            scratch.apply_generator(kind, qubit);
            let d_t = Complex64::new(0.0, 0.5) * dot(phi.amplitudes(), scratch.amplitudes());
            grad[param] += 2.0 * (d_t * t_psi).re;
        }
        let inv = gate.inverse();
        phi.apply_unchecked(&inv);
        lambda.apply_unchecked(&inv);
    }
    Ok((k, grad))
}

pub fn fidelity_to(ansatz: &impl Ansatz, theta: &[f64], target: &StateVector) -> Result<f64> {
    let psi = ansatz.param_circuit()?.state(theta)?;
    crate::statevec::fidelity(&psi, target)
}

/// Gaussian fidelity model `exp(-¼ Δθᵀ F Δθ)`.
pub fn gaussian_fidelity(delta: &[f64], f: &QfimMatrix) -> Result<f64> {
    if delta.len() != f.dim() {
        return Err(Error::Shape {
            expected: f.dim(),
            got: delta.len(),
        });
    }
    Ok((-0.25 * f.quadratic_form(delta)).exp())
}

/// The Gaussian model with `F = I`.
pub fn euclidean_gaussian_fidelity(delta: &[f64]) -> f64 {
    (-0.25 * delta.iter().map(|x| x * x).sum::<f64>()).exp()
}

/// `(1/M) · Tr(F²)/Tr(F) · K_t² · log(K₀/K_t)`.
pub fn predicted_gradient_variance(k_t: f64, k_0: f64, f: &QfimMatrix, m: usize) -> Result<f64> {
    if !(k_t > 0.0 && k_t <= k_0 && k_0 <= 1.0) {
        return Err(Error::Domain(format!(
            "need 0 < K_t ≤ K_0 ≤ 1, got K_t = {k_t}, K_0 = {k_0}"
        )));
    }
    if m == 0 {
        return Err(Error::Domain("M must be positive".into()));
    }
    Ok(f.trace_sq() / f.trace() / m as f64 * k_t * k_t * (k_0 / k_t).ln())
}

/// Monte Carlo estimate of the gradient variance at the reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVarianceSample {
    pub distance: f64,
    pub samples: usize,
    pub mean_fidelity: f64,
    pub empirical_variance: f64,
    pub predicted_variance: f64,
}

/// Samples targets `θ_r + distance·u` with `u` uniform on the sphere, draws a
/// random gradient index per target and compares the empirical variance of
/// `∂_k K` with [`predicted_gradient_variance`] at `K₀ = 1`, `F = I`.
pub fn sample_gradient_variance(
    spec: &NpqcSpec,
    distance: f64,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<GradientVarianceSample> {
    let circuit = spec.param_circuit()?;
    let theta_r = spec.reference_params();
    let m = spec.num_params();
    let draws = exec.try_map(samples, |s| -> Result<(f64, f64)> {
        let mut rng = rng::stream(seed, s as u64);
        let u = rng::unit_vector(&mut rng, m);
        let target = circuit.state(&theta_r.offset(&u, distance))?;
        let (k, grad) = fidelity_and_gradient_circuit(&circuit, &theta_r, &target)?;
        let idx = rng.random_range(0..m);
        Ok((k, grad[idx]))
    })?;
    let n = draws.len() as f64;
    let mean_k = draws.iter().map(|d| d.0).sum::<f64>() / n;
    let mean_g = draws.iter().map(|d| d.1).sum::<f64>() / n;
    let mean_g2 = draws.iter().map(|d| d.1 * d.1).sum::<f64>() / n;
    let predicted = predicted_gradient_variance(mean_k.min(1.0), 1.0, &QfimMatrix::identity(m), m)?;
    Ok(GradientVarianceSample {
        distance,
        samples,
        mean_fidelity: mean_k,
        empirical_variance: mean_g2 - mean_g * mean_g,
        predicted_variance: predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::{fidelity, zero_state, GateKind, GateOp};
    use std::f64::consts::PI;

    fn single_ry() -> ParamCircuit {
        let mut c = ParamCircuit::new(1, 1);
        c.push_rotation(GateKind::Ry, 1, 0).unwrap();
        c
    }

    #[test]
    fn single_qubit_gradient_state() {
        let g = gradient_states(&single_ry(), &[0.0]).unwrap();
        let a = g.states[0].amplitudes();
        // (-i/2) σ^y |0⟩ = (-i/2)(i|1⟩) = |1⟩ / 2
        assert!(a[0].norm() < 1e-15);
        assert!((a[1] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_parameter_qfim_is_one() {
        for theta in [0.0, 0.4, 2.0, -1.3] {
            let f = qfim(&single_ry(), &[theta]).unwrap();
            assert!((f.get(0, 0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qng_scalar_cases() {
        let g = vec![0.3, -1.0, 2.5];
        assert_eq!(qng(&g, &QfimMatrix::identity(3), 0.0).unwrap(), g);
        let two = QfimMatrix(DMatrix::identity(3, 3) * 2.0);
        let x = qng(&g, &two, 0.0).unwrap();
        for (a, b) in x.iter().zip(&g) {
            assert!((a - b / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn qng_singular() {
        let f = QfimMatrix(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])));
        assert!(matches!(qng(&[1.0, 1.0], &f, 0.0), Err(Error::Singular(_))));
        assert!(qng(&[1.0, 1.0], &f, 1e-6).is_ok());
        assert!(matches!(qng(&[1.0], &f, 0.0), Err(Error::Shape { .. })));
    }

    #[test]
    fn qng_residual_random_psd() {
        let mut rng = rng::stream(8, 0);
        let m = 12;
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let f = QfimMatrix(&a * a.transpose());
        let g: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ridge = 1e-8;
        let x = qng(&g, &f, ridge).unwrap();
        let lhs = (&f.0 + DMatrix::<f64>::identity(m, m) * ridge) * DVector::from_vec(x);
        let res = (lhs - DVector::from_vec(g)).norm();
        assert!(res <= 1e-8, "{res}");
    }

    #[test]
    fn fidelity_gradient_at_maximum() {
        let spec = NpqcSpec::full(4, 3).unwrap();
        let mut rng = rng::stream(2, 0);
        let theta: Vec<f64> = (0..spec.num_params())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let target = crate::npqc::prepare_state(&spec, &theta, None).unwrap();
        let (k, g) = fidelity_and_gradient(&spec, &theta, &target).unwrap();
        assert!((k - 1.0).abs() < 1e-12);
        assert!(g.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn fidelity_gradient_matches_parameter_shift() {
        let spec = NpqcSpec::full(6, 4).unwrap();
        let m = spec.num_params();
        let mut rng = rng::stream(3, 0);
        let theta: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let target = crate::statevec::random_haar_state(6, 77).unwrap();
        let (_, g) = fidelity_and_gradient(&spec, &theta, &target).unwrap();
        for i in 0..m {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += PI / 2.0;
            tm[i] -= PI / 2.0;
            let shift = (fidelity_to(&spec, &tp, &target).unwrap() - fidelity_to(&spec, &tm, &target).unwrap()) / 2.0;
            assert!((g[i] - shift).abs() < 1e-12, "param {i}: {} vs {shift}", g[i]);
        }
    }

    #[test]
    fn gradient_norms_are_half() {
        let spec = NpqcSpec::full(4, 3).unwrap();
        let mut rng = rng::stream(4, 0);
        let theta: Vec<f64> = (0..spec.num_params())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let g = gradient_states(&spec, &theta).unwrap();
        for s in &g.states {
            assert!((s.norm_sqr() - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn qfim_identity_and_trace_bounds() {
        let spec = NpqcSpec::full(6, 3).unwrap();
        let f = qfim(&spec, &spec.reference_params()).unwrap();
        assert!(f.max_deviation_from_identity() < 1e-9);
        let mut rng = rng::stream(5, 0);
        let theta: Vec<f64> = (0..spec.num_params())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let f = qfim(&spec, &theta).unwrap();
        assert!(f.max_asymmetry() < 1e-9);
        assert!(f.min_eigenvalue() > -1e-9);
        assert!(f.trace() <= spec.num_params() as f64 + 1e-6);
        for i in 0..f.dim() {
            assert!(f.get(i, i) >= -1e-12 && f.get(i, i) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn qfim_exec_backends_match_bitwise() {
        let spec = NpqcSpec::full(6, 4).unwrap();
        let mut rng = rng::stream(6, 0);
        let theta: Vec<f64> = (0..spec.num_params())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let a = qfim_with(&spec, &theta, Exec::Sequential).unwrap();
        let b = qfim_with(&spec, &theta, Exec::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn qfim_invariant_under_vref() {
        let spec = NpqcSpec::full(4, 3).unwrap();
        let v = [
            GateOp::ry(1, 0.7),
            GateOp::cphase(1, 2),
            GateOp::rz(3, -1.1),
            GateOp::cphase(2, 4),
        ];
        let plain = spec.dressed_circuit(None).unwrap();
        let dressed = spec.dressed_circuit(Some(&v)).unwrap();
        let mut rng = rng::stream(7, 0);
        for theta in [
            spec.reference_params().into_inner(),
            (0..spec.num_params())
                .map(|_| rng.random_range(0.0..2.0 * PI))
                .collect(),
        ] {
            let a = qfim(&plain, &theta).unwrap();
            let b = qfim(&dressed, &theta).unwrap();
            assert!((&a.0 - &b.0).abs().max() < 1e-9);
        }
    }

    #[test]
    fn gaussian_closed_forms() {
        let id = QfimMatrix::identity(4);
        assert_eq!(gaussian_fidelity(&[0.0; 4], &id).unwrap(), 1.0);
        let d = [1.0, 1.0, 1.0, 1.0];
        assert!((gaussian_fidelity(&d, &id).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((euclidean_gaussian_fidelity(&d) - 0.36787944117144233).abs() < 1e-15);
        assert!(gaussian_fidelity(&d[..3], &id).is_err());
    }

    #[test]
    fn variance_closed_forms() {
        let id = QfimMatrix::identity(10);
        assert_eq!(predicted_gradient_variance(0.4, 0.4, &id, 10).unwrap(), 0.0);
        let v = predicted_gradient_variance(0.3, 1.0, &id, 10).unwrap();
        assert!((v - 0.09 * (1.0f64 / 0.3).ln() / 10.0).abs() < 1e-15);
        assert!(matches!(
            predicted_gradient_variance(0.5, 0.4, &id, 10),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zero_state_overlap_sanity() {
        let spec = NpqcSpec::y_only(4, 2).unwrap();
        let s = spec.param_circuit().unwrap().state(&spec.reference_params()).unwrap();
        assert!((fidelity(&s, &zero_state(4).unwrap()).unwrap() - 1.0).abs() < 1e-12);
    }
}
