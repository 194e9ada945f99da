//! State-learning VQA: maximize `K_t(θ) = |⟨ψ_t|ψ(θ)⟩|²` by gradient ascent
//! with Gaussian-model adaptive learning rates, plus fixed-rate and Adam
//! baselines.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::circuit::ParamCircuit;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{fidelity_and_gradient_circuit, Ansatz, QfimMatrix};
use crate::npqc::{NpqcSpec, ParamVector};
use crate::rng;
use crate::statevec::{fidelity, StateVector};

/// `-log K` below this counts as converged.
pub const CONVERGED_LOG: f64 = 1e-12;
/// Gradient norms below this are stationary points.
pub const STATIONARY_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(alias = "adaptive")]
    AdaptiveGa,
    #[serde(alias = "standard")]
    StandardGa,
    Adam,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::AdaptiveGa => "adaptive_ga",
            Method::StandardGa => "standard_ga",
            Method::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub adaptive_iters: usize,
    pub post_adaptive_rate: f64,
    pub fixed_rate: f64,
    pub adam: AdamParams,
    pub max_iters: usize,
    pub target_infidelity: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::AdaptiveGa,
            adaptive_iters: 3,
            post_adaptive_rate: 0.5,
            fixed_rate: 1.0,
            adam: AdamParams::default(),
            max_iters: 100,
            target_infidelity: 1e-4,
        }
    }
}

impl OptimizerConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.post_adaptive_rate, self.fixed_rate, self.adam.rate];
        if rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument("learning rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::InvalidArgument("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    /// Fidelity at the start of the iteration.
    pub fidelity: f64,
    pub grad_norm: f64,
    /// Learning rate of the step taken from this point (0 when none).
    pub rate: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub method: Method,
    pub seed: u64,
    pub records: Vec<TrainRecord>,
    pub final_theta: ParamVector,
    pub gradient_evals: usize,
    /// Fidelity-only evaluations (adaptive probe steps).
    pub fidelity_evals: usize,
    pub stationary: bool,
}

impl TrainTrace {
    pub fn final_fidelity(&self) -> f64 {
        self.records.last().map(|r| r.fidelity).unwrap_or(0.0)
    }

    pub fn final_infidelity(&self) -> f64 {
        1.0 - self.final_fidelity()
    }

    /// First iteration whose infidelity is at most `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| 1.0 - r.fidelity <= threshold)
            .map(|r| r.iteration)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `∇Kᵀ F ∇K`, or `|∇K|²` when `F` is absent.
fn metric_norm_sq(grad: &[f64], f: Option<&QfimMatrix>) -> Result<f64> {
    match f {
        None => Ok(grad.iter().map(|x| x * x).sum()),
        Some(f) if f.dim() == grad.len() => Ok(f.quadratic_form(grad)),
        Some(f) => Err(Error::Shape {
            expected: f.dim(),
            got: grad.len(),
        }),
    }
}

/// Probe rate `α₁ = 2√(−log K) / √(∇Kᵀ F ∇K)`.
pub fn probe_rate(k: f64, grad: &[f64], f: Option<&QfimMatrix>) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("fidelity must be positive, got {k}")));
    }
    if k >= 1.0 || -k.ln() < CONVERGED_LOG {
        return Err(Error::Converged(k));
    }
    let gn = norm(grad);
    if gn < STATIONARY_NORM {
        return Err(Error::Stationary(gn));
    }
    let q = metric_norm_sq(grad, f)?;
    if !(q > 0.0) {
        return Err(Error::Stationary(q.max(0.0).sqrt()));
    }
    Ok(2.0 * (-k.ln()).sqrt() / q.sqrt())
}

/// Returns `(α₁, α_t)` given the probe fidelity `K₁ = K(θ + α₁∇K)`:
/// `α_t = ½ (4 log(K₁/K) / (α₁ ∇Kᵀ F ∇K) + α₁)`.
pub fn adaptive_rates(k: f64, k1: f64, grad: &[f64], f: Option<&QfimMatrix>) -> Result<(f64, f64)> {
    let alpha1 = probe_rate(k, grad, f)?;
    let q = metric_norm_sq(grad, f)?;
    let k1 = k1.max(f64::MIN_POSITIVE);
    let alpha_t = 0.5 * (4.0 / (alpha1 * q) * (k1 / k).ln() + alpha1);
    Ok((alpha1, alpha_t))
}

/// Outcome of one adaptive step from `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveStep {
    pub alpha1: f64,
    pub alpha_t: f64,
    pub probe_fidelity: f64,
    pub theta: Vec<f64>,
}

/// Probe with `α₁`, then take the corrected step with `α_t`.
pub fn adaptive_step(
    circuit: &ParamCircuit,
    theta: &[f64],
    target: &StateVector,
    k: f64,
    grad: &[f64],
    f: Option<&QfimMatrix>,
) -> Result<AdaptiveStep> {
    let alpha1 = probe_rate(k, grad, f)?;
    let probe: Vec<f64> = theta.iter().zip(grad).map(|(t, g)| t + alpha1 * g).collect();
    let k1 = fidelity(&circuit.state(&probe)?, target)?;
    let (_, alpha_t) = adaptive_rates(k, k1, grad, f)?;
    let next = theta.iter().zip(grad).map(|(t, g)| t + alpha_t * g).collect();
    Ok(AdaptiveStep {
        alpha1,
        alpha_t,
        probe_fidelity: k1,
        theta: next,
    })
}

/// Runs the configured optimizer from `theta0` until `max_iters` steps or the
/// target infidelity is reached. The seed is recorded for provenance; all
/// three methods are deterministic.
pub fn train(
    ansatz: &impl Ansatz,
    theta0: &[f64],
    target: &StateVector,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<TrainTrace> {
    config.validate()?;
    let circuit = ansatz.param_circuit()?;
    circuit.check_params(theta0)?;
    let start = Instant::now();
    let mut theta = theta0.to_vec();
    let mut records = Vec::new();
    let mut gradient_evals = 0;
    let mut fidelity_evals = 0;
    let mut stationary = false;
    let m = theta.len();
    let (mut m1, mut m2) = (vec![0.0; m], vec![0.0; m]);

    for iteration in 0..=config.max_iters {
        let (k, grad) = fidelity_and_gradient_circuit(&circuit, &theta, target)?;
        gradient_evals += 1;
        let gn = norm(&grad);
        let mut record = TrainRecord {
            iteration,
            fidelity: k,
            grad_norm: gn,
            rate: 0.0,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        let done = 1.0 - k <= config.target_infidelity || -k.ln() < CONVERGED_LOG;
        if done || iteration == config.max_iters {
            records.push(record);
            break;
        }
        if gn < STATIONARY_NORM {
            stationary = true;
            records.push(record);
            break;
        }
        match config.method {
            Method::AdaptiveGa if iteration < config.adaptive_iters => {
                let step = adaptive_step(&circuit, &theta, target, k, &grad, None)?;
                fidelity_evals += 1;
                record.rate = step.alpha_t;
                theta = step.theta;
            }
            Method::AdaptiveGa | Method::StandardGa => {
                let rate = if config.method == Method::AdaptiveGa {
                    config.post_adaptive_rate
                } else {
                    config.fixed_rate
                };
                record.rate = rate;
                for (t, g) in theta.iter_mut().zip(&grad) {
                    *t += rate * g;
                }
            }
            Method::Adam => {
                let AdamParams {
                    rate,
                    beta1,
                    beta2,
                    eps,
                } = config.adam;
                let step = (iteration + 1) as i32;
                let c1 = 1.0 - beta1.powi(step);
                let c2 = 1.0 - beta2.powi(step);
                for i in 0..m {
                    m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
                    m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
                    theta[i] += rate * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                }
                record.rate = rate;
            }
        }
        records.push(record);
    }
    Ok(TrainTrace {
        method: config.method,
        seed,
        records,
        final_theta: ParamVector(theta),
        gradient_evals,
        fidelity_evals,
        stationary,
    })
}

/// Uniform random parameters in `[0, 2π)^M`.
pub fn random_params(m: usize, rng: &mut rng::Rng) -> ParamVector {
    ParamVector((0..m).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
}

/// Target `θ_t = θ_r + |Δθ| u` for a random unit direction `u`.
///
/// With `k_target` set, `distance` is ignored: the starting distance is the
/// Gaussian-model inverse `2√(−log K)`, refined by bisection on the true
/// fidelity along `u`.
pub fn target_from_distance(
    spec: &NpqcSpec,
    distance: f64,
    k_target: Option<f64>,
    seed: u64,
) -> Result<(ParamVector, StateVector)> {
    let circuit = spec.param_circuit()?;
    let mut rng = rng::stream(seed, 0);
    let origin = spec.reference_params();
    target_near(&circuit, &origin, distance, k_target, &mut rng)
}

/// Fidelity tolerance of the bisection in [`target_near`].
pub const TARGET_TOLERANCE: f64 = 1e-9;

/// [`target_from_distance`] around an arbitrary origin.
pub fn target_near(
    circuit: &ParamCircuit,
    origin: &[f64],
    distance: f64,
    k_target: Option<f64>,
    rng: &mut rng::Rng,
) -> Result<(ParamVector, StateVector)> {
    circuit.check_params(origin)?;
    let origin = ParamVector(origin.to_vec());
    let u = rng::unit_vector(rng, origin.len());
    let Some(k) = k_target else {
        if !(distance >= 0.0) {
            return Err(Error::InvalidArgument("distance must be non-negative".into()));
        }
        let theta = origin.offset(&u, distance);
        let state = circuit.state(&theta)?;
        return Ok((theta, state));
    };
    let floor = 0.5f64.powi(circuit.n_qubits() as i32);
    if !(k > floor && k <= 1.0) {
        return Err(Error::Infeasible(format!("target fidelity {k} outside ({floor}, 1]")));
    }
    if k == 1.0 {
        let state = circuit.state(&origin)?;
        return Ok((origin, state));
    }
    let psi0 = circuit.state(&origin)?;
    let fid = |d: f64| -> Result<f64> { fidelity(&psi0, &circuit.state(&origin.offset(&u, d))?) };

    let mut lo = 0.0;
    let mut hi = 2.0 * (-k.ln()).sqrt();
    let mut f_hi = fid(hi)?;
    let mut expansions = 0;
    while f_hi > k {
        lo = hi;
        hi *= 1.25;
        f_hi = fid(hi)?;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Infeasible(format!(
                "fidelity {k} not reached along the sampled direction"
            )));
        }
    }
    let mut best = (hi, f_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = fid(mid)?;
        if (f_mid - k).abs() < (best.1 - k).abs() {
            best = (mid, f_mid);
        }
        if (f_mid - k).abs() < TARGET_TOLERANCE {
            break;
        }
        if f_mid > k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = origin.offset(&u, best.0);
    let state = circuit.state(&theta)?;
    Ok((theta, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Reference,
    Random,
}

/// Starting point and target for one seed of a single-step study.
pub fn initial_instance(
    spec: &NpqcSpec,
    circuit: &ParamCircuit,
    init: Init,
    k_target: f64,
    seed: u64,
    instance: u64,
) -> Result<(ParamVector, StateVector)> {
    let mut rng = rng::stream(seed, instance);
    let theta0 = match init {
        Init::Reference => spec.reference_params(),
        Init::Random => random_params(spec.num_params(), &mut rng),
    };
    let (_, target) = target_near(circuit, &theta0, 0.0, Some(k_target), &mut rng)?;
    Ok((theta0, target))
}

/// Infidelity after one adaptive step (assuming `F = I`).
pub fn single_step_infidelity(circuit: &ParamCircuit, theta0: &[f64], target: &StateVector) -> Result<f64> {
    let (k, grad) = fidelity_and_gradient_circuit(circuit, theta0, target)?;
    match adaptive_step(circuit, theta0, target, k, &grad, None) {
        Ok(step) => Ok(1.0 - fidelity(&circuit.state(&step.theta)?, target)?),
        Err(Error::Converged(_)) | Err(Error::Stationary(_)) => Ok(1.0 - k),
        Err(e) => Err(e),
    }
}

/// Trains every method from the same `(θ₀, target)` per instance. Traces are
/// instance-major and carry the instance index as their seed.
#[allow(clippy::too_many_arguments)]
pub fn training_study(
    spec: &NpqcSpec,
    init: Init,
    infidelity: f64,
    methods: &[Method],
    base: &OptimizerConfig,
    instances: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<TrainTrace>> {
    base.validate()?;
    let circuit = spec.param_circuit()?;
    let per_instance = exec.try_map(instances, |s| -> Result<Vec<TrainTrace>> {
        let (theta0, target) = initial_instance(spec, &circuit, init, 1.0 - infidelity, seed, s as u64)?;
        methods
            .iter()
            .map(|&method| {
                train(
                    &circuit,
                    &theta0,
                    &target,
                    &OptimizerConfig { method, ..*base },
                    s as u64,
                )
            })
            .collect()
    })?;
    Ok(per_instance.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub infidelity_before: f64,
    pub mean_infidelity_after: f64,
    pub std_infidelity_after: f64,
    pub instances: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub c: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    /// Per (row, seed) raw infidelities after the step.
    pub samples: Vec<Vec<f64>>,
    pub fit: Option<PowerFit>,
}

/// One adaptive step from every seed at each initial infidelity, followed by a
/// least-squares fit of `ΔK_after = c·(−log(1 − ΔK_before))^ν`.
pub fn single_step_scan(
    spec: &NpqcSpec,
    infidelities: &[f64],
    init: Init,
    seeds: usize,
    seed: u64,
    exec: Exec,
) -> Result<ScanResult> {
    let circuit = spec.param_circuit()?;
    let n = infidelities.len() * seeds;
    let flat = exec.try_map(n, |idx| -> Result<f64> {
        let (row, s) = (idx / seeds, idx % seeds);
        let dk = infidelities[row];
        if dk <= 0.0 {
            return Ok(0.0);
        }
        let (theta0, target) = initial_instance(spec, &circuit, init, 1.0 - dk, seed, s as u64)?;
        single_step_infidelity(&circuit, &theta0, &target)
    })?;
    let samples: Vec<Vec<f64>> = flat.chunks(seeds.max(1)).map(|c| c.to_vec()).collect();
    let rows: Vec<ScanRow> = infidelities
        .iter()
        .zip(&samples)
        .map(|(&dk, xs)| {
            let (mean, std) = mean_std(xs);
            ScanRow {
                infidelity_before: dk,
                mean_infidelity_after: mean,
                std_infidelity_after: std,
                instances: xs.len(),
            }
        })
        .collect();
    let fit = fit_power_law(
        &rows
            .iter()
            .map(|r| (r.infidelity_before, r.mean_infidelity_after))
            .collect::<Vec<_>>(),
    );
    Ok(ScanResult { rows, samples, fit })
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Log–log least squares of `after = c·(−log(1 − before))^ν` over points with
/// `after > 10·ε`. Needs at least two usable points.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<PowerFit> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(b, a)| *b > 0.0 && *b < 1.0 && *a > 10.0 * f64::EPSILON)
        .map(|(b, a)| ((-(1.0 - b).ln()).ln(), a.ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let nu = sxy / sxx;
    Some(PowerFit {
        c: (my - nu * mx).exp(),
        nu,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateScanRow {
    /// Rate multiplier relative to the analytic `α_t`.
    pub lambda: f64,
    pub mean_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateScan {
    pub rows: Vec<RateScanRow>,
    /// Mean fidelity after the step with exactly `α_t`.
    pub analytic_mean_fidelity: f64,
}

/// Fidelity after a single step `θ_r + λ·α_t·∇K` over a grid of `λ`.
pub fn learning_rate_scan(
    spec: &NpqcSpec,
    infidelity: f64,
    lambdas: &[f64],
    seeds: usize,
    seed: u64,
    exec: Exec,
) -> Result<RateScan> {
    let circuit = spec.param_circuit()?;
    let per_seed = exec.try_map(seeds, |s| -> Result<(Vec<f64>, f64)> {
        let (theta0, target) = initial_instance(spec, &circuit, Init::Reference, 1.0 - infidelity, seed, s as u64)?;
        let (k, grad) = fidelity_and_gradient_circuit(&circuit, &theta0, &target)?;
        let step = adaptive_step(&circuit, &theta0, &target, k, &grad, None)?;
        let at = |lambda: f64| -> Result<f64> {
            let th: Vec<f64> = theta0
                .iter()
                .zip(&grad)
                .map(|(t, g)| t + lambda * step.alpha_t * g)
                .collect();
            fidelity(&circuit.state(&th)?, &target)
        };
        let grid = lambdas.iter().map(|&l| at(l)).collect::<Result<Vec<f64>>>()?;
        Ok((grid, at(1.0)?))
    })?;
    let n = seeds.max(1) as f64;
    let rows = lambdas
        .iter()
        .enumerate()
        .map(|(j, &lambda)| RateScanRow {
            lambda,
            mean_fidelity: per_seed.iter().map(|p| p.0[j]).sum::<f64>() / n,
        })
        .collect();
    let analytic = per_seed.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(RateScan {
        rows,
        analytic_mean_fidelity: analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euclidean_gaussian_fidelity;

    #[test]
    fn closed_form_probe_rate() {
        let k = (-1.0f64).exp();
        let g = [0.6, 0.8];
        assert!((probe_rate(k, &g, None).unwrap() - 2.0).abs() < 1e-14);
        let (a1, at) = adaptive_rates(k, k, &g, None).unwrap();
        assert!((at - a1 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn identity_metric_matches_euclidean_path() {
        let g = [0.1, -0.3, 0.25];
        let id = QfimMatrix::identity(3);
        let a = adaptive_rates(0.4, 0.7, &g, None).unwrap();
        let b = adaptive_rates(0.4, 0.7, &g, Some(&id)).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn general_metric_rates() {
        let g = [0.2, 0.1];
        let f = QfimMatrix::from_fn(2, |i, j| if i == j { 0.5 } else { 0.1 });
        let q = f.quadratic_form(&g);
        let (a1, at) = adaptive_rates(0.3, 0.5, &g, Some(&f)).unwrap();
        assert!((a1 - 2.0 * (-(0.3f64).ln()).sqrt() / q.sqrt()).abs() < 1e-12);
        assert!((at - 0.5 * (4.0 / (a1 * q) * (0.5f64 / 0.3).ln() + a1)).abs() < 1e-12);
    }

    #[test]
    fn rate_error_paths() {
        assert_eq!(probe_rate(1.0, &[1.0], None), Err(Error::Converged(1.0)));
        assert!(matches!(
            probe_rate(0.5, &[0.0, 1e-14], None),
            Err(Error::Stationary(_))
        ));
    }

    /// On an exactly Gaussian landscape the corrected step lands on the target.
    #[test]
    fn gaussian_landscape_one_step() {
        let target = [0.7, -0.4, 1.1];
        let k_of = |th: &[f64]| {
            let d: Vec<f64> = th.iter().zip(&target).map(|(a, b)| a - b).collect();
            0.8 * euclidean_gaussian_fidelity(&d)
        };
        let theta = [0.0; 3];
        let k = k_of(&theta);
        let grad: Vec<f64> = target.iter().map(|t| k * t / 2.0).collect();
        let a1 = probe_rate(k, &grad, None).unwrap();
        let probe: Vec<f64> = grad.iter().map(|g| a1 * g).collect();
        let (_, at) = adaptive_rates(k, k_of(&probe), &grad, None).unwrap();
        let landed: Vec<f64> = grad.iter().map(|g| at * g).collect();
        for (a, b) in landed.iter().zip(&target) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn train_at_target_takes_no_step() {
        let spec = NpqcSpec::full(4, 2).unwrap();
        let theta = spec.reference_params();
        let target = spec.param_circuit().unwrap().state(&theta).unwrap();
        let t = train(&spec, &theta, &target, &OptimizerConfig::default(), 0).unwrap();
        assert_eq!(t.records.len(), 1);
        assert!((t.records[0].fidelity - 1.0).abs() < 1e-12);
        assert_eq!(t.records[0].rate, 0.0);
    }

    #[test]
    fn train_is_deterministic() {
        let spec = NpqcSpec::full(6, 3).unwrap();
        let (_, target) = target_from_distance(&spec, 0.0, Some(0.2), 5).unwrap();
        for method in [Method::AdaptiveGa, Method::StandardGa, Method::Adam] {
            let cfg = OptimizerConfig {
                max_iters: 20,
                ..OptimizerConfig::with_method(method)
            };
            let a = train(&spec, &spec.reference_params(), &target, &cfg, 5).unwrap();
            let b = train(&spec, &spec.reference_params(), &target, &cfg, 5).unwrap();
            let strip = |t: &TrainTrace| {
                t.records
                    .iter()
                    .map(|r| (r.fidelity, r.grad_norm, r.rate))
                    .collect::<Vec<_>>()
            };
            assert_eq!(strip(&a), strip(&b));
            assert!(a.records.iter().all(|r| (0.0..=1.0 + 1e-12).contains(&r.fidelity)));
        }
    }

    #[test]
    fn adaptive_counts_probe_evaluations() {
        let spec = NpqcSpec::full(6, 3).unwrap();
        let (_, target) = target_from_distance(&spec, 0.0, Some(0.3), 1).unwrap();
        let cfg = OptimizerConfig {
            max_iters: 10,
            target_infidelity: 0.0,
            ..Default::default()
        };
        let t = train(&spec, &spec.reference_params(), &target, &cfg, 1).unwrap();
        assert_eq!(t.fidelity_evals, 3);
    }

    #[test]
    fn target_construction() {
        let spec = NpqcSpec::full(8, 4).unwrap();
        let (theta, _) = target_from_distance(&spec, 0.0, Some(1.0), 3).unwrap();
        assert_eq!(theta, spec.reference_params());
        let psi_r = spec.param_circuit().unwrap().state(&spec.reference_params()).unwrap();
        for seed in 0..20 {
            let (_, t) = target_from_distance(&spec, 0.0, Some(0.35), seed).unwrap();
            let f = fidelity(&psi_r, &t).unwrap();
            assert!((f - 0.35).abs() < 1e-4, "seed {seed}: {f}");
        }
        assert!(matches!(
            target_from_distance(&spec, 0.0, Some(1e-4), 0),
            Err(Error::Infeasible(_))
        ));
        let (theta, _) = target_from_distance(&spec, 1.5, None, 3).unwrap();
        assert!((theta.distance(&spec.reference_params()) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let pts: Vec<(f64, f64)> = [0.1, 0.3, 0.5, 0.9]
            .iter()
            .map(|&b: &f64| (b, 0.004 * (-(1.0 - b).ln()).powf(2.0)))
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.nu - 2.0).abs() < 1e-10);
        assert!((fit.c - 0.004).abs() < 1e-12);
        assert!(fit_power_law(&[(0.5, 0.0), (0.2, 0.0)]).is_none());
    }

    #[test]
    fn zero_infidelity_scan_row() {
        let spec = NpqcSpec::full(4, 2).unwrap();
        let r = single_step_scan(&spec, &[0.0, 0.3], Init::Reference, 3, 1, Exec::default()).unwrap();
        assert_eq!(r.rows[0].mean_infidelity_after, 0.0);
        assert!(r.rows[1].mean_infidelity_after < 0.3);
    }
}
