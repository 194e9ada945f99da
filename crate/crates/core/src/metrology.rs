//! Multi-parameter sensing with the Y-only NPQC.
//!
//! At `θ_r` every gradient state of the Y-only circuit is `±½` times a
//! distinct computational basis state `|v_i⟩`. Encoding a small shift `Δθ`
//! and measuring in the computational basis therefore gives
//! `P(v_i) ≈ Δθ_i²/4`, from which `|Δθ_i| ≈ 2√P(v_i)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{gradient_states_with, qfim_with, Ansatz, QfimMatrix};
use crate::npqc::{prepare_y_state, NpqcSpec, Variant};
use crate::rng;
use crate::statevec::{sample_probabilities, StateVector};

/// Minimum share of a gradient state's norm on its basis index.
pub const CONCENTRATION: f64 = 0.999;
/// Tolerance on the `½` amplitude of each gradient state.
pub const AMPLITUDE_TOLERANCE: f64 = 1e-6;
/// Slack for the Cramér-Rao trace inequalities.
pub const CRAO_EPS: f64 = 1e-6;

/// Basis index `v_i` carrying parameter `i` at first order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisIndexMap {
    pub n_qubits: usize,
    pub v: Vec<usize>,
}

impl BasisIndexMap {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

pub fn basis_index_map(spec: &NpqcSpec) -> Result<BasisIndexMap> {
    basis_index_map_with(spec, Exec::default())
}

pub fn basis_index_map_with(spec: &NpqcSpec, exec: Exec) -> Result<BasisIndexMap> {
    if spec.variant() != Variant::YOnly {
        return Err(Error::Variant { expected: "Y_ONLY" });
    }
    let grads = gradient_states_with(spec, &spec.reference_params(), exec)?;
    let mut v = Vec::with_capacity(grads.len());
    for (i, g) in grads.states.iter().enumerate() {
        let (idx, peak) = g
            .amplitudes()
            .iter()
            .map(|a| a.norm_sqr())
            .enumerate()
            .fold((0, -1.0), |best, (j, p)| if p > best.1 { (j, p) } else { best });
        let total = g.norm_sqr();
        if !(total > 0.0) || peak / total < CONCENTRATION {
            return Err(Error::Protocol {
                index: i,
                reason: format!("gradient state not concentrated ({:.6} on index {idx})", peak / total),
            });
        }
        if (peak.sqrt() - 0.5).abs() > AMPLITUDE_TOLERANCE {
            return Err(Error::Protocol {
                index: i,
                reason: format!("amplitude {} is not 1/2", peak.sqrt()),
            });
        }
        v.push(idx);
    }
    let mut seen = BTreeSet::new();
    for (i, &idx) in v.iter().enumerate() {
        if idx == 0 {
            return Err(Error::Collision(format!("parameter {i} maps to |0…0⟩")));
        }
        if !seen.insert(idx) {
            return Err(Error::Collision(format!(
                "basis index {idx} shared by several parameters"
            )));
        }
    }
    Ok(BasisIndexMap {
        n_qubits: spec.n_qubits(),
        v,
    })
}

/// Sensor state `U_y(θ_r + Δθ)|0⟩` (dressed, so `Δθ = 0` gives `|0…0⟩`).
pub fn encode(spec: &NpqcSpec, delta: &[f64]) -> Result<StateVector> {
    let m = spec.num_params();
    if delta.len() != m {
        return Err(Error::Shape {
            expected: m,
            got: delta.len(),
        });
    }
    let theta = spec.reference_params().offset(delta, 1.0);
    prepare_y_state(spec, &theta)
}

/// `|Δθ_i|' = 2√(count(v_i)/n)`; absent indices give 0.
pub fn estimate(counts: &BTreeMap<usize, u64>, map: &BasisIndexMap, n: u64) -> Vec<f64> {
    let n = n.max(1) as f64;
    map.v
        .iter()
        .map(|idx| 2.0 * (counts.get(idx).copied().unwrap_or(0) as f64 / n).sqrt())
        .collect()
}

/// Infinite-shot limit: `2√P(v_i)` from exact probabilities.
pub fn estimate_exact(probs: &[f64], map: &BasisIndexMap) -> Vec<f64> {
    map.v.iter().map(|&idx| 2.0 * probs[idx].max(0.0).sqrt()).collect()
}

/// Probability mass outside `{0} ∪ {v_i}`.
fn leakage(probs: impl Iterator<Item = (usize, f64)>, map: &BasisIndexMap) -> f64 {
    let keep: BTreeSet<usize> = map.v.iter().copied().chain([0]).collect();
    probs
        .filter(|(i, _)| !keep.contains(i))
        .fold(0.0, |acc, (_, p)| acc + p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseConfig {
    pub norms: Vec<f64>,
    pub shots: Vec<u64>,
    /// Adds the exact-probability row (`shots = None`).
    pub exact: bool,
    pub instances: usize,
    pub seed: u64,
}

/// One sensing run: a random `Δθ` of fixed norm, estimated from `shots`
/// samples (`None` = exact probabilities).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SenseReport {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub m: usize,
    pub norm_dtheta: f64,
    pub shots: Option<u64>,
    pub instance: usize,
    pub seed: u64,
    pub delta: Vec<f64>,
    pub estimate: Vec<f64>,
    pub sq_errors: Vec<f64>,
    /// `√⟨(|Δθ_i|' − |Δθ_i|)²⟩ / ⟨|Δθ_i|⟩` over the entries of this instance.
    pub rel_rmse: f64,
    pub leakage_fraction: f64,
}

/// Mean over instances for one `(|Δθ|, shots)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SenseSummary {
    pub norm_dtheta: f64,
    pub shots: Option<u64>,
    pub instances: usize,
    /// Pooled `√⟨(|Δθ_i|' − |Δθ_i|)²⟩` over entries and instances.
    pub rmse: f64,
    /// `rmse / ⟨|Δθ_i|⟩`, same pooling.
    pub rel_rmse: f64,
    pub max_abs_error: f64,
    pub leakage_fraction: f64,
}

/// Random shift of the given norm; uniform direction on the sphere.
pub fn random_shift(m: usize, norm: f64, seed: u64, instance: u64) -> Vec<f64> {
    let mut g = rng::substream(seed, instance, 0);
    rng::unit_vector(&mut g, m).into_iter().map(|x| x * norm).collect()
}

/// One report per `(norm, shot budget, instance)`, in that nesting order.
/// Instance `k` uses the same direction for every norm and budget; each
/// budget samples from a stream keyed by `(norm, instance, budget)`.
pub fn sense_experiment(spec: &NpqcSpec, config: &SenseConfig, exec: Exec) -> Result<Vec<SenseReport>> {
    if config.norms.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "shift norms must be finite and non-negative".into(),
        ));
    }
    if config.shots.contains(&0) {
        return Err(Error::InvalidArgument("shot budgets must be at least 1".into()));
    }
    let map = basis_index_map_with(spec, exec)?;
    let m = map.len();
    let budgets: Vec<Option<u64>> = config
        .shots
        .iter()
        .copied()
        .map(Some)
        .chain(config.exact.then_some(None))
        .collect();
    let cells: Vec<(usize, usize)> = (0..config.norms.len())
        .flat_map(|a| (0..config.instances).map(move |b| (a, b)))
        .collect();

    // The state is shared by every budget of an instance; build it once.
    let per_cell = exec.try_map(cells.len(), |c| -> Result<Vec<SenseReport>> {
        let (ni, inst) = cells[c];
        let norm = config.norms[ni];
        // Directions depend only on the instance, so norms are comparable;
        // sampling streams live above every direction stream.
        let delta = random_shift(m, norm, config.seed, inst as u64);
        let salt = (ni as u64 + 1) << 32 | inst as u64;
        let probs = encode(spec, &delta)?.probabilities();
        let truth: Vec<f64> = delta.iter().map(|d| d.abs()).collect();
        budgets
            .iter()
            .map(|&shots| {
                let (est, leak) = match shots {
                    None => (
                        estimate_exact(&probs, &map),
                        leakage(probs.iter().copied().enumerate(), &map),
                    ),
                    Some(n) => {
                        let mut g = rng::substream(config.seed, salt, n);
                        let counts = sample_probabilities(&probs, n, &mut g)?;
                        let leaked = leakage(counts.iter().map(|(&i, &k)| (i, k as f64)), &map);
                        (estimate(&counts, &map, n), leaked / n as f64)
                    }
                };
                let sq_errors: Vec<f64> = est.iter().zip(&truth).map(|(e, t)| (e - t).powi(2)).collect();
                Ok(SenseReport {
                    n_qubits: spec.n_qubits(),
                    n_layers: spec.n_layers(),
                    m,
                    norm_dtheta: norm,
                    shots,
                    instance: inst,
                    seed: config.seed,
                    rel_rmse: relative_rmse(&sq_errors, &truth),
                    leakage_fraction: leak,
                    delta: delta.clone(),
                    estimate: est,
                    sq_errors,
                })
            })
            .collect()
    })?;

    // Reorder from (norm, instance, budget) to (norm, budget, instance).
    let mut by_cell: Vec<std::vec::IntoIter<SenseReport>> = per_cell.into_iter().map(Vec::into_iter).collect();
    let mut out = Vec::with_capacity(cells.len() * budgets.len());
    for ni in 0..config.norms.len() {
        for _ in 0..budgets.len() {
            for inst in 0..config.instances {
                out.extend(by_cell[ni * config.instances + inst].next());
            }
        }
    }
    Ok(out)
}

fn relative_rmse(sq_errors: &[f64], truth: &[f64]) -> f64 {
    if sq_errors.is_empty() {
        return 0.0;
    }
    let rmse = (sq_errors.iter().sum::<f64>() / sq_errors.len() as f64).sqrt();
    let scale = truth.iter().sum::<f64>() / truth.len() as f64;
    if scale > 0.0 {
        rmse / scale
    } else {
        0.0
    }
}

/// Groups reports by `(norm, shots)` preserving first-seen order.
pub fn summarize(reports: &[SenseReport]) -> Vec<SenseSummary> {
    let mut keys: Vec<(f64, Option<u64>)> = Vec::new();
    for r in reports {
        if !keys.iter().any(|&(n, s)| n == r.norm_dtheta && s == r.shots) {
            keys.push((r.norm_dtheta, r.shots));
        }
    }
    keys.into_iter()
        .map(|(norm, shots)| {
            let group: Vec<&SenseReport> = reports
                .iter()
                .filter(|r| r.norm_dtheta == norm && r.shots == shots)
                .collect();
            let sq: Vec<f64> = group.iter().flat_map(|r| r.sq_errors.iter().copied()).collect();
            let truth: Vec<f64> = group.iter().flat_map(|r| r.delta.iter().map(|d| d.abs())).collect();
            SenseSummary {
                norm_dtheta: norm,
                shots,
                instances: group.len(),
                rmse: (sq.iter().sum::<f64>() / sq.len().max(1) as f64).sqrt(),
                rel_rmse: relative_rmse(&sq, &truth),
                max_abs_error: sq.iter().fold(0.0_f64, |a, &e| a.max(e.sqrt())),
                leakage_fraction: group.iter().map(|r| r.leakage_fraction).sum::<f64>() / group.len().max(1) as f64,
            }
        })
        .collect()
}

/// Trace bounds of the quantum Cramér-Rao limit for Pauli-rotation circuits:
/// `Tr F ≤ M` and, at full rank, `Tr F⁻¹ ≥ M²/Tr F ≥ M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CraoReport {
    pub m: usize,
    pub rank: usize,
    pub trace: f64,
    pub inverse_trace: Option<f64>,
    pub min_eigenvalue: f64,
    pub trace_ok: bool,
    /// `None` when `F` is rank deficient.
    pub inverse_ok: Option<bool>,
}

impl CraoReport {
    pub fn passed(&self) -> bool {
        self.trace_ok && self.inverse_ok.unwrap_or(true)
    }
}

pub fn crao_bounds(f: &QfimMatrix) -> CraoReport {
    let m = f.dim();
    let mf = m as f64;
    let trace = f.trace();
    let rank = f.rank();
    let inverse_trace = if rank == m { f.inverse_trace() } else { None };
    let inverse_ok = inverse_trace.map(|inv| {
        let lemma = mf * mf / trace;
        inv >= lemma - CRAO_EPS && lemma >= mf - CRAO_EPS
    });
    CraoReport {
        m,
        rank,
        trace,
        inverse_trace,
        min_eigenvalue: f.min_eigenvalue(),
        trace_ok: trace <= mf + CRAO_EPS,
        inverse_ok,
    }
}

pub fn crao_check(ansatz: &impl Ansatz, theta: &[f64]) -> Result<CraoReport> {
    crao_check_with(ansatz, theta, Exec::default())
}

pub fn crao_check_with(ansatz: &impl Ansatz, theta: &[f64], exec: Exec) -> Result<CraoReport> {
    Ok(crao_bounds(&qfim_with(ansatz, theta, exec)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_arithmetic() {
        let map = BasisIndexMap {
            n_qubits: 4,
            v: vec![3, 5, 6, 9],
        };
        let all_zero = BTreeMap::from([(0, 400)]);
        assert_eq!(estimate(&all_zero, &map, 400), vec![0.0; 4]);
        let counts = BTreeMap::from([(6, 100), (0, 300)]);
        assert_eq!(estimate(&counts, &map, 400), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn toy_lemma_equality() {
        let f = QfimMatrix::from_fn(2, |i, j| if i == j { 0.5 } else { 0.0 });
        let r = crao_bounds(&f);
        assert!((r.inverse_trace.unwrap() - 4.0).abs() < 1e-12);
        assert!(r.trace_ok && r.inverse_ok == Some(true));
    }

    #[test]
    fn rank_deficient_skips_inverse() {
        let f = QfimMatrix::from_fn(2, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
        let r = crao_bounds(&f);
        assert_eq!(r.rank, 1);
        assert_eq!(r.inverse_ok, None);
        assert!(r.passed());
    }

    #[test]
    fn full_variant_rejected() {
        let spec = NpqcSpec::full(4, 2).unwrap();
        assert!(matches!(basis_index_map(&spec), Err(Error::Variant { .. })));
    }

    #[test]
    fn zero_shift_has_no_error() {
        let spec = NpqcSpec::y_only(4, 2).unwrap();
        let cfg = SenseConfig {
            norms: vec![0.0],
            shots: vec![],
            exact: true,
            instances: 2,
            seed: 1,
        };
        let reports = sense_experiment(&spec, &cfg, Exec::Sequential).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports
            .iter()
            .all(|r| r.rel_rmse == 0.0 && r.sq_errors.iter().all(|&e| e < 1e-28)));
    }
}
