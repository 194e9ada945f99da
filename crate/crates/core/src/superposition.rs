//! Superposition-state synthesis in the Gaussian (`F = I`) model.
//!
//! Given a reference `θ_r`, a target `θ_t` and desired fidelities
//! `(K_rs, K_ts)` of a new state `ψ(θ_s)` to `ψ(θ_r)` and `ψ(θ_t)`, the model
//! `K(θ, θ') = exp(−|θ − θ'|²/4)` fixes `|θ_s − θ_r|` and the angle between
//! `θ_s − θ_r` and `θ_t − θ_r`; the remaining freedom is the direction
//! orthogonal to `θ_t − θ_r`.

use serde::{Deserialize, Serialize};

use crate::circuit::ParamCircuit;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::Ansatz;
use crate::npqc::{NpqcSpec, ParamVector};
use crate::rng;
use crate::statevec::fidelity;
use crate::train::target_near;
use rand::Rng as _;

/// Slack on `|cos φ| ≤ 1` before a request counts as infeasible.
pub const COS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperposeRequest {
    pub theta_r: ParamVector,
    pub theta_t: ParamVector,
    pub k_rs: f64,
    pub k_ts: f64,
}

impl SuperposeRequest {
    /// Rejects fidelities outside `(2^{−N}, 1]`: below the Haar floor the
    /// Gaussian model no longer describes the landscape.
    pub fn new(theta_r: ParamVector, theta_t: ParamVector, k_rs: f64, k_ts: f64, n_qubits: usize) -> Result<Self> {
        if theta_r.len() != theta_t.len() {
            return Err(Error::Shape {
                expected: theta_r.len(),
                got: theta_t.len(),
            });
        }
        let floor = 0.5f64.powi(n_qubits as i32);
        for (name, k) in [("K_rs", k_rs), ("K_ts", k_ts)] {
            if !(k > floor && k <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {k} outside ({floor}, 1]")));
            }
        }
        Ok(Self {
            theta_r,
            theta_t,
            k_rs,
            k_ts,
        })
    }

    pub fn dist_rt(&self) -> f64 {
        self.theta_r.distance(&self.theta_t)
    }
}

/// How to pick the unit vector orthogonal to `θ_t − θ_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerpChoice {
    /// Standard basis vector least aligned with `ê_∥`, projected and normalized.
    #[default]
    LeastAligned,
    /// Gaussian random vector, projected and normalized.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperposeResult {
    /// `None` for infeasible requests.
    pub theta_s: Option<ParamVector>,
    pub cos_angle: f64,
    pub feasible: bool,
    pub realized_k_rs: Option<f64>,
    pub realized_k_ts: Option<f64>,
    pub delta_c: Option<f64>,
}

/// Range of `K_ts` reachable for a given `K_rs` and `|θ_r − θ_t|`, clipped to `≤ 1`.
pub fn feasibility_bounds(k_rs: f64, dist_rt: f64) -> (f64, f64) {
    let s = dist_rt * (-k_rs.ln()).max(0.0).sqrt();
    let base = -dist_rt * dist_rt / 4.0;
    let lo = k_rs * (base - s).exp();
    let hi = k_rs * (base + s).exp();
    (lo.min(1.0), hi.min(1.0))
}

/// `cos φ = (4 log(K_ts/K_rs) + d²) / (4 d √(−log K_rs))`.
pub fn cos_angle(k_rs: f64, k_ts: f64, dist_rt: f64) -> f64 {
    (4.0 * (k_ts / k_rs).ln() + dist_rt * dist_rt) / (4.0 * dist_rt * (-k_rs.ln()).sqrt())
}

fn perpendicular(e_par: &[f64], choice: PerpChoice) -> Vec<f64> {
    let m = e_par.len();
    let mut v = match choice {
        PerpChoice::LeastAligned => {
            let k = (0..m)
                .min_by(|&a, &b| e_par[a].abs().total_cmp(&e_par[b].abs()))
                .unwrap_or(0);
            let mut v = vec![0.0; m];
            v[k] = 1.0;
            v
        }
        PerpChoice::Random(seed) => {
            let mut g = rng::stream(seed, 0);
            rng::unit_vector(&mut g, m)
        }
    };
    let dot: f64 = v.iter().zip(e_par).map(|(a, b)| a * b).sum();
    for (x, e) in v.iter_mut().zip(e_par) {
        *x -= dot * e;
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn solve_superposition(req: &SuperposeRequest) -> Result<SuperposeResult> {
    solve_superposition_with(req, PerpChoice::default())
}

/// Analytic `θ_s`; infeasible requests come back flagged, without `θ_s`.
pub fn solve_superposition_with(req: &SuperposeRequest, perp: PerpChoice) -> Result<SuperposeResult> {
    let m = req.theta_r.len();
    if req.theta_t.len() != m {
        return Err(Error::Shape {
            expected: m,
            got: req.theta_t.len(),
        });
    }
    let unrealized = |theta_s: Option<ParamVector>, cos_angle: f64, feasible: bool| SuperposeResult {
        theta_s,
        cos_angle,
        feasible,
        realized_k_rs: None,
        realized_k_ts: None,
        delta_c: None,
    };
    // Zero-length step: θ_s = θ_r whatever K_ts asks for.
    if req.k_rs >= 1.0 {
        return Ok(unrealized(Some(req.theta_r.clone()), 1.0, true));
    }
    let d_rs = 2.0 * (-req.k_rs.ln()).sqrt();
    let d_rt = req.dist_rt();
    let delta_rt: Vec<f64> = req.theta_t.iter().zip(req.theta_r.iter()).map(|(t, r)| t - r).collect();

    if d_rt == 0.0 {
        if (req.k_ts - req.k_rs).abs() > COS_TOLERANCE {
            return Err(Error::DegenerateTarget);
        }
        // Any direction works; reuse the orthogonal construction against e₁.
        let mut e1 = vec![0.0; m];
        if let Some(x) = e1.first_mut() {
            *x = 1.0;
        }
        let dir = if m > 1 { perpendicular(&e1, perp) } else { e1 };
        return Ok(unrealized(Some(req.theta_r.offset(&dir, d_rs)), 0.0, true));
    }

    let c = cos_angle(req.k_rs, req.k_ts, d_rt);
    if !c.is_finite() || c.abs() > 1.0 + COS_TOLERANCE {
        return Ok(unrealized(None, c, false));
    }
    let c = c.clamp(-1.0, 1.0);
    let s = (1.0 - c * c).max(0.0).sqrt();
    let e_par: Vec<f64> = delta_rt.iter().map(|x| x / d_rt).collect();
    let e_perp = if m > 1 { perpendicular(&e_par, perp) } else { vec![0.0] };
    let dir: Vec<f64> = e_par.iter().zip(&e_perp).map(|(a, b)| c * a + s * b).collect();
    Ok(unrealized(Some(req.theta_r.offset(&dir, d_rs)), c, true))
}

/// Gaussian-model fidelities of `θ_s` to `θ_r` and `θ_t`.
pub fn model_fidelities(req: &SuperposeRequest, theta_s: &[f64]) -> (f64, f64) {
    let g = |a: &ParamVector| (-a.distance(theta_s).powi(2) / 4.0).exp();
    (g(&req.theta_r), g(&req.theta_t))
}

/// `ΔC = |K_rs − K'_rs| + |K_ts − K'_ts|` from simulated fidelities.
pub fn superposition_error(ansatz: &impl Ansatz, result: &SuperposeResult, req: &SuperposeRequest) -> Result<f64> {
    let (k_rs, k_ts) = realized_fidelities(&ansatz.param_circuit()?, result, req)?;
    Ok((req.k_rs - k_rs).abs() + (req.k_ts - k_ts).abs())
}

fn realized_fidelities(circuit: &ParamCircuit, result: &SuperposeResult, req: &SuperposeRequest) -> Result<(f64, f64)> {
    let theta_s = result
        .theta_s
        .as_ref()
        .ok_or_else(|| Error::Infeasible("no θ_s for an infeasible request".into()))?;
    let psi_s = circuit.state(theta_s)?;
    Ok((
        fidelity(&psi_s, &circuit.state(&req.theta_r)?)?,
        fidelity(&psi_s, &circuit.state(&req.theta_t)?)?,
    ))
}

/// Solves and, when feasible, fills in the realized fidelities and `ΔC`.
pub fn synthesize(ansatz: &impl Ansatz, req: &SuperposeRequest, perp: PerpChoice) -> Result<SuperposeResult> {
    let mut result = solve_superposition_with(req, perp)?;
    if result.feasible {
        let (k_rs, k_ts) = realized_fidelities(&ansatz.param_circuit()?, &result, req)?;
        result.realized_k_rs = Some(k_rs);
        result.realized_k_ts = Some(k_ts);
        result.delta_c = Some((req.k_rs - k_rs).abs() + (req.k_ts - k_ts).abs());
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub instance: usize,
    pub k_rs: f64,
    pub k_ts: f64,
    pub cos_angle: f64,
    pub feasible: bool,
    pub delta_c: Option<f64>,
    pub m: usize,
    pub dk_rt: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Target infidelity `1 − |⟨ψ(θ_r)|ψ(θ_t)⟩|²`.
    pub dk_rt: f64,
    /// Independent targets `θ_t`.
    pub targets: usize,
    /// Random `(K_rs, K_ts) ~ U(2^{−N}, 1]²` requests per target.
    pub requests: usize,
    /// When set, replaces the random requests by a `G×G` grid on `(2^{−N}, 1]²`.
    pub grid: Option<usize>,
    /// `Random(s)` draws a fresh direction per row from `s` and the row index.
    pub perp: PerpChoice,
    pub seed: u64,
}

/// Random requests around random targets at fixed `ΔK_t(θ_r)`. Rows are
/// ordered by `(target, request)`; `instance = target · requests + request`.
pub fn superposition_sweep(spec: &NpqcSpec, config: &SweepConfig, exec: Exec) -> Result<Vec<SweepRow>> {
    if !(config.dk_rt >= 0.0 && config.dk_rt < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "ΔK_t(θ_r) = {} outside [0, 1)",
            config.dk_rt
        )));
    }
    let circuit = spec.param_circuit()?;
    let theta_r = spec.reference_params();
    let floor = 0.5f64.powi(spec.n_qubits() as i32);
    let m = spec.num_params();
    let grid: Option<Vec<(f64, f64)>> = config.grid.map(|g| {
        let k = |i: usize| floor + (1.0 - floor) * (i + 1) as f64 / g as f64;
        (0..g).flat_map(|a| (0..g).map(move |b| (k(a), k(b)))).collect()
    });
    let per_target_count = grid.as_ref().map_or(config.requests, Vec::len);
    let per_target = exec.try_map(config.targets, |t| -> Result<Vec<SweepRow>> {
        let mut g = rng::stream(config.seed, t as u64);
        let (theta_t, _) = target_near(&circuit, &theta_r, 0.0, Some(1.0 - config.dk_rt), &mut g)?;
        (0..per_target_count)
            .map(|j| {
                let (k_rs, k_ts) = match &grid {
                    Some(points) => points[j],
                    None => {
                        // 1 − U[0,1) lies in (0, 1], so both draws land in (floor, 1].
                        let mut draw = || floor + (1.0 - floor) * (1.0 - g.random::<f64>());
                        (draw(), draw())
                    }
                };
                let req = SuperposeRequest::new(theta_r.clone(), theta_t.clone(), k_rs, k_ts, spec.n_qubits())?;
                let instance = t * per_target_count + j;
                let perp = match config.perp {
                    PerpChoice::LeastAligned => PerpChoice::LeastAligned,
                    PerpChoice::Random(s) => {
                        PerpChoice::Random(s.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(instance as u64))
                    }
                };
                let res = synthesize(&circuit, &req, perp)?;
                Ok(SweepRow {
                    instance,
                    k_rs: req.k_rs,
                    k_ts: req.k_ts,
                    cos_angle: res.cos_angle,
                    feasible: res.feasible,
                    delta_c: res.delta_c,
                    m,
                    dk_rt: config.dk_rt,
                    seed: config.seed,
                })
            })
            .collect()
    })?;
    Ok(per_target.into_iter().flatten().collect())
}
