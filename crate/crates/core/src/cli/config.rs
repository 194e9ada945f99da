use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CliError, PerpMode};
use crate::npqc::{NpqcSpec, Variant};
use crate::train::{Init, Method, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaMode {
    Reference,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QfimJob {
    pub n: usize,
    pub p: usize,
    pub variant: Variant,
    pub theta: ThetaMode,
    pub seed: u64,
}

impl Default for QfimJob {
    fn default() -> Self {
        Self {
            n: 6,
            p: 3,
            variant: Variant::Full,
            theta: ThetaMode::Reference,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainJob {
    pub n: usize,
    pub p: usize,
    pub init: Init,
    pub infidelity: f64,
    pub methods: Vec<Method>,
    pub seeds: usize,
    pub threshold: f64,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for TrainJob {
    fn default() -> Self {
        Self {
            n: 10,
            p: 10,
            init: Init::Reference,
            infidelity: 0.9,
            methods: vec![Method::AdaptiveGa, Method::StandardGa, Method::Adam],
            seeds: 10,
            threshold: 1e-2,
            optimizer: OptimizerConfig {
                max_iters: 200,
                ..OptimizerConfig::default()
            },
            seed: 0,
        }
    }
}

/// `10^(−6 + j/2)` for `j = 0..11`, plus `10^(−0.1)`.
pub fn default_scan_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..12).map(|j| 10f64.powf(-6.0 + 0.5 * j as f64)).collect();
    g.push(10f64.powf(-0.1));
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanJob {
    pub n: usize,
    pub p: usize,
    pub inits: Vec<Init>,
    pub infidelities: Vec<f64>,
    pub seeds: usize,
    pub seed: u64,
}

impl Default for ScanJob {
    fn default() -> Self {
        Self {
            n: 10,
            p: 10,
            inits: vec![Init::Reference, Init::Random],
            infidelities: default_scan_grid(),
            seeds: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SenseJob {
    pub n: usize,
    pub p: usize,
    pub norms: Vec<f64>,
    pub shots: Vec<u64>,
    pub exact: bool,
    pub instances: usize,
    pub crao_draws: usize,
    pub seed: u64,
}

impl Default for SenseJob {
    fn default() -> Self {
        Self {
            n: 8,
            p: 4,
            norms: vec![0.1],
            shots: vec![100, 1_000, 10_000, 100_000, 1_000_000],
            exact: true,
            instances: 20,
            crao_draws: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperposeJob {
    pub n: usize,
    pub layers: Vec<usize>,
    pub infidelities: Vec<f64>,
    pub targets: usize,
    pub requests: usize,
    pub grid: Option<usize>,
    pub perp: PerpMode,
    pub seed: u64,
}

impl Default for SuperposeJob {
    fn default() -> Self {
        Self {
            n: 10,
            layers: vec![10],
            infidelities: vec![0.8],
            targets: 5,
            requests: 20,
            grid: None,
            perp: PerpMode::Random,
            seed: 0,
        }
    }
}

/// Odd or tiny qubit counts are usage errors; depth and capacity problems
/// surface from `NpqcSpec::new` with their own exit codes.
pub(crate) fn build_spec(n: usize, p: usize, variant: Variant) -> Result<NpqcSpec, CliError> {
    if n < 2 || n % 2 == 1 {
        return Err(CliError::Usage(format!("--n must be even and at least 2, got {n}")));
    }
    if p == 0 {
        return Err(CliError::Usage("--p must be at least 1".into()));
    }
    Ok(NpqcSpec::new(n, p, variant)?)
}

/// Loads a job from a JSON file or from the `#` header of an output CSV.
/// Either the bare job object or a full header `{"command", "config", …}` is
/// accepted; a header for another command is a usage error.
pub(crate) fn load<T: DeserializeOwned + Default>(path: Option<&Path>, command: &str) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)?;
    let trimmed = text.trim_start();
    let json = match trimmed.strip_prefix('#') {
        Some(rest) => rest.lines().next().unwrap_or(""),
        None => trimmed,
    };
    let value: serde_json::Value = serde_json::from_str(json)?;
    let body = match value.get("config") {
        Some(cfg) if value.get("command").is_some() => {
            let found = value["command"].as_str().unwrap_or("");
            if found != command {
                return Err(CliError::Usage(format!(
                    "{} holds a `{found}` config, not `{command}`",
                    path.display()
                )));
            }
            cfg.clone()
        }
        _ => value,
    };
    Ok(serde_json::from_value(body)?)
}
