use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::CliError;

/// Header object: command, job config, crate version and derived metadata.
pub(crate) fn header(command: &str, config: &impl Serialize, extra: Value) -> Result<Value, CliError> {
    let mut obj = Map::new();
    obj.insert("command".into(), json!(command));
    obj.insert("config".into(), serde_json::to_value(config)?);
    obj.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    if let Value::Object(extra) = extra {
        obj.extend(extra);
    }
    Ok(Value::Object(obj))
}

/// Writes `# <header>` followed by a CSV table of `rows`.
pub(crate) fn write_csv<R: Serialize>(
    dir: &Path,
    name: &str,
    header: &Value,
    rows: impl IntoIterator<Item = R>,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut file = BufWriter::new(File::create(&path)?);
    writeln!(file, "# {}", serde_json::to_string(header)?)?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path)
}

/// SHA-256 over the little-endian bytes of `θ`.
pub(crate) fn theta_hash(theta: &[f64]) -> String {
    let mut h = Sha256::new();
    for x in theta {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}
