use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ghgrl_core::util::sha256_hex;
use serde::Serialize;

use crate::error::CliError;

/// Provenance record written beside every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub schema_digest: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: BTreeMap<String, String>,
    pub started_at: u64,
    pub finished_at: u64,
}

/// Unix seconds, pinned by `SOURCE_DATE_EPOCH` when it is set.
pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&[&bytes]))
}

pub struct ManifestBuilder {
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Self {
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
                inputs: BTreeMap::new(),
                schema_digest: None,
                seeds: BTreeMap::new(),
                outputs: BTreeMap::new(),
                started_at: timestamp(),
                finished_at: 0,
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = file_digest(path)?;
        self.manifest.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn schema(&mut self, path: &Path) -> Result<(), CliError> {
        self.input(path)?;
        self.manifest.schema_digest = Some(file_digest(path)?);
        Ok(())
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.to_string(), value);
    }

    /// Records the outputs and writes `<primary>.manifest.json`.
    pub fn finish(mut self, outputs: &[&Path]) -> Result<PathBuf, CliError> {
        for p in outputs {
            let digest = file_digest(p)?;
            self.manifest.outputs.insert(p.display().to_string(), digest);
        }
        self.manifest.finished_at = timestamp();
        let primary = outputs.first().ok_or_else(|| CliError::Data("command produced no output".into()))?;
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_digests_and_lands_beside_output() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let output = dir.path().join("out.txt");
        std::fs::write(&input, "abc").unwrap();
        std::fs::write(&output, "xyz").unwrap();
        let mut b = ManifestBuilder::new("test", &serde_json::json!({"k": 1}));
        b.input(&input).unwrap();
        b.seed("seed", 7);
        let path = b.finish(&[&output]).unwrap();
        assert_eq!(path, dir.path().join("out.txt.manifest.json"));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(
            v["inputs"][input.display().to_string()],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(v["seeds"]["seed"], 7);
        assert_eq!(v["config"]["k"], 1);
    }
}
