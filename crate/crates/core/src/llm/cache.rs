//! Content-addressed on-disk cache of node annotations.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{NodeAnnotation, PromptTemplates, TypeSchema};
use crate::util::sha256_hex;

pub const ENV_CACHE_DIR: &str = "GHGRL_CACHE_DIR";

/// One JSON file per key. Writes go through a temporary file and an atomic
/// rename, so concurrent writers of the same key never expose a torn file.
#[derive(Debug, Clone)]
pub struct AnnotationCache {
    dir: PathBuf,
}

impl AnnotationCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex SHA-256 of `version ‖ schema JSON ‖ attribute`.
    pub fn key(templates: &PromptTemplates, schema: &TypeSchema, attribute: &str) -> String {
        let schema_bytes = serde_json::to_vec(schema).expect("schema serializes");
        sha256_hex(&[templates.version.as_bytes(), &schema_bytes, attribute.as_bytes()])
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Unreadable or corrupt entries are treated as misses.
    pub fn get(&self, key: &str) -> Option<NodeAnnotation> {
        let bytes = std::fs::read(self.path(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put(&self, key: &str, annotation: &NodeAnnotation) -> std::io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer(&mut tmp, annotation)?;
        tmp.flush()?;
        tmp.persist(self.path(key)).map_err(|e| e.error)?;
        Ok(())
    }
}
