//! On-disk embedding cache: `<dir>/<sha256(text)>.json`, one entry per
//! text, tagged with the model that produced it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    model: String,
    text: String,
    embedding: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl EmbeddingCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(EmbeddingCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, text: &str) -> PathBuf {
        self.dir.join(format!("{}.json", sha256_hex(text.as_bytes())))
    }

    /// Cached vector for `(model, text)` with the expected width, if any.
    pub fn get(&self, model: &str, text: &str, dim: usize) -> Option<Vec<f64>> {
        let raw = fs::read_to_string(self.path(text)).ok()?;
        let entry: Entry = serde_json::from_str(&raw).ok()?;
        (entry.model == model && entry.text == text && entry.embedding.len() == dim).then_some(entry.embedding)
    }

    /// Writes through a temporary file and renames it into place.
    pub fn put(&self, model: &str, text: &str, embedding: &[f64]) -> std::io::Result<()> {
        let entry = Entry { model: model.to_string(), text: text.to_string(), embedding: embedding.to_vec() };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(serde_json::to_string(&entry)?.as_bytes())?;
        tmp.persist(self.path(text)).map_err(|e| e.error)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_and_model_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::open(dir.path().join("c")).unwrap();
        assert!(cache.get("m", "hello", 2).is_none());
        cache.put("m", "hello", &[0.6, 0.8]).unwrap();
        assert_eq!(cache.get("m", "hello", 2), Some(vec![0.6, 0.8]));
        assert!(cache.get("other", "hello", 2).is_none());
        assert!(cache.get("m", "hello", 3).is_none());
        let name = format!("{}.json", sha256_hex(b"hello"));
        assert!(dir.path().join("c").join(name).exists());
    }
}
