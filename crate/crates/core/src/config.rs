//! Run configuration (`config/v1`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::FusionConfig;
use crate::mapping::MappingConfig;
use crate::semantic::{sha256_hex, ProviderConfig};
use crate::sva::SignalFilter;

pub const CONFIG_SCHEMA: &str = "config/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub rtl_dir: PathBuf,
    pub assertions_file: PathBuf,
    pub spec_file: PathBuf,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            rtl_dir: "rtl".into(),
            assertions_file: "assertions.json".into(),
            spec_file: "spec.json".into(),
            out_dir: "out".into(),
            cache_dir: None,
        }
    }
}

impl Paths {
    /// Resolves relative paths against `base`.
    pub fn resolve(&mut self, base: &Path) {
        for p in [&mut self.rtl_dir, &mut self.assertions_file, &mut self.spec_file, &mut self.out_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(c) = &mut self.cache_dir {
            if c.is_relative() {
                *c = base.join(&*c);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    /// Every sub-spec must score strictly above this to stop.
    pub theta: f64,
    pub max_iterations: u32,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig { theta: 0.85, max_iterations: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub paths: Paths,
    pub provider: ProviderConfig,
    pub fusion: FusionConfig,
    pub mapping: MappingConfig,
    #[serde(rename = "loop")]
    pub loop_: LoopConfig,
    /// Names ignored when collecting assertion signals.
    pub ignored_signals: Vec<String>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: CONFIG_SCHEMA.into(),
            paths: Paths::default(),
            provider: ProviderConfig::default(),
            fusion: FusionConfig::default(),
            mapping: MappingConfig::default(),
            loop_: LoopConfig::default(),
            ignored_signals: SignalFilter::default().ubiquitous.into_iter().collect(),
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text, path)
    }

    /// Decodes and validates `text` as if it had been read from `path`.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        cfg.paths.resolve(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != CONFIG_SCHEMA {
            return Err(ConfigError::Invalid(format!("schema must be \"{CONFIG_SCHEMA}\", got \"{}\"", self.schema)));
        }
        self.provider.validate().map_err(ConfigError::Invalid)?;
        self.fusion.validate().map_err(ConfigError::Invalid)?;
        self.mapping.validate().map_err(ConfigError::Invalid)?;
        let t = self.loop_.theta;
        if !(t > 0.0 && t <= 1.0) {
            return Err(ConfigError::Invalid(format!("theta must be in (0, 1], got {t}")));
        }
        Ok(())
    }

    pub fn signal_filter(&self) -> SignalFilter {
        SignalFilter { ubiquitous: self.ignored_signals.iter().cloned().collect() }
    }

    /// Hash of every setting that affects results. File locations are
    /// excluded, so moving a checkout does not change it.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("paths");
        }
        sha256_hex(crate::canonical::to_string(&v).as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_losslessly() {
        let mut cfg = RunConfig::default();
        cfg.fusion.k_range = Some((2, 4));
        cfg.paths.cache_dir = Some("cache".into());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn hash_ignores_paths_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.out_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.fusion.tau = 14.0;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.loop_.theta = 0.9;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_bad_ranges() {
        let mut cfg = RunConfig::default();
        cfg.loop_.theta = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.mapping.alpha = 1.5;
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
