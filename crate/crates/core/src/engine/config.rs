use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CRASH_MARKERS: &[&str] =
    &["Segmentation fault", "core dumped", "AddressSanitizer"];
pub const DEFAULT_TIMEOUT_SECS: f64 = 60.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("test_command must not be empty")]
    EmptyTestCommand,
    #[error("timeout must be positive")]
    NonPositiveTimeout,
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error("corpus root {0} is not a directory")]
    CorpusNotFound(PathBuf),
    #[error("workspace root {workspace} lies inside corpus root {corpus}")]
    WorkspaceInsideCorpus { workspace: PathBuf, corpus: PathBuf },
}

/// Settings as written in a config file; every field is optional so that
/// command-line flags and defaults can fill the gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus_root: Option<PathBuf>,
    pub build_command: Option<Vec<String>>,
    pub test_command: Option<Vec<String>>,
    pub timeout_secs: Option<f64>,
    pub workers: Option<usize>,
    pub workspace_root: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub include: Option<Vec<String>>,
    pub exclude: Option<Vec<String>>,
    pub crash_markers: Option<Vec<String>>,
    pub max_block: Option<usize>,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Parses a TOML config. Relative paths are resolved against the
    /// directory holding the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ConfigFile = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_relative(base);
        Ok(cfg)
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        for p in [
            &mut self.corpus_root,
            &mut self.workspace_root,
            &mut self.store,
            &mut self.catalog,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus_root: PathBuf,
    /// Empty means there is no build step.
    pub build_command: Vec<String>,
    pub test_command: Vec<String>,
    pub timeout: Duration,
    pub workers: usize,
    pub workspace_root: PathBuf,
    pub env: BTreeMap<String, String>,
    pub crash_markers: Vec<String>,
}

impl RunConfig {
    pub fn new(corpus_root: PathBuf, test_command: Vec<String>, workspace_root: PathBuf) -> Self {
        Self {
            corpus_root,
            build_command: Vec::new(),
            test_command,
            timeout: Duration::from_secs_f64(DEFAULT_TIMEOUT_SECS),
            workers: 1,
            workspace_root,
            env: BTreeMap::new(),
            crash_markers: DEFAULT_CRASH_MARKERS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    /// Builds a config from file settings, taking `workspace_root` from the
    /// file or else `default_workspace`.
    pub fn from_file(
        file: &ConfigFile,
        default_workspace: Option<PathBuf>,
    ) -> Result<Self, ConfigError> {
        let corpus_root = file
            .corpus_root
            .clone()
            .ok_or(ConfigError::Missing("corpus_root"))?;
        let test_command = file
            .test_command
            .clone()
            .ok_or(ConfigError::Missing("test_command"))?;
        let workspace_root = file
            .workspace_root
            .clone()
            .or(default_workspace)
            .ok_or(ConfigError::Missing("workspace_root"))?;
        let mut cfg = Self::new(corpus_root, test_command, workspace_root);
        if let Some(b) = &file.build_command {
            cfg.build_command = b.clone();
        }
        if let Some(t) = file.timeout_secs {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::NonPositiveTimeout);
            }
            cfg.timeout = Duration::from_secs_f64(t);
        }
        if let Some(w) = file.workers {
            cfg.workers = w;
        }
        if let Some(m) = &file.crash_markers {
            cfg.crash_markers = m.clone();
        }
        cfg.env = file.env.clone();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.test_command.is_empty() {
            return Err(ConfigError::EmptyTestCommand);
        }
        if self.timeout.is_zero() {
            return Err(ConfigError::NonPositiveTimeout);
        }
        if self.workers == 0 {
            return Err(ConfigError::NoWorkers);
        }
        if !self.corpus_root.is_dir() {
            return Err(ConfigError::CorpusNotFound(self.corpus_root.clone()));
        }
        let corpus = self
            .corpus_root
            .canonicalize()
            .map_err(|source| ConfigError::Io {
                path: self.corpus_root.clone(),
                source,
            })?;
        let workspace = absolute_lexical(&self.workspace_root);
        if workspace.starts_with(&corpus) {
            return Err(ConfigError::WorkspaceInsideCorpus { workspace, corpus });
        }
        Ok(())
    }
}

/// Canonicalizes the longest existing ancestor and appends the rest.
fn absolute_lexical(path: &Path) -> PathBuf {
    let mut existing = path.to_path_buf();
    let mut rest = Vec::new();
    loop {
        if let Ok(c) = existing.canonicalize() {
            return rest
                .into_iter()
                .rev()
                .fold(c, |acc: PathBuf, part| acc.join(part));
        }
        match (existing.parent(), existing.file_name()) {
            (Some(parent), Some(name)) => {
                rest.push(name.to_os_string());
                existing = if parent.as_os_str().is_empty() {
                    PathBuf::from(".")
                } else {
                    parent.to_path_buf()
                };
            }
            _ => return path.to_path_buf(),
        }
    }
}
