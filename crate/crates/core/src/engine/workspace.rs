use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::store::Mutant;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("workspace I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}: bytes at {start}..{end} differ from the scanned text")]
    ContextMismatch {
        file: String,
        start: usize,
        end: usize,
    },
    #[error("mutant {0} is already applied")]
    AlreadyApplied(String),
    #[error("{0} already carries another applied mutant")]
    FileBusy(String),
    #[error("mutant {0} is not applied")]
    NotApplied(String),
    #[error("{0} did not restore to its original bytes")]
    RestoreMismatch(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> WorkspaceError + '_ {
    move |source| WorkspaceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Copies `from` into `to`, which must not exist yet. Symlinks are
/// recreated, not followed.
pub fn copy_tree(from: &Path, to: &Path) -> Result<(), WorkspaceError> {
    for entry in WalkDir::new(from).sort_by_file_name() {
        let entry = entry.map_err(|e| WorkspaceError::Io {
            path: e.path().unwrap_or(from).to_path_buf(),
            source: e.into(),
        })?;
        let rel = entry
            .path()
            .strip_prefix(from)
            .expect("walk stays under root");
        let dest = to.join(rel);
        let ft = entry.file_type();
        if ft.is_dir() {
            std::fs::create_dir_all(&dest).map_err(io(&dest))?;
        } else if ft.is_symlink() {
            let target = std::fs::read_link(entry.path()).map_err(io(entry.path()))?;
            std::os::unix::fs::symlink(&target, &dest).map_err(io(&dest))?;
        } else {
            std::fs::copy(entry.path(), &dest).map_err(io(&dest))?;
        }
    }
    Ok(())
}

/// A private copy of the corpus that mutants are applied to.
#[derive(Debug)]
pub struct Workspace {
    corpus_root: PathBuf,
    root: PathBuf,
    /// mutant id -> (relative file, file bytes before the mutant)
    applied: HashMap<String, (String, Vec<u8>)>,
}

impl Workspace {
    pub fn create(corpus_root: &Path, root: &Path) -> Result<Self, WorkspaceError> {
        let mut ws = Self {
            corpus_root: corpus_root.to_path_buf(),
            root: root.to_path_buf(),
            applied: HashMap::new(),
        };
        ws.rebuild()?;
        Ok(ws)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Throws the copy away and copies the corpus again.
    pub fn rebuild(&mut self) -> Result<(), WorkspaceError> {
        self.applied.clear();
        if self.root.exists() {
            std::fs::remove_dir_all(&self.root).map_err(io(&self.root))?;
        }
        if let Some(parent) = self.root.parent() {
            std::fs::create_dir_all(parent).map_err(io(parent))?;
        }
        copy_tree(&self.corpus_root, &self.root)
    }

    pub fn remove(self) -> Result<(), WorkspaceError> {
        if self.root.exists() {
            std::fs::remove_dir_all(&self.root).map_err(io(&self.root))?;
        }
        Ok(())
    }

    pub fn is_applied(&self, mutant_id: &str) -> bool {
        self.applied.contains_key(mutant_id)
    }

    /// Splices the mutated text over the site after checking that the site
    /// still holds the scanned bytes. On a mismatch nothing is written.
    pub fn apply(&mut self, m: &Mutant) -> Result<(), WorkspaceError> {
        if self.applied.contains_key(&m.mutant_id) {
            return Err(WorkspaceError::AlreadyApplied(m.mutant_id.clone()));
        }
        let file = &m.site.file;
        if self.applied.values().any(|(f, _)| f == file) {
            return Err(WorkspaceError::FileBusy(file.clone()));
        }
        let path = self.root.join(file);
        let bytes = std::fs::read(&path).map_err(io(&path))?;
        let (start, end) = m.site.byte_span;
        if end > bytes.len() || start > end || bytes[start..end] != m.original_text[..] {
            return Err(WorkspaceError::ContextMismatch {
                file: file.clone(),
                start,
                end,
            });
        }
        let mut patched = Vec::with_capacity(bytes.len() - (end - start) + m.mutated_text.len());
        patched.extend_from_slice(&bytes[..start]);
        patched.extend_from_slice(&m.mutated_text);
        patched.extend_from_slice(&bytes[end..]);
        std::fs::write(&path, &patched).map_err(io(&path))?;
        self.applied
            .insert(m.mutant_id.clone(), (file.clone(), bytes));
        Ok(())
    }

    pub fn revert(&mut self, m: &Mutant) -> Result<(), WorkspaceError> {
        let (file, original) = self
            .applied
            .remove(&m.mutant_id)
            .ok_or_else(|| WorkspaceError::NotApplied(m.mutant_id.clone()))?;
        let path = self.root.join(&file);
        std::fs::write(&path, &original).map_err(io(&path))?;
        if std::fs::read(&path).map_err(io(&path))? != original {
            return Err(WorkspaceError::RestoreMismatch(file));
        }
        Ok(())
    }
}
