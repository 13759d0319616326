//! Finds operator match sites in source files.

mod lexer;

use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::catalog::{CompiledOperator, LanguageClass, Matcher};
pub use lexer::code_mask;

pub const DEFAULT_MAX_BLOCK: usize = 4096;

pub const DEFAULT_EXCLUDES: &[&str] = &[
    "**/test/**",
    "**/tests/**",
    "**/*_test.*",
    "**/test_*.*",
    "**/*_tests.*",
    "**/generated/**",
    "**/*.pb.h",
    "**/*.pb.cc",
    "**/*_pb2.py",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchSite {
    /// Path relative to the corpus root, `/`-separated.
    pub file: String,
    pub byte_span: (usize, usize),
    pub line_span: (usize, usize),
    pub operator_id: String,
    #[serde(with = "crate::textbytes")]
    pub matched_text: Vec<u8>,
    pub context_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWarning {
    pub file: String,
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallBlocks {
    pub spans: Vec<(usize, usize)>,
    /// Byte offsets of candidates whose parentheses never close.
    pub unbalanced: Vec<usize>,
    /// Byte offsets of candidates longer than the block bound.
    pub oversized: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("corpus root {0} does not exist")]
    MissingRoot(PathBuf),
    #[error("bad glob `{pattern}`: {message}")]
    Glob { pattern: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}: not a C-like or Python source file")]
    UnknownLanguage(PathBuf),
}

pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn is_word(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Call blocks in C-like text; see [`find_call_blocks_in`].
pub fn find_call_blocks<S: AsRef<str>>(text: &[u8], identifiers: &[S]) -> CallBlocks {
    let mask = code_mask(text, LanguageClass::CLike);
    find_call_blocks_in(text, &mask, identifiers, DEFAULT_MAX_BLOCK)
}

/// Spans of `<identifier> ( ... )`, plus a trailing `;` on the same line.
/// Only code bytes count toward parenthesis balance. Matching is greedy
/// left to right; a candidate inside an accepted span is never reported.
pub fn find_call_blocks_in<S: AsRef<str>>(
    text: &[u8],
    mask: &[bool],
    identifiers: &[S],
    max_block: usize,
) -> CallBlocks {
    let mut out = CallBlocks::default();
    let mut i = 0;
    while i < text.len() {
        if !mask[i] || (i > 0 && is_word(text[i - 1])) || !is_word(text[i]) {
            i += 1;
            continue;
        }
        let ident_end = identifiers.iter().find_map(|id| {
            let id = id.as_ref().as_bytes();
            let end = i + id.len();
            let hit = text.get(i..end) == Some(id)
                && text.get(end).is_none_or(|&b| !is_word(b))
                && mask[i..end].iter().all(|&m| m);
            hit.then_some(end)
        });
        let Some(mut j) = ident_end else {
            i += 1;
            continue;
        };
        while j < text.len() && mask[j] && text[j].is_ascii_whitespace() {
            j += 1;
        }
        if j >= text.len() || !mask[j] || text[j] != b'(' {
            i += 1;
            continue;
        }
        let mut depth = 0usize;
        let mut close = None;
        for (k, &b) in text.iter().enumerate().skip(j) {
            if !mask[k] {
                continue;
            }
            match b {
                b'(' => depth += 1,
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(k);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(close) = close else {
            out.unbalanced.push(i);
            i += 1;
            continue;
        };
        let mut end = close + 1;
        let mut k = end;
        while k < text.len() && (text[k] == b' ' || text[k] == b'\t') {
            k += 1;
        }
        if k < text.len() && text[k] == b';' && mask[k] {
            end = k + 1;
        }
        if end - i > max_block {
            out.oversized.push(i);
            i += 1;
            continue;
        }
        out.spans.push((i, end));
        i = end;
    }
    out
}

fn line_pattern_spans(text: &[u8], mask: &[bool], re: &regex::bytes::Regex) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut pos = 0;
    let mut caps = re.capture_locations();
    while pos <= text.len() {
        let Some((m_start, m_end)) = re
            .captures_read_at(&mut caps, text, pos)
            .map(|m| (m.start(), m.end()))
        else {
            break;
        };
        let site_idx = re.capture_names().position(|n| n == Some("site"));
        let (s, e) = site_idx
            .and_then(|idx| caps.get(idx))
            .unwrap_or((m_start, m_end));
        let in_code = |p: usize| mask.get(p).copied().unwrap_or(false);
        if s < e && in_code(m_start) && in_code(s) {
            out.push((s, e));
            pos = e.max(m_end).max(m_start + 1);
        } else {
            pos = m_start + 1;
        }
    }
    out
}

fn line_of(newlines: &[usize], offset: usize) -> usize {
    newlines.partition_point(|&n| n < offset) + 1
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileScan {
    pub sites: Vec<MatchSite>,
    pub warnings: Vec<ScanWarning>,
}

/// Sites in one file's bytes, ordered by operator id then offset. Sites the
/// operator's transform would leave unchanged are not reported.
pub fn scan_source(
    file: &str,
    text: &[u8],
    lang: LanguageClass,
    ops: &[CompiledOperator],
    max_block: usize,
) -> FileScan {
    let mut out = FileScan::default();
    if text.is_empty() {
        return out;
    }
    let mask = code_mask(text, lang);
    let digest = digest_hex(text);
    let newlines: Vec<usize> = text
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .map(|(i, _)| i)
        .collect();
    let mut ops: Vec<&CompiledOperator> = ops.iter().filter(|o| o.applies_to(lang)).collect();
    ops.sort_by(|a, b| a.id().cmp(b.id()));
    for op in ops {
        let spans = match &op.matcher {
            Matcher::Line(re) => line_pattern_spans(text, &mask, re),
            Matcher::CallBlock(ids) => {
                let blocks = find_call_blocks_in(text, &mask, ids, max_block);
                for (offset, what) in blocks
                    .unbalanced
                    .iter()
                    .map(|o| (*o, "unbalanced parentheses"))
                    .chain(
                        blocks
                            .oversized
                            .iter()
                            .map(|o| (*o, "call block exceeds size bound")),
                    )
                {
                    out.warnings.push(ScanWarning {
                        file: file.to_string(),
                        offset,
                        message: format!("{}: {what}, candidate dropped", op.id()),
                    });
                }
                blocks.spans
            }
        };
        for (s, e) in spans {
            let matched = &text[s..e];
            if op.mutate(matched, lang).is_none() {
                continue;
            }
            out.sites.push(MatchSite {
                file: file.to_string(),
                byte_span: (s, e),
                line_span: (line_of(&newlines, s), line_of(&newlines, e - 1)),
                operator_id: op.id().to_string(),
                matched_text: matched.to_vec(),
                context_digest: digest.clone(),
            });
        }
    }
    out
}

pub fn scan_file(path: &Path, ops: &[CompiledOperator]) -> Result<FileScan, ScanError> {
    let lang = LanguageClass::of_path(path)
        .ok_or_else(|| ScanError::UnknownLanguage(path.to_path_buf()))?;
    let text = std::fs::read(path).map_err(|source| ScanError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path.to_string_lossy().replace('\\', "/");
    Ok(scan_source(&name, &text, lang, ops, DEFAULT_MAX_BLOCK))
}

#[derive(Debug, Clone)]
pub struct CorpusFilter {
    include: GlobSet,
    exclude: GlobSet,
}

fn glob_set(patterns: &[impl AsRef<str>]) -> Result<GlobSet, ScanError> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob = Glob::new(p.as_ref()).map_err(|e| ScanError::Glob {
            pattern: p.as_ref().to_string(),
            message: e.to_string(),
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|e| ScanError::Glob {
        pattern: String::new(),
        message: e.to_string(),
    })
}

impl CorpusFilter {
    /// An empty include list selects every source file; `None` for exclude
    /// means [`DEFAULT_EXCLUDES`].
    pub fn new(include: &[String], exclude: Option<&[String]>) -> Result<Self, ScanError> {
        let include = if include.is_empty() {
            glob_set(&["**"])?
        } else {
            glob_set(include)?
        };
        let exclude = match exclude {
            Some(ex) => glob_set(ex)?,
            None => glob_set(DEFAULT_EXCLUDES)?,
        };
        Ok(Self { include, exclude })
    }

    pub fn selects(&self, rel: &str) -> bool {
        self.include.is_match(rel) && !self.exclude.is_match(rel)
    }
}

impl Default for CorpusFilter {
    fn default() -> Self {
        Self::new(&[], None).expect("default globs are valid")
    }
}

#[derive(Debug, Default)]
pub struct CorpusScan {
    pub sites: Vec<MatchSite>,
    pub warnings: Vec<ScanWarning>,
    /// Files that could not be read; the scan went on without them.
    pub errors: Vec<ScanError>,
}

/// Source files under `root` selected by `filter`, as sorted relative paths.
/// Hidden directories are skipped.
pub fn corpus_files(root: &Path, filter: &CorpusFilter) -> Result<Vec<String>, ScanError> {
    if !root.is_dir() {
        return Err(ScanError::MissingRoot(root.to_path_buf()));
    }
    let mut files = Vec::new();
    let walker = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
    for entry in walker.flatten() {
        // symlinks are kept so that broken ones surface as read errors
        let ft = entry.file_type();
        let wanted = ft.is_file() || ft.is_symlink() && !entry.path().is_dir();
        if !wanted || LanguageClass::of_path(entry.path()).is_none() {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(root) else {
            continue;
        };
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if filter.selects(&rel) {
            files.push(rel);
        }
    }
    files.sort();
    Ok(files)
}

pub fn scan_corpus(
    root: &Path,
    filter: &CorpusFilter,
    ops: &[CompiledOperator],
    max_block: usize,
) -> Result<CorpusScan, ScanError> {
    let mut out = CorpusScan::default();
    for rel in corpus_files(root, filter)? {
        let path = root.join(&rel);
        let lang = LanguageClass::of_path(&path).expect("filtered by extension");
        match std::fs::read(&path) {
            Ok(text) => {
                let scan = scan_source(&rel, &text, lang, ops, max_block);
                out.sites.extend(scan.sites);
                out.warnings.extend(scan.warnings);
            }
            Err(source) => out.errors.push(ScanError::Read { path, source }),
        }
    }
    out.sites.sort_by(|a, b| {
        (&a.file, &a.operator_id, a.byte_span).cmp(&(&b.file, &b.operator_id, b.byte_span))
    });
    Ok(out)
}
