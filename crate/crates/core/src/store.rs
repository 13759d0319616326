//! Durable mutant database: a directory holding a `header`, an append-only
//! `log` of JSON lines and a `lock` file. Current state is the fold of the log.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::os::fd::AsRawFd;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scanner::MatchSite;

pub const FORMAT: &str = "mutforge-store";
pub const VERSION: u32 = 1;
pub const DIGEST: &str = "sha256";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutantStatus {
    Pending,
    Invalid,
    KilledByTest,
    KilledByCrash,
    KilledByTimeout,
    Alive,
    Skipped,
}

impl MutantStatus {
    pub const ALL: [MutantStatus; 7] = [
        MutantStatus::Pending,
        MutantStatus::Invalid,
        MutantStatus::KilledByTest,
        MutantStatus::KilledByCrash,
        MutantStatus::KilledByTimeout,
        MutantStatus::Alive,
        MutantStatus::Skipped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MutantStatus::Pending => "pending",
            MutantStatus::Invalid => "invalid",
            MutantStatus::KilledByTest => "killed_by_test",
            MutantStatus::KilledByCrash => "killed_by_crash",
            MutantStatus::KilledByTimeout => "killed_by_timeout",
            MutantStatus::Alive => "alive",
            MutantStatus::Skipped => "skipped",
        }
    }

    pub fn is_terminal(self) -> bool {
        self != MutantStatus::Pending
    }
}

impl fmt::Display for MutantStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for MutantStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown mutant status `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Build,
    Test,
}

/// What a build or test run left behind.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failing_test: Option<String>,
    #[serde(default)]
    pub timed_out: bool,
    #[serde(default)]
    pub duration_secs: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub stderr_excerpt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mutant {
    pub mutant_id: String,
    pub site: MatchSite,
    #[serde(with = "crate::textbytes")]
    pub original_text: Vec<u8>,
    #[serde(with = "crate::textbytes")]
    pub mutated_text: Vec<u8>,
    pub status: MutantStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
}

pub fn mutant_id(site: &MatchSite) -> String {
    let mut h = Sha256::new();
    for part in [
        site.file.as_bytes(),
        format!("{}:{}", site.byte_span.0, site.byte_span.1).as_bytes(),
        site.operator_id.as_bytes(),
        site.context_digest.as_bytes(),
    ] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    hex::encode(h.finalize())
}

impl Mutant {
    pub fn new(site: MatchSite, mutated_text: Vec<u8>) -> Self {
        Self {
            mutant_id: mutant_id(&site),
            original_text: site.matched_text.clone(),
            site,
            mutated_text,
            status: MutantStatus::Pending,
            evidence: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Record {
    Insert(Mutant),
    Status {
        mutant_id: String,
        status: MutantStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        evidence: Option<Evidence>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    digest: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("store {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("store {0} does not exist")]
    Missing(PathBuf),
    #[error("bad store header: {0}")]
    Header(String),
    #[error("store log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("no mutant with id {0}")]
    NotFound(String),
    #[error("mutant {id}: illegal transition {from} -> {to}")]
    IllegalTransition {
        id: String,
        from: MutantStatus,
        to: MutantStatus,
    },
    #[error("mutant {0}: original text does not match its site")]
    Integrity(String),
    #[error("store was opened read-only")]
    ReadOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub total: usize,
    pub by_status: BTreeMap<MutantStatus, usize>,
    pub by_operator: BTreeMap<String, BTreeMap<MutantStatus, usize>>,
}

impl CampaignSummary {
    pub fn count(&self, status: MutantStatus) -> usize {
        self.by_status.get(&status).copied().unwrap_or(0)
    }

    fn zeroed() -> BTreeMap<MutantStatus, usize> {
        MutantStatus::ALL.iter().map(|s| (*s, 0)).collect()
    }

    pub fn from_mutants<'a>(mutants: impl IntoIterator<Item = &'a Mutant>) -> Self {
        let mut out = Self {
            by_status: Self::zeroed(),
            ..Self::default()
        };
        for m in mutants {
            out.total += 1;
            *out.by_status.entry(m.status).or_default() += 1;
            *out.by_operator
                .entry(m.site.operator_id.clone())
                .or_insert_with(Self::zeroed)
                .entry(m.status)
                .or_default() += 1;
        }
        out
    }
}

#[derive(Debug)]
pub struct MutantStore {
    dir: PathBuf,
    log: Option<File>,
    _lock: Option<File>,
    mutants: IndexMap<String, Mutant>,
    warnings: Vec<String>,
}

fn lock_exclusive(file: &File) -> std::io::Result<bool> {
    // SAFETY: flock only reads the descriptor, which `file` keeps open.
    let rc = unsafe { libc::flock(file.as_raw_fd(), libc::LOCK_EX | libc::LOCK_NB) };
    if rc == 0 {
        return Ok(true);
    }
    let err = std::io::Error::last_os_error();
    if err.raw_os_error() == Some(libc::EWOULDBLOCK) {
        Ok(false)
    } else {
        Err(err)
    }
}

fn read_header(dir: &Path) -> Result<(), StoreError> {
    let text = std::fs::read_to_string(dir.join("header"))?;
    let header: Header =
        serde_json::from_str(&text).map_err(|e| StoreError::Header(e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION || header.digest != DIGEST {
        return Err(StoreError::Header(format!(
            "unsupported {} v{} ({})",
            header.format, header.version, header.digest
        )));
    }
    Ok(())
}

struct Replay {
    mutants: IndexMap<String, Mutant>,
    warnings: Vec<String>,
    /// Byte length of the well-formed prefix.
    good_len: usize,
    /// The last record parsed but its newline is missing.
    missing_newline: bool,
}

fn apply(
    mutants: &mut IndexMap<String, Mutant>,
    record: Record,
    line: usize,
) -> Result<(), StoreError> {
    match record {
        Record::Insert(m) => {
            mutants.entry(m.mutant_id.clone()).or_insert(m);
        }
        Record::Status {
            mutant_id,
            status,
            evidence,
        } => {
            let m = mutants
                .get_mut(&mutant_id)
                .ok_or_else(|| StoreError::Corrupt {
                    line,
                    message: format!("status for unknown mutant {mutant_id}"),
                })?;
            if m.status.is_terminal() || !status.is_terminal() {
                return Err(StoreError::Corrupt {
                    line,
                    message: format!("illegal transition {} -> {status}", m.status),
                });
            }
            m.status = status;
            m.evidence = evidence;
        }
    }
    Ok(())
}

fn replay(bytes: &[u8]) -> Result<Replay, StoreError> {
    let mut out = Replay {
        mutants: IndexMap::new(),
        warnings: Vec::new(),
        good_len: 0,
        missing_newline: false,
    };
    let mut offset = 0;
    let mut line = 0;
    while offset < bytes.len() {
        line += 1;
        let (content, next, terminated) = match bytes[offset..].iter().position(|&b| b == b'\n') {
            Some(p) => (&bytes[offset..offset + p], offset + p + 1, true),
            None => (&bytes[offset..], bytes.len(), false),
        };
        if content.iter().all(|b| b.is_ascii_whitespace()) {
            offset = next;
            out.good_len = next;
            continue;
        }
        match serde_json::from_slice::<Record>(content) {
            Ok(record) => {
                apply(&mut out.mutants, record, line)?;
                out.good_len = next;
                out.missing_newline = !terminated;
            }
            Err(e) if !terminated => {
                out.warnings.push(format!(
                    "dropped truncated record at log line {line} ({} bytes): {e}",
                    content.len()
                ));
                break;
            }
            Err(e) => {
                return Err(StoreError::Corrupt {
                    line,
                    message: e.to_string(),
                })
            }
        }
        offset = next;
    }
    Ok(out)
}

impl MutantStore {
    /// Opens or creates a store for writing. Only one writer may hold a store.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join("lock"))?;
        if !lock_exclusive(&lock)? {
            return Err(StoreError::Locked(dir));
        }
        let header_path = dir.join("header");
        if header_path.exists() {
            read_header(&dir)?;
        } else {
            let header = Header {
                format: FORMAT.into(),
                version: VERSION,
                digest: DIGEST.into(),
            };
            let tmp = dir.join("header.tmp");
            std::fs::write(&tmp, serde_json::to_string(&header).expect("header") + "\n")?;
            std::fs::rename(&tmp, &header_path)?;
        }
        let mut log = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(dir.join("log"))?;
        let mut bytes = Vec::new();
        log.read_to_end(&mut bytes)?;
        let state = replay(&bytes)?;
        if state.good_len < bytes.len() {
            log.set_len(state.good_len as u64)?;
            log.sync_data()?;
        }
        if state.missing_newline {
            log.write_all(b"\n")?;
        }
        log.seek(SeekFrom::End(0))?;
        for w in &state.warnings {
            log::warn!("{}: {w}", dir.display());
        }
        Ok(Self {
            dir,
            log: Some(log),
            _lock: Some(lock),
            mutants: state.mutants,
            warnings: state.warnings,
        })
    }

    /// Opens an existing store without taking the writer lock. A partial
    /// trailing record is ignored, not repaired.
    pub fn open_read_only(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.join("header").exists() {
            return Err(StoreError::Missing(dir));
        }
        read_header(&dir)?;
        let bytes = match std::fs::read(dir.join("log")) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let state = replay(&bytes)?;
        Ok(Self {
            dir,
            log: None,
            _lock: None,
            mutants: state.mutants,
            warnings: state.warnings,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.mutants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mutants.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Mutant> {
        self.mutants.get(id)
    }

    /// All mutants in insertion order.
    pub fn mutants(&self) -> impl Iterator<Item = &Mutant> {
        self.mutants.values()
    }

    pub fn pending(&self) -> Vec<Mutant> {
        self.mutants
            .values()
            .filter(|m| m.status == MutantStatus::Pending)
            .cloned()
            .collect()
    }

    fn write_records(&mut self, records: &[Record]) -> Result<(), StoreError> {
        let log = self.log.as_mut().ok_or(StoreError::ReadOnly)?;
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).expect("records serialize");
            buf.push(b'\n');
        }
        log.write_all(&buf)?;
        log.sync_data()?;
        Ok(())
    }

    /// Inserts new mutants; ones already present are ignored. Returns how
    /// many were inserted.
    pub fn append_mutants(&mut self, mutants: Vec<Mutant>) -> Result<usize, StoreError> {
        if self.log.is_none() {
            return Err(StoreError::ReadOnly);
        }
        for m in &mutants {
            if m.original_text != m.site.matched_text || m.mutant_id != mutant_id(&m.site) {
                return Err(StoreError::Integrity(m.mutant_id.clone()));
            }
        }
        let mut fresh = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for mut m in mutants {
            if self.mutants.contains_key(&m.mutant_id) || !seen.insert(m.mutant_id.clone()) {
                continue;
            }
            m.status = MutantStatus::Pending;
            m.evidence = None;
            fresh.push(m);
        }
        let records: Vec<Record> = fresh.iter().cloned().map(Record::Insert).collect();
        self.write_records(&records)?;
        let n = fresh.len();
        for m in fresh {
            self.mutants.insert(m.mutant_id.clone(), m);
        }
        Ok(n)
    }

    pub fn update_status(
        &mut self,
        id: &str,
        status: MutantStatus,
        evidence: Option<Evidence>,
    ) -> Result<(), StoreError> {
        if self.log.is_none() {
            return Err(StoreError::ReadOnly);
        }
        let current = self
            .mutants
            .get(id)
            .ok_or_else(|| StoreError::NotFound(id.to_string()))?
            .status;
        if current.is_terminal() || !status.is_terminal() {
            return Err(StoreError::IllegalTransition {
                id: id.to_string(),
                from: current,
                to: status,
            });
        }
        self.write_records(&[Record::Status {
            mutant_id: id.to_string(),
            status,
            evidence: evidence.clone(),
        }])?;
        let m = self.mutants.get_mut(id).expect("checked above");
        m.status = status;
        m.evidence = evidence;
        Ok(())
    }

    pub fn summarize(&self) -> CampaignSummary {
        CampaignSummary::from_mutants(self.mutants.values())
    }
}
