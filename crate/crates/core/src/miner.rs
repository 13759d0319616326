//! Flags candidate vulnerability-fixing commits by CVE identifiers and
//! security keyword rules, and groups flagged commits that cite the same CVE.

use std::io::BufRead;

use indexmap::IndexMap;
use once_cell::sync::Lazy;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RULES: &str = include_str!("../rules/security_keywords.tsv");

static CVE_PATTERN: Lazy<Regex> = Lazy::new(|| {
    RegexBuilder::new(r"cve-[0-9]{4}-[0-9]{4,}")
        .case_insensitive(true)
        .build()
        .expect("cve regex")
});

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("rule file line {line}: {message}")]
    Rule { line: usize, message: String },
    #[error("commit log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("failed to read commit log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub sha: String,
    pub message: String,
    pub added_lines: u64,
    pub deleted_lines: u64,
    #[serde(default)]
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MinerVerdict {
    pub flagged: bool,
    pub matched_keywords: Vec<String>,
    pub cve_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct KeywordRule {
    pub name: String,
    pub pattern: Regex,
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<KeywordRule>,
}

impl RuleSet {
    /// Parses `name<TAB>regex` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, MinerError> {
        let mut rules = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let (name, pattern) = trimmed.split_once('\t').ok_or_else(|| MinerError::Rule {
                line: line_no,
                message: "expected `name<TAB>regex`".into(),
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(MinerError::Rule {
                    line: line_no,
                    message: "empty rule name".into(),
                });
            }
            let pattern = RegexBuilder::new(pattern)
                .case_insensitive(true)
                .build()
                .map_err(|e| MinerError::Rule {
                    line: line_no,
                    message: e.to_string(),
                })?;
            rules.push(KeywordRule {
                name: name.to_string(),
                pattern,
            });
        }
        Ok(Self { rules })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_RULES).expect("bundled rules are valid")
    }

    pub fn rules(&self) -> &[KeywordRule] {
        &self.rules
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::builtin()
    }
}

/// All CVE ids in `message`, upper-cased, de-duplicated, first occurrence first.
pub fn extract_cves(message: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in CVE_PATTERN.find_iter(message) {
        let id = m.as_str().to_ascii_uppercase();
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

pub fn match_security_keywords(rules: &RuleSet, message: &str) -> MinerVerdict {
    let matched_keywords: Vec<String> = rules
        .rules
        .iter()
        .filter(|r| r.pattern.is_match(message))
        .map(|r| r.name.clone())
        .collect();
    let cve_ids = extract_cves(message);
    MinerVerdict {
        flagged: !matched_keywords.is_empty() || !cve_ids.is_empty(),
        matched_keywords,
        cve_ids,
    }
}

/// Flagged commits only, in input order.
pub fn mine(
    rules: &RuleSet,
    log: impl IntoIterator<Item = CommitRecord>,
) -> Vec<(CommitRecord, MinerVerdict)> {
    log.into_iter()
        .filter_map(|c| {
            let verdict = match_security_keywords(rules, &c.message);
            verdict.flagged.then_some((c, verdict))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CveGroups {
    /// CVE id to the flagged commits citing it, in first-citation order.
    pub groups: IndexMap<String, Vec<CommitRecord>>,
    pub remainder: Vec<CommitRecord>,
}

pub fn group_by_cve(flagged: &[(CommitRecord, MinerVerdict)]) -> CveGroups {
    let mut out = CveGroups::default();
    for (commit, verdict) in flagged {
        if verdict.cve_ids.is_empty() {
            out.remainder.push(commit.clone());
            continue;
        }
        for cve in &verdict.cve_ids {
            out.groups
                .entry(cve.clone())
                .or_default()
                .push(commit.clone());
        }
    }
    out
}

fn unescape_message(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

pub fn escape_message(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

fn parse_count(field: &str, what: &str, line: usize) -> Result<u64, MinerError> {
    field.trim().parse().map_err(|_| MinerError::Log {
        line,
        message: format!("{what} `{field}` is not a non-negative integer"),
    })
}

/// Reads `sha<TAB>added<TAB>deleted<TAB>message` records, one per line.
pub fn parse_tsv_log(text: &str) -> Result<Vec<CommitRecord>, MinerError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(4, '\t');
        let (Some(sha), Some(added), Some(deleted), Some(message)) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(MinerError::Log {
                line: line_no,
                message: "expected 4 tab-separated fields".into(),
            });
        };
        let sha = sha.trim();
        if sha.is_empty() {
            return Err(MinerError::Log {
                line: line_no,
                message: "empty sha".into(),
            });
        }
        out.push(CommitRecord {
            sha: sha.to_string(),
            added_lines: parse_count(added, "added", line_no)?,
            deleted_lines: parse_count(deleted, "deleted", line_no)?,
            message: unescape_message(message),
            files: Vec::new(),
        });
    }
    Ok(out)
}

pub fn format_tsv_log(commits: &[CommitRecord]) -> String {
    commits
        .iter()
        .map(|c| {
            format!(
                "{}\t{}\t{}\t{}\n",
                c.sha,
                c.added_lines,
                c.deleted_lines,
                escape_message(&c.message)
            )
        })
        .collect()
}

/// Reads the default output of `git log --numstat`.
pub fn parse_git_numstat(text: &str) -> Result<Vec<CommitRecord>, MinerError> {
    let mut out: Vec<CommitRecord> = Vec::new();
    let mut message: Vec<&str> = Vec::new();
    let flush_message = |out: &mut Vec<CommitRecord>, message: &mut Vec<&str>| {
        if let Some(c) = out.last_mut() {
            if c.message.is_empty() && !message.is_empty() {
                c.message = message.join("\n").trim().to_string();
            }
        }
        message.clear();
    };
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if let Some(rest) = line.strip_prefix("commit ") {
            flush_message(&mut out, &mut message);
            let sha = rest.split_whitespace().next().unwrap_or("");
            if sha.is_empty() {
                return Err(MinerError::Log {
                    line: line_no,
                    message: "commit header without sha".into(),
                });
            }
            out.push(CommitRecord {
                sha: sha.to_string(),
                message: String::new(),
                added_lines: 0,
                deleted_lines: 0,
                files: Vec::new(),
            });
            continue;
        }
        let Some(current) = out.last_mut() else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(MinerError::Log {
                line: line_no,
                message: "content before first `commit` header".into(),
            });
        };
        if let Some(body) = line.strip_prefix("    ") {
            message.push(body);
        } else if line.is_empty() || line.contains(':') && !line.contains('\t') {
            // header fields (Author:, Date:, Merge:) and separators
        } else {
            let mut cols = line.splitn(3, '\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(d), Some(path)) => {
                    // binary files report `-`
                    let count = |s: &str, what| {
                        if s == "-" {
                            Ok(0)
                        } else {
                            parse_count(s, what, line_no)
                        }
                    };
                    current.added_lines += count(a, "added")?;
                    current.deleted_lines += count(d, "deleted")?;
                    current.files.push(path.to_string());
                }
                _ => {
                    return Err(MinerError::Log {
                        line: line_no,
                        message: format!("unrecognized line `{line}`"),
                    })
                }
            }
        }
    }
    flush_message(&mut out, &mut message);
    Ok(out)
}

/// Parses either log format; raw `git log` output starts with `commit `.
pub fn parse_log(text: &str) -> Result<Vec<CommitRecord>, MinerError> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.starts_with("commit ") && !first.contains('\t') {
        parse_git_numstat(text)
    } else {
        parse_tsv_log(text)
    }
}

pub fn read_log(reader: impl BufRead) -> Result<Vec<CommitRecord>, MinerError> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text)?;
    parse_log(&text)
}
