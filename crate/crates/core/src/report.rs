//! Mutation scores and alive-mutant listings.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::MutationOperator;
use crate::store::{CampaignSummary, Mutant, MutantStatus};
use crate::taxonomy::Canonical;
use crate::textbytes::excerpt;

pub const UNCATEGORIZED: &str = "uncategorized";
pub const EXCERPT_CHARS: usize = 120;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("mutation score undefined: no killed or alive mutants")]
    EmptyDenominator,
    #[error("bad report csv: {0}")]
    Csv(String),
}

/// killed / (killed + alive). Invalid, Skipped and Pending mutants are not
/// counted; timeouts count as killed only when asked.
pub fn mutation_score(
    summary: &CampaignSummary,
    include_timeouts: bool,
) -> Result<f64, ReportError> {
    let mut killed =
        summary.count(MutantStatus::KilledByTest) + summary.count(MutantStatus::KilledByCrash);
    if include_timeouts {
        killed += summary.count(MutantStatus::KilledByTimeout);
    }
    let denominator = killed + summary.count(MutantStatus::Alive);
    if denominator == 0 {
        return Err(ReportError::EmptyDenominator);
    }
    Ok(killed as f64 / denominator as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Operator,
    FixingCategory,
    Cwe,
    File,
}

impl GroupBy {
    pub const ALL: [GroupBy; 4] = [
        GroupBy::Operator,
        GroupBy::FixingCategory,
        GroupBy::Cwe,
        GroupBy::File,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupBy::Operator => "operator",
            GroupBy::FixingCategory => "fixing_category",
            GroupBy::Cwe => "cwe",
            GroupBy::File => "file",
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown grouping `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliveEntry {
    pub mutant_id: String,
    pub file: String,
    pub first_line: usize,
    pub last_line: usize,
    pub operator: String,
    pub excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliveGroup {
    pub key: String,
    pub count: usize,
    pub entries: Vec<AliveEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliveReport {
    pub group_by: GroupBy,
    pub groups: Vec<AliveGroup>,
}

impl AliveReport {
    pub fn alive_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn group(&self, key: &str) -> Option<&AliveGroup> {
        self.groups.iter().find(|g| g.key == key)
    }
}

fn group_key(m: &Mutant, by: GroupBy, ops: &HashMap<&str, &MutationOperator>) -> String {
    let op = ops.get(m.site.operator_id.as_str());
    match by {
        GroupBy::Operator => m.site.operator_id.clone(),
        GroupBy::File => m.site.file.clone(),
        GroupBy::FixingCategory => op
            .map(|o| o.inverted_fixing_pattern.category().as_str().to_string())
            .unwrap_or_else(|| UNCATEGORIZED.to_string()),
        GroupBy::Cwe => op
            .and_then(|o| o.seeds_cwe)
            .map(|c| c.to_string())
            .unwrap_or_else(|| UNCATEGORIZED.to_string()),
    }
}

/// Alive mutants grouped by `by`, largest group first. `catalog` supplies
/// fixing categories and CWEs; unknown operators are uncategorized.
pub fn alive_report<'a>(
    mutants: impl IntoIterator<Item = &'a Mutant>,
    catalog: &[MutationOperator],
    by: GroupBy,
) -> AliveReport {
    let ops: HashMap<&str, &MutationOperator> =
        catalog.iter().map(|o| (o.id.as_str(), o)).collect();
    let mut groups: IndexMap<String, Vec<AliveEntry>> = IndexMap::new();
    for m in mutants
        .into_iter()
        .filter(|m| m.status == MutantStatus::Alive)
    {
        groups
            .entry(group_key(m, by, &ops))
            .or_default()
            .push(AliveEntry {
                mutant_id: m.mutant_id.clone(),
                file: m.site.file.clone(),
                first_line: m.site.line_span.0,
                last_line: m.site.line_span.1,
                operator: m.site.operator_id.clone(),
                excerpt: excerpt(&m.original_text, EXCERPT_CHARS),
            });
    }
    let mut groups: Vec<AliveGroup> = groups
        .into_iter()
        .map(|(key, mut entries)| {
            entries.sort_by(|a, b| {
                (&a.file, a.first_line, &a.operator, &a.mutant_id).cmp(&(
                    &b.file,
                    b.first_line,
                    &b.operator,
                    &b.mutant_id,
                ))
            });
            AliveGroup {
                key,
                count: entries.len(),
                entries,
            }
        })
        .collect();
    groups.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    AliveReport {
        group_by: by,
        groups,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format `{s}`")),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = [
    "group",
    "mutant_id",
    "file",
    "first_line",
    "last_line",
    "operator",
    "excerpt",
];

impl AliveReport {
    pub fn render_text(&self) -> String {
        if self.groups.is_empty() {
            return "no alive mutants\n".to_string();
        }
        let mut out = format!(
            "alive mutants by {}: {}\n",
            self.group_by,
            self.alive_count()
        );
        for g in &self.groups {
            let _ = writeln!(out, "\n{} ({})", g.key, g.count);
            for e in &g.entries {
                let lines = if e.first_line == e.last_line {
                    e.first_line.to_string()
                } else {
                    format!("{}-{}", e.first_line, e.last_line)
                };
                let _ = writeln!(out, "  {}:{}  {}  {}", e.file, lines, e.operator, e.excerpt);
            }
        }
        out
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per alive mutant, in group order.
    pub fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for g in &self.groups {
            for e in &g.entries {
                w.write_record([
                    g.key.as_str(),
                    &e.mutant_id,
                    &e.file,
                    &e.first_line.to_string(),
                    &e.last_line.to_string(),
                    &e.operator,
                    &e.excerpt,
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn parse_csv(text: &str, group_by: GroupBy) -> Result<Self, ReportError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| ReportError::Csv(e.to_string()))?;
        if header.iter().ne(CSV_HEADER) {
            return Err(ReportError::Csv("unexpected header".into()));
        }
        let mut groups: IndexMap<String, Vec<AliveEntry>> = IndexMap::new();
        for row in r.records() {
            let row = row.map_err(|e| ReportError::Csv(e.to_string()))?;
            let num = |i: usize| {
                row[i]
                    .parse::<usize>()
                    .map_err(|_| ReportError::Csv(format!("bad line number `{}`", &row[i])))
            };
            groups
                .entry(row[0].to_string())
                .or_default()
                .push(AliveEntry {
                    mutant_id: row[1].to_string(),
                    file: row[2].to_string(),
                    first_line: num(3)?,
                    last_line: num(4)?,
                    operator: row[5].to_string(),
                    excerpt: row[6].to_string(),
                });
        }
        Ok(Self {
            group_by,
            groups: groups
                .into_iter()
                .map(|(key, entries)| AliveGroup {
                    key,
                    count: entries.len(),
                    entries,
                })
                .collect(),
        })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.render_text(),
            Format::Json => self.render_json(),
            Format::Csv => self.render_csv(),
        }
    }
}

/// Campaign totals with both score conventions and the alive listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub summary: CampaignSummary,
    pub score_with_timeouts: Option<f64>,
    pub score_without_timeouts: Option<f64>,
    pub include_timeouts: bool,
    pub alive: AliveReport,
}

impl CampaignReport {
    pub fn build<'a>(
        mutants: impl IntoIterator<Item = &'a Mutant> + Clone,
        catalog: &[MutationOperator],
        by: GroupBy,
        include_timeouts: bool,
    ) -> Self {
        let summary = CampaignSummary::from_mutants(mutants.clone());
        Self {
            score_with_timeouts: mutation_score(&summary, true).ok(),
            score_without_timeouts: mutation_score(&summary, false).ok(),
            include_timeouts,
            alive: alive_report(mutants, catalog, by),
            summary,
        }
    }

    pub fn score(&self) -> Option<f64> {
        if self.include_timeouts {
            self.score_with_timeouts
        } else {
            self.score_without_timeouts
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("mutants: {}\n", self.summary.total);
        for (status, n) in &self.summary.by_status {
            if *n > 0 {
                let _ = writeln!(out, "  {status:<18} {n}");
            }
        }
        let fmt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        let (label, other_label, other) = if self.include_timeouts {
            (
                "timeouts killed",
                "timeouts excluded",
                self.score_without_timeouts,
            )
        } else {
            (
                "timeouts excluded",
                "timeouts killed",
                self.score_with_timeouts,
            )
        };
        let _ = writeln!(out, "mutation score ({label}): {}", fmt(self.score()));
        let _ = writeln!(out, "mutation score ({other_label}): {}", fmt(other));
        out.push('\n');
        out.push_str(&self.alive.render_text());
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.render_text(),
            Format::Json => serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            Format::Csv => self.alive.render_csv(),
        }
    }
}
