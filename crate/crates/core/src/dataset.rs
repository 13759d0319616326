//! Labeled vulnerability records and the statistics computed over them.
//!
//! Records are stored as comma-separated text with a fixed header (see
//! [`HEADER`]). List-valued columns use `;` as the inner separator and an
//! empty subcategory column stands for "no subcategory".

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{
    classify_effort, Canonical, EffortBucket, FixingCategoryKind, FixingPattern, FixingSubcategory,
    Label, LabelError, Leaf, Library, RootCause, RootCauseKind, RootCauseSubcategory, Symptom,
    VulnCategory, VulnCategoryKind, VulnSubcategory,
};

pub mod fixture;

pub const HEADER: [&str; 13] = [
    "id",
    "library",
    "vuln_category",
    "vuln_subcategory",
    "root_cause_category",
    "root_cause_subcategory",
    "symptom",
    "fixing_category",
    "fixing_subcategory",
    "added_lines",
    "deleted_lines",
    "commit_ids",
    "cve_ids",
];

/// One row of the dataset file before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawVulnRecord {
    pub id: String,
    pub library: String,
    pub vuln_category: String,
    pub vuln_subcategory: String,
    pub root_cause_category: String,
    pub root_cause_subcategory: String,
    pub symptom: String,
    pub fixing_category: String,
    pub fixing_subcategory: String,
    pub added_lines: i64,
    pub deleted_lines: i64,
    pub commit_ids: String,
    pub cve_ids: String,
}

/// One labeled vulnerability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VulnRecord {
    pub id: String,
    pub library: Library,
    pub vuln: VulnCategory,
    pub root_cause: RootCause,
    pub symptom: Symptom,
    pub fixing: FixingPattern,
    pub added_lines: u64,
    pub deleted_lines: u64,
    pub commit_ids: Vec<String>,
    pub cve_ids: Vec<String>,
}

impl VulnRecord {
    pub fn effort(&self) -> EffortBucket {
        classify_effort(self.added_lines, self.deleted_lines)
    }

    pub fn to_raw(&self) -> RawVulnRecord {
        fn sub<L: Leaf>(label: &Label<L>) -> String {
            label
                .subcategory()
                .map(|s| s.as_str().to_string())
                .unwrap_or_default()
        }
        RawVulnRecord {
            id: self.id.clone(),
            library: self.library.as_str().to_string(),
            vuln_category: self.vuln.category().as_str().to_string(),
            vuln_subcategory: sub(&self.vuln),
            root_cause_category: self.root_cause.category().as_str().to_string(),
            root_cause_subcategory: sub(&self.root_cause),
            symptom: self.symptom.as_str().to_string(),
            fixing_category: self.fixing.category().as_str().to_string(),
            fixing_subcategory: sub(&self.fixing),
            added_lines: self.added_lines as i64,
            deleted_lines: self.deleted_lines as i64,
            commit_ids: self.commit_ids.join(";"),
            cve_ids: self.cve_ids.join(";"),
        }
    }
}

/// A single problem found while validating a raw record.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("{0}")]
    UnknownValue(#[from] crate::taxonomy::UnknownName),
    #[error("{field}: {error}")]
    Label {
        field: &'static str,
        error: LabelError,
    },
    #[error("negative effort: {field} = {value}")]
    NegativeEffort { field: &'static str, value: i64 },
    #[error("empty record id")]
    EmptyId,
    #[error("no commit ids")]
    NoCommits,
}

fn parse_label<L>(
    field: &'static str,
    category: &str,
    subcategory: &str,
    violations: &mut Vec<Violation>,
) -> Option<Label<L>>
where
    L: Leaf + std::str::FromStr<Err = crate::taxonomy::UnknownName>,
    L::Category: std::str::FromStr<Err = crate::taxonomy::UnknownName>,
{
    let cat = category
        .parse::<L::Category>()
        .map_err(|e| violations.push(e.into()))
        .ok();
    let sub = if subcategory.is_empty() {
        Some(None)
    } else {
        subcategory
            .parse::<L>()
            .map(Some)
            .map_err(|e| violations.push(e.into()))
            .ok()
    };
    let (cat, sub) = (cat?, sub?);
    Label::new(cat, sub)
        .map_err(|error| violations.push(Violation::Label { field, error }))
        .ok()
}

fn split_list(s: &str) -> Vec<String> {
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

/// Checks every label and count of a raw record, collecting all violations.
pub fn validate_label(raw: &RawVulnRecord) -> Result<VulnRecord, Vec<Violation>> {
    let mut violations = Vec::new();
    if raw.id.trim().is_empty() {
        violations.push(Violation::EmptyId);
    }
    let library = raw
        .library
        .parse::<Library>()
        .map_err(|e| violations.push(e.into()))
        .ok();
    let vuln = parse_label::<VulnSubcategory>(
        "vulnerability",
        &raw.vuln_category,
        &raw.vuln_subcategory,
        &mut violations,
    );
    let root_cause = parse_label::<RootCauseSubcategory>(
        "root cause",
        &raw.root_cause_category,
        &raw.root_cause_subcategory,
        &mut violations,
    );
    let symptom = raw
        .symptom
        .parse::<Symptom>()
        .map_err(|e| violations.push(e.into()))
        .ok();
    let fixing = parse_label::<FixingSubcategory>(
        "fixing pattern",
        &raw.fixing_category,
        &raw.fixing_subcategory,
        &mut violations,
    );
    for (field, value) in [
        ("added_lines", raw.added_lines),
        ("deleted_lines", raw.deleted_lines),
    ] {
        if value < 0 {
            violations.push(Violation::NegativeEffort { field, value });
        }
    }
    let commit_ids = split_list(&raw.commit_ids);
    if commit_ids.is_empty() {
        violations.push(Violation::NoCommits);
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    Ok(VulnRecord {
        id: raw.id.trim().to_string(),
        library: library.unwrap(),
        vuln: vuln.unwrap(),
        root_cause: root_cause.unwrap(),
        symptom: symptom.unwrap(),
        fixing: fixing.unwrap(),
        added_lines: raw.added_lines as u64,
        deleted_lines: raw.deleted_lines as u64,
        commit_ids,
        cve_ids: split_list(&raw.cve_ids),
    })
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read dataset {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid records: {}", format_invalid(.0))]
    Invalid(Vec<(String, Vec<Violation>)>),
    #[error("failed to write dataset: {0}")]
    Write(#[from] csv::Error),
}

fn format_invalid(items: &[(String, Vec<Violation>)]) -> String {
    items
        .iter()
        .map(|(id, v)| {
            let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
            format!("{id} ({})", msgs.join("; "))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<VulnRecord>, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(file)
}

pub fn read_dataset(reader: impl Read) -> Result<Vec<VulnRecord>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| DatasetError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(DatasetError::Parse {
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    let mut invalid = Vec::new();
    for row in rdr.deserialize::<RawVulnRecord>() {
        let raw = row.map_err(|e| DatasetError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        match validate_label(&raw) {
            Ok(rec) => records.push(rec),
            Err(v) => invalid.push((raw.id.clone(), v)),
        }
    }
    if !invalid.is_empty() {
        return Err(DatasetError::Invalid(invalid));
    }
    Ok(records)
}

pub fn write_dataset(records: &[VulnRecord], writer: impl Write) -> Result<(), DatasetError> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    wtr.write_record(HEADER)?;
    for rec in records {
        wtr.serialize(rec.to_raw())?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// An axis along which records can be counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Library,
    VulnCategory,
    VulnSubcategory,
    RootCause,
    RootCauseSubcategory,
    Symptom,
    Fixing,
    FixingSubcategory,
    Effort,
}

impl Dimension {
    pub const ALL: [Dimension; 9] = [
        Dimension::Library,
        Dimension::VulnCategory,
        Dimension::VulnSubcategory,
        Dimension::RootCause,
        Dimension::RootCauseSubcategory,
        Dimension::Symptom,
        Dimension::Fixing,
        Dimension::FixingSubcategory,
        Dimension::Effort,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Library => "library",
            Dimension::VulnCategory => "vuln_category",
            Dimension::VulnSubcategory => "vuln_subcategory",
            Dimension::RootCause => "root_cause",
            Dimension::RootCauseSubcategory => "root_cause_subcategory",
            Dimension::Symptom => "symptom",
            Dimension::Fixing => "fixing",
            Dimension::FixingSubcategory => "fixing_subcategory",
            Dimension::Effort => "effort",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|d| d.name() == s)
    }

    /// Every key this dimension can produce, in taxonomy order.
    pub fn keys(self) -> Vec<&'static str> {
        fn names<T: Canonical>() -> Vec<&'static str> {
            T::ALL.iter().map(|v| v.as_str()).collect()
        }
        fn with_others<T: Canonical>() -> Vec<&'static str> {
            let mut v = names::<T>();
            v.push("others");
            v
        }
        match self {
            Dimension::Library => names::<Library>(),
            Dimension::VulnCategory => names::<VulnCategoryKind>(),
            Dimension::VulnSubcategory => with_others::<VulnSubcategory>(),
            Dimension::RootCause => names::<RootCauseKind>(),
            Dimension::RootCauseSubcategory => with_others::<RootCauseSubcategory>(),
            Dimension::Symptom => names::<Symptom>(),
            Dimension::Fixing => names::<FixingCategoryKind>(),
            Dimension::FixingSubcategory => with_others::<FixingSubcategory>(),
            Dimension::Effort => names::<EffortBucket>(),
        }
    }

    /// The key of `record` along this dimension.
    pub fn key(self, record: &VulnRecord) -> &'static str {
        match self {
            Dimension::Library => record.library.as_str(),
            Dimension::VulnCategory => record.vuln.category().as_str(),
            Dimension::VulnSubcategory => record.vuln.leaf_key(),
            Dimension::RootCause => record.root_cause.category().as_str(),
            Dimension::RootCauseSubcategory => record.root_cause.leaf_key(),
            Dimension::Symptom => record.symptom.as_str(),
            Dimension::Fixing => record.fixing.category().as_str(),
            Dimension::FixingSubcategory => record.fixing.leaf_key(),
            Dimension::Effort => record.effort().as_str(),
        }
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

/// Conjunction of `dimension == key` constraints.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordFilter {
    clauses: Vec<(Dimension, String)>,
}

impl RecordFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, dimension: Dimension, key: impl Into<String>) -> Self {
        self.clauses.push((dimension, key.into()));
        self
    }

    pub fn matches(&self, record: &VulnRecord) -> bool {
        self.clauses.iter().all(|(d, k)| d.key(record) == k)
    }
}

/// Counts per key in taxonomy order; keys with zero records are omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub dimension: Option<Dimension>,
    pub counts: Vec<(String, usize)>,
}

impl CountTable {
    pub fn get(&self, key: &str) -> usize {
        self.counts
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, c)| *c)
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|(_, c)| c).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn count_by(
    records: &[VulnRecord],
    dimension: Dimension,
    filter: Option<&RecordFilter>,
) -> CountTable {
    let mut tally: BTreeMap<&'static str, usize> = BTreeMap::new();
    for rec in records
        .iter()
        .filter(|r| filter.is_none_or(|f| f.matches(r)))
    {
        *tally.entry(dimension.key(rec)).or_default() += 1;
    }
    let counts = dimension
        .keys()
        .into_iter()
        .filter_map(|k| tally.get(k).map(|c| (k.to_string(), *c)))
        .collect();
    CountTable {
        dimension: Some(dimension),
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("cross tabulation needs two different dimensions (got `{0}` twice)")]
    SameDimension(Dimension),
    #[error("share is undefined for an empty record set")]
    EmptyInput,
}

/// Matrix of counts; rows and columns list every key in taxonomy order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossTab {
    pub row_dimension: Dimension,
    pub col_dimension: Dimension,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<usize>>,
}

impl CrossTab {
    pub fn cell(&self, row: &str, col: &str) -> usize {
        let r = self.rows.iter().position(|k| k == row);
        let c = self.cols.iter().position(|k| k == col);
        match (r, c) {
            (Some(r), Some(c)) => self.cells[r][c],
            _ => 0,
        }
    }

    pub fn row_totals(&self) -> Vec<usize> {
        self.cells.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<usize> {
        (0..self.cols.len())
            .map(|c| self.cells.iter().map(|r| r[c]).sum())
            .collect()
    }

    pub fn grand_total(&self) -> usize {
        self.cells.iter().flatten().sum()
    }

    pub fn col_total(&self, col: &str) -> usize {
        self.cols
            .iter()
            .position(|k| k == col)
            .map(|c| self.cells.iter().map(|r| r[c]).sum())
            .unwrap_or(0)
    }
}

pub fn cross_tab(
    records: &[VulnRecord],
    row_dimension: Dimension,
    col_dimension: Dimension,
) -> Result<CrossTab, StatsError> {
    if row_dimension == col_dimension {
        return Err(StatsError::SameDimension(row_dimension));
    }
    let rows: Vec<String> = row_dimension.keys().into_iter().map(String::from).collect();
    let cols: Vec<String> = col_dimension.keys().into_iter().map(String::from).collect();
    let mut cells = vec![vec![0usize; cols.len()]; rows.len()];
    for rec in records {
        let r = rows.iter().position(|k| k == row_dimension.key(rec));
        let c = cols.iter().position(|k| k == col_dimension.key(rec));
        if let (Some(r), Some(c)) = (r, c) {
            cells[r][c] += 1;
        }
    }
    Ok(CrossTab {
        row_dimension,
        col_dimension,
        rows,
        cols,
        cells,
    })
}

/// Fraction of records whose fix was micro or small.
pub fn micro_small_share(records: &[VulnRecord]) -> Result<f64, StatsError> {
    if records.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let hits = records
        .iter()
        .filter(|r| matches!(r.effort(), EffortBucket::Micro | EffortBucket::Small))
        .count();
    Ok(hits as f64 / records.len() as f64)
}

/// Everything `stats` prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub totals: Vec<CountTable>,
    pub by_library: Vec<CrossTab>,
    pub root_cause_mappings: Vec<CrossTab>,
    pub micro_small_share: Option<f64>,
}

impl StatsReport {
    pub fn build(records: &[VulnRecord]) -> Self {
        let totals = Dimension::ALL
            .iter()
            .map(|d| count_by(records, *d, None))
            .collect();
        let by_library = Dimension::ALL
            .iter()
            .filter(|d| **d != Dimension::Library)
            .map(|d| cross_tab(records, Dimension::Library, *d).expect("distinct dimensions"))
            .collect();
        let root_cause_mappings = [
            Dimension::Symptom,
            Dimension::Fixing,
            Dimension::FixingSubcategory,
            Dimension::Effort,
        ]
        .iter()
        .map(|d| cross_tab(records, Dimension::RootCause, *d).expect("distinct dimensions"))
        .collect();
        StatsReport {
            total: records.len(),
            totals,
            by_library,
            root_cause_mappings,
            micro_small_share: micro_small_share(records).ok(),
        }
    }

    pub fn totals_for(&self, dimension: Dimension) -> Option<&CountTable> {
        self.totals.iter().find(|t| t.dimension == Some(dimension))
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "records: {}", self.total);
        for table in &self.totals {
            let dim = table.dimension.map(|d| d.name()).unwrap_or("?");
            let _ = writeln!(out, "\n== {dim} ==");
            for (key, count) in &table.counts {
                let _ = writeln!(
                    out,
                    "  {key:<42} {count:>5}  {:>5}%",
                    percent(*count, self.total)
                );
            }
        }
        for tab in self.by_library.iter().chain(&self.root_cause_mappings) {
            let _ = writeln!(out, "\n== {} x {} ==", tab.row_dimension, tab.col_dimension);
            render_crosstab_text(&mut out, tab);
        }
        if let Some(share) = self.micro_small_share {
            let _ = writeln!(out, "\nmicro+small share: {:.1}%", share * 100.0);
        }
        out
    }

    /// Long-form CSV: one `table,row,col,count` line per non-zero cell.
    pub fn render_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let _ = wtr.write_record(["table", "row", "col", "count"]);
        for table in &self.totals {
            let name = table.dimension.map(|d| d.name()).unwrap_or("?");
            for (key, count) in &table.counts {
                let _ = wtr.write_record([name, key.as_str(), "", &count.to_string()]);
            }
        }
        for tab in self.by_library.iter().chain(&self.root_cause_mappings) {
            let name = format!("{}x{}", tab.row_dimension, tab.col_dimension);
            for (r, row) in tab.rows.iter().enumerate() {
                for (c, col) in tab.cols.iter().enumerate() {
                    if tab.cells[r][c] > 0 {
                        let _ = wtr.write_record([
                            name.as_str(),
                            row,
                            col,
                            &tab.cells[r][c].to_string(),
                        ]);
                    }
                }
            }
        }
        if let Some(share) = self.micro_small_share {
            let _ = wtr.write_record(["micro_small_share", "", "", &format!("{share:.4}")]);
        }
        String::from_utf8(wtr.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

/// Percentage with one decimal place.
pub fn percent(count: usize, total: usize) -> String {
    if total == 0 {
        return "0.0".to_string();
    }
    format!("{:.1}", count as f64 * 100.0 / total as f64)
}

fn render_crosstab_text(out: &mut String, tab: &CrossTab) {
    let row_totals = tab.row_totals();
    let col_totals = tab.col_totals();
    let used_cols: Vec<usize> = (0..tab.cols.len()).filter(|c| col_totals[*c] > 0).collect();
    let used_rows: Vec<usize> = (0..tab.rows.len()).filter(|r| row_totals[*r] > 0).collect();
    let _ = write!(out, "  {:<40}", "");
    for c in &used_cols {
        let _ = write!(out, " {:>8}", short(&tab.cols[*c]));
    }
    let _ = writeln!(out, " {:>8}", "sum");
    for r in used_rows {
        let _ = write!(out, "  {:<40}", tab.rows[r]);
        for c in &used_cols {
            let _ = write!(out, " {:>8}", tab.cells[r][*c]);
        }
        let _ = writeln!(out, " {:>8}", row_totals[r]);
    }
    let _ = write!(out, "  {:<40}", "sum");
    for c in &used_cols {
        let _ = write!(out, " {:>8}", col_totals[*c]);
    }
    let _ = writeln!(out, " {:>8}", tab.grand_total());
}

fn short(key: &str) -> String {
    if key.len() <= 8 {
        return key.to_string();
    }
    // initials keep wide matrices readable
    key.split('_').filter_map(|w| w.chars().next()).collect()
}
