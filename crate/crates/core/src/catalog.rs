//! Mutation operators. Each one undoes a fixing pattern from the taxonomy and
//! is described as data: what to match and how to rewrite the match.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use once_cell::sync::Lazy;
use regex::bytes::{NoExpand, Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{
    Canonical, Cwe, FixingCategoryKind, FixingPattern, FixingSubcategory as FS, Label,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageClass {
    CLike,
    Python,
}

impl LanguageClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LanguageClass::CLike => "c_like",
            LanguageClass::Python => "python",
        }
    }

    pub fn extensions(self) -> &'static [&'static str] {
        match self {
            LanguageClass::CLike => &["c", "cc", "cpp", "cxx", "h", "hpp", "cu"],
            LanguageClass::Python => &["py"],
        }
    }

    pub fn of_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?;
        [LanguageClass::CLike, LanguageClass::Python]
            .into_iter()
            .find(|c| c.extensions().contains(&ext))
    }
}

impl fmt::Display for LanguageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatchSpec {
    /// Regex over the file bytes in multi-line mode. A named group `site`,
    /// when it participates, narrows the site to that group.
    LinePattern { regex: String },
    /// `<identifier> ( ... ) [;]` with balanced parentheses.
    CallBlock { identifiers: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rewrite {
    pub pattern: String,
    /// Inserted literally; `$` has no special meaning.
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    DeleteSpan,
    /// The first rewrite whose pattern occurs in the site replaces its first
    /// occurrence.
    ReplaceByPattern {
        rewrites: Vec<Rewrite>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationOperator {
    pub id: String,
    pub name: String,
    pub inverted_fixing_pattern: FixingPattern,
    pub seeds_cwe: Option<Cwe>,
    pub language_scope: BTreeSet<LanguageClass>,
    pub match_spec: MatchSpec,
    pub transform: Transform,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OperatorViolation {
    #[error("operator id is empty")]
    EmptyId,
    #[error("language scope is empty")]
    EmptyLanguageScope,
    #[error("call_block identifier set is empty")]
    EmptyIdentifiers,
    #[error("`{0}` is not an identifier")]
    BadIdentifier(String),
    #[error("regex `{pattern}` does not compile: {message}")]
    BadRegex { pattern: String, message: String },
    #[error("replace_by_pattern has no rewrites")]
    EmptyRewrites,
    #[error("replacement `{replacement}` re-matches its own pattern `{pattern}`")]
    ReplacementRematches {
        pattern: String,
        replacement: String,
    },
    #[error("call_block operators may only rewrite the callee; pattern `{0}` matches none of the identifiers")]
    CallBlockRewriteNotCallee(String),
}

static IDENTIFIER: Lazy<regex::Regex> = Lazy::new(|| {
    regex::Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*(?:::[A-Za-z_][A-Za-z0-9_]*)*$").unwrap()
});

fn compile(pattern: &str) -> Result<Regex, OperatorViolation> {
    RegexBuilder::new(pattern)
        .multi_line(true)
        .build()
        .map_err(|e| OperatorViolation::BadRegex {
            pattern: pattern.to_string(),
            message: e.to_string(),
        })
}

pub fn validate_operator(op: &MutationOperator) -> Result<(), Vec<OperatorViolation>> {
    let mut out = Vec::new();
    if op.id.trim().is_empty() {
        out.push(OperatorViolation::EmptyId);
    }
    if op.language_scope.is_empty() {
        out.push(OperatorViolation::EmptyLanguageScope);
    }
    match &op.match_spec {
        MatchSpec::LinePattern { regex } => {
            if let Err(v) = compile(regex) {
                out.push(v);
            }
        }
        MatchSpec::CallBlock { identifiers } => {
            if identifiers.is_empty() {
                out.push(OperatorViolation::EmptyIdentifiers);
            }
            for ident in identifiers {
                if !IDENTIFIER.is_match(ident) {
                    out.push(OperatorViolation::BadIdentifier(ident.clone()));
                }
            }
        }
    }
    if let Transform::ReplaceByPattern { rewrites } = &op.transform {
        if rewrites.is_empty() {
            out.push(OperatorViolation::EmptyRewrites);
        }
        for rw in rewrites {
            let re = match compile(&rw.pattern) {
                Ok(re) => re,
                Err(v) => {
                    out.push(v);
                    continue;
                }
            };
            if re.is_match(rw.replacement.as_bytes()) {
                out.push(OperatorViolation::ReplacementRematches {
                    pattern: rw.pattern.clone(),
                    replacement: rw.replacement.clone(),
                });
            }
            if let MatchSpec::CallBlock { identifiers } = &op.match_spec {
                if !identifiers.iter().any(|i| re.is_match(i.as_bytes())) {
                    out.push(OperatorViolation::CallBlockRewriteNotCallee(
                        rw.pattern.clone(),
                    ));
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Debug, Clone)]
pub enum Matcher {
    Line(Regex),
    CallBlock(Vec<String>),
}

/// An operator with its regexes compiled, ready for scanning and mutation.
#[derive(Debug, Clone)]
pub struct CompiledOperator {
    pub op: MutationOperator,
    pub matcher: Matcher,
    rewrites: Vec<(Regex, Vec<u8>)>,
}

impl CompiledOperator {
    pub fn new(op: &MutationOperator) -> Result<Self, Vec<OperatorViolation>> {
        validate_operator(op)?;
        let matcher = match &op.match_spec {
            MatchSpec::LinePattern { regex } => Matcher::Line(compile(regex).map_err(|v| vec![v])?),
            MatchSpec::CallBlock { identifiers } => Matcher::CallBlock(identifiers.clone()),
        };
        let rewrites = match &op.transform {
            Transform::DeleteSpan => Vec::new(),
            Transform::ReplaceByPattern { rewrites } => rewrites
                .iter()
                .map(|rw| Ok((compile(&rw.pattern)?, rw.replacement.clone().into_bytes())))
                .collect::<Result<_, OperatorViolation>>()
                .map_err(|v| vec![v])?,
        };
        Ok(Self {
            op: op.clone(),
            matcher,
            rewrites,
        })
    }

    pub fn id(&self) -> &str {
        &self.op.id
    }

    pub fn applies_to(&self, lang: LanguageClass) -> bool {
        self.op.enabled && self.op.language_scope.contains(&lang)
    }

    /// Replacement bytes for a site, or `None` when the transform leaves it
    /// unchanged. Deleted Python statements become `pass` so the enclosing
    /// block stays well-formed.
    pub fn mutate(&self, site: &[u8], lang: LanguageClass) -> Option<Vec<u8>> {
        match self.op.transform {
            Transform::DeleteSpan => Some(match lang {
                LanguageClass::Python => b"pass".to_vec(),
                LanguageClass::CLike => Vec::new(),
            }),
            Transform::ReplaceByPattern { .. } => {
                let (re, replacement) = self.rewrites.iter().find(|(re, _)| re.is_match(site))?;
                let out = re.replacen(site, 1, NoExpand(replacement)).into_owned();
                (out != site).then_some(out)
            }
        }
    }
}

pub fn compile_catalog(ops: &[MutationOperator]) -> Result<Vec<CompiledOperator>, CatalogError> {
    ops.iter()
        .map(|op| {
            CompiledOperator::new(op).map_err(|violations| CatalogError::Invalid {
                id: op.id.clone(),
                violations,
            })
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog parse error: {0}")]
    Parse(String),
    #[error("operator `{id}`: {message}")]
    Field { id: String, message: String },
    #[error("duplicate operator id `{0}`")]
    DuplicateId(String),
    #[error("operator `{id}` is invalid: {}", join(violations))]
    Invalid {
        id: String,
        violations: Vec<OperatorViolation>,
    },
}

fn join(vs: &[OperatorViolation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogFile {
    #[serde(rename = "operator", default)]
    operators: Vec<OperatorRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorRecord {
    id: String,
    name: String,
    fixing_category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixing_subcategory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seeds_cwe: Option<String>,
    language_scope: Vec<LanguageClass>,
    #[serde(default = "default_enabled")]
    enabled: bool,
    #[serde(rename = "match")]
    match_spec: MatchSpec,
    transform: Transform,
}

fn default_enabled() -> bool {
    true
}

fn parse_cwe(s: &str) -> Option<Cwe> {
    let digits = s.strip_prefix("CWE-").unwrap_or(s);
    digits.parse().ok().map(Cwe)
}

impl OperatorRecord {
    fn from_operator(op: &MutationOperator) -> Self {
        Self {
            id: op.id.clone(),
            name: op.name.clone(),
            fixing_category: op.inverted_fixing_pattern.category().as_str().to_string(),
            fixing_subcategory: op
                .inverted_fixing_pattern
                .subcategory()
                .map(|s| s.as_str().to_string()),
            seeds_cwe: op.seeds_cwe.map(|c| c.to_string()),
            language_scope: op.language_scope.iter().copied().collect(),
            enabled: op.enabled,
            match_spec: op.match_spec.clone(),
            transform: op.transform.clone(),
        }
    }

    fn into_operator(self) -> Result<MutationOperator, CatalogError> {
        let field = |message: String| CatalogError::Field {
            id: self.id.clone(),
            message,
        };
        let category =
            FixingCategoryKind::parse(&self.fixing_category).map_err(|e| field(e.to_string()))?;
        let subcategory = self
            .fixing_subcategory
            .as_deref()
            .map(FS::parse)
            .transpose()
            .map_err(|e| field(e.to_string()))?;
        let pattern = Label::new(category, subcategory).map_err(|e| field(e.to_string()))?;
        let seeds_cwe = match &self.seeds_cwe {
            None => None,
            Some(s) => Some(parse_cwe(s).ok_or_else(|| field(format!("bad CWE id `{s}`")))?),
        };
        Ok(MutationOperator {
            id: self.id,
            name: self.name,
            inverted_fixing_pattern: pattern,
            seeds_cwe,
            language_scope: self.language_scope.into_iter().collect(),
            match_spec: self.match_spec,
            transform: self.transform,
            enabled: self.enabled,
        })
    }
}

pub fn parse_catalog(text: &str) -> Result<Vec<MutationOperator>, CatalogError> {
    let file: CatalogFile = toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
    let mut seen = HashSet::new();
    let mut ops = Vec::with_capacity(file.operators.len());
    for record in file.operators {
        if !seen.insert(record.id.clone()) {
            return Err(CatalogError::DuplicateId(record.id));
        }
        let op = record.into_operator()?;
        validate_operator(&op).map_err(|violations| CatalogError::Invalid {
            id: op.id.clone(),
            violations,
        })?;
        ops.push(op);
    }
    Ok(ops)
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<MutationOperator>, CatalogError> {
    parse_catalog(&std::fs::read_to_string(path)?)
}

pub fn serialize_catalog(ops: &[MutationOperator]) -> String {
    let file = CatalogFile {
        operators: ops.iter().map(OperatorRecord::from_operator).collect(),
    };
    toml::to_string(&file).expect("catalog serializes")
}

fn op(
    id: &str,
    name: &str,
    leaf: FS,
    cwe: Option<u32>,
    scope: &[LanguageClass],
    match_spec: MatchSpec,
    transform: Transform,
) -> MutationOperator {
    MutationOperator {
        id: id.into(),
        name: name.into(),
        inverted_fixing_pattern: Label::leaf(leaf),
        seeds_cwe: cwe.map(Cwe),
        language_scope: scope.iter().copied().collect(),
        match_spec,
        transform,
        enabled: true,
    }
}

fn calls(ids: &[&str]) -> MatchSpec {
    MatchSpec::CallBlock {
        identifiers: ids.iter().map(|s| s.to_string()).collect(),
    }
}

fn line(regex: &str) -> MatchSpec {
    MatchSpec::LinePattern {
        regex: regex.to_string(),
    }
}

fn rewrites(pairs: &[(&str, &str)]) -> Transform {
    Transform::ReplaceByPattern {
        rewrites: pairs
            .iter()
            .map(|(p, r)| Rewrite {
                pattern: p.to_string(),
                replacement: r.to_string(),
            })
            .collect(),
    }
}

const C: &[LanguageClass] = &[LanguageClass::CLike];
const C_PY: &[LanguageClass] = &[LanguageClass::CLike, LanguageClass::Python];
const PTR: &str = r"[A-Za-z_][A-Za-z0-9_]*(?:(?:->|\.)[A-Za-z_][A-Za-z0-9_]*)*";

pub fn builtin_catalog() -> Vec<MutationOperator> {
    use Transform::DeleteSpan;
    vec![
        op(
            "CHK-TENSOR-DEL",
            "delete tensor property checker",
            FS::AddCheckerForTensorsProperty,
            Some(20),
            C,
            calls(&[
                "OP_REQUIRES",
                "OP_REQUIRES_OK",
                "OP_REQUIRES_ASYNC",
                "OP_REQUIRES_OK_ASYNC",
                "TORCH_CHECK",
                "TF_LITE_ENSURE_EQ",
                "TF_LITE_ENSURE_TYPES_EQ",
            ]),
            DeleteSpan,
        ),
        op(
            "CHK-OVERFLOW-DEL",
            "delete overflow checker",
            FS::AddCheckerForOverflow,
            Some(190),
            C,
            calls(&["TF_LITE_ENSURE", "TF_LITE_ENSURE_MSG"]),
            DeleteSpan,
        ),
        op(
            "CHK-NULL-DEL",
            "delete null pointer guard",
            FS::AddCheckerForNullPointerDereference,
            Some(476),
            C,
            line(&format!(
                r"\bif[ \t]*\([ \t]*(?:{PTR}[ \t]*==[ \t]*(?:NULL|nullptr)|(?:NULL|nullptr)[ \t]*==[ \t]*{PTR})[ \t]*\)\s*return\b[^;\n]*;"
            )),
            DeleteSpan,
        ),
        op(
            "CHK-RECURSION-DEL",
            "delete recursion depth guard",
            FS::AddCheckerForRecursion,
            Some(835),
            C_PY,
            line(
                r"^[ \t]*(?P<site>if\b[^\n]*(?i:depth|recurs)[^\n]*\b(?:return|raise|throw)\b[^\n]*?)[ \t]*$",
            ),
            DeleteSpan,
        ),
        op(
            "TYPE-NARROW",
            "narrow 64-bit integer type",
            FS::IncreaseIntegerTypeRange,
            Some(190),
            C,
            line(r"\b(?:uint64_t|int64_t|int64|size_t|long[ \t]+long)\b"),
            rewrites(&[
                (r"\buint64_t\b", "uint32_t"),
                (r"\bint64_t\b", "int32_t"),
                (r"\bint64\b", "int32"),
                (r"\bsize_t\b", "int"),
                (r"\blong[ \t]+long\b", "int"),
            ]),
        ),
        op(
            "SIGN-SWAP",
            "make unsigned integer type signed",
            FS::ConvertIntegerSign,
            Some(191),
            C,
            line(r"\b(?:size_t|uint32_t|unsigned(?:[ \t]+int\b)?)\b"),
            rewrites(&[
                (r"\bsize_t\b", "int"),
                (r"\buint32_t\b", "int32_t"),
                (r"\bunsigned(?:[ \t]+int\b)?\b", "int"),
            ]),
        ),
        op(
            "MEM-RELEASE-DEL",
            "delete memory release call",
            FS::ManageMemoryRelease,
            Some(401),
            C,
            calls(&[
                "free",
                "Py_DECREF",
                "Py_XDECREF",
                "Py_CLEAR",
                "PyMem_Free",
                "PyObject_Free",
            ]),
            DeleteSpan,
        ),
        op(
            "MEM-DELETE-DEL",
            "delete C++ delete expression",
            FS::ManageMemoryRelease,
            Some(401),
            C,
            line(&format!(r"\bdelete(?:[ \t]*\[[ \t]*\])?[ \t]+{PTR}[ \t]*;")),
            DeleteSpan,
        ),
        op(
            "INIT-DEL",
            "delete initializer",
            FS::ResourceInitialization,
            Some(908),
            C,
            line(
                r"\b(?:int|long|short|char|float|double|bool|size_t|u?int(?:8|16|32|64)_t)\b[ \t*]+[A-Za-z_][A-Za-z0-9_]*(?:\[[^\]\n]*\])?(?P<site>[ \t]*=[ \t]*[^;\n]+);",
            ),
            DeleteSpan,
        ),
        op(
            "LOCK-DEL",
            "delete lock acquisition",
            FS::AddLockingMechanism,
            Some(362),
            C_PY,
            line(
                r"\b(?:pthread_mutex_lock|mtx_lock|spin_lock|mutex_lock|EnterCriticalSection)[ \t]*\([^;\n]*\)[ \t]*;|\b(?:mutex_lock|tf_shared_lock|MutexLock|(?:std::)?(?:lock_guard|unique_lock|scoped_lock)(?:[ \t]*<[^>\n]*>)?)[ \t]+[A-Za-z_][A-Za-z0-9_]*[ \t]*[({][^;\n]*[)}][ \t]*;|\b[A-Za-z_][A-Za-z0-9_]*(?:(?:->|\.)[A-Za-z_][A-Za-z0-9_]*)*(?:\.|->)(?:lock|acquire)\([ \t]*\)[ \t]*;?",
            ),
            DeleteSpan,
        ),
        op(
            "EXC-DEL",
            "delete error-raising branch",
            FS::ImprovedExceptionHandling,
            None,
            C_PY,
            line(
                r"\bif[ \t]*\([^\n]*\)\s*return[ \t]+(?:-E[A-Z0-9]+|NULL|nullptr|false|-1|errors::[A-Za-z_][A-Za-z0-9_]*\([^;\n]*\)|[A-Za-z_][A-Za-z0-9_:]*(?:Error|Status|ERR|Err)[A-Za-z0-9_]*(?:\([^;\n]*\))?)[ \t]*;|\bthrow\b[^;\n]*;|^[ \t]*(?P<site>raise\b[^\n]*?)[ \t]*$",
            ),
            DeleteSpan,
        ),
    ]
}
