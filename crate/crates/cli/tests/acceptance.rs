//! End-to-end acceptance run. Prints one line per criterion and exits
//! non-zero if any of them fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use mutforge_core::catalog::{builtin_catalog, compile_catalog, CompiledOperator, LanguageClass};
use mutforge_core::dataset::{count_by, cross_tab, Dimension, VulnRecord};
use mutforge_core::engine::{
    classify_outcome, mutants_from_sites, ProcessOutcome, Workspace, CRASH_SIGNALS,
    DEFAULT_CRASH_MARKERS,
};
use mutforge_core::miner::{extract_cves, parse_log};
use mutforge_core::scanner::{scan_corpus, scan_source, CorpusFilter, DEFAULT_MAX_BLOCK};
use mutforge_core::store::{Mutant, MutantStatus, MutantStore};
use mutforge_core::taxonomy::{
    Canonical, FixingPattern, FixingSubcategory, Label, Leaf, Library, RootCause,
    RootCauseSubcategory, Symptom, VulnCategory, VulnSubcategory,
};
use proptest::prelude::*;
use proptest::sample::select;
use proptest::test_runner::{Config, TestRunner};
use serde_json::Value;

const FAST: Duration = Duration::from_secs(1);
const CAMPAIGN_BUDGET: Duration = Duration::from_secs(120);
const SHARE_TOLERANCE: f64 = 0.0005;
const SCORE_TOLERANCE: f64 = 1e-9;
const PROPERTY_CASES: u32 = 1000;

type Verdict = Result<String, String>;
type Suite<'a> = (&'static str, &'a dyn Fn() -> Result<(), String>);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn mutforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mutforge"))
        .env_remove("MUTFORGE_CONFIG")
        .args(args)
        .output()
        .expect("spawn mutforge")
}

fn ok_stdout(args: &[&str]) -> Result<String, String> {
    let out = mutforge(args);
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn within(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < budget, || {
        format!("took {took:?}, budget {budget:?}")
    })?;
    Ok(took)
}

fn stats_rows() -> Result<BTreeMap<(String, String, String), String>, String> {
    let text = ok_stdout(&["stats", "--format", "csv"])?;
    let mut rows = BTreeMap::new();
    for rec in csv::Reader::from_reader(text.as_bytes()).records() {
        let rec = rec.map_err(|e| e.to_string())?;
        rows.insert(
            (rec[0].to_string(), rec[1].to_string(), rec[2].to_string()),
            rec[3].to_string(),
        );
    }
    Ok(rows)
}

fn count(
    rows: &BTreeMap<(String, String, String), String>,
    table: &str,
    row: &str,
    col: &str,
) -> usize {
    rows.get(&(table.into(), row.into(), col.into()))
        .and_then(|v| v.parse().ok())
        .unwrap_or(usize::MAX)
}

fn tables() -> Verdict {
    let start = Instant::now();
    let rows = stats_rows()?;
    let took = within(start, FAST)?;
    let total: usize = rows
        .iter()
        .filter(|(k, _)| k.0 == "library")
        .map(|(k, _)| count(&rows, "library", &k.1, ""))
        .sum();
    check(total == 596, || format!("total {total}"))?;
    let expected: [(&str, &[(&str, usize)]); 6] = [
        (
            "vuln_subcategory",
            &[
                ("integer_overflow", 135),
                ("insufficient_precision", 27),
                ("division_by_zero", 17),
                ("integer_underflow", 5),
            ],
        ),
        (
            "vuln_subcategory",
            &[
                ("memory_leak", 86),
                ("null_pointer_dereference", 48),
                ("infinite_loop", 34),
                ("double_free", 6),
                ("use_after_free", 5),
            ],
        ),
        (
            "root_cause_subcategory",
            &[
                ("numerical_precision_error", 94),
                ("tensor_property_issue", 73),
                ("using_improper_data_type", 24),
                ("incorrect_type_conversion", 22),
            ],
        ),
        (
            "root_cause_subcategory",
            &[
                ("invalid_memory_access", 79),
                ("improper_memory_management", 72),
                ("stack_or_buffer_size_issue", 13),
                ("out_of_bound_read", 12),
            ],
        ),
        (
            "root_cause_subcategory",
            &[
                ("using_wrong_api", 21),
                ("api_misuse", 20),
                ("malicious_parameters", 18),
                ("api_version_issue", 9),
            ],
        ),
        (
            "fixing_subcategory",
            &[
                ("add_checker_for_tensors_property", 102),
                ("add_checker_for_overflow", 35),
                ("add_checker_for_null_pointer_dereference", 34),
                ("add_checker_for_recursion", 5),
            ],
        ),
    ];
    let mut cells_checked = 0;
    for (table, cells) in expected {
        for &(key, want) in cells {
            cells_checked += 1;
            let got = count(&rows, table, key, "");
            check(got == want, || format!("{table}/{key}: {got} != {want}"))?;
        }
    }
    for (row, col, want) in [
        ("tensorflow", "integer_overflow", 63),
        ("numpy", "memory_leak", 65),
    ] {
        let got = count(&rows, "libraryxvuln_subcategory", row, col);
        check(got == want, || format!("{row} x {col}: {got} != {want}"))?;
    }
    Ok(format!(
        "596 records, {cells_checked} subcategory cells and 2 library cells exact in {took:?}"
    ))
}

fn effort() -> Verdict {
    let start = Instant::now();
    let rows = stats_rows()?;
    let took = within(start, FAST)?;
    let buckets: Vec<usize> = ["micro", "small", "medium", "large"]
        .iter()
        .map(|b| count(&rows, "effort", b, ""))
        .collect();
    check(buckets == [201, 240, 111, 44], || {
        format!("buckets {buckets:?}")
    })?;
    let json: Value = serde_json::from_str(&ok_stdout(&["stats", "--format", "json"])?)
        .map_err(|e| e.to_string())?;
    let share = json["micro_small_share"]
        .as_f64()
        .ok_or("no share in json")?;
    let want = 441.0 / 596.0;
    check(
        (share - want).abs() <= SHARE_TOLERANCE && (share - 0.7399).abs() <= SHARE_TOLERANCE,
        || format!("share {share}"),
    )?;
    Ok(format!("201/240/111/44, share {share:.4} in {took:?}"))
}

fn toy_campaign() -> Verdict {
    let start = Instant::now();
    let config = fixtures().join("toy.toml");
    let want: BTreeMap<&str, u64> = [
        ("killed_by_test", 6),
        ("killed_by_crash", 1),
        ("killed_by_timeout", 1),
        ("alive", 3),
        ("invalid", 1),
        ("pending", 0),
        ("skipped", 0),
    ]
    .into();
    let mut reports = Vec::new();
    for _ in 0..3 {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let store = tmp.path().join("store");
        let work = tmp.path().join("work");
        let (store, work) = (store.to_str().unwrap(), work.to_str().unwrap());
        ok_stdout(&[
            "--config",
            config.to_str().unwrap(),
            "run",
            "--store",
            store,
            "--workspace",
            work,
        ])?;
        let text = ok_stdout(&[
            "report",
            "--store",
            store,
            "--format",
            "json",
            "--include-timeouts",
        ])?;
        let report: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let got: BTreeMap<&str, u64> = want
            .keys()
            .map(|k| {
                (
                    *k,
                    report["summary"]["by_status"][*k]
                        .as_u64()
                        .unwrap_or(u64::MAX),
                )
            })
            .collect();
        check(got == want, || format!("statuses {got:?}"))?;
        check(report["summary"]["total"] == 12, || {
            "total is not 12".into()
        })?;
        let score = report["score_with_timeouts"].as_f64().ok_or("no score")?;
        check((score - 8.0 / 11.0).abs() <= SCORE_TOLERANCE, || {
            format!("score {score}")
        })?;
        reports.push(text);
    }
    check(reports.iter().all(|r| *r == reports[0]), || {
        "reports differ between runs".into()
    })?;
    let took = within(start, CAMPAIGN_BUDGET)?;
    Ok(format!(
        "12 mutants, 6/1/1/3/1, score 8/11, 3 identical runs in {took:?}"
    ))
}

fn alive_figure() -> Verdict {
    let corpus = fixtures().join("alive_mutant");
    let lines: Vec<String> = ok_stdout(&["scan", "--corpus", corpus.to_str().unwrap()])?
        .lines()
        .map(String::from)
        .collect();
    check(lines.len() == 1, || format!("{} sites", lines.len()))?;
    let site: Value = serde_json::from_str(&lines[0]).map_err(|e| e.to_string())?;
    let file = site["file"].as_str().ok_or("no file")?;
    let source = fs::read_to_string(corpus.join(file)).map_err(|e| e.to_string())?;
    let first = source
        .lines()
        .position(|l| l.trim_start().starts_with("OP_REQUIRES("))
        .ok_or("no call in fixture")?
        + 1;
    let last = first
        + source
            .lines()
            .skip(first - 1)
            .position(|l| l.trim_end().ends_with(");"))
            .ok_or("unterminated")?;
    check(site["operator_id"] == "CHK-TENSOR-DEL", || {
        format!("operator {}", site["operator_id"])
    })?;
    check(
        site["line_span"] == serde_json::json!([first, last]) && last - first == 3,
        || format!("span {} vs {first}-{last}", site["line_span"]),
    )?;

    let ops = compile_catalog(&builtin_catalog()).map_err(|e| e.to_string())?;
    let scan = scan_corpus(&corpus, &CorpusFilter::default(), &ops, DEFAULT_MAX_BLOCK)
        .map_err(|e| e.to_string())?;
    let mutants = mutants_from_sites(scan.sites, &ops);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut ws = Workspace::create(&corpus, &tmp.path().join("ws")).map_err(|e| e.to_string())?;
    ws.apply(&mutants[0]).map_err(|e| e.to_string())?;
    let patched = fs::read_to_string(ws.root().join(file)).map_err(|e| e.to_string())?;
    let (s, e) = mutants[0].site.byte_span;
    check(
        patched == format!("{}{}", &source[..s], &source[e..]),
        || "applied mutant is not the block deletion".into(),
    )?;
    check(
        patched.lines().count() + 3 == source.lines().count()
            && !patched.contains("Unable to broadcast"),
        || "block still present".into(),
    )?;

    let store = tmp.path().join("store");
    let work = tmp.path().join("work");
    let config = fixtures().join("alive.toml");
    ok_stdout(&[
        "--config",
        config.to_str().unwrap(),
        "run",
        "--store",
        store.to_str().unwrap(),
        "--workspace",
        work.to_str().unwrap(),
    ])?;
    let report: Value = serde_json::from_str(&ok_stdout(&[
        "report",
        "--store",
        store.to_str().unwrap(),
        "--format",
        "json",
    ])?)
    .map_err(|e| e.to_string())?;
    check(
        report["summary"]["total"] == 1 && report["summary"]["by_status"]["alive"] == 1,
        || format!("summary {}", report["summary"]),
    )?;
    Ok(format!(
        "one CHK-TENSOR-DEL site on lines {first}-{last}, deleted block survives the tests"
    ))
}

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

const LINES: &[&str] = &[
    "if (p == NULL) return;\n",
    "OP_REQUIRES(ctx, n > 0,\n            errors::InvalidArgument(\"n\"));\n",
    "/* free(p); ( */\n",
    "free(buf);\n",
    "int64_t n = size;\n",
    "const char *s = \"OP_REQUIRES(\";\n",
    "mutex_lock(&mu);\n",
    "if (depth > kMax) return kTooDeep;\n",
    "TF_LITE_ENSURE(ctx, (a) < (b));\n",
    "OP_REQUIRES(ctx, (\n",
    "}\n",
    "\n",
];

fn source() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![4 => select(LINES).prop_map(String::from), 1 => "[ -~\n]{0,16}"],
        0..30,
    )
    .prop_map(|v| v.concat())
}

fn apply_revert(ops: &[CompiledOperator]) -> Result<(), String> {
    runner()
        .run(
            &(
                proptest::collection::vec(source(), 1..4),
                any::<proptest::sample::Index>(),
            ),
            |(files, pick)| {
                let tmp = tempfile::tempdir().unwrap();
                let corpus = tmp.path().join("corpus");
                fs::create_dir_all(corpus.join("src")).unwrap();
                for (i, text) in files.iter().enumerate() {
                    fs::write(corpus.join(format!("src/f{i}.cc")), text).unwrap();
                }
                let scan =
                    scan_corpus(&corpus, &CorpusFilter::default(), ops, DEFAULT_MAX_BLOCK).unwrap();
                let mutants = mutants_from_sites(scan.sites, ops);
                let mut ws = Workspace::create(&corpus, &tmp.path().join("ws")).unwrap();
                if let Some(m) = mutants.get(pick.index(mutants.len().max(1))) {
                    let path = ws.root().join(&m.site.file);
                    let before = fs::read(&path).unwrap();
                    ws.apply(m).unwrap();
                    let (s, e) = m.site.byte_span;
                    let spliced = [&before[..s], &m.mutated_text[..], &before[e..]].concat();
                    prop_assert_eq!(fs::read(&path).unwrap(), spliced);
                    ws.revert(m).unwrap();
                    prop_assert_eq!(fs::read(&path).unwrap(), before);
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

fn scan_determinism(ops: &[CompiledOperator]) -> Result<(), String> {
    runner()
        .run(&source(), |src| {
            let text = src.as_bytes();
            for lang in [LanguageClass::CLike, LanguageClass::Python] {
                let a = scan_source("k.cc", text, lang, ops, DEFAULT_MAX_BLOCK);
                let b = scan_source("k.cc", text, lang, ops, DEFAULT_MAX_BLOCK);
                prop_assert_eq!(&a, &b);
                for s in &a.sites {
                    prop_assert_eq!(&text[s.byte_span.0..s.byte_span.1], &s.matched_text[..]);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Every combination of build and test end states, checked against the
/// decision table.
fn classify_enumeration() -> Result<(), String> {
    const SIGTERM: i32 = 15;
    const SIGKILL: i32 = 9;
    let markers: Vec<String> = DEFAULT_CRASH_MARKERS
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut ends: Vec<ProcessOutcome> = [0, 1, 2, 139]
        .iter()
        .map(|&c| ProcessOutcome {
            exit_code: Some(c),
            ..Default::default()
        })
        .collect();
    ends.extend(
        CRASH_SIGNALS
            .iter()
            .chain([SIGTERM].iter())
            .map(|&s| ProcessOutcome {
                signal: Some(s),
                ..Default::default()
            }),
    );
    ends.push(ProcessOutcome {
        timed_out: true,
        signal: Some(SIGKILL),
        ..Default::default()
    });
    let mut tests: Vec<Option<ProcessOutcome>> = vec![None];
    for e in &ends {
        for text in ["FAIL: x", "Segmentation fault (core dumped)"] {
            tests.push(Some(ProcessOutcome {
                output: text.into(),
                ..e.clone()
            }));
        }
    }
    let builds: Vec<Option<ProcessOutcome>> = std::iter::once(None)
        .chain(ends.iter().cloned().map(Some))
        .collect();
    let mut seen = BTreeMap::new();
    for b in &builds {
        for t in &tests {
            let want = match (b, t) {
                (Some(b), _) if b.timed_out => MutantStatus::KilledByTimeout,
                (Some(b), _) if b.exit_code != Some(0) => MutantStatus::Invalid,
                (_, None) => MutantStatus::Skipped,
                (_, Some(t)) if t.timed_out => MutantStatus::KilledByTimeout,
                (_, Some(t)) if t.exit_code == Some(0) => MutantStatus::Alive,
                (_, Some(t))
                    if t.signal.is_some_and(|s| s != SIGTERM)
                        || t.output.contains("Segmentation") =>
                {
                    MutantStatus::KilledByCrash
                }
                _ => MutantStatus::KilledByTest,
            };
            let got = classify_outcome(b.as_ref(), t.as_ref(), &markers);
            check(got == want, || {
                format!("build {b:?} test {t:?}: {got} != {want}")
            })?;
            *seen.entry(got).or_insert(0) += 1;
        }
    }
    check(seen.len() == 6, || format!("statuses reached {seen:?}"))
}

fn fake_mutant(i: usize) -> Mutant {
    let ops = compile_catalog(&builtin_catalog()).unwrap();
    let text = format!("free(p{i});\n");
    let mut scan = scan_source(
        &format!("m{}.c", i % 3),
        text.as_bytes(),
        LanguageClass::CLike,
        &ops,
        DEFAULT_MAX_BLOCK,
    );
    Mutant::new(scan.sites.remove(0), Vec::new())
}

fn store_replay() -> Result<(), String> {
    let pool: Vec<Mutant> = (0..8).map(fake_mutant).collect();
    let ends = [
        MutantStatus::KilledByTest,
        MutantStatus::Alive,
        MutantStatus::Invalid,
        MutantStatus::KilledByTimeout,
    ];
    let steps = proptest::collection::vec(
        (0usize..8, proptest::option::of(select(ends.to_vec()))),
        1..12,
    );
    runner()
        .run(&(steps, 0.0f64..=1.0), |(steps, cut)| {
            let tmp = tempfile::tempdir().unwrap();
            let full = tmp.path().join("full");
            {
                let mut store = MutantStore::open(&full).unwrap();
                for (i, end) in &steps {
                    let m = &pool[*i];
                    match end {
                        None => {
                            store.append_mutants(vec![m.clone()]).unwrap();
                        }
                        Some(s)
                            if store
                                .get(&m.mutant_id)
                                .is_some_and(|x| x.status == MutantStatus::Pending) =>
                        {
                            store.update_status(&m.mutant_id, *s, None).unwrap();
                        }
                        Some(_) => {}
                    }
                }
            }
            let log = fs::read(full.join("log")).unwrap();
            let prefix = &log[..((log.len() as f64) * cut) as usize];
            let mut want: Vec<(String, String)> = Vec::new();
            for line in prefix.split(|&b| b == b'\n') {
                let Ok(v) = serde_json::from_slice::<Value>(line) else {
                    continue;
                };
                if let Some(id) = v["insert"]["mutant_id"].as_str() {
                    if !want.iter().any(|(k, _)| k == id) {
                        want.push((id.to_string(), "pending".into()));
                    }
                } else if let Some(id) = v["status"]["mutant_id"].as_str() {
                    want.iter_mut().find(|(k, _)| k == id).unwrap().1 =
                        v["status"]["status"].as_str().unwrap().into();
                }
            }
            let cut_dir = tmp.path().join("cut");
            fs::create_dir_all(&cut_dir).unwrap();
            fs::copy(full.join("header"), cut_dir.join("header")).unwrap();
            fs::write(cut_dir.join("log"), prefix).unwrap();
            let store = MutantStore::open(&cut_dir).unwrap();
            let got: Vec<(String, String)> = store
                .mutants()
                .map(|m| (m.mutant_id.clone(), m.status.as_str().to_string()))
                .collect();
            prop_assert_eq!(got, want.clone());
            prop_assert_eq!(store.summarize().total, want.len());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn label<L: Leaf>() -> impl Strategy<Value = Label<L>> {
    prop_oneof![1 => Just(Label::<L>::others()), 6 => select(L::ALL).prop_map(Label::leaf)]
}

fn record() -> impl Strategy<Value = VulnRecord> {
    (
        select(Library::ALL),
        label::<VulnSubcategory>(),
        label::<RootCauseSubcategory>(),
        select(Symptom::ALL),
        label::<FixingSubcategory>(),
        0u64..300,
        0u64..300,
    )
        .prop_map(
            |(library, vuln, root_cause, symptom, fixing, added, deleted)| VulnRecord {
                id: String::new(),
                library,
                vuln: vuln as VulnCategory,
                root_cause: root_cause as RootCause,
                symptom,
                fixing: fixing as FixingPattern,
                added_lines: added,
                deleted_lines: deleted,
                commit_ids: vec!["c".into()],
                cve_ids: Vec::new(),
            },
        )
}

fn raw_key(r: &VulnRecord, d: Dimension) -> String {
    let raw = r.to_raw();
    let or_others = |s: String| {
        if s.is_empty() {
            "others".to_string()
        } else {
            s
        }
    };
    match d {
        Dimension::Library => raw.library,
        Dimension::VulnCategory => raw.vuln_category,
        Dimension::VulnSubcategory => or_others(raw.vuln_subcategory),
        Dimension::RootCause => raw.root_cause_category,
        Dimension::RootCauseSubcategory => or_others(raw.root_cause_subcategory),
        Dimension::Symptom => raw.symptom,
        Dimension::Fixing => raw.fixing_category,
        Dimension::FixingSubcategory => or_others(raw.fixing_subcategory),
        Dimension::Effort => match raw.added_lines + raw.deleted_lines {
            0..=10 => "micro",
            11..=50 => "small",
            51..=200 => "medium",
            _ => "large",
        }
        .to_string(),
    }
}

fn count_by_partition() -> Result<(), String> {
    runner()
        .run(
            &(
                proptest::collection::vec(record(), 0..1000),
                select(&Dimension::ALL[..]),
            ),
            |(records, d)| {
                let mut brute: BTreeMap<String, usize> = BTreeMap::new();
                for r in &records {
                    *brute.entry(raw_key(r, d)).or_default() += 1;
                }
                let got: BTreeMap<String, usize> =
                    count_by(&records, d, None).counts.into_iter().collect();
                prop_assert_eq!(got, brute);
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

fn cross_tab_marginals() -> Result<(), String> {
    let dims = (select(&Dimension::ALL[..]), select(&Dimension::ALL[..]))
        .prop_filter("distinct", |(a, b)| a != b);
    runner()
        .run(
            &(proptest::collection::vec(record(), 0..1000), dims),
            |(records, (a, b))| {
                let tab = cross_tab(&records, a, b).unwrap();
                let mut brute: BTreeMap<(String, String), usize> = BTreeMap::new();
                for r in &records {
                    *brute.entry((raw_key(r, a), raw_key(r, b))).or_default() += 1;
                }
                for ((rk, ck), n) in &brute {
                    prop_assert_eq!(tab.cell(rk, ck), *n);
                }
                let mut rows: BTreeMap<&str, usize> = BTreeMap::new();
                for ((rk, _), n) in &brute {
                    *rows.entry(rk.as_str()).or_default() += n;
                }
                for (key, total) in tab.rows.iter().zip(tab.row_totals()) {
                    prop_assert_eq!(rows.get(key.as_str()).copied().unwrap_or(0), total);
                }
                prop_assert_eq!(tab.col_totals().iter().sum::<usize>(), records.len());
                prop_assert_eq!(tab.grand_total(), records.len());
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

fn properties() -> Verdict {
    let ops = compile_catalog(&builtin_catalog()).map_err(|e| e.to_string())?;
    let suites: [Suite; 6] = [
        ("apply/revert", &|| apply_revert(&ops)),
        ("scan determinism", &|| scan_determinism(&ops)),
        ("classify enumeration", &classify_enumeration),
        ("store truncation replay", &store_replay),
        ("count_by partition", &count_by_partition),
        ("cross_tab marginals", &cross_tab_marginals),
    ];
    let mut failed = Vec::new();
    for (name, suite) in suites {
        if let Err(e) = suite() {
            failed.push(format!("{name}: {e}"));
        }
    }
    if failed.is_empty() {
        Ok(format!(
            "6 suites, {PROPERTY_CASES} cases each where randomized"
        ))
    } else {
        Err(failed.join("; "))
    }
}

fn miner() -> Verdict {
    let log = fixtures().join("commits.tsv");
    let start = Instant::now();
    let text = ok_stdout(&["mine", "--log", log.to_str().unwrap()])?;
    let took = within(start, FAST)?;
    let commits = parse_log(&fs::read_to_string(&log).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    check(commits.len() == 50, || {
        format!("{} commits in fixture", commits.len())
    })?;
    let seeded: Vec<&str> = commits.iter().step_by(2).map(|c| c.sha.as_str()).collect();
    let flagged: Vec<&str> = text.lines().filter_map(|l| l.split('\t').next()).collect();
    check(flagged == seeded, || {
        format!("flagged {} commits, not the 25 seeded", flagged.len())
    })?;
    let cases: [(&str, &[&str]); 20] = [
        ("Fix CVE-2021-29512 in quantized ops", &["CVE-2021-29512"]),
        ("cve-2020-0001 and CVE-2020-0001 again", &["CVE-2020-0001"]),
        ("no identifiers here", &[]),
        ("Cve-2019-1234", &["CVE-2019-1234"]),
        ("CVE-2021-123", &[]),
        ("CVE-21-12345", &[]),
        ("CVE-2021-1234567", &["CVE-2021-1234567"]),
        (
            "CVE-2021-29512, CVE-2021-29513",
            &["CVE-2021-29512", "CVE-2021-29513"],
        ),
        (
            "CVE-2021-29513 then CVE-2021-29512 then cve-2021-29513",
            &["CVE-2021-29513", "CVE-2021-29512"],
        ),
        ("(CVE-2022-0001)", &["CVE-2022-0001"]),
        ("CVE_2021_1234", &[]),
        ("CVE 2021-1234", &[]),
        ("CVE-2021-1234a", &["CVE-2021-1234"]),
        (
            "see https://nvd.nist.gov/vuln/detail/CVE-2020-15190",
            &["CVE-2020-15190"],
        ),
        (
            "CVE-2020-15190\nCVE-2020-15191",
            &["CVE-2020-15190", "CVE-2020-15191"],
        ),
        ("CVE--2021-1234", &[]),
        (
            "cVe-1999-0001 cve-1999-00010",
            &["CVE-1999-0001", "CVE-1999-00010"],
        ),
        ("CVE-CVE-2021-0002", &["CVE-2021-0002"]),
        ("", &[]),
        (
            "GHSA-xxxx-yyyy-zzzz fixes CVE-2023-25668",
            &["CVE-2023-25668"],
        ),
    ];
    for (msg, want) in cases {
        let got = extract_cves(msg);
        check(got == want, || format!("{msg:?} gave {got:?}"))?;
    }
    Ok(format!(
        "25 of 50 flagged, all seeded; 20 CVE cases exact; {took:?}"
    ))
}

fn main() {
    let criteria: [(u8, fn() -> Verdict); 6] = [
        (1, tables),
        (2, effort),
        (4, toy_campaign),
        (5, alive_figure),
        (6, properties),
        (7, miner),
    ];
    let mut failures = 0;
    for (n, criterion) in criteria {
        match criterion() {
            Ok(detail) => println!("criterion {n}: PASS {detail}"),
            Err(why) => {
                failures += 1;
                println!("criterion {n}: FAIL {why}");
            }
        }
        if n == 2 {
            println!("criterion 3: NOTE full-scale kernel campaign not run here; criteria 4 to 6 stand in for it");
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
