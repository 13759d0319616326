use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mutforge::{parse_invocation, resolve_run_config, Command as Sub};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mutforge"));
    cmd.env_remove("MUTFORGE_CONFIG");
    cmd
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn core_fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(rel)
}

fn small_corpus(dir: &Path) -> PathBuf {
    let corpus = dir.join("corpus");
    fs::create_dir_all(corpus.join("src")).unwrap();
    fs::write(
        corpus.join("src/k.c"),
        "int f(int *p) {\n  if (p == NULL) return 0;\n  free(p);\n  return 1;\n}\n",
    )
    .unwrap();
    corpus
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = small_corpus(tmp.path());
    let cfg = tmp.path().join("c.toml");
    fs::write(
        &cfg,
        "corpus_root = \"corpus\"\ntest_command = [\"true\"]\nworkers = 2\ntimeout_secs = 9\n",
    )
    .unwrap();
    let cfg_arg = cfg.to_str().unwrap();

    let cli = parse_invocation(["mutforge", "run", "--config", cfg_arg, "--workers", "4"]).unwrap();
    let Sub::Run(args) = &cli.command else {
        panic!("not run")
    };
    let rc = resolve_run_config(&cli, args).unwrap();
    assert_eq!(rc.workers, 4);
    assert_eq!(rc.timeout.as_secs(), 9);
    assert_eq!(rc.corpus_root, corpus);
    assert_eq!(rc.test_command, ["true"]);

    let cli = parse_invocation(["mutforge", "--config", cfg_arg, "run"]).unwrap();
    let Sub::Run(args) = &cli.command else {
        panic!("not run")
    };
    assert_eq!(resolve_run_config(&cli, args).unwrap().workers, 2);

    let corpus_arg = corpus.to_str().unwrap();
    let cli = parse_invocation([
        "mutforge",
        "run",
        "--corpus",
        corpus_arg,
        "--test-command",
        "sh test.sh",
    ])
    .unwrap();
    let Sub::Run(args) = &cli.command else {
        panic!("not run")
    };
    let rc = resolve_run_config(&cli, args).unwrap();
    assert_eq!((rc.workers, rc.timeout.as_secs()), (1, 60));
    assert_eq!(rc.test_command, ["sh", "test.sh"]);
    assert!(rc.build_command.is_empty());

    let cli = parse_invocation(["mutforge", "run", "--corpus", corpus_arg]).unwrap();
    let Sub::Run(args) = &cli.command else {
        panic!("not run")
    };
    assert!(resolve_run_config(&cli, args).is_err());
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["bogus"][..],
        &["stats", "--frobnicate"],
        &["report", "--format", "yaml"],
        &[],
    ] {
        let out = run_in(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    assert_eq!(run_in(tmp.path(), &["--help"]).status.code(), Some(0));
    assert!(parse_invocation(["mutforge", "bogus"]).is_err());
}

#[test]
fn operational_failures_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["scan", "--corpus", "does-not-exist"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert_eq!(
        run_in(tmp.path(), &["stats", "--dataset", "missing.csv"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run_in(tmp.path(), &["--config", "missing.toml", "scan"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn stats_reads_the_given_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let bundled = fs::read_to_string(core_fixture("vulns.csv")).unwrap();
    let head: String = bundled.lines().take(11).map(|l| format!("{l}\n")).collect();
    fs::write(tmp.path().join("d.csv"), head).unwrap();
    let out = run_in(tmp.path(), &["stats", "--dataset", "d.csv"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("records: 10\n"));
    let out = run_in(tmp.path(), &["stats"]);
    assert!(stdout(&out).starts_with("records: 596\n"));
}

#[test]
fn config_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let cfg = tmp.path().join("env.toml");
    fs::write(&cfg, "corpus_root = \"corpus\"\n").unwrap();
    let out = bin()
        .current_dir(tmp.path())
        .env("MUTFORGE_CONFIG", &cfg)
        .arg("scan")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ops: Vec<String> = stdout(&out)
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["operator_id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(ops, ["CHK-NULL-DEL", "MEM-RELEASE-DEL"]);
}

#[test]
fn printed_catalog_validates_and_loads() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["catalog", "print"]);
    assert!(out.status.success());
    fs::write(tmp.path().join("ops.toml"), &out.stdout).unwrap();
    let out = run_in(tmp.path(), &["catalog", "validate", "ops.toml"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("11 operators"));
    let again = run_in(tmp.path(), &["catalog", "print", "--catalog", "ops.toml"]);
    assert_eq!(fs::read(tmp.path().join("ops.toml")).unwrap(), again.stdout);

    let broken = String::from_utf8(again.stdout).unwrap().replacen(
        "kind = \"call_block\"",
        "kind = \"no_such_kind\"",
        1,
    );
    fs::write(tmp.path().join("bad.toml"), broken).unwrap();
    let out = run_in(tmp.path(), &["catalog", "validate", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mine_lists_flagged_commits() {
    let log = core_fixture("commits.tsv");
    let out = run_in(Path::new("."), &["mine", "--log", log.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 25);
    let out = run_in(
        Path::new("."),
        &["mine", "--log", log.to_str().unwrap(), "--format", "json"],
    );
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().all(|r| r["sha"].as_str().unwrap().len() == 40));

    let out = bin()
        .args(["mine", "--group-by-cve", "--format", "json"])
        .stdin(fs::File::open(&log).unwrap())
        .output()
        .unwrap();
    let groups: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let grouped: usize = groups["groups"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_array().unwrap().len())
        .sum();
    assert!(grouped + groups["remainder"].as_array().unwrap().len() >= 25);
}

#[test]
fn scan_into_store_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let out = run_in(tmp.path(), &["scan", "--corpus", "corpus", "--store", "st"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "2 sites, 2 new mutants, 2 in store\n");
    let out = run_in(tmp.path(), &["scan", "--corpus", "corpus", "--store", "st"]);
    assert_eq!(stdout(&out), "2 sites, 0 new mutants, 2 in store\n");

    let out = run_in(tmp.path(), &["report", "--store", "st"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("pending            2"), "{text}");
    assert!(text.contains("mutation score (timeouts excluded): n/a"));
    assert!(text.ends_with("no alive mutants\n"));
    let out = run_in(tmp.path(), &["report", "--store", "st", "--format", "json"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["summary"]["total"], 2);
}

#[test]
fn run_never_succeeds_with_pending_mutants() {
    let tmp = tempfile::tempdir().unwrap();
    small_corpus(tmp.path());
    let base = [
        "run",
        "--corpus",
        "corpus",
        "--store",
        "st",
        "--test-command",
        "true",
        "--workspace",
    ];
    let ws = tmp.path().join("ws");
    let mut args: Vec<&str> = base.to_vec();
    args.push(ws.to_str().unwrap());

    let mut partial = args.clone();
    partial.extend(["--max-evaluations", "1"]);
    let out = run_in(tmp.path(), &partial);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("1 mutants still pending"));

    let out = run_in(tmp.path(), &args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("1 mutants evaluated"));
    assert!(stdout(&out).contains("alive              2"));

    let out = run_in(
        tmp.path(),
        &[
            "run",
            "--corpus",
            "corpus",
            "--store",
            "st2",
            "--test-command",
            "false",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unmutated corpus does not pass"));
}
