//! The mutation loop: copy the corpus into per-worker workspaces, then for
//! each pending mutant apply, build, test, classify, revert and record.

pub mod classify;
pub mod config;
pub mod process;
pub mod workspace;

use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};

use thiserror::Error;

pub use classify::{classify_outcome, evidence_for, first_failing_test, CRASH_SIGNALS};
pub use config::{ConfigError, ConfigFile, RunConfig, DEFAULT_CRASH_MARKERS};
pub use process::{run_command, ProcessOutcome};
pub use workspace::{Workspace, WorkspaceError};

use crate::catalog::{CompiledOperator, LanguageClass};
use crate::scanner::{scan_corpus, CorpusFilter, MatchSite, ScanError, DEFAULT_MAX_BLOCK};
use crate::store::{
    CampaignSummary, Evidence, Mutant, MutantStatus, MutantStore, Phase, StoreError,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("unmutated corpus does not pass: {0}")]
    Baseline(String),
}

/// Turns scan sites into pending mutants using each site's operator.
pub fn mutants_from_sites(sites: Vec<MatchSite>, ops: &[CompiledOperator]) -> Vec<Mutant> {
    sites
        .into_iter()
        .filter_map(|site| {
            let op = ops.iter().find(|o| o.id() == site.operator_id)?;
            let lang = LanguageClass::of_path(Path::new(&site.file))?;
            let mutated = op.mutate(&site.matched_text, lang)?;
            Some(Mutant::new(site, mutated))
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct ScanOutcome {
    pub sites: usize,
    pub inserted: usize,
    pub warnings: Vec<String>,
}

/// Scans the corpus and records every site as a pending mutant. Sites
/// already in the store are left alone.
pub fn scan_into_store(
    root: &Path,
    filter: &CorpusFilter,
    ops: &[CompiledOperator],
    max_block: usize,
    store: &mut MutantStore,
) -> Result<ScanOutcome, EngineError> {
    let scan = scan_corpus(root, filter, ops, max_block)?;
    let mut warnings: Vec<String> = scan
        .warnings
        .iter()
        .map(|w| format!("{}@{}: {}", w.file, w.offset, w.message))
        .collect();
    warnings.extend(scan.errors.iter().map(|e| e.to_string()));
    let sites = scan.sites.len();
    let inserted = store.append_mutants(mutants_from_sites(scan.sites, ops))?;
    Ok(ScanOutcome {
        sites,
        inserted,
        warnings,
    })
}

fn note(text: String) -> Evidence {
    Evidence {
        note: Some(text),
        ..Evidence::default()
    }
}

fn run_phase(
    argv: &[String],
    ws: &Workspace,
    cfg: &RunConfig,
    what: &str,
) -> Result<ProcessOutcome, String> {
    run_command(argv, ws.root(), &cfg.env, cfg.timeout).map_err(|e| format!("{what} command: {e}"))
}

fn evaluate_once(
    ws: &mut Workspace,
    m: &Mutant,
    cfg: &RunConfig,
) -> Result<(MutantStatus, Evidence), String> {
    match ws.apply(m) {
        Ok(()) => {}
        Err(e @ WorkspaceError::ContextMismatch { .. }) => {
            return Ok((MutantStatus::Skipped, note(e.to_string())));
        }
        Err(e) => return Err(e.to_string()),
    }
    let result = (|| {
        let build = if cfg.build_command.is_empty() {
            None
        } else {
            Some(run_phase(&cfg.build_command, ws, cfg, "build")?)
        };
        if let Some(b) = build.as_ref().filter(|b| !b.success()) {
            let status = classify_outcome(Some(b), None, &cfg.crash_markers);
            return Ok((status, evidence_for(Phase::Build, b)));
        }
        let test = run_phase(&cfg.test_command, ws, cfg, "test")?;
        let status = classify_outcome(build.as_ref(), Some(&test), &cfg.crash_markers);
        Ok((status, evidence_for(Phase::Test, &test)))
    })();
    match ws.revert(m) {
        Ok(()) => result,
        Err(e) => Err(format!("revert failed: {e}")),
    }
}

/// Evaluates one mutant in `ws`; the workspace is back to corpus state on
/// return. An infrastructure failure rebuilds the workspace and retries
/// once, after which the mutant is Skipped.
pub fn evaluate(ws: &mut Workspace, m: &Mutant, cfg: &RunConfig) -> (MutantStatus, Evidence) {
    let first = match evaluate_once(ws, m, cfg) {
        Ok(r) => return r,
        Err(e) => e,
    };
    log::warn!(
        "mutant {}: {first}; rebuilding workspace and retrying",
        m.mutant_id
    );
    if let Err(e) = ws.rebuild() {
        return (
            MutantStatus::Skipped,
            note(format!("{first}; rebuild failed: {e}")),
        );
    }
    match evaluate_once(ws, m, cfg) {
        Ok(r) => r,
        Err(second) => {
            let _ = ws.rebuild();
            (
                MutantStatus::Skipped,
                note(format!("{first}; retry: {second}")),
            )
        }
    }
}

/// Builds and tests the unmutated workspace.
pub fn check_baseline(ws: &Workspace, cfg: &RunConfig) -> Result<(), EngineError> {
    if !cfg.build_command.is_empty() {
        let b = run_phase(&cfg.build_command, ws, cfg, "build").map_err(EngineError::Baseline)?;
        if !b.success() {
            return Err(EngineError::Baseline(format!(
                "build failed ({})\n{}",
                describe(&b),
                b.output
            )));
        }
    }
    let t = run_phase(&cfg.test_command, ws, cfg, "test").map_err(EngineError::Baseline)?;
    if !t.success() {
        return Err(EngineError::Baseline(format!(
            "tests failed ({})\n{}",
            describe(&t),
            t.output
        )));
    }
    Ok(())
}

fn describe(out: &ProcessOutcome) -> String {
    if out.timed_out {
        "timed out".into()
    } else if let Some(s) = out.signal {
        process::signal_name(s)
    } else {
        format!("exit {}", out.exit_code.unwrap_or(-1))
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOptions {
    pub filter: CorpusFilter,
    pub max_block: usize,
    /// Stop after this many evaluations, leaving the rest pending.
    pub max_evaluations: Option<usize>,
    pub check_baseline: bool,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            filter: CorpusFilter::default(),
            max_block: DEFAULT_MAX_BLOCK,
            max_evaluations: None,
            check_baseline: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub scan: ScanOutcome,
    pub evaluated: usize,
    pub summary: CampaignSummary,
}

/// Scans, then evaluates every pending mutant with `cfg.workers` workers.
/// Status updates go through this thread, the store's only writer.
pub fn run_campaign(
    cfg: &RunConfig,
    store: &mut MutantStore,
    ops: &[CompiledOperator],
    opts: &CampaignOptions,
) -> Result<CampaignResult, EngineError> {
    cfg.validate()?;
    let scan = scan_into_store(&cfg.corpus_root, &opts.filter, ops, opts.max_block, store)?;
    for w in &scan.warnings {
        log::warn!("{w}");
    }
    let mut pending = store.pending();
    if let Some(k) = opts.max_evaluations {
        pending.truncate(k);
    }
    if pending.is_empty() {
        return Ok(CampaignResult {
            scan,
            evaluated: 0,
            summary: store.summarize(),
        });
    }

    let workers = cfg.workers.min(pending.len());
    let mut spaces = Vec::with_capacity(workers);
    for i in 0..workers {
        let dir = cfg.workspace_root.join(format!("worker-{i}"));
        spaces.push(Workspace::create(&cfg.corpus_root, &dir)?);
    }
    if opts.check_baseline {
        if let Err(e) = check_baseline(&spaces[0], cfg) {
            for ws in spaces {
                let _ = ws.remove();
            }
            return Err(e);
        }
    }

    let queue = Mutex::new(VecDeque::from(pending));
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(String, MutantStatus, Evidence)>();
    let mut evaluated = 0;
    let mut failure = None;
    std::thread::scope(|scope| {
        for mut ws in spaces.drain(..) {
            let tx = tx.clone();
            let (queue, stop) = (&queue, &stop);
            scope.spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    let Some(m) = queue.lock().expect("queue lock").pop_front() else {
                        break;
                    };
                    let (status, evidence) = evaluate(&mut ws, &m, cfg);
                    if tx.send((m.mutant_id.clone(), status, evidence)).is_err() {
                        break;
                    }
                }
                if let Err(e) = ws.remove() {
                    log::warn!("cannot remove workspace: {e}");
                }
            });
        }
        drop(tx);
        for (id, status, evidence) in rx {
            match store.update_status(&id, status, Some(evidence)) {
                Ok(()) => {
                    evaluated += 1;
                    log::info!("{id} -> {status}");
                }
                Err(e) => {
                    stop.store(true, Ordering::SeqCst);
                    failure.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(CampaignResult {
        scan,
        evaluated,
        summary: store.summarize(),
    })
}
