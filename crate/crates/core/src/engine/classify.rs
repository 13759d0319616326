use once_cell::sync::Lazy;
use regex::Regex;

use super::process::{signal_name, ProcessOutcome};
use crate::store::{Evidence, MutantStatus, Phase};

/// Signals that mean the test binary crashed rather than failed.
pub const CRASH_SIGNALS: [i32; 5] = [
    libc::SIGSEGV,
    libc::SIGABRT,
    libc::SIGBUS,
    libc::SIGILL,
    libc::SIGFPE,
];

/// Maps build and test results to a terminal status. `build` is `None` when
/// there is no build step; `test` is `None` when the tests did not run.
pub fn classify_outcome(
    build: Option<&ProcessOutcome>,
    test: Option<&ProcessOutcome>,
    crash_markers: &[String],
) -> MutantStatus {
    if let Some(b) = build {
        if b.timed_out {
            return MutantStatus::KilledByTimeout;
        }
        if !b.success() {
            return MutantStatus::Invalid;
        }
    }
    let Some(t) = test else {
        return MutantStatus::Skipped;
    };
    if t.timed_out {
        return MutantStatus::KilledByTimeout;
    }
    if t.exit_code == Some(0) {
        return MutantStatus::Alive;
    }
    if t.signal.is_some_and(|s| CRASH_SIGNALS.contains(&s))
        || crash_markers
            .iter()
            .any(|m| !m.is_empty() && t.output.contains(m.as_str()))
    {
        return MutantStatus::KilledByCrash;
    }
    MutantStatus::KilledByTest
}

static FAILING_TEST: Lazy<Vec<Regex>> = Lazy::new(|| {
    [
        r"^\[\s*FAILED\s*\]\s+([A-Za-z_][\w./:]*)",
        r"^FAILED\s+(\S+)",
        r"^FAIL:\s+(\S+)",
        r"^--- FAIL:\s+(\S+)",
        r"^test\s+(\S+)\s+\.\.\.\s+FAILED",
        r"^(\S+)(?:\s+\([^)]*\))?\s+\.\.\.\s+(?:FAIL|FAILED|ERROR)\b",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("static regex"))
    .collect()
});

/// Name of the first failing test reported in `output`, for the common
/// gtest, pytest, unittest, go and cargo output styles.
pub fn first_failing_test(output: &str) -> Option<String> {
    output.lines().find_map(|line| {
        let line = line.trim_end();
        FAILING_TEST
            .iter()
            .find_map(|re| re.captures(line).map(|c| c[1].to_string()))
    })
}

pub fn evidence_for(phase: Phase, out: &ProcessOutcome) -> Evidence {
    Evidence {
        phase: Some(phase),
        exit_code: out.exit_code,
        signal: out.signal,
        signal_name: out.signal.map(signal_name),
        first_failing_test: if phase == Phase::Test && !out.success() {
            first_failing_test(&out.output)
        } else {
            None
        },
        timed_out: out.timed_out,
        duration_secs: out.duration.as_secs_f64(),
        stderr_excerpt: out.output.clone(),
        note: None,
    }
}
