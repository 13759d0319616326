//! Runs build and test commands in their own process group with a deadline.

use std::collections::BTreeMap;
use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

/// Upper bound on captured output kept per run.
pub const EXCERPT_LIMIT: usize = 64 * 1024;
const HEAD: usize = 48 * 1024;
const TAIL: usize = EXCERPT_LIMIT - HEAD;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProcessOutcome {
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub timed_out: bool,
    pub duration: Duration,
    /// stdout followed by stderr, head and tail kept when too long.
    pub output: String,
}

impl ProcessOutcome {
    pub fn success(&self) -> bool {
        !self.timed_out && self.exit_code == Some(0)
    }
}

#[derive(Default)]
struct Capture {
    head: Vec<u8>,
    tail: Vec<u8>,
    dropped: usize,
}

impl Capture {
    fn push(&mut self, mut chunk: &[u8]) {
        if self.head.len() < HEAD {
            let take = chunk.len().min(HEAD - self.head.len());
            self.head.extend_from_slice(&chunk[..take]);
            chunk = &chunk[take..];
        }
        self.tail.extend_from_slice(chunk);
        if self.tail.len() > TAIL {
            let excess = self.tail.len() - TAIL;
            self.tail.drain(..excess);
            self.dropped += excess;
        }
    }

    fn render(&self, limit: usize) -> String {
        let mut s = String::from_utf8_lossy(&self.head).into_owned();
        if self.dropped > 0 {
            s.push_str(&format!("\n[... {} bytes elided ...]\n", self.dropped));
        }
        s.push_str(&String::from_utf8_lossy(&self.tail));
        truncate_to(s, limit)
    }
}

fn truncate_to(mut s: String, limit: usize) -> String {
    if s.len() > limit {
        let mut cut = limit;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
    }
    s
}

fn reader(mut src: impl Read + Send + 'static, done: mpsc::Sender<Capture>) {
    thread::spawn(move || {
        let mut cap = Capture::default();
        let mut buf = [0u8; 8192];
        loop {
            match src.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => cap.push(&buf[..n]),
            }
        }
        let _ = done.send(cap);
    });
}

fn kill_group(pgid: u32) {
    // SAFETY: plain syscall; a stale group id only yields ESRCH.
    unsafe {
        libc::killpg(pgid as libc::pid_t, libc::SIGKILL);
    }
}

/// Runs `argv` in `cwd`. The child leads a fresh process group that is
/// killed on timeout and again after exit, so no descendant outlives the run.
pub fn run_command(
    argv: &[String],
    cwd: &Path,
    env: &BTreeMap<String, String>,
    timeout: Duration,
) -> std::io::Result<ProcessOutcome> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"))?;
    let start = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .envs(env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()?;
    let pgid = child.id();
    let (tx, rx) = mpsc::channel();
    reader(child.stdout.take().expect("piped"), tx.clone());
    reader(child.stderr.take().expect("piped"), tx);

    let deadline = start + timeout;
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            timed_out = true;
            kill_group(pgid);
            break child.wait()?;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let duration = start.elapsed();
    kill_group(pgid);

    // Readers finish once every holder of the pipes is gone.
    let mut caps = Vec::new();
    for _ in 0..2 {
        match rx.recv_timeout(Duration::from_secs(2)) {
            Ok(cap) => caps.push(cap),
            Err(_) => break,
        }
    }
    let output = caps
        .iter()
        .map(|c| c.render(EXCERPT_LIMIT))
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    Ok(ProcessOutcome {
        exit_code: status.code(),
        signal: status.signal(),
        timed_out,
        duration,
        output: truncate_to(output, EXCERPT_LIMIT),
    })
}

pub fn signal_name(sig: i32) -> String {
    let name = match sig {
        libc::SIGSEGV => "SIGSEGV",
        libc::SIGABRT => "SIGABRT",
        libc::SIGBUS => "SIGBUS",
        libc::SIGILL => "SIGILL",
        libc::SIGFPE => "SIGFPE",
        libc::SIGKILL => "SIGKILL",
        libc::SIGTERM => "SIGTERM",
        libc::SIGINT => "SIGINT",
        libc::SIGPIPE => "SIGPIPE",
        libc::SIGTRAP => "SIGTRAP",
        libc::SIGSYS => "SIGSYS",
        _ => return format!("signal {sig}"),
    };
    name.to_string()
}
