//! Command-line front end. Settings come from flags, then the config file
//! (`--config` or `MUTFORGE_CONFIG`), then built-in defaults.

use std::error::Error;
use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use mutforge_core::catalog::{
    builtin_catalog, compile_catalog, load_catalog, serialize_catalog, MutationOperator,
};
use mutforge_core::dataset::fixture::BUNDLED_CSV;
use mutforge_core::dataset::{load_dataset, read_dataset, StatsReport};
use mutforge_core::engine::{
    run_campaign, scan_into_store, CampaignOptions, ConfigFile, RunConfig,
};
use mutforge_core::miner::{group_by_cve, mine, read_log, RuleSet};
use mutforge_core::report::{CampaignReport, Format, GroupBy};
use mutforge_core::scanner::{scan_corpus, CorpusFilter, DEFAULT_MAX_BLOCK};
use mutforge_core::store::{MutantStatus, MutantStore};

pub type CliResult<T> = Result<T, Box<dyn Error + Send + Sync>>;

pub const DEFAULT_STORE: &str = "mutforge-store";

#[derive(Debug, Parser)]
#[command(
    name = "mutforge",
    version,
    about = "Security-aware mutation testing for C-like and Python sources"
)]
pub struct Cli {
    /// TOML config file
    #[arg(long, global = true, env = "MUTFORGE_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find mutation sites; print them, or record them as pending mutants with --store
    Scan(ScanArgs),
    /// Scan, then build and test every pending mutant
    Run(RunArgs),
    /// Mutation scores and alive mutants of a store
    Report(ReportArgs),
    /// Vulnerability dataset statistics
    Stats(StatsArgs),
    /// Flag security-related commits in a commit log
    Mine(MineArgs),
    /// Print or check operator catalogs
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CorpusArgs {
    /// Root of the source tree to mutate
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    /// Operator catalog (defaults to the builtin one)
    #[arg(long, value_name = "FILE")]
    pub catalog: Option<PathBuf>,
    /// Only scan files matching this glob (repeatable)
    #[arg(long, value_name = "GLOB")]
    pub include: Vec<String>,
    /// Skip files matching this glob (repeatable; replaces the default excludes)
    #[arg(long, value_name = "GLOB")]
    pub exclude: Vec<String>,
    /// Do not apply the default test/generated-file excludes
    #[arg(long)]
    pub no_default_excludes: bool,
    /// Longest call block in bytes
    #[arg(long, value_name = "BYTES")]
    pub max_block: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Record sites in this store instead of printing them
    #[arg(long, value_name = "DIR")]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Mutant store (default ./mutforge-store)
    #[arg(long, value_name = "DIR")]
    pub store: Option<PathBuf>,
    /// Build command, split on whitespace ("" for no build step)
    #[arg(long, value_name = "CMD")]
    pub build_command: Option<String>,
    /// Test command, split on whitespace
    #[arg(long, value_name = "CMD")]
    pub test_command: Option<String>,
    /// Per-phase timeout in seconds
    #[arg(long, value_name = "SECS")]
    pub timeout: Option<f64>,
    /// Parallel workers, each with its own copy of the corpus
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Where worker copies of the corpus are made
    #[arg(long, value_name = "DIR")]
    pub workspace: Option<PathBuf>,
    /// Evaluate at most this many mutants, leaving the rest pending
    #[arg(long, value_name = "N")]
    pub max_evaluations: Option<usize>,
    /// Do not check that the unmutated corpus builds and passes first
    #[arg(long)]
    pub skip_baseline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Text => Format::Text,
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupByArg {
    Operator,
    FixingCategory,
    Cwe,
    File,
}

impl From<GroupByArg> for GroupBy {
    fn from(g: GroupByArg) -> Self {
        match g {
            GroupByArg::Operator => GroupBy::Operator,
            GroupByArg::FixingCategory => GroupBy::FixingCategory,
            GroupByArg::Cwe => GroupBy::Cwe,
            GroupByArg::File => GroupBy::File,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Mutant store to read (default ./mutforge-store)
    #[arg(long, value_name = "DIR")]
    pub store: Option<PathBuf>,
    /// Catalog used for fixing categories and CWEs
    #[arg(long, value_name = "FILE")]
    pub catalog: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    #[arg(long, value_enum, default_value_t = GroupByArg::Operator)]
    pub group_by: GroupByArg,
    /// Count timeouts as killed in the headline score
    #[arg(long)]
    pub include_timeouts: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Dataset CSV (defaults to the bundled 596-record dataset)
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MineFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct MineArgs {
    /// Commit log: `sha<TAB>added<TAB>deleted<TAB>message` lines or
    /// `git log --numstat` output; `-` reads standard input
    #[arg(long, value_name = "FILE", default_value = "-")]
    pub log: PathBuf,
    /// Keyword rule file (`name<TAB>regex` lines)
    #[arg(long, value_name = "FILE")]
    pub rules: Option<PathBuf>,
    /// Group flagged commits by the CVE ids they cite
    #[arg(long)]
    pub group_by_cve: bool,
    #[arg(long, value_enum, default_value_t = MineFormat::Text)]
    pub format: MineFormat,
}

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    /// Print a catalog in the loadable file format
    Print {
        #[arg(long, value_name = "FILE")]
        catalog: Option<PathBuf>,
    },
    /// Load and check a catalog file
    Validate { file: PathBuf },
}

pub fn parse_invocation<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

fn config_file(cli: &Cli) -> CliResult<ConfigFile> {
    match &cli.config {
        Some(path) => Ok(ConfigFile::load(path)?),
        None => Ok(ConfigFile::default()),
    }
}

fn split_command(cmd: &str) -> Vec<String> {
    cmd.split_whitespace().map(String::from).collect()
}

/// Applies corpus flags over the file settings.
fn merge_corpus(file: &mut ConfigFile, args: &CorpusArgs) {
    if let Some(c) = &args.corpus {
        file.corpus_root = Some(c.clone());
    }
    if let Some(c) = &args.catalog {
        file.catalog = Some(c.clone());
    }
    if !args.include.is_empty() {
        file.include = Some(args.include.clone());
    }
    if !args.exclude.is_empty() || args.no_default_excludes {
        file.exclude = Some(args.exclude.clone());
    }
    if let Some(m) = args.max_block {
        file.max_block = Some(m);
    }
}

/// File settings with every `run` flag applied on top.
pub fn merged_run_settings(file: ConfigFile, args: &RunArgs) -> ConfigFile {
    let mut file = file;
    merge_corpus(&mut file, &args.corpus);
    if let Some(s) = &args.store {
        file.store = Some(s.clone());
    }
    if let Some(b) = &args.build_command {
        file.build_command = Some(split_command(b));
    }
    if let Some(t) = &args.test_command {
        file.test_command = Some(split_command(t));
    }
    if let Some(t) = args.timeout {
        file.timeout_secs = Some(t);
    }
    if let Some(w) = args.workers {
        file.workers = Some(w);
    }
    if let Some(w) = &args.workspace {
        file.workspace_root = Some(w.clone());
    }
    file
}

fn default_workspace() -> PathBuf {
    std::env::temp_dir().join(format!("mutforge-work-{}", std::process::id()))
}

/// The engine configuration `run` would use.
pub fn resolve_run_config(cli: &Cli, args: &RunArgs) -> CliResult<RunConfig> {
    let merged = merged_run_settings(config_file(cli)?, args);
    let cfg = RunConfig::from_file(&merged, Some(default_workspace()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn filter_for(file: &ConfigFile) -> CliResult<CorpusFilter> {
    let include = file.include.clone().unwrap_or_default();
    Ok(CorpusFilter::new(&include, file.exclude.as_deref())?)
}

fn catalog_for(path: Option<&Path>) -> CliResult<Vec<MutationOperator>> {
    match path {
        Some(p) => Ok(load_catalog(p)?),
        None => Ok(builtin_catalog()),
    }
}

fn store_path(flag: Option<&PathBuf>, file: &ConfigFile) -> PathBuf {
    flag.cloned()
        .or_else(|| file.store.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_STORE))
}

/// Runs a parsed command, writing results to `out`. Returns the process
/// exit code; errors map to exit code 1.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<i32> {
    match &cli.command {
        Command::Scan(args) => scan(cli, args, out),
        Command::Run(args) => run(cli, args, out),
        Command::Report(args) => report(cli, args, out),
        Command::Stats(args) => stats(args, out),
        Command::Mine(args) => mine_log(args, out),
        Command::Catalog(cmd) => catalog(cmd, out),
    }
}

fn scan(cli: &Cli, args: &ScanArgs, out: &mut dyn Write) -> CliResult<i32> {
    let mut file = config_file(cli)?;
    merge_corpus(&mut file, &args.corpus);
    let root = file
        .corpus_root
        .clone()
        .ok_or("no corpus given (use --corpus or corpus_root in the config)")?;
    let ops = compile_catalog(&catalog_for(file.catalog.as_deref())?)?;
    let filter = filter_for(&file)?;
    let max_block = file.max_block.unwrap_or(DEFAULT_MAX_BLOCK);
    match &args.store {
        Some(dir) => {
            let mut store = MutantStore::open(dir)?;
            let outcome = scan_into_store(&root, &filter, &ops, max_block, &mut store)?;
            for w in &outcome.warnings {
                log::warn!("{w}");
            }
            writeln!(
                out,
                "{} sites, {} new mutants, {} in store",
                outcome.sites,
                outcome.inserted,
                store.len()
            )?;
        }
        None => {
            let scan = scan_corpus(&root, &filter, &ops, max_block)?;
            for w in &scan.warnings {
                log::warn!("{}@{}: {}", w.file, w.offset, w.message);
            }
            for e in &scan.errors {
                log::warn!("{e}");
            }
            for site in &scan.sites {
                writeln!(out, "{}", serde_json::to_string(site)?)?;
            }
        }
    }
    Ok(0)
}

fn run(cli: &Cli, args: &RunArgs, out: &mut dyn Write) -> CliResult<i32> {
    let merged = merged_run_settings(config_file(cli)?, args);
    let cfg = RunConfig::from_file(&merged, Some(default_workspace()))?;
    let ops = compile_catalog(&catalog_for(merged.catalog.as_deref())?)?;
    let opts = CampaignOptions {
        filter: filter_for(&merged)?,
        max_block: merged.max_block.unwrap_or(DEFAULT_MAX_BLOCK),
        max_evaluations: args.max_evaluations,
        check_baseline: !args.skip_baseline,
    };
    let mut store = MutantStore::open(store_path(args.store.as_ref(), &merged))?;
    let result = run_campaign(&cfg, &mut store, &ops, &opts)?;
    writeln!(
        out,
        "{} sites ({} new), {} mutants evaluated",
        result.scan.sites, result.scan.inserted, result.evaluated
    )?;
    for (status, n) in &result.summary.by_status {
        writeln!(out, "  {status:<18} {n}")?;
    }
    let pending = result.summary.count(MutantStatus::Pending);
    if pending > 0 {
        writeln!(out, "{pending} mutants still pending")?;
        return Ok(1);
    }
    Ok(0)
}

fn report(cli: &Cli, args: &ReportArgs, out: &mut dyn Write) -> CliResult<i32> {
    let file = config_file(cli)?;
    let store = MutantStore::open_read_only(store_path(args.store.as_ref(), &file))?;
    for w in store.warnings() {
        log::warn!("{w}");
    }
    let catalog = catalog_for(args.catalog.as_deref().or(file.catalog.as_deref()))?;
    let report = CampaignReport::build(
        store.mutants().collect::<Vec<_>>(),
        &catalog,
        args.group_by.into(),
        args.include_timeouts,
    );
    out.write_all(report.render(args.format.into()).as_bytes())?;
    Ok(0)
}

fn stats(args: &StatsArgs, out: &mut dyn Write) -> CliResult<i32> {
    let records = match &args.dataset {
        Some(path) => load_dataset(path)?,
        None => read_dataset(BUNDLED_CSV.as_bytes())?,
    };
    let report = StatsReport::build(&records);
    let text = match args.format {
        OutputFormat::Text => report.render_text(),
        OutputFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
        OutputFormat::Csv => report.render_csv(),
    };
    out.write_all(text.as_bytes())?;
    Ok(0)
}

#[derive(serde::Serialize)]
struct FlaggedCommit<'a> {
    #[serde(flatten)]
    commit: &'a mutforge_core::miner::CommitRecord,
    matched_keywords: &'a [String],
    cve_ids: &'a [String],
}

fn mine_log(args: &MineArgs, out: &mut dyn Write) -> CliResult<i32> {
    let rules = match &args.rules {
        Some(p) => RuleSet::parse(&std::fs::read_to_string(p)?)?,
        None => RuleSet::builtin(),
    };
    let mut text = String::new();
    if args.log.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(&args.log)?;
    }
    let log = read_log(text.as_bytes())?;
    let total = log.len();
    let flagged = mine(&rules, log);
    log::info!("flagged {} of {total} commits", flagged.len());

    if args.group_by_cve {
        let groups = group_by_cve(&flagged);
        match args.format {
            MineFormat::Json => writeln!(out, "{}", serde_json::to_string_pretty(&groups)?)?,
            MineFormat::Text => {
                for (cve, commits) in &groups.groups {
                    let shas: Vec<&str> = commits.iter().map(|c| c.sha.as_str()).collect();
                    writeln!(out, "{cve}\t{}", shas.join(" "))?;
                }
                let rest: Vec<&str> = groups.remainder.iter().map(|c| c.sha.as_str()).collect();
                writeln!(out, "no-cve\t{}", rest.join(" "))?;
            }
        }
        return Ok(0);
    }
    match args.format {
        MineFormat::Json => {
            let rows: Vec<FlaggedCommit> = flagged
                .iter()
                .map(|(c, v)| FlaggedCommit {
                    commit: c,
                    matched_keywords: &v.matched_keywords,
                    cve_ids: &v.cve_ids,
                })
                .collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?;
        }
        MineFormat::Text => {
            for (c, v) in &flagged {
                let mut tags = v.matched_keywords.clone();
                tags.extend(v.cve_ids.iter().cloned());
                let subject = c.message.lines().next().unwrap_or("");
                writeln!(out, "{}\t{}\t{subject}", c.sha, tags.join(","))?;
            }
        }
    }
    Ok(0)
}

fn catalog(cmd: &CatalogCommand, out: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        CatalogCommand::Print { catalog } => {
            let ops = catalog_for(catalog.as_deref())?;
            out.write_all(serialize_catalog(&ops).as_bytes())?;
        }
        CatalogCommand::Validate { file } => {
            let ops = load_catalog(file)?;
            let compiled = compile_catalog(&ops)?;
            writeln!(
                out,
                "{}: {} operators, {} enabled",
                file.display(),
                ops.len(),
                compiled.len()
            )?;
        }
    }
    Ok(0)
}
