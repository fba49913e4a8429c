//! The `cellvault` command line. [`run`] is the whole program; `main` only
//! wires it to the process streams.

pub mod discover;
mod output;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use cellvault_core::alert::{classify_pattern, AlertRule, RuleKind};
use cellvault_core::analytics::DEFAULT_RETIREMENT_WINDOW;
use cellvault_core::audit::{AuditFilter, ChangeManifest};
use cellvault_core::diff::WatchConfig;
use cellvault_core::ingest::{ingest_csv_workbook, ingest_path};
use cellvault_core::model::{CellAddress, Region};
use cellvault_core::store::{CommitMeta, CommitReceipt, Store};
use cellvault_service::{ConfigError, ServeError, ServiceConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::discover::{discover, DiscoverError};
use crate::output::{Emitter, Mode};

const DEFAULT_STORE: &str = "cellvault-data";

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] cellvault_core::Error),
    #[error(transparent)]
    Discover(#[from] DiscoverError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Discover(_) => "NOT_FOUND",
            CliError::Config(_) => "CONFIG_ERROR",
            CliError::Serve(_) => "SERVE_ERROR",
            CliError::Io(_) => "IO_ERROR",
            CliError::Usage(_) => "USAGE",
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "cellvault",
    version,
    about = "Version history, diffs and alerts for spreadsheets"
)]
struct Cli {
    /// Store root directory.
    #[arg(long, global = true, env = "CELLVAULT_STORE")]
    store: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Mode::Text)]
    output: Mode,
    /// Name recorded in the audit log for mutating commands.
    #[arg(long, global = true, env = "CELLVAULT_ACTOR", default_value = "cli")]
    actor: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Wb {
    #[arg(long, short = 'w')]
    workbook: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Create an empty store.
    Init,
    /// Ingest a .json, .xlsx or .csv file as the next commit of a workbook.
    Commit {
        #[command(flatten)]
        wb: Wb,
        #[arg(long, short = 'f')]
        file: PathBuf,
        #[arg(long)]
        author: String,
        #[arg(long, short = 'm', default_value = "")]
        message: String,
        /// UTC timestamp (`YYYY-MM-DDTHH:MM:SS.sssZ`); defaults to now.
        #[arg(long)]
        timestamp: Option<String>,
        /// Sheet name for CSV input; defaults to the file stem.
        #[arg(long)]
        sheet: Option<String>,
    },
    /// Commit records, oldest first.
    Log {
        #[command(flatten)]
        wb: Wb,
    },
    /// Cell-level changes between two commits.
    Diff {
        #[command(flatten)]
        wb: Wb,
        #[arg(long)]
        from: String,
        #[arg(long, default_value = "latest")]
        to: String,
    },
    /// One cell across the most recent commits.
    History {
        #[command(flatten)]
        wb: Wb,
        /// Address such as `Sheet1!B7`.
        #[arg(long)]
        cell: String,
        #[arg(long, default_value_t = 10)]
        window: usize,
    },
    #[command(subcommand)]
    Rules(RulesCommand),
    /// Every alert fired so far.
    Alerts {
        #[command(flatten)]
        wb: Wb,
    },
    /// Values of a rectangular region at a commit.
    Export {
        #[command(flatten)]
        wb: Wb,
        /// Region such as `Sheet1!A1:D20`.
        #[arg(long)]
        region: String,
        #[arg(long, default_value = "latest")]
        at: String,
        #[arg(long, value_enum, default_value_t = ExportFormat::Json)]
        format: ExportFormat,
    },
    /// Canonical workbook bytes of a commit, to stdout or a file.
    Restore {
        #[command(flatten)]
        wb: Wb,
        #[arg(long)]
        commit: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(subcommand)]
    Report(ReportCommand),
    #[command(subcommand)]
    Manifest(ManifestCommand),
    /// Check a registered manifest against a commit range.
    Verify {
        #[command(flatten)]
        wb: Wb,
        /// Manifest id.
        #[arg(long)]
        manifest: String,
        /// Exclusive start; the parent of `--to` when omitted.
        #[arg(long)]
        from: Option<String>,
        #[arg(long, default_value = "latest")]
        to: String,
    },
    /// Inventory spreadsheet files under a directory (read-only).
    Discover { root: PathBuf },
    /// Run the HTTP API.
    Serve {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        token: Option<String>,
        #[arg(long)]
        body_limit: Option<usize>,
    },
    #[command(subcommand)]
    Watch(WatchCommand),
    /// Query or verify the audit log.
    Audit {
        #[command(flatten)]
        wb: Wb,
        #[arg(long)]
        by: Option<String>,
        #[arg(long)]
        action: Option<String>,
        #[arg(long)]
        target: Option<String>,
        /// Check the hash chain instead of listing entries.
        #[arg(long, conflicts_with_all = ["by", "action", "target"])]
        verify: bool,
    },
}

#[derive(Subcommand, Debug)]
enum RulesCommand {
    /// Register an alert rule.
    Add {
        #[command(flatten)]
        wb: Wb,
        /// Cell or region, e.g. `S!A1` or `S!A1:C9`.
        #[arg(long)]
        target: String,
        #[arg(long, value_enum)]
        kind: RuleType,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        #[arg(long)]
        id: Option<String>,
        #[arg(long, default_value_t = cellvault_core::alert::DEFAULT_WINDOW)]
        window: usize,
    },
    List {
        #[command(flatten)]
        wb: Wb,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RuleType {
    ThresholdUp,
    ThresholdDown,
    DeltaAbs,
    RangeBreach,
    FormulaChanged,
}

#[derive(Subcommand, Debug)]
enum ReportCommand {
    /// Formula volatility and retirement readiness.
    Retirement {
        #[command(flatten)]
        wb: Wb,
        #[arg(long, default_value_t = DEFAULT_RETIREMENT_WINDOW)]
        window: usize,
    },
}

#[derive(Subcommand, Debug)]
enum ManifestCommand {
    /// Register a change manifest from a JSON file.
    Register {
        #[command(flatten)]
        wb: Wb,
        #[arg(long, short = 'f')]
        file: PathBuf,
    },
    List {
        #[command(flatten)]
        wb: Wb,
    },
}

#[derive(Subcommand, Debug)]
enum WatchCommand {
    Get {
        #[command(flatten)]
        wb: Wb,
    },
    /// Replace the declared input regions.
    Set {
        #[command(flatten)]
        wb: Wb,
        #[arg(long = "input-region")]
        input_regions: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Json,
    Csv,
}

#[derive(Serialize)]
struct RestoreReceipt<'a> {
    commit_id: &'a str,
    snapshot_hash: &'a str,
    path: String,
    bytes: usize,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}

fn store_root(cli_store: &Option<PathBuf>) -> PathBuf {
    cli_store
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_STORE))
}

fn rule_kind(
    kind: RuleType,
    threshold: Option<f64>,
    delta: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
) -> Result<RuleKind, CliError> {
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| CliError::Usage(format!("--kind {kind:?} needs --{flag}")))
    };
    Ok(match kind {
        RuleType::ThresholdUp => RuleKind::ThresholdUp {
            threshold: need(threshold, "threshold")?,
        },
        RuleType::ThresholdDown => RuleKind::ThresholdDown {
            threshold: need(threshold, "threshold")?,
        },
        RuleType::DeltaAbs => RuleKind::DeltaAbs {
            delta: need(delta, "delta")?,
        },
        RuleType::RangeBreach => RuleKind::RangeBreach {
            lo: need(lo, "lo")?,
            hi: need(hi, "hi")?,
        },
        RuleType::FormulaChanged => RuleKind::FormulaChanged,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| cellvault_core::Error::Format(format!("{}: {e}", path.display())).into())
}

fn execute(cli: Cli, out: &mut dyn Write) -> CliResult {
    let mut emit = Emitter::new(cli.output, out);
    let root = store_root(&cli.store);
    let actor = cli.actor.as_str();
    let open = || Store::open(&root);
    match cli.command {
        Command::Init => {
            let store = Store::init(&root)?;
            let shown = store.root().display().to_string();
            emit.one(&serde_json::json!({ "store": shown }), |w| {
                writeln!(w, "initialised store at {shown}")
            })?;
        }
        Command::Commit {
            wb,
            file,
            author,
            message,
            timestamp,
            sheet,
        } => {
            let store = open()?;
            let report = match sheet {
                Some(name) => ingest_csv_workbook(&name, &std::fs::read(&file)?)?,
                None => ingest_path(&file)?,
            };
            let meta = CommitMeta {
                author,
                message,
                source: file.display().to_string(),
                timestamp,
            };
            let receipt =
                CommitReceipt::from(&store.commit(&wb.workbook, &report.snapshot, meta)?);
            emit.one(&receipt, |w| {
                output::receipt_text(w, &receipt, &report.warnings)
            })?;
        }
        Command::Log { wb } => {
            let log = open()?.log(&wb.workbook)?;
            emit.list(&log, output::commit_line)?;
        }
        Command::Diff { wb, from, to } => {
            let changes = open()?.diff_commits(&wb.workbook, &from, &to)?;
            emit.list(&changes, output::change_line)?;
        }
        Command::History { wb, cell, window } => {
            let address: CellAddress = cell.parse()?;
            let series = open()?.cell_history(&wb.workbook, &address, window)?;
            emit.one(&series, |w| {
                for p in &series.points {
                    let mark = if p.changed { "*" } else { " " };
                    let short = &p.commit_id[..12];
                    writeln!(w, "{short} {} {mark} {}", p.timestamp, p.value)?;
                }
                if let Ok(label) = classify_pattern(&series.values()) {
                    writeln!(w, "pattern: {label:?}")?;
                }
                Ok(())
            })?;
        }
        Command::Rules(RulesCommand::Add {
            wb,
            target,
            kind,
            threshold,
            delta,
            lo,
            hi,
            id,
            window,
        }) => {
            let kind = rule_kind(kind, threshold, delta, lo, hi)?;
            let mut rule = AlertRule::new(id.unwrap_or_default(), target.parse()?, kind);
            rule.window = window;
            let rule_id = open()?.add_rule(&wb.workbook, rule, actor)?;
            emit.one(&serde_json::json!({ "rule_id": rule_id }), |w| {
                writeln!(w, "added rule {rule_id}")
            })?;
        }
        Command::Rules(RulesCommand::List { wb }) => {
            let rules = open()?.rules(&wb.workbook)?;
            emit.list(&rules, output::rule_line)?;
        }
        Command::Alerts { wb } => {
            let firings = open()?.alerts(&wb.workbook)?;
            emit.list(&firings, output::firing_line)?;
        }
        Command::Export {
            wb,
            region,
            at,
            format,
        } => {
            let region: Region = region.parse()?;
            let table = open()?.export_region(&wb.workbook, &at, &region)?;
            if format == ExportFormat::Csv {
                emit.raw(table.to_csv().as_bytes())?;
            } else {
                emit.one(&table, |w| {
                    for row in &table.rows {
                        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
                        writeln!(w, "{}", cells.join("\t"))?;
                    }
                    Ok(())
                })?;
            }
        }
        Command::Restore { wb, commit, out } => {
            let store = open()?;
            let record = store.resolve(&wb.workbook, &commit)?;
            let bytes = store.restore(&wb.workbook, &record.commit_id, actor)?;
            match out {
                None => emit.raw(&bytes)?,
                Some(path) => {
                    std::fs::write(&path, &bytes)?;
                    let receipt = RestoreReceipt {
                        commit_id: &record.commit_id,
                        snapshot_hash: record.snapshot.as_str(),
                        path: path.display().to_string(),
                        bytes: bytes.len(),
                    };
                    emit.one(&receipt, |w| {
                        writeln!(
                            w,
                            "restored {} ({} bytes) to {}",
                            receipt.commit_id, receipt.bytes, receipt.path
                        )
                    })?;
                }
            }
        }
        Command::Report(ReportCommand::Retirement { wb, window }) => {
            let report = open()?.retirement_report(&wb.workbook, window)?;
            emit.one(&report, |w| {
                writeln!(w, "verdict: {:?}", report.verdict)?;
                writeln!(w, "volatility: {}", report.volatility)?;
                writeln!(
                    w,
                    "formula-change commits: {} of {} (window {})",
                    report.formula_change_commits, report.commits_considered, report.window
                )
            })?;
        }
        Command::Manifest(ManifestCommand::Register { wb, file }) => {
            let manifest: ChangeManifest = read_json(&file)?;
            open()?.register_manifest(&wb.workbook, &manifest, actor)?;
            emit.one(&manifest, |w| {
                writeln!(w, "registered manifest {}", manifest.manifest_id)
            })?;
        }
        Command::Manifest(ManifestCommand::List { wb }) => {
            let manifests = open()?.manifests(&wb.workbook)?;
            emit.list(&manifests, |w, m| {
                writeln!(
                    w,
                    "{} approved by {} at {} ({} regions)",
                    m.manifest_id,
                    m.approver,
                    m.created,
                    m.allowed.len()
                )
            })?;
        }
        Command::Verify {
            wb,
            manifest,
            from,
            to,
        } => {
            let report =
                open()?.check_compliance(&wb.workbook, &manifest, from.as_deref(), &to, actor)?;
            emit.one(&report, |w| output::compliance_text(w, &report))?;
        }
        Command::Discover { root } => {
            let report = discover(&root)?;
            emit.one(&report, |w| output::inventory_text(w, &report))?;
        }
        Command::Serve {
            config,
            listen,
            token,
            body_limit,
        } => {
            let mut cfg = ServiceConfig::load(config.as_deref())?;
            if let Some(store) = cli.store {
                cfg.store = store;
            }
            if let Some(v) = listen {
                cfg.listen = v;
            }
            if let Some(v) = token {
                cfg.token = Some(v);
            }
            if let Some(v) = body_limit {
                cfg.body_limit = v;
            }
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?;
            runtime.block_on(cellvault_service::serve(cfg))?;
        }
        Command::Watch(WatchCommand::Get { wb }) => {
            let config = open()?.watch_config(&wb.workbook)?;
            emit.one(&config, |w| output::watch_text(w, &config))?;
        }
        Command::Watch(WatchCommand::Set { wb, input_regions }) => {
            let regions = input_regions
                .iter()
                .map(|r| r.parse())
                .collect::<Result<Vec<Region>, _>>()?;
            let config = WatchConfig::new(regions);
            open()?.set_watch_config(&wb.workbook, &config, actor)?;
            emit.one(&config, |w| output::watch_text(w, &config))?;
        }
        Command::Audit {
            wb,
            by,
            action,
            target,
            verify,
        } => {
            let store = open()?;
            if verify {
                let entries = store.verify_audit_chain(&wb.workbook)?;
                emit.one(
                    &serde_json::json!({ "entries": entries, "chain": "ok" }),
                    |w| writeln!(w, "audit chain ok ({entries} entries)"),
                )?;
            } else {
                let filter = AuditFilter {
                    actor: by,
                    action,
                    target,
                };
                let entries = store.audit_query(&wb.workbook, &filter)?;
                emit.list(&entries, |w, e| {
                    writeln!(
                        w,
                        "{:>5} {} {} {} {}",
                        e.seq, e.timestamp, e.actor, e.action, e.target
                    )
                })?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
