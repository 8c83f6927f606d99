//! The `docent` command line.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use docent_core::dsl::{check_scenario, SanitizationReport};
use docent_core::gen::{
    generate_scenario, Audience, DistanceWeights, GenError, GenOptions, GenerationParams, Provider, Style,
    StubProvider,
};
use docent_core::profile::{basic_scenario, mentor1_forest, mentor1_registry, Stage};
use docent_core::sim::{error_count, summarize, trace_diff, DiffEntry, SimConfig, DEFAULT_TICK};
use docent_core::{run_scenario, Registry, RecordKind, RunError, RunSetup, TraceRecord};

use crate::cache::DiskCache;
use crate::files::{self, FileError};
use crate::live::LiveProvider;

/// Process exit status. The numeric values are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ValidationFailure = 1,
    ConfigError = 2,
    ProviderError = 3,
}

impl From<ExitStatus> for ExitCode {
    fn from(s: ExitStatus) -> Self {
        ExitCode::from(s as u8)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Provider(String),
    #[error("output: {0}")]
    Output(#[from] io::Error),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::File(_) | CliError::Config(_) | CliError::Output(_) => ExitStatus::ConfigError,
            CliError::Invalid(_) => ExitStatus::ValidationFailure,
            CliError::Provider(_) => ExitStatus::ProviderError,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "docent", version, about = "Tour-guide robot scenarios: generate, validate, simulate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a tagged scenario for an exhibit description.
    Generate(GenerateArgs),
    /// Parse and sanitize a scenario and print what would be dropped.
    Validate(ValidateArgs),
    /// Execute a scenario on the simulated robot and write its trace.
    Simulate(SimulateArgs),
    /// Inspect traces.
    #[command(subcommand)]
    Trace(TraceCommand),
    /// Show or export the built-in robot profile.
    #[command(subcommand)]
    Registry(RegistryCommand),
}

#[derive(Debug, Args)]
pub struct RegistryArg {
    /// Action registry (TOML); defaults to the built-in MENTOR-1 registry.
    #[arg(long, value_name = "PATH")]
    pub registry: Option<PathBuf>,
}

impl RegistryArg {
    fn load(&self) -> Result<Registry, CliError> {
        match &self.registry {
            Some(path) => Ok(files::load_registry(path)?),
            None => Ok(mentor1_registry()),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Exhibit description: title on the first line, then the text.
    pub exhibit: PathBuf,
    /// Target narrative length in characters.
    #[arg(long, default_value_t = 1200, value_parser = clap::value_parser!(u32).range(1..))]
    pub length: u32,
    #[arg(long, default_value = "formal", value_parser = parse_style)]
    pub style: Style,
    #[arg(long, default_value = "adults_nontechnical", value_parser = parse_audience)]
    pub audience: Audience,
    /// Use the built-in offline generator instead of the remote model.
    #[arg(long)]
    pub offline: bool,
    /// Seed for the offline generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scenario cache directory to update and to fall back on.
    #[arg(long, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    /// When the provider fails, use the closest cached scenario instead.
    #[arg(long, requires = "cache")]
    pub fallback: bool,
    /// Hand-written scenario to store as the exhibit's basic scenario.
    #[arg(long, value_name = "PATH")]
    pub basic: Option<PathBuf>,
    /// Output file; defaults to `<exhibit>.scenario.txt` next to the input.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub registry: RegistryArg,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub scenario: PathBuf,
    #[command(flatten)]
    pub registry: RegistryArg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    /// Agent forest (TOML); defaults to the MENTOR-1 forest.
    #[arg(long, value_name = "PATH")]
    pub forest: Option<PathBuf>,
    #[command(flatten)]
    pub registry: RegistryArg,
    /// Listener and exhibit positions (TOML).
    #[arg(long, value_name = "PATH")]
    pub stage: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Speaking rate in characters per second.
    #[arg(long, value_name = "X")]
    pub speech_cps: Option<f64>,
    /// Simulation step in seconds.
    #[arg(long, default_value_t = DEFAULT_TICK)]
    pub tick: f64,
    /// Ignore requests to child agents when no ancestor is busy.
    #[arg(long)]
    pub strict_alg1: bool,
    /// Where to write the trace (JSON lines).
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TraceCommand {
    /// Count records per kind.
    Summary { trace: PathBuf },
    /// Structural difference between two traces; exits 1 when they differ.
    Diff { a: PathBuf, b: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum RegistryCommand {
    /// One line per action.
    List(RegistryArg),
    /// The built-in registry as TOML.
    Dump,
    /// The built-in forest as TOML.
    DumpForest,
    /// The built-in stage as TOML.
    DumpStage,
}

fn parse_style(s: &str) -> Result<Style, String> {
    s.parse().map_err(|_| format!("expected one of: {}", Style::ALL.map(Style::as_str).join(", ")))
}

fn parse_audience(s: &str) -> Result<Audience, String> {
    s.parse()
        .map_err(|_| format!("expected one of: {}", Audience::ALL.map(Audience::as_str).join(", ")))
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("docent: {e}");
            e.status().into()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    match cli.command {
        Command::Generate(args) => generate(args, out),
        Command::Validate(args) => validate(args, out),
        Command::Simulate(args) => simulate(args, out),
        Command::Trace(TraceCommand::Summary { trace }) => {
            let trace = files::load_trace(&trace)?;
            print_summary(&trace, out)?;
            Ok(ExitStatus::Success)
        }
        Command::Trace(TraceCommand::Diff { a, b }) => diff(&a, &b, out),
        Command::Registry(cmd) => registry(cmd, out),
    }
}

fn write_report(report: &SanitizationReport, kept: usize, out: &mut dyn Write) -> io::Result<()> {
    writeln!(
        out,
        "tags: {} kept, {} dropped, {} repaired, {} malformed",
        kept,
        report.dropped_tags.len(),
        report.repaired_tags.len(),
        report.malformed.len()
    )?;
    for (tag, reason) in &report.dropped_tags {
        writeln!(out, "  dropped {} at {}: {}", tag.markup(), tag.char_offset, reason)?;
    }
    for (tag, original) in &report.repaired_tags {
        writeln!(out, "  repaired {} (was {})", tag.markup(), original)?;
    }
    for m in &report.malformed {
        writeln!(out, "  malformed {:?} at {}", m.text, m.char_offset)?;
    }
    Ok(())
}

fn generate(args: GenerateArgs, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let exhibit = files::load_exhibit(&args.exhibit)?;
    let registry = args.registry.load()?;
    let params = GenerationParams {
        target_length: args.length as usize,
        style: args.style,
        audience: args.audience,
    };
    let basic = match &args.basic {
        Some(path) => Some(files::read_text(path)?),
        None => None,
    };
    let cache = args.cache.as_deref().map(DiskCache::open).transpose()?;
    let out_path = args.out.clone().unwrap_or_else(|| args.exhibit.with_extension("scenario.txt"));

    let mut provider: Box<dyn Provider> = if args.offline {
        Box::new(StubProvider::new(args.seed, registry.clone()))
    } else {
        match LiveProvider::from_env() {
            Ok(p) => Box::new(p),
            Err(e) => return provider_failure(e.into(), &args, cache.as_ref(), &params, &exhibit.id, &out_path, out),
        }
    };
    let generated = match generate_scenario(&exhibit, &params, &registry, provider.as_mut(), &GenOptions::default()) {
        Ok(g) => g,
        Err(GenError::EmptyDescription(id)) => return Err(CliError::Config(format!("exhibit `{id}` is empty"))),
        Err(GenError::ZeroLength) => return Err(CliError::Config("length must be positive".into())),
        Err(e) => return provider_failure(e, &args, cache.as_ref(), &params, &exhibit.id, &out_path, out),
    };
    files::write_atomic(&out_path, generated.document.raw_text.as_bytes())?;
    let kept = check_scenario(&generated.document.raw_text, &registry)
        .map(|c| c.tags.len())
        .unwrap_or(0);
    writeln!(out, "wrote {}", out_path.display())?;
    writeln!(
        out,
        "narrative: {} characters (target {}){}",
        generated.narrative.chars().count(),
        params.target_length,
        if generated.length_violation { ", outside the length band" } else { "" }
    )?;
    write_report(&generated.report, kept, out)?;
    if let Some(cache) = &cache {
        if let Some(text) = &basic {
            cache.set_basic(&exhibit.id, text)?;
        } else if !cache.has_basic(&exhibit.id)? {
            cache.set_basic(&exhibit.id, &basic_scenario(&exhibit.title))?;
        }
        let stored = cache.store(&exhibit.id, &params, &generated.document.raw_text)?;
        writeln!(out, "cached {}", stored.display())?;
    }
    Ok(ExitStatus::Success)
}

fn provider_failure(
    error: GenError,
    args: &GenerateArgs,
    cache: Option<&DiskCache>,
    params: &GenerationParams,
    exhibit: &str,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<ExitStatus, CliError> {
    let (true, Some(cache)) = (args.fallback, cache) else {
        return Err(CliError::Provider(error.to_string()));
    };
    eprintln!("docent: {error}; falling back to the scenario cache");
    let scenarios = cache.load()?;
    let chosen = scenarios
        .fallback_select(exhibit, params, &DistanceWeights::default())
        .map_err(|e| CliError::Provider(format!("{error}; {e}")))?;
    files::write_atomic(out_path, chosen.raw_text.as_bytes())?;
    match &chosen.metadata {
        Some(p) => writeln!(
            out,
            "fallback: cached scenario ({}, {}, {}) written to {}",
            p.target_length,
            p.style,
            p.audience,
            out_path.display()
        )?,
        None => writeln!(out, "fallback: basic scenario written to {}", out_path.display())?,
    }
    Ok(ExitStatus::Success)
}

fn validate(args: ValidateArgs, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let registry = args.registry.load()?;
    let text = files::read_text(&args.scenario)?;
    let checked = check_scenario(&text, &registry).map_err(|e| CliError::Invalid(e.to_string()))?;
    write_report(&checked.report, checked.tags.len(), out)?;
    Ok(if checked.report.is_clean() {
        ExitStatus::Success
    } else {
        ExitStatus::ValidationFailure
    })
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let mut setup = RunSetup {
        registry: args.registry.load()?,
        forest: match &args.forest {
            Some(path) => files::load_forest(path)?,
            None => mentor1_forest(),
        },
        stage: match &args.stage {
            Some(path) => files::load_stage(path)?,
            None => Stage::default(),
        },
        sim: SimConfig {
            tick: args.tick,
            seed: args.seed,
            ..SimConfig::default()
        },
        strict: args.strict_alg1,
        ..RunSetup::default()
    };
    if let Some(cps) = args.speech_cps {
        setup.speech.chars_per_second = cps;
    }
    let text = files::read_text(&args.scenario)?;
    let result = run_scenario(&text, &setup).map_err(|e| match e {
        RunError::Parse(e) => CliError::Invalid(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    write_report(&result.scenario.report, result.scenario.tags.len(), out)?;
    print_summary(&result.trace, out)?;
    if let Some(path) = &args.trace {
        files::save_trace(path, &result.trace)?;
    }
    let errors = error_count(&result.trace);
    for record in result.trace.iter().filter(|r| r.is_error()) {
        eprintln!("docent: t={:.2} {}: {}", record.time, record.agent, record.note);
    }
    Ok(if errors == 0 {
        ExitStatus::Success
    } else {
        ExitStatus::ValidationFailure
    })
}

fn print_summary(trace: &[TraceRecord], out: &mut dyn Write) -> io::Result<()> {
    let counts = summarize(trace);
    let end = trace.last().map_or(0.0, |r| r.time);
    writeln!(out, "records: {} over {:.2} s", trace.len(), end)?;
    for kind in RecordKind::ALL {
        writeln!(out, "  {:<18} {}", kind.as_str(), counts.get(&kind).copied().unwrap_or(0))?;
    }
    writeln!(out, "  {:<18} {}", "errors", error_count(trace))
}

fn describe(r: &TraceRecord) -> String {
    let priority = r.priority.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
    format!(
        "t={:.2} {} {} {}[{}] p={} {}",
        r.time,
        r.agent,
        r.kind,
        r.action_type,
        r.params.join(";"),
        priority,
        r.note
    )
}

fn diff(a: &Path, b: &Path, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let left = files::load_trace(a)?;
    let right = files::load_trace(b)?;
    let entries = trace_diff(&left, &right);
    for entry in &entries {
        match entry {
            DiffEntry::Removed(i, r) => writeln!(out, "- #{i} {}", describe(r))?,
            DiffEntry::Added(i, r) => writeln!(out, "+ #{i} {}", describe(r))?,
        }
    }
    if entries.is_empty() {
        writeln!(out, "identical")?;
        Ok(ExitStatus::Success)
    } else {
        Ok(ExitStatus::ValidationFailure)
    }
}

fn registry(cmd: RegistryCommand, out: &mut dyn Write) -> Result<ExitStatus, CliError> {
    match cmd {
        RegistryCommand::List(arg) => {
            let registry = arg.load()?;
            for d in registry.iter() {
                let params: Vec<String> = d
                    .param_schema
                    .iter()
                    .map(|p| if p.required { p.name.clone() } else { format!("[{}]", p.name) })
                    .collect();
                writeln!(
                    out,
                    "{:<20} p={:<2} {:>4.1}s {:<14} {}{}",
                    format!("{}:{}", d.action_type, params.join(";")),
                    d.base_priority,
                    d.nominal_duration,
                    d.owner_agent,
                    d.description,
                    if d.internal { " (internal)" } else { "" }
                )?;
            }
        }
        RegistryCommand::Dump => out.write_all(files::registry_to_toml(&mentor1_registry()).as_bytes())?,
        RegistryCommand::DumpForest => out.write_all(files::forest_to_toml(&mentor1_forest()).as_bytes())?,
        RegistryCommand::DumpStage => out.write_all(files::stage_to_toml(&Stage::default()).as_bytes())?,
    }
    Ok(ExitStatus::Success)
}
