mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tfea_core::analysis::{analyze, AnalysisConfig, GuardPolicy};
use tfea_core::corpus::{join, load_corpus, load_schema, split, write_json};
use tfea_core::inject::{generate_corpus, inject_errors, synthetic_schema, GenerationParams, InjectionSpec};
use tfea_core::matcher::MatchConfig;
use tfea_core::report::{
    compare, render_comparison_csv, render_comparison_text, render_report_csv, render_report_text, Report,
};
use tfea_core::{count_template_matchings, CaseMode, Document, Error, Schema, ScsMode};

use crate::config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "tfea", version, about = "Transformation-based error analysis for template filling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Match, transform and classify errors; report scores and error counts.
    Analyze(AnalyzeArgs),
    /// Scores only, without transformations or error counts.
    Score(AnalyzeArgs),
    /// Inject ledgered errors into a gold corpus.
    Inject(InjectArgs),
    /// Compare reports of several systems on the same corpus.
    Compare(CompareArgs),
    /// Number of template matchings between P predicted and G gold templates.
    CountMatchings {
        #[arg(long)]
        pred: u64,
        #[arg(long)]
        gold: u64,
    },
    /// Write a synthetic gold corpus and its schema.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Schema file; inferred from the corpora when omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Label for this system in reports; defaults to the prediction file stem.
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    scs_mode: Option<ScsMode>,
    #[arg(long)]
    case_sensitive: bool,
    #[arg(long)]
    max_matchings: Option<u64>,
    #[arg(long)]
    max_mention_pairings: Option<u64>,
    #[arg(long)]
    on_guard: Option<GuardPolicy>,
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InjectArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Overrides the seed in the spec file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(required = true, num_args = 2..)]
    reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    schema_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    documents: usize,
    #[arg(long, default_value_t = 2)]
    templates: usize,
    #[arg(long, default_value_t = 2)]
    entities: usize,
    #[arg(long, default_value_t = 2)]
    mentions: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TFEA_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 3: unreadable or invalid input, 4: guard failure, 5: infeasible
/// injection, 6: incompatible reports, 1: anything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::InvalidSchema(_)
            | Error::SchemaMismatch { .. }
            | Error::KindMismatch { .. },
        ) => 3,
        Some(Error::ComplexityGuardExceeded { .. }) => 4,
        Some(Error::InfeasibleSpec { .. }) => 5,
        Some(Error::IncompatibleReports(_)) => 6,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze(args) => run_analyze(args, false),
        Command::Score(args) => run_analyze(args, true),
        Command::Inject(args) => run_inject(args),
        Command::Compare(args) => run_compare(args),
        Command::CountMatchings { pred, gold } => {
            match count_template_matchings(pred, gold) {
                Some(n) => println!("{n}"),
                None => bail!("the count overflows 128 bits"),
            }
            Ok(())
        }
        Command::Generate(args) => run_generate(args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn schema_for(path: Option<&Path>, docs: &[Document]) -> anyhow::Result<Schema> {
    match path {
        Some(p) => Ok(load_schema(p)?),
        None => {
            let schema = Schema::infer(docs.iter().flat_map(|d| d.gold_templates.iter().chain(&d.predicted_templates)));
            schema.validate()?;
            log::info!("no schema given; inferred {} roles", schema.roles.len());
            Ok(schema)
        }
    }
}

fn parse_setting<T: std::str::FromStr<Err = String>>(name: &str, value: &str) -> anyhow::Result<T> {
    value.parse().map_err(|e: String| anyhow::anyhow!("config {name}: {e}"))
}

fn run_analyze(args: AnalyzeArgs, scores_only: bool) -> anyhow::Result<()> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let defaults = MatchConfig::default();
    let scs_mode = match (args.scs_mode, &file.scs_mode) {
        (Some(m), _) => m,
        (None, Some(s)) => parse_setting("scs_mode", s)?,
        (None, None) => defaults.scs_mode,
    };
    let on_guard = match (args.on_guard, &file.on_guard) {
        (Some(g), _) => g,
        (None, Some(s)) => parse_setting("on_guard", s)?,
        (None, None) => GuardPolicy::default(),
    };
    let format = match (args.format, &file.format) {
        (Some(f), _) => f,
        (None, Some(s)) => Format::from_str(s, true).map_err(|e| anyhow::anyhow!("config format: {e}"))?,
        (None, None) => Format::Json,
    };
    let cfg = AnalysisConfig {
        matching: MatchConfig {
            scs_mode,
            max_template_matchings: args.max_matchings.or(file.max_matchings).unwrap_or(defaults.max_template_matchings),
            max_mention_pairings: args
                .max_mention_pairings
                .or(file.max_mention_pairings)
                .unwrap_or(defaults.max_mention_pairings),
        },
        case: CaseMode::from_sensitive_flag(args.case_sensitive || file.case_sensitive.unwrap_or(false)),
        on_guard,
        scores_only,
        threads: args.parallel.or(file.parallel),
    };

    let gold = load_corpus(&args.gold)?;
    let pred = load_corpus(&args.pred)?;
    let docs = join(gold, pred);
    let schema = schema_for(args.schema.as_deref(), &docs)?;
    let analysis = analyze(&docs, &schema, &cfg)?;
    let system = args.system.clone().unwrap_or_else(|| {
        args.pred
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "system".into())
    });
    let report = Report::from_analysis(&system, &analysis, &cfg, &schema);
    let text = match format {
        Format::Json => report.to_json(),
        Format::Csv => render_report_csv(&report)?,
        Format::Text => render_report_text(&report),
    };
    emit(args.out.as_deref(), &text)
}

fn run_inject(args: InjectArgs) -> anyhow::Result<()> {
    let gold = load_corpus(&args.gold)?;
    let spec_text = std::fs::read_to_string(&args.spec).map_err(|e| Error::Io {
        path: args.spec.clone(),
        source: e,
    })?;
    let mut spec: InjectionSpec = serde_json::from_str(&spec_text)
        .map_err(|e| Error::Parse {
            path: args.spec.clone(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
        .context("invalid injection spec")?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let docs = join(gold, Default::default());
    let schema = schema_for(args.schema.as_deref(), &docs)?;
    let (injected, ledger) = inject_errors(&docs, &schema, &spec)?;
    let (_, pred) = split(&injected);
    write_json(&args.out, &pred)?;
    if let Some(path) = &args.ledger {
        write_json(path, &ledger)?;
    }
    Ok(())
}

fn run_compare(args: CompareArgs) -> anyhow::Result<()> {
    let reports = args.reports.iter().map(|p| Report::load(p)).collect::<Result<Vec<_>, _>>()?;
    let c = compare(&reports)?;
    let text = match args.format {
        Format::Text => render_comparison_text(&c),
        Format::Csv => render_comparison_csv(&c)?,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&c)?;
            s.push('\n');
            s
        }
    };
    emit(args.out.as_deref(), &text)
}

fn run_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let params = GenerationParams {
        documents: args.documents,
        templates_per_doc: args.templates,
        entities_per_role: args.entities,
        mentions_per_entity: args.mentions,
        ..Default::default()
    };
    let docs = generate_corpus(&params, args.seed);
    let (gold, _) = split(&docs);
    write_json(&args.out, &gold)?;
    if let Some(path) = &args.schema_out {
        write_json(path, &synthetic_schema())?;
    }
    Ok(())
}
