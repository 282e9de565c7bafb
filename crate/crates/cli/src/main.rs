use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parcelfuse_core::metrics::evaluate;
use parcelfuse_core::pipeline::{load_config, PipelineError, Run, SourceRun, Tables};
use parcelfuse_core::report;
use parcelfuse_core::synthgen::{generate, SynthParams};
use parcelfuse_core::{LbcsCode, Source};

#[derive(Parser)]
#[command(
    name = "parcelfuse",
    version,
    about = "Parcel land-use labeling from POI and OSM sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record counts before and after alignment and assignment.
    Validate(RunArgs),
    /// Label tables and counters per source.
    Assign(RunArgs),
    /// Pairwise and k-way agreement between sources.
    Agree(RunArgs),
    /// Precision and recall against the footprints' authoritative classes.
    Evaluate(RunArgs),
    /// Write a synthetic fixture from a params file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated subset of the configured sources.
    #[arg(long, value_delimiter = ',')]
    sources: Option<Vec<String>>,
    /// Comma-separated LBCS codes for `agree`.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Assignment radius in meters; overrides the configuration.
    #[arg(long)]
    radius: Option<f64>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic params file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "fixture")]
    out: PathBuf,
}

fn usage(message: impl Into<String>) -> PipelineError {
    PipelineError::Usage(message.into())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), PipelineError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|error| PipelineError::Io { path, error })
}

struct Session {
    run: Run,
    out: PathBuf,
    radius: f64,
    sources: Option<Vec<Source>>,
}

impl Session {
    fn open(args: &RunArgs) -> Result<Session, PipelineError> {
        let config = load_config(&args.config)?;
        let radius = args.radius.unwrap_or(config.radius);
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(usage(format!(
                "radius must be a non-negative number, got {radius}"
            )));
        }
        let sources = args
            .sources
            .as_ref()
            .map(|names| {
                names
                    .iter()
                    .map(|n| n.parse::<Source>().map_err(|e| usage(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        let out = args
            .out
            .clone()
            .unwrap_or_else(|| config.output_dir.clone());
        let run = Run::prepare(config)?;
        // Fail on unknown sources before any input is read.
        run.select(sources.as_deref())?;
        fs::create_dir_all(&out).map_err(|error| PipelineError::Io {
            path: out.clone(),
            error,
        })?;
        Ok(Session {
            run,
            out,
            radius,
            sources,
        })
    }

    fn label(&self) -> Result<Vec<SourceRun>, PipelineError> {
        let inputs = self.run.select(self.sources.as_deref())?;
        log::info!(
            "labeling {} sources at radius {} m",
            inputs.len(),
            self.radius
        );
        self.run.label(&inputs, self.radius)
    }
}

fn cmd_validate(args: &RunArgs) -> Result<(), PipelineError> {
    let s = Session::open(args)?;
    let runs = s.label()?;
    write(&s.out, "validity.csv", &report::validity_csv(&runs))?;
    write(&s.out, "validity.md", &report::validity_md(&runs))
}

fn cmd_assign(args: &RunArgs) -> Result<(), PipelineError> {
    let s = Session::open(args)?;
    for run in s.label()? {
        let source = &run.table.source;
        write(
            &s.out,
            &format!("labels_{source}.csv"),
            &report::labels_csv(&run.table),
        )?;
        write(
            &s.out,
            &format!("stats_{source}.csv"),
            &report::stats_csv(&run.table.stats),
        )?;
    }
    Ok(())
}

fn cmd_agree(args: &RunArgs) -> Result<(), PipelineError> {
    let s = Session::open(args)?;
    let taxonomy = &s.run.tables.taxonomy;
    let classes = args
        .classes
        .as_ref()
        .map(|raw| {
            raw.iter()
                .map(|c| match c.trim().parse::<LbcsCode>() {
                    Ok(code) if taxonomy.contains(code) => Ok(code),
                    _ => Err(usage(format!("unknown class {c:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    if s.run.select(s.sources.as_deref())?.len() < 2 {
        return Err(usage("agree needs at least two sources"));
    }
    let tables: Vec<_> = s.label()?.into_iter().map(|r| r.table).collect();
    let agreement = report::agreement_report(&tables, classes.as_deref(), taxonomy)
        .map_err(|e| usage(e.to_string()))?;
    write(&s.out, "agreement.csv", &report::agreement_csv(&agreement))?;
    write(
        &s.out,
        "agreement.md",
        &report::agreement_md(&agreement, taxonomy),
    )
}

fn cmd_evaluate(args: &RunArgs) -> Result<(), PipelineError> {
    let s = Session::open(args)?;
    let footprints = &s.run.footprints;
    if footprints.iter().all(|f| f.authoritative_class.is_none()) {
        return Err(PipelineError::Input(format!(
            "{}: no footprint carries an authoritative class in property {:?}",
            s.run.config.footprints.display(),
            s.run.config.class_property
        )));
    }
    let mut per_source = Vec::new();
    for run in s.label()? {
        let rows = evaluate(&run.table, footprints, &s.run.tables.authoritative);
        let source = run.table.source;
        write(
            &s.out,
            &format!("evaluation_{source}.csv"),
            &report::evaluation_csv(&rows),
        )?;
        per_source.push((source, rows));
    }
    write(&s.out, "evaluation.md", &report::evaluation_md(&per_source))
}

fn cmd_synth(args: &SynthArgs) -> Result<(), PipelineError> {
    let text = fs::read_to_string(&args.config).map_err(|error| PipelineError::Io {
        path: args.config.clone(),
        error,
    })?;
    let path = args.config.display();
    let params = SynthParams::parse(&text).map_err(|e| usage(format!("{path}: {e}")))?;
    let tables = Tables::builtin();
    let output = generate(
        &params,
        &tables.taxonomy,
        &tables.crosswalk,
        &tables.authoritative,
    )
    .map_err(|e| usage(format!("{path}: {e}")))?;
    output
        .write_to(&args.out)
        .map_err(|e| PipelineError::Input(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PARCELFUSE_LOG", "warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Assign(a) => cmd_assign(a),
        Command::Agree(a) => cmd_agree(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("parcelfuse: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
