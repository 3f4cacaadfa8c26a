use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diffswarm::runner::{run_application, RunError, RunOutput};
use diffswarm::scenario::{Application, Scenario, Variant};

#[derive(Parser)]
#[command(name = "diffswarm", version, about = "Run differential-drive swarm scenarios")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or the name of a bundled scenario
    scenario: String,
    /// Replace the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV, map and summary files
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Edit a scenario value, e.g. `gains.k_x=2` (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectory tracking
    Track(Common),
    /// Localization with the scenario's estimator variants
    Localize(Common),
    /// Heading consensus
    Consensus(Common),
    /// Mapping and path planning
    Plan(Common),
    /// Run several estimators on the same packet stream
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated variants (default: all)
        #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
        variants: Vec<Variant>,
    },
    /// Parse and validate a scenario without running it
    Validate {
        scenario: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| {
        let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
        format!("unknown variant `{s}` (expected one of {})", names.join(", "))
    })
}

fn load(c: &Common) -> Result<Scenario, RunError> {
    let mut o = c.overrides.clone();
    if let Some(seed) = c.seed {
        o.push(format!("seed={seed}"));
    }
    Ok(Scenario::load(&c.scenario, &o)?)
}

fn write_outputs(dir: &Path, out: &RunOutput) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Fault(format!("writing {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for a in &out.artifacts {
        std::fs::write(dir.join(&a.name), &a.bytes).map_err(io)?;
    }
    Ok(())
}

// A closed pipe (e.g. `| head`) is not an error worth reporting.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn run(cmd: Command) -> Result<(), RunError> {
    let (common, app, variants) = match cmd {
        Command::Validate { scenario, overrides } => {
            let s = Scenario::load(&scenario, &overrides)?;
            emit(&format!("ok {} ({:?}) digest {}\n", s.name, s.application, s.digest()));
            return Ok(());
        }
        Command::Track(c) => (c, Application::Track, None),
        Command::Localize(c) => (c, Application::Localize, None),
        Command::Consensus(c) => (c, Application::Consensus, None),
        Command::Plan(c) => (c, Application::Plan, None),
        Command::Compare { common, variants } => {
            let v = if variants.is_empty() {
                Variant::ALL.to_vec()
            } else {
                variants
            };
            (common, Application::Localize, Some(v))
        }
    };
    let s = load(&common)?;
    let out = run_application(&s, app, variants.as_deref())?;
    write_outputs(&common.out, &out)?;
    if variants.is_some() {
        if let Some(e) = &out.summary.estimation {
            emit(&e.table().to_text());
        }
    }
    emit(&format!("{}\n", out.summary.to_json()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
