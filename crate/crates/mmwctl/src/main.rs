//! `mmwctl`: validate, run and query topologies, apply shifts and compare
//! shift costs across architectures.
//!
//! Exit status is 0 on success, 1 when the input is rejected (invalid
//! topology, parameters or shift target) and 2 when something fails at run
//! time.

mod access;
mod costs;
mod serve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mmw_core::topology::{
    apply_shift, load_topology, validate_topology, LoadError, Shift, Topology, DEFAULT_BASE_PORT,
};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "mmwctl", version, about = "Mask-mediator-wrapper topologies and shift costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct Target {
    /// Topology file the mask belongs to.
    #[arg(long, short = 't', env = "MMW_TOPOLOGY")]
    topology: PathBuf,
    /// Talk to an already running deployment instead of starting one.
    #[arg(long)]
    connect: bool,
    /// Port of the first component; defaults to the topology's own.
    #[arg(long)]
    base_port: Option<u16>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a topology against the composition rules.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Start every component of a topology and wait for Ctrl-C.
    Serve {
        file: PathBuf,
        /// One operating-system process per component.
        #[arg(long)]
        multi_process: bool,
        #[arg(long)]
        base_port: Option<u16>,
        /// Run a single component (used by --multi-process).
        #[arg(long, hide = true)]
        component: Option<String>,
    },
    /// Print a mask's schema in its own representation.
    Schema {
        mask: String,
        #[command(flatten)]
        target: Target,
    },
    /// Run a query written in a mask's representation.
    Query {
        mask: String,
        query: String,
        #[command(flatten)]
        target: Target,
    },
    /// Apply a shift to a topology and price the edits it takes.
    Shift {
        file: PathBuf,
        /// Shift as JSON, or `@path` to a JSON file.
        shift: String,
        /// Where to write the shifted topology.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cost parameters as JSON or `@path`; the sample binding otherwise.
        #[arg(long)]
        params: Option<String>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Compare shift costs of the three architectures.
    Cost {
        #[arg(long)]
        params: Option<String>,
        /// 1 to 4, or `all`.
        #[arg(long, default_value = "all")]
        scenario: String,
        /// 1LMW, 2LMW, MMW, or `all`.
        #[arg(long, default_value = "all")]
        arch: String,
        /// Number of wrappers a shift touches: `3`, `1..5` or `1,2,4`.
        #[arg(long, default_value = "3")]
        n: String,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Rejected(String),
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Rejected(_) => ExitCode::from(1),
            Failure::Runtime(_) => ExitCode::from(2),
        }
    }
}

pub type Outcome = Result<(), Failure>;

/// Reads `@path` files; anything else is taken literally.
pub fn inline_or_file(arg: &str) -> Result<String, Failure> {
    match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("cannot read `{path}`: {e}"))),
        None => Ok(arg.to_string()),
    }
}

pub fn load(path: &Path) -> Result<Topology, Failure> {
    load_topology(path).map_err(|e| match e {
        LoadError::Io { .. } => Failure::Runtime(e.to_string()),
        LoadError::Parse(_) => Failure::Rejected(e.to_string()),
    })
}

pub fn base_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn base_port(t: &Topology, flag: Option<u16>) -> u16 {
    flag.or(t.base_port).unwrap_or(DEFAULT_BASE_PORT)
}

fn validate(file: &Path, format: Format) -> Outcome {
    let t = load(file)?;
    let report = validate_topology(&t);
    match format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&json!({"valid": report.is_empty(), "violations": report})).unwrap()
        ),
        Format::Text if report.is_empty() => println!("valid: {} components", t.components.len()),
        Format::Text => report.iter().for_each(|v| println!("{v}")),
    }
    if report.is_empty() {
        Ok(())
    } else {
        Err(Failure::Rejected(format!("{} violation(s)", report.len())))
    }
}

fn shift(file: &Path, spec: &str, out: Option<&Path>, params: Option<&str>, format: Format) -> Outcome {
    let t = load(file)?;
    let spec = inline_or_file(spec)?;
    let shift: Shift = serde_json::from_str(&spec).map_err(|e| Failure::Rejected(format!("bad shift: {e}")))?;
    let (params, _) = costs::load_params(params)?;
    let outcome = apply_shift(&t, &shift).map_err(|e| Failure::Rejected(e.to_string()))?;
    let price = mmw_core::cost::price_editlog(&outcome.log, &params).map_err(|e| Failure::Rejected(e.to_string()))?;
    if let Some(out) = out {
        std::fs::write(out, outcome.topology.to_pretty_string())
            .map_err(|e| Failure::Runtime(format!("cannot write `{}`: {e}", out.display())))?;
    }
    match format {
        Format::Json => {
            let doc = json!({
                "scenario": shift.scenario(),
                "edits": outcome.log.edits,
                "cost": price,
                "topology": outcome.topology.to_json(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
        Format::Text => {
            println!("scenario {}", shift.scenario());
            for edit in &outcome.log.edits {
                println!("  {edit}");
            }
            println!(
                "cost: {} = {}",
                price.symbolic,
                mmw_core::cost::format_rational(&price.numeric)
            );
        }
    }
    Ok(())
}

async fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { file, format } => validate(&file, format),
        Command::Serve {
            file,
            multi_process,
            base_port,
            component,
        } => serve::serve(&file, multi_process, base_port, component).await,
        Command::Schema { mask, target } => access::schema(&mask, &target).await,
        Command::Query { mask, query, target } => access::query(&mask, &query, &target).await,
        Command::Shift {
            file,
            shift: spec,
            out,
            params,
            format,
        } => shift(&file, &spec, out.as_deref(), params.as_deref(), format),
        Command::Cost {
            params,
            scenario,
            arch,
            n,
            format,
        } => costs::cost(params.as_deref(), &scenario, &arch, &n, format),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("mmwctl: cannot start runtime: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = runtime.block_on(run(cli));
    // A supervised component may still be parked on stdin.
    runtime.shutdown_background();
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Rejected(m) | Failure::Runtime(m) => eprintln!("mmwctl: {m}"),
            }
            f.exit_code()
        }
    }
}
