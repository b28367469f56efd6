use std::fs;
use std::io::{self, BufReader, Write};
use std::num::ParseIntError;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{error::ErrorKind, Args, Parser, Subcommand};

use hrc_core::bench::{quadratic_fit, run_benchmark, samples, write_csv, write_plot_data, BenchConfig, DEFAULT_REPS};
use hrc_core::bundle::{parse_bundle, Bundle};
use hrc_core::gen::{table_model, write_kitchen_bundle, write_table_bundle, Encoding};
use hrc_core::graph::ParseError;
use hrc_core::task::{
    parse_trace, EventSource, InteractiveSource, Outcome, RunOptions, SimulatedSource, TraceSource,
};

const EXIT_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "hrc", version, about = "Plan and replay human-robot cooperation on AND/OR graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a bundle and report its size, or the first problem found.
    Validate { bundle: PathBuf },
    /// Run a scenario and print its transcript.
    Run(RunArgs),
    /// Write an N-leg table bundle.
    GenTable {
        #[arg(long)]
        legs: usize,
        #[arg(long, default_value = "hierarchical")]
        encoding: Encoding,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the five-layer kitchen bundle.
    GenKitchen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Time offline build and random online traversal of generated tables.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    bundle: PathBuf,
    /// Replay this trace instead of the bundle's own.
    #[arg(long, conflicts_with = "interactive")]
    trace: Option<PathBuf>,
    /// Prompt on standard input at every decision point.
    #[arg(long)]
    interactive: bool,
    /// Seeds the simulated operator when there is no trace; recorded in
    /// the transcript header.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the transcript here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "standard,fol,hierarchical")]
    encodings: Vec<Encoding>,
    /// Leg range, `a..b` inclusive or a single number.
    #[arg(long, default_value = "1..9", value_parser = leg_range)]
    legs: RangeInclusive<usize>,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write whitespace-separated plot data.
    #[arg(long)]
    plot: Option<PathBuf>,
}

fn leg_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e: ParseIntError| format!("`{x}`: {e}"));
    match s.split_once("..") {
        Some((a, b)) => Ok(parse(a)?..=parse(b.trim_start_matches('='))?),
        None => parse(s).map(|n| n..=n),
    }
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        error: error.into(),
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: EXIT_FAILED, error }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Validate { bundle } => validate(&bundle),
        Command::Run(args) => run(args),
        Command::GenTable { legs, encoding, out } => {
            table_model(legs, encoding).map_err(|e| Failure {
                code: EXIT_USAGE,
                error: e.into(),
            })?;
            write_table_bundle(&out, legs, encoding).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {encoding} table with {legs} legs to {}", out.display());
            Ok(0)
        }
        Command::GenKitchen { out } => {
            write_kitchen_bundle(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote kitchen model to {}", out.display());
            Ok(0)
        }
        Command::Bench(args) => bench(args),
    }
}

fn load(path: &Path) -> Result<Bundle, Failure> {
    parse_bundle(path).map_err(invalid)
}

fn validate(path: &Path) -> Result<u8, Failure> {
    let b = load(path)?;
    let (nodes, arcs) = b
        .graphs
        .values()
        .fold((0, 0), |(n, a), g| (n + g.spec.nodes.len(), a + g.spec.arcs.len()));
    let kind = if b.is_hierarchical() { "hierarchical" } else { "flat" };
    println!(
        "ok: {} ({kind}), {} graph(s), {nodes} nodes, {arcs} hyper-arcs, {} actions",
        b.root,
        b.graphs.len(),
        b.lib.len()
    );
    Ok(0)
}

fn read_trace(path: &Path) -> Result<TraceSource, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(invalid)?;
    let events = parse_trace(&text).map_err(|e: ParseError| invalid(anyhow::anyhow!("{}: {e}", path.display())))?;
    Ok(TraceSource::new(events))
}

fn run(args: RunArgs) -> Result<u8, Failure> {
    let bundle = load(&args.bundle)?;
    let mut source: Box<dyn EventSource> = if args.interactive {
        Box::new(InteractiveSource::new(BufReader::new(io::stdin()), io::stdout()))
    } else if let Some(t) = &args.trace {
        Box::new(read_trace(t)?)
    } else if let (Some(events), None) = (&bundle.trace, args.seed) {
        Box::new(TraceSource::new(events.clone()))
    } else {
        Box::new(SimulatedSource::new(args.seed.unwrap_or(0)))
    };
    let opts = RunOptions {
        seed: args.seed,
        ..RunOptions::default()
    };
    let transcript = bundle.run(source.as_mut(), &opts).map_err(anyhow::Error::from)?;
    let text = transcript.to_string();
    match &args.out {
        Some(path) => fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().write_all(text.as_bytes()).context("writing transcript")?,
    }
    Ok(match transcript.outcome() {
        Some(Outcome::Solved) => 0,
        _ => EXIT_FAILED,
    })
}

fn bench(args: BenchArgs) -> Result<u8, Failure> {
    if args.reps == 0 || args.encodings.is_empty() {
        return Err(Failure {
            code: EXIT_USAGE,
            error: anyhow::anyhow!("need at least one encoding and one repetition"),
        });
    }
    let cfg = BenchConfig {
        encodings: args.encodings,
        legs: args.legs,
        reps: args.reps,
        seed: args.seed,
    };
    let records = run_benchmark(&cfg);
    let csv = write_csv(&records);
    match &args.out {
        Some(path) => fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.plot {
        fs::write(path, write_plot_data(&records)).with_context(|| format!("writing {}", path.display()))?;
    }
    for &enc in &cfg.encodings {
        let (x, y) = samples(&records, enc);
        if let Some(fit) = quadratic_fit(&x, &y) {
            eprintln!(
                "{enc}: online ~ {:.3e} + {:.3e} legs + {:.3e} legs^2, quadratic p = {:.3}",
                fit.coef[0], fit.coef[1], fit.coef[2], fit.p_quadratic
            );
        }
        let at = |l: usize| records.iter().find(|r| r.encoding == enc && r.legs == l).map(|r| r.online_s.mean);
        if let (Some(first), Some(last)) = (at(*cfg.legs.start()), at(*cfg.legs.end())) {
            eprintln!("{enc}: online({})/online({}) = {:.1}", cfg.legs.end(), cfg.legs.start(), last / first);
        }
    }
    Ok(0)
}
