//! `fsdim` — finite-state dimension toolkit over binary sequences.
//!
//! One command per process; identical argv produces byte-identical output.
//! Exit codes: 0 success, 1 usage error, 2 data/model error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use fsdim::dimension::{
    block_entropy_dimension, family_dimension, run_martingale, ChainFamily, EstimatorOptions,
};
use fsdim::empirical::{run_trace, trace_to_jsonl, CheckpointSchedule};
use fsdim::machine::{ergodic_analysis, parse_spec, Machine};
use fsdim::markov::{induce_chain, StationaryMethod};
use fsdim::selection::{
    agafonov_report, apply_selector, lambda_of, selection_lower_bound, VerdictConfig,
};
use fsdim::sequence::{BitSource, Bits, SourceKind};

#[derive(Parser)]
#[command(
    name = "fsdim",
    version,
    about = "Finite-state dimension, selectors, and martingales on binary sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate bits from a source and print (or write) them.
    Gen {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(short = 'n', value_name = "BITS")]
        n: u64,
        /// Write to a file instead of stdout (`.bits` extension packs 8
        /// bits per byte, most-significant bit first).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Ergodic analysis of a machine; with a source, export its checkpoint
    /// trace (JSON-lines, CSV, or a text summary).
    Analyze {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        source: OptionalSourceArgs,
        #[arg(short = 'n', value_name = "BITS")]
        n: Option<u64>,
        #[arg(long, value_name = "SPEC", default_value = "geometric:24")]
        checkpoints: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Family dimension estimate of a sequence prefix.
    Dim {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(short = 'n', value_name = "BITS")]
        n: u64,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Also run the chain-free block-entropy cross-check.
        #[arg(long)]
        oracle: bool,
        /// Max block length for the cross-check.
        #[arg(long, value_name = "K", default_value_t = 8)]
        blocks: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Apply a selector and report (optionally export) both subsequences.
    Select {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(short = 'n', value_name = "BITS")]
        n: u64,
        #[arg(long, value_name = "PATH")]
        out_selected: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out_complement: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate the λ-weighted selection inequality on a prefix.
    Agafonov {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(short = 'n', value_name = "BITS")]
        n: u64,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// |lhs − dim| below this is verdict "tight".
        #[arg(long, value_name = "T", default_value_t = 0.05)]
        tight_tol: f64,
        /// Treat a shortfall within EPS as the inequality holding.
        #[arg(long, value_name = "EPS")]
        epsilon: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Stationary distribution of a machine's induced fair chain.
    Stationary {
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, value_enum, default_value_t = Method::Linear)]
        method: Method,
        /// Cross-check the two solvers against each other.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a betting machine and report its log₂ capital trace.
    Martingale {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(short = 'n', value_name = "BITS")]
        n: u64,
        #[arg(long, value_name = "SPEC", default_value = "geometric:24")]
        checkpoints: String,
        /// Cross-check against the plain-arithmetic product recursion
        /// (small n only).
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct SourceArgs {
    /// Generated source: champernowne, diluted:KIND, periodic:PATTERN, zeros.
    #[arg(long = "gen", value_name = "KIND[:INNER]", conflicts_with = "file")]
    gen: Option<String>,
    /// File source: ASCII '0'/'1' (whitespace ignored), or packed `.bits`.
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct OptionalSourceArgs {
    #[arg(long = "gen", value_name = "KIND[:INNER]", conflicts_with = "file")]
    gen: Option<String>,
    #[arg(long, value_name = "PATH")]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct MachineArgs {
    /// Machine spec file.
    #[arg(long, value_name = "PATH")]
    machine: PathBuf,
    /// Override the selecting set with a comma-separated state list.
    #[arg(long, value_name = "STATES")]
    select: Option<String>,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long, value_name = "SPEC", default_value = "blocks:4+phase:2")]
    family: String,
    #[arg(long, value_name = "SPEC", default_value = "geometric:24")]
    checkpoints: String,
    #[arg(long, value_name = "T", default_value_t = 0.02)]
    cluster_tol: f64,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Linear,
    Power,
}

/// Resolved invocation parameters, embedded in every report.
#[derive(Serialize, Default)]
struct RunConfig {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    machine: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    select: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoints: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster_tol: Option<f64>,
    format: &'static str,
    oracle: bool,
}

enum CliError {
    Usage(String),
    Data(fsdim::Error),
}

impl From<fsdim::Error> for CliError {
    fn from(e: fsdim::Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    // trace exports get piped into head/jq; die silently on a closed pipe
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message (also for --help/--version)
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn parse_source(gen: &Option<String>, file: &Option<PathBuf>) -> CliResult<SourceKind> {
    match (gen, file) {
        (Some(spec), None) => SourceKind::parse(spec).map_err(|e| CliError::Usage(e.to_string())),
        (None, Some(path)) => Ok(SourceKind::File(path.clone())),
        (None, None) => Err(CliError::Usage("one of --gen or --file is required".into())),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    }
}

fn parse_checkpoints(spec: &str) -> CliResult<CheckpointSchedule> {
    let usage = |msg: String| CliError::Usage(msg);
    match spec.split_once(':') {
        Some(("geometric", points)) => {
            let points: usize = points
                .parse()
                .map_err(|_| usage(format!("bad checkpoint count {points:?}")))?;
            if points == 0 || points > 10_000 {
                return Err(usage("checkpoint count must be in 1..=10000".into()));
            }
            Ok(CheckpointSchedule::Geometric { points })
        }
        Some(("list", items)) => {
            let list = items
                .split(',')
                .map(|item| item.trim().parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| usage(format!("bad checkpoint list {items:?}")))?;
            Ok(CheckpointSchedule::List(list))
        }
        _ => Err(usage(format!(
            "checkpoints must be geometric:K or list:n1,n2,…, got {spec:?}"
        ))),
    }
}

fn load_machine(args: &MachineArgs) -> CliResult<Machine> {
    let text = std::fs::read_to_string(&args.machine).map_err(|source| {
        CliError::Data(fsdim::Error::Io {
            path: args.machine.display().to_string(),
            source,
        })
    })?;
    let machine = parse_spec(&text)?;
    match &args.select {
        None => Ok(machine),
        Some(states) => {
            let mut ids = Vec::new();
            for name in states.split(',') {
                let name = name.trim();
                let id = machine.state_index(name).ok_or_else(|| {
                    CliError::Data(fsdim::Error::Invalid(format!(
                        "--select names unknown state {name:?}"
                    )))
                })?;
                ids.push(id);
            }
            Ok(machine.with_selecting(&ids))
        }
    }
}

fn load_bits(kind: &SourceKind, n: u64) -> CliResult<Bits> {
    Ok(BitSource::new(kind.clone())?.generate(n as usize)?)
}

fn estimator_options(args: &EstimatorArgs) -> CliResult<EstimatorOptions> {
    Ok(EstimatorOptions {
        schedule: parse_checkpoints(&args.checkpoints)?,
        cluster_tol: args.cluster_tol,
    })
}

fn write_bits(path: &PathBuf, bits: &Bits) -> CliResult<()> {
    let payload = if path.extension().is_some_and(|e| e == "bits") {
        bits.to_packed()
    } else {
        bits.to_ascii_string().into_bytes()
    };
    std::fs::write(path, payload).map_err(|source| {
        CliError::Data(fsdim::Error::Io {
            path: path.display().to_string(),
            source,
        })
    })
}

fn emit_json(config: &RunConfig, report: serde_json::Value) {
    let doc = json!({ "config": config, "report": report });
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).expect("report serializes")
    );
}

fn format_name(format: Format) -> &'static str {
    match format {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Text => "text",
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen { source, n, out } => {
            let kind = parse_source(&source.gen, &source.file)?;
            let bits = load_bits(&kind, n)?;
            match out {
                Some(path) => write_bits(&path, &bits)?,
                None => println!("{bits}"),
            }
            Ok(())
        }

        Command::Analyze {
            machine,
            source,
            n,
            checkpoints,
            output,
        } => {
            let m = load_machine(&machine)?;
            let config = RunConfig {
                command: "analyze",
                machine: Some(machine.machine.display().to_string()),
                select: machine.select.clone(),
                source: source.gen.clone().or_else(|| {
                    source
                        .file
                        .as_ref()
                        .map(|p| format!("file:{}", p.display()))
                }),
                n,
                checkpoints: Some(checkpoints.clone()),
                format: format_name(output.format),
                ..Default::default()
            };
            let analysis = ergodic_analysis(&m);
            let names = |set: &[usize]| -> Vec<&str> { set.iter().map(|&q| m.name(q)).collect() };
            if source.gen.is_none() && source.file.is_none() {
                let report = json!({
                    "states": m.names(),
                    "start": m.name(m.start()),
                    "edges": 2 * m.state_count(),
                    "classes": analysis.classes.iter().map(|c| names(c)).collect::<Vec<_>>(),
                    "ergodic_sets": analysis.ergodic_sets.iter().map(|c| names(c)).collect::<Vec<_>>(),
                    "irreducible": analysis.irreducible,
                });
                match output.format {
                    Format::Json => emit_json(&config, report),
                    Format::Text => {
                        println!("states: {}", m.names().join(" "));
                        println!("irreducible: {}", analysis.irreducible);
                        for set in &analysis.ergodic_sets {
                            println!("ergodic set: {}", names(set).join(" "));
                        }
                    }
                    Format::Csv => {
                        return Err(CliError::Usage(
                            "csv output needs a source to trace (--gen/--file with -n)".into(),
                        ))
                    }
                }
                return Ok(());
            }

            let n = n.ok_or_else(|| CliError::Usage("tracing a source requires -n".into()))?;
            let kind = parse_source(&source.gen, &source.file)?;
            let bits = load_bits(&kind, n)?;
            let schedule = parse_checkpoints(&checkpoints)?;
            let chain = induce_chain(&m);
            let trace = run_trace(&chain, &bits, &schedule.materialize(n))?;
            match output.format {
                Format::Json => print!("{}", trace_to_jsonl(&trace, &chain)),
                Format::Csv => {
                    println!("n,state,bit,next,count,frequency");
                    for snapshot in &trace.snapshots {
                        for (q, cells) in snapshot.counts.iter().enumerate() {
                            for (bit, &count) in cells.iter().enumerate() {
                                if count > 0 {
                                    println!(
                                        "{},{},{},{},{},{}",
                                        snapshot.n,
                                        chain.name(q),
                                        bit,
                                        chain.name(chain.step(q, bit as u8)),
                                        count,
                                        count as f64 / snapshot.n as f64
                                    );
                                }
                            }
                        }
                    }
                }
                Format::Text => {
                    for snapshot in &trace.snapshots {
                        let gap = fsdim::empirical::state_gap(
                            &chain,
                            &fsdim::empirical::CheckpointTrace {
                                checkpoints: vec![snapshot.n],
                                snapshots: vec![snapshot.clone()],
                                final_state_path_length: snapshot.n,
                            },
                        )?;
                        println!("n={} state_gap={gap:.6}", snapshot.n);
                    }
                }
            }
            Ok(())
        }

        Command::Dim {
            source,
            n,
            estimator,
            oracle,
            blocks,
            output,
        } => {
            if output.format == Format::Csv {
                return Err(CliError::Usage("dim reports have no csv form".into()));
            }
            let kind = parse_source(&source.gen, &source.file)?;
            let config = RunConfig {
                command: "dim",
                source: Some(kind.spec_string()),
                n: Some(n),
                family: Some(estimator.family.clone()),
                checkpoints: Some(estimator.checkpoints.clone()),
                cluster_tol: Some(estimator.cluster_tol),
                format: format_name(output.format),
                oracle,
                ..Default::default()
            };
            let bits = load_bits(&kind, n)?;
            let family = ChainFamily::parse(&estimator.family)?;
            let opts = estimator_options(&estimator)?;
            let report = family_dimension(&bits, n, &family, &opts)?;
            let mut value = serde_json::to_value(&report).expect("report serializes");
            if oracle {
                let (dim, strong) = block_entropy_dimension(&bits, n, blocks, &opts.schedule)?;
                value["block_entropy"] = json!({
                    "max_k": blocks,
                    "dim_est": dim,
                    "strong_dim_est": strong,
                    "family_gap": (report.dim_est - dim).abs(),
                });
            }
            match output.format {
                Format::Json => emit_json(&config, value),
                Format::Text => {
                    println!("dim_est: {:.6}", report.dim_est);
                    println!("strong_dim_est: {:.6}", report.strong_dim_est);
                    println!("witness_chain: {}", report.witness_chain);
                    println!("estimate_kind: {}", report.diagnostics.estimate_kind);
                    if let Some(be) = value.get("block_entropy") {
                        println!(
                            "block_entropy_dim_est: {:.6}",
                            be["dim_est"].as_f64().unwrap()
                        );
                    }
                }
                Format::Csv => unreachable!(),
            }
            Ok(())
        }

        Command::Select {
            machine,
            source,
            n,
            out_selected,
            out_complement,
            output,
        } => {
            if output.format == Format::Csv {
                return Err(CliError::Usage("select reports have no csv form".into()));
            }
            let m = load_machine(&machine)?;
            let kind = parse_source(&source.gen, &source.file)?;
            let config = RunConfig {
                command: "select",
                source: Some(kind.spec_string()),
                machine: Some(machine.machine.display().to_string()),
                select: machine.select.clone(),
                n: Some(n),
                format: format_name(output.format),
                ..Default::default()
            };
            let bits = load_bits(&kind, n)?;
            let split = apply_selector(&m, &bits)?;
            let lambda = lambda_of(&m).ok();
            if let Some(path) = &out_selected {
                write_bits(path, &split.selected)?;
            }
            if let Some(path) = &out_complement {
                write_bits(path, &split.complement)?;
            }
            let report = json!({
                "lambda": lambda,
                "selected_len": split.selected.len(),
                "complement_len": split.complement.len(),
                "selection_rate": split.positions.len() as f64 / n as f64,
            });
            match output.format {
                Format::Json => emit_json(&config, report),
                Format::Text => {
                    println!("selected_len: {}", split.selected.len());
                    println!("complement_len: {}", split.complement.len());
                    if let Some(lambda) = lambda {
                        println!("lambda: {lambda:.6}");
                    }
                }
                Format::Csv => unreachable!(),
            }
            Ok(())
        }

        Command::Agafonov {
            machine,
            source,
            n,
            estimator,
            tight_tol,
            epsilon,
            output,
        } => {
            if output.format == Format::Csv {
                return Err(CliError::Usage("agafonov reports have no csv form".into()));
            }
            let m = load_machine(&machine)?;
            let kind = parse_source(&source.gen, &source.file)?;
            let config = RunConfig {
                command: "agafonov",
                source: Some(kind.spec_string()),
                machine: Some(machine.machine.display().to_string()),
                select: machine.select.clone(),
                n: Some(n),
                family: Some(estimator.family.clone()),
                checkpoints: Some(estimator.checkpoints.clone()),
                cluster_tol: Some(estimator.cluster_tol),
                format: format_name(output.format),
                ..Default::default()
            };
            let bits = load_bits(&kind, n)?;
            let family = ChainFamily::parse(&estimator.family)?;
            let opts = estimator_options(&estimator)?;
            let cfg = VerdictConfig { tight_tol, epsilon };
            let report = agafonov_report(&m, &bits, n, &family, &opts, &cfg)?;
            let bound = selection_lower_bound(&m, &bits, n, &family, &opts)?;
            let mut value = serde_json::to_value(&report).expect("report serializes");
            value["lower_bound"] = serde_json::to_value(&bound).expect("bound serializes");
            match output.format {
                Format::Json => emit_json(&config, value),
                Format::Text => {
                    println!("lambda: {:.6}", report.lambda);
                    println!("dim_selected: {:.6}", report.dim_selected);
                    println!("strong_dim_complement: {:.6}", report.strong_dim_complement);
                    println!("dim_input: {:.6}", report.dim_input);
                    println!("lhs: {:.6}", report.lhs);
                    println!("verdict: {}", report.verdict);
                    println!(
                        "lower_bound: {:.6} measured: {:.6} state_gap: {:.6}",
                        bound.bound, bound.measured, bound.state_gap
                    );
                }
                Format::Csv => unreachable!(),
            }
            Ok(())
        }

        Command::Stationary {
            machine,
            method,
            oracle,
            output,
        } => {
            if output.format == Format::Csv {
                return Err(CliError::Usage(
                    "stationary reports have no csv form".into(),
                ));
            }
            let m = load_machine(&machine)?;
            let config = RunConfig {
                command: "stationary",
                machine: Some(machine.machine.display().to_string()),
                select: machine.select.clone(),
                format: format_name(output.format),
                oracle,
                ..Default::default()
            };
            let chain = induce_chain(&m);
            let solver = match method {
                Method::Linear => StationaryMethod::LinearSolve,
                Method::Power => StationaryMethod::PowerIteration,
            };
            let pi = chain.stationary(solver)?;
            let mut report = json!({ "states": m.names(), "stationary": pi });
            if oracle {
                let other = chain.stationary(match solver {
                    StationaryMethod::LinearSolve => StationaryMethod::PowerIteration,
                    StationaryMethod::PowerIteration => StationaryMethod::LinearSolve,
                })?;
                let l1: f64 = pi.iter().zip(&other).map(|(a, b)| (a - b).abs()).sum();
                report["oracle"] = json!({ "other_method": other, "l1_gap": l1 });
            }
            match output.format {
                Format::Json => emit_json(&config, report),
                Format::Text => {
                    for (q, v) in pi.iter().enumerate() {
                        println!("{}: {v:.12}", m.name(q));
                    }
                }
                Format::Csv => unreachable!(),
            }
            Ok(())
        }

        Command::Martingale {
            machine,
            source,
            n,
            checkpoints,
            oracle,
            output,
        } => {
            let m = load_machine(&machine)?;
            let kind = parse_source(&source.gen, &source.file)?;
            let config = RunConfig {
                command: "martingale",
                source: Some(kind.spec_string()),
                machine: Some(machine.machine.display().to_string()),
                n: Some(n),
                checkpoints: Some(checkpoints.clone()),
                format: format_name(output.format),
                oracle,
                ..Default::default()
            };
            let bits = load_bits(&kind, n)?;
            let schedule = parse_checkpoints(&checkpoints)?;
            let trace = run_martingale(&m, &bits)?;
            let points = schedule.materialize(n);
            let sampled: Vec<serde_json::Value> = points
                .iter()
                .map(|&p| json!({ "n": p, "log2_capital": trace.log2_capital[p as usize] }))
                .collect();
            match output.format {
                Format::Json => {
                    let mut report = json!({
                        "steps": n,
                        "final_log2_capital": trace.final_log2_capital(),
                        "checkpoints": sampled,
                    });
                    if oracle {
                        report["oracle"] = if n <= 1000 {
                            let bets = m.betting().expect("run_martingale checked betting");
                            let mut capital = 1.0f64;
                            let mut q = m.start();
                            let mut worst = 0.0f64;
                            for (i, bit) in bits.iter().enumerate() {
                                let stake = if bit == 0 { bets[q] } else { 1.0 - bets[q] };
                                capital *= 2.0 * stake;
                                q = m.step(q, bit);
                                worst =
                                    worst.max((trace.log2_capital[i + 1] - capital.log2()).abs());
                            }
                            json!({ "product_recursion_max_gap": worst })
                        } else {
                            json!({ "skipped": "product recursion overflows beyond n=1000" })
                        };
                    }
                    emit_json(&config, report)
                }
                Format::Csv => {
                    println!("n,log2_capital");
                    for &p in &points {
                        println!("{p},{}", trace.log2_capital[p as usize]);
                    }
                }
                Format::Text => {
                    println!("final_log2_capital: {:.6}", trace.final_log2_capital());
                    println!("rate: {:.6}", trace.final_log2_capital() / n as f64);
                }
            }
            Ok(())
        }
    }
}
