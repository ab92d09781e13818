//! Command-line surface. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code:
//!
//! * 0: success
//! * 1: verification failed (a check or equivalence test did not hold)
//! * 2: input error (bad flags, unreadable or malformed documents)
//! * 3: internal invariant failure

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::{self, AgreementMetrics, Fig3Config, PlantKind, PlantSpec};
use crate::ctmc::{self, ChainMode};
use crate::error::Error;
use crate::io::{self, LumpingDocument, PartitionDocument};
use crate::lump::{check_lumpability, max_lumpability, LumpCheckError};
use crate::partition::{Mode, DEFAULT_TOL};
use crate::quotient::{reduce, reduction_report, ReductionReport};
use crate::relax::{self, Elimination, SignReport};
use crate::sampling::derive_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lumpnet", version, about = "Exact neuron merging for ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the maximal lumping and write the reduced network.
    Reduce(ReduceArgs),
    /// Verify a lumping document against a network.
    Check(CheckArgs),
    /// Evaluate a network on one input valuation.
    Eval(EvalArgs),
    /// Compare two networks on seeded random inputs.
    Verify(VerifyArgs),
    /// Eliminate neurons that are positive combinations of others.
    Relax(RelaxArgs),
    /// Lumping for Markov chains and weighted graphs.
    #[command(subcommand)]
    Ctmc(CtmcCommand),
    /// Generate a random network with planted structure.
    Gen(GenArgs),
    /// Benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Args)]
struct ReduceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "proportional")]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Record wall-clock times in the report (makes it non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    input: PathBuf,
    /// A lumping document, or a `reduce` report containing one.
    #[arg(long)]
    lumping: PathBuf,
    /// Defaults to the tolerance recorded in the lumping.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    /// Valuation document: a JSON array of numbers.
    #[arg(long)]
    x: PathBuf,
    /// Write the output valuation here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Debug, Args)]
struct RelaxArgs {
    #[arg(long)]
    input: PathBuf,
    /// Hidden layer, 1-based like the rest of the layer numbering.
    #[arg(long)]
    layer: usize,
    /// Largest donor set considered.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1000)]
    sign_samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum CtmcCommand {
    /// Compute the maximal lumping and write the quotient.
    Reduce(CtmcReduceArgs),
    /// Verify a partition document against a chain.
    Check(CtmcCheckArgs),
}

#[derive(Debug, Args)]
struct CtmcReduceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "proportional")]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Quotient chain document.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Partition document.
    #[arg(long)]
    partition: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CtmcCheckArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum GenKind {
    Proportional,
    Combo,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Layer widths including input and output, e.g. 16,128,10.
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    layer: usize,
    #[arg(long, value_enum, default_value = "proportional")]
    kind: GenKind,
    #[arg(long, default_value_t = 0)]
    count: usize,
    /// Donors per planted neuron (combo only).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Positive range for scales or coefficients.
    #[arg(long, default_value_t = 0.1)]
    lo: f64,
    #[arg(long, default_value_t = 10.0)]
    hi: f64,
    /// Draw combo coefficients from multiples of 1/2.
    #[arg(long)]
    grid: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Ground-truth document.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Agreement of combo-pruned networks against the original, per donor
    /// count and planted fraction.
    Fig3(Fig3Args),
}

#[derive(Debug, Args)]
struct Fig3Args {
    #[arg(long, value_delimiter = ',', default_value = "16,128,10")]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    layer: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5")]
    fractions: Vec<f64>,
    /// Number of seeds, derived from `--seed`.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0.5)]
    coeff_lo: f64,
    #[arg(long, default_value_t = 1.5)]
    coeff_hi: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Document written by `reduce --report`; `check --lumping` accepts it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceReportDocument {
    pub report: ReductionReport,
    pub lumping: LumpingDocument,
}

/// Document written by `relax --report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxReportDocument {
    pub eliminations: Vec<Elimination>,
    pub sign_reports: Vec<SignReport>,
}

/// Document written by `ctmc reduce --partition`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReportDocument {
    pub mode: Mode,
    pub tol: f64,
    pub states_before: usize,
    pub states_after: usize,
    pub partition: PartitionDocument,
}

enum Failure {
    Verify(String),
    Input(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Internal(m) => Failure::Internal(m),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code. Diagnostics go to stderr, results to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Verify(m)) => {
            eprintln!("verification failed: {m}");
            EXIT_VERIFY_FAILED
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            EXIT_INPUT
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            EXIT_INTERNAL
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Reduce(a) => cmd_reduce(a),
        Command::Check(a) => cmd_check(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Relax(a) => cmd_relax(a),
        Command::Ctmc(CtmcCommand::Reduce(a)) => cmd_ctmc_reduce(a),
        Command::Ctmc(CtmcCommand::Check(a)) => cmd_ctmc_check(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(BenchCommand::Fig3(a)) => cmd_fig3(a),
    }
}

fn check_tol(tol: f64) -> Outcome {
    if tol.is_finite() && tol >= 0.0 {
        Ok(())
    } else {
        Err(Failure::Input(format!("tolerance {tol} must be finite and >= 0")))
    }
}

fn write(path: &Path, text: &str) -> Outcome {
    io::write_text(path, text).map_err(Failure::from)
}

fn cmd_reduce(a: ReduceArgs) -> Outcome {
    check_tol(a.tol)?;
    let net = io::load_network(&a.input)?;
    let t0 = Instant::now();
    let lump = max_lumpability(&net, a.mode, a.tol);
    let detection = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let reduced = reduce(&net, &lump).map_err(|e| match e {
        Error::InvalidLumping(m) => Failure::Internal(format!("computed lumping rejected: {m}")),
        other => other.into(),
    })?;
    let construction = t1.elapsed().as_secs_f64();
    let mut report = reduction_report(&net, &reduced, &lump);
    if a.timings {
        report.detection_seconds = Some(detection);
        report.construction_seconds = Some(construction);
    }
    write(&a.output, &io::network_to_json(&reduced))?;
    if let Some(path) = &a.report {
        let doc = ReduceReportDocument { report: report.clone(), lumping: LumpingDocument::from(&lump) };
        write(path, &io::to_json(&doc))?;
    }
    println!(
        "widths {:?} -> {:?}; {} neuron(s) merged",
        report.widths_before, report.widths_after, report.neurons_removed
    );
    Ok(())
}

fn load_lumping_doc(path: &Path) -> Result<LumpingDocument, Failure> {
    let text = io::read_text(path)?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let inner = match value.get("lumping") {
        Some(l) => l.clone(),
        None => value,
    };
    serde_json::from_value(inner)
        .map_err(|e| Failure::Input(format!("{}: not a lumping document: {e}", path.display())))
}

fn cmd_check(a: CheckArgs) -> Outcome {
    let net = io::load_network(&a.input)?;
    let doc = load_lumping_doc(&a.lumping)?;
    let lump = doc.to_lumping()?;
    let tol = a.tol.unwrap_or(lump.tol);
    check_tol(tol)?;
    match check_lumpability(&net, &lump, tol) {
        Ok(()) => {
            println!("ok: lumping is valid ({} neuron(s) merged)", lump.merged());
            Ok(())
        }
        Err(LumpCheckError::Shape(m)) => {
            Err(Failure::Input(format!("lumping does not fit the network: {m}")))
        }
        Err(e @ LumpCheckError::Violations(_)) => Err(Failure::Verify(e.to_string())),
    }
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let net = io::load_network(&a.input)?;
    let x = io::load_valuation(&a.x)?;
    let y = crate::network::forward(&net, &x)?;
    let text = io::valuation_to_json(&y);
    match &a.output {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_verify(a: VerifyArgs) -> Outcome {
    check_tol(a.tol)?;
    let na = io::load_network(&a.a)?;
    let nb = io::load_network(&a.b)?;
    if na.input_width() != nb.input_width() || na.output_width() != nb.output_width() {
        return Err(Failure::Input(format!(
            "networks differ in shape: {} -> {} vs {} -> {}",
            na.input_width(),
            na.output_width(),
            nb.input_width(),
            nb.output_width()
        )));
    }
    let AgreementMetrics { max_deviation, agreement, .. } = bench::agreement(&na, &nb, a.samples, a.seed)?;
    println!("max_deviation {max_deviation}");
    println!("argmax_agreement {agreement}");
    if max_deviation <= a.tol {
        Ok(())
    } else {
        Err(Failure::Verify(format!("max deviation {max_deviation} exceeds {}", a.tol)))
    }
}

fn cmd_relax(a: RelaxArgs) -> Outcome {
    check_tol(a.tol)?;
    let net = io::load_network(&a.input)?;
    let elims = relax::find_linear_dependencies(&net, a.layer, a.k, a.tol)?;
    let pruned = relax::eliminate(&net, &elims)?;
    let sign_reports = elims
        .iter()
        .enumerate()
        .map(|(i, e)| relax::sign_condition_rate(&net, e, a.sign_samples, derive_seed(a.seed, i as u64)))
        .collect::<crate::error::Result<Vec<_>>>()?;
    write(&a.output, &io::network_to_json(&pruned))?;
    if let Some(path) = &a.report {
        let doc = RelaxReportDocument { eliminations: elims.clone(), sign_reports: sign_reports.clone() };
        write(path, &io::to_json(&doc))?;
    }
    println!("{} neuron(s) eliminated from layer {}", elims.len(), a.layer);
    for (e, s) in elims.iter().zip(&sign_reports) {
        let donors: Vec<String> = e.donors.iter().map(|(v, c)| format!("{c}*{v}")).collect();
        println!("  {} = {}  (sign condition {:.4})", e.neuron, donors.join(" + "), s.fraction);
    }
    Ok(())
}

fn cmd_ctmc_reduce(a: CtmcReduceArgs) -> Outcome {
    check_tol(a.tol)?;
    let chain = io::parse_chain(&io::read_text(&a.input)?)?;
    if chain.mode() == ChainMode::Ctmc {
        if let Err(vs) = ctmc::validate_ctmc(&chain) {
            return Err(Failure::Input(format!("invalid chain: {vs:?}")));
        }
    }
    let part = ctmc::max_prop_exact(&chain, a.mode, a.tol)?;
    let quotient = ctmc::quotient_ctmc(&chain, &part, a.tol).map_err(|e| match e {
        Error::InvalidChain(m) => Failure::Internal(format!("computed partition rejected: {m}")),
        other => other.into(),
    })?;
    if let Some(p) = &a.output {
        write(p, &io::chain_to_json(&quotient))?;
    }
    if let Some(p) = &a.partition {
        let doc = ChainReportDocument {
            mode: a.mode,
            tol: a.tol,
            states_before: chain.len(),
            states_after: part.len(),
            partition: PartitionDocument::from(&part),
        };
        write(p, &io::to_json(&doc))?;
    }
    println!("{} state(s) -> {} block(s)", chain.len(), part.len());
    Ok(())
}

fn load_partition_doc(path: &Path) -> Result<PartitionDocument, Failure> {
    let text = io::read_text(path)?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let inner = match value.get("partition") {
        Some(p) => p.clone(),
        None => value,
    };
    serde_json::from_value(inner)
        .map_err(|e| Failure::Input(format!("{}: not a partition document: {e}", path.display())))
}

fn cmd_ctmc_check(a: CtmcCheckArgs) -> Outcome {
    check_tol(a.tol)?;
    let chain = io::parse_chain(&io::read_text(&a.input)?)?;
    let part = load_partition_doc(&a.partition)?.to_partition()?;
    match ctmc::check_prop_exact(&chain, &part, a.tol) {
        Ok(()) => {
            println!("ok: partition is proportionally exact ({} block(s))", part.len());
            Ok(())
        }
        Err(ctmc::ChainCheckError::Shape(m)) => {
            Err(Failure::Input(format!("partition does not fit the chain: {m}")))
        }
        Err(e) => Err(Failure::Verify(e.to_string())),
    }
}

fn cmd_gen(a: GenArgs) -> Outcome {
    let kind = match a.kind {
        GenKind::Proportional => PlantKind::Proportional { count: a.count, scale: (a.lo, a.hi) },
        GenKind::Combo => PlantKind::Combo { k: a.k, count: a.count, coeff: (a.lo, a.hi), grid: a.grid },
    };
    let spec = PlantSpec { widths: a.widths, layer: a.layer, kind, seed: a.seed };
    let (net, truth) = bench::gen_planted(&spec)?;
    write(&a.output, &io::network_to_json(&net))?;
    if let Some(p) = &a.truth {
        write(p, &io::to_json(&truth))?;
    }
    Ok(())
}

fn cmd_fig3(a: Fig3Args) -> Outcome {
    let cfg = Fig3Config {
        widths: a.widths,
        layer: a.layer,
        ks: a.ks,
        fractions: a.fractions,
        seeds: (0..a.seeds as u64).map(|i| derive_seed(a.seed, i)).collect(),
        samples: a.samples,
        coeff: (a.coeff_lo, a.coeff_hi),
    };
    let csv = bench::fig3_csv(&bench::fig3_experiment(&cfg)?);
    match &a.output {
        Some(p) => write(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
