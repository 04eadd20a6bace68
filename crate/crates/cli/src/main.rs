//! `fpsu` — two-party fuzzy private set union simulator.
//!
//! Subcommands: `gen` writes a dataset file, `run` executes one protocol run
//! and reports the union plus a meter row, `verify` replays seeded random
//! instances against the brute-force oracle, `bench` sweeps a parameter and
//! emits meter rows. Identical invocations with identical `--seed` values
//! reproduce byte-identical transcripts. Set `FPSU_LOG=debug` for per-phase
//! logging.

use clap::{Args, Parser, Subcommand};
use fpsu_core::crypto::{SchemeDescriptor, SchemeKind, KAPPA_MIN_RESIDUOSITY, KAPPA_TOY};
use fpsu_core::error::Error;
use fpsu_core::fpsu::{FpsuConfig, Variant};
use fpsu_core::geometry::{parse_dataset_text, write_dataset_text};
use fpsu_core::harness::dataset::{gen_dataset, DatasetSpec, StructureClass};
use fpsu_core::harness::meter::{meter_report, MeterRow, CSV_HEADER};
use fpsu_core::harness::runner::run_protocol;
use fpsu_core::harness::verify::{verify_grid, GRID_LAMBDA};
use fpsu_core::pir::PirBackend;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "fpsu", about, version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file for a structure class.
    Gen(GenArgs),
    /// Run one protocol execution and print the resulting union.
    Run(RunArgs),
    /// Replay seeded random instances against the brute-force oracle.
    Verify(VerifyArgs),
    /// Sweep one parameter and emit meter rows.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    delta: u64,
    #[arg(long, default_value_t = 16)]
    w: u32,
    #[arg(long, default_value_t = GRID_LAMBDA)]
    lambda: u32,
    /// Security parameter in bits; 0 picks the scheme default.
    #[arg(long, default_value_t = 0)]
    kappa: u32,
    /// Union-layer scheme: lhe | mock-fhe.
    #[arg(long, default_value = "mock-fhe")]
    scheme: String,
    /// PIR backend: reference-lhe | insecure-clear.
    #[arg(long, default_value = "reference-lhe")]
    pir_backend: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl CommonArgs {
    fn scheme_descriptor(&self) -> Result<SchemeDescriptor, Error> {
        let mut desc = match self.scheme.as_str() {
            "mock-fhe" => SchemeDescriptor::mock_fhe(),
            "lhe" => SchemeDescriptor::lhe_residuosity(KAPPA_MIN_RESIDUOSITY),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown scheme {other:?} (expected lhe|mock-fhe)"
                )))
            }
        };
        if self.kappa != 0 {
            desc.kappa = self.kappa;
        }
        Ok(desc)
    }

    fn backend(&self) -> Result<PirBackend, Error> {
        match self.pir_backend.as_str() {
            "reference-lhe" => Ok(PirBackend::ReferenceLhe),
            "insecure-clear" => Ok(PirBackend::InsecureClear),
            other => Err(Error::InvalidParameter(format!(
                "unknown PIR backend {other:?} (expected reference-lhe|insecure-clear)"
            ))),
        }
    }

    fn config(&self, variant: Variant, exc_axis: usize) -> Result<FpsuConfig, Error> {
        let desc = self.scheme_descriptor()?;
        let mut cfg = FpsuConfig::new(variant, desc);
        cfg.kappa = if self.kappa != 0 {
            self.kappa
        } else {
            match cfg.scheme.kind {
                SchemeKind::MockFhe => KAPPA_TOY,
                SchemeKind::LheResiduosity => KAPPA_MIN_RESIDUOSITY,
            }
        };
        cfg.lambda = self.lambda;
        cfg.dim = self.d;
        cfg.delta = self.delta;
        cfg.width_bits = self.w;
        cfg.exc_axis = exc_axis;
        cfg.pir_backend = self.backend()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// null-graph | non-fuzzy-id | a-exclusive | d-stripable | random.
    #[arg(long)]
    class: String,
    /// Axis for the a-exclusive class.
    #[arg(long, default_value_t = 1)]
    axis: usize,
    /// Number of sender points placed inside the union of balls.
    #[arg(long, default_value_t = 0)]
    inside: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// ng | nf | lay | exc | str.
    #[arg(long)]
    variant: String,
    /// Axis for the exc variant.
    #[arg(long, default_value_t = 1)]
    axis: usize,
    /// In-ball sender points when generating (ignored with --input).
    #[arg(long, default_value_t = 1)]
    inside: usize,
    /// Read the dataset from a file instead of generating it.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write the meter CSV here; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Verify a single variant.
    #[arg(long, conflicts_with = "all")]
    variant: Option<String>,
    /// Verify every variant.
    #[arg(long)]
    all: bool,
    #[arg(long, default_value_t = 200)]
    trials: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    variant: String,
    /// Doubling sweep, e.g. n=8..64 or delta=1..4 or m=2..8.
    #[arg(long)]
    sweep: String,
    #[arg(long, default_value_t = 1)]
    inside: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(path: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(Error::from),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), Error> {
    let mut class = StructureClass::from_str(&args.class)?;
    if let StructureClass::AExclusive { .. } = class {
        class = StructureClass::AExclusive { axis: args.axis };
    }
    let spec = DatasetSpec {
        class,
        n: args.common.n,
        m: args.common.m,
        d: args.common.d,
        delta: args.common.delta,
        width_bits: args.common.w,
        inside_count: args.inside,
        seed: args.common.seed,
    };
    let (x, ys) = gen_dataset(&spec)?;
    emit(&args.out, &write_dataset_text(&x, &ys))
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let variant = Variant::from_str(&args.variant)?;
    let (x, ys) = match &args.input {
        Some(path) => parse_dataset_text(&std::fs::read_to_string(path)?)?,
        None => {
            let spec = DatasetSpec {
                class: StructureClass::for_variant(variant, args.axis),
                n: args.common.n,
                m: args.common.m,
                d: args.common.d,
                delta: args.common.delta,
                width_bits: args.common.w,
                inside_count: args.inside.min(args.common.m),
                seed: args.common.seed,
            };
            gen_dataset(&spec)?
        }
    };
    let mut cfg = args.common.config(variant, args.axis)?;
    cfg.dim = x.dim();
    cfg.delta = x.delta();
    cfg.width_bits = x.width_bits();

    log::info!("running {variant} on n={} m={}", x.len(), ys.len());
    let outcome = run_protocol(&x, &ys, &cfg, args.common.seed)?;

    println!("union ({} points):", outcome.union.len());
    for p in &outcome.union {
        println!("{p}");
    }
    let row = MeterRow::from_outcome(variant, x.len(), ys.len(), x.dim(), x.delta(), &outcome);
    let csv = meter_report(std::slice::from_ref(&row));
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv)?;
            println!("meter row written to {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<bool, Error> {
    let variants: Vec<Variant> = if args.all || args.variant.is_none() {
        Variant::ALL.to_vec()
    } else {
        vec![Variant::from_str(args.variant.as_ref().unwrap())?]
    };
    let desc = args.common.scheme_descriptor()?;
    let reuse = if desc.kind == SchemeKind::LheResiduosity {
        // one long-term key pair for the whole sweep
        let mut rng = fpsu_core::seed::derive_rng(args.common.seed, "verify/keys");
        Some(fpsu_core::crypto::e_setup(&desc, &mut rng)?)
    } else {
        None
    };

    let mut all_ok = true;
    for variant in variants {
        if variant.needs_fhe() && desc.kind != SchemeKind::MockFhe {
            println!("{variant}: skipped (needs the FHE contract, scheme is lhe)");
            continue;
        }
        let mut cfg = args.common.config(variant, 1)?;
        cfg.lambda = args.common.lambda;
        let max_n = match desc.kind {
            SchemeKind::LheResiduosity => 16,
            SchemeKind::MockFhe => usize::MAX,
        };
        let reports = verify_grid(
            variant,
            &cfg,
            args.trials,
            args.common.seed,
            max_n,
            reuse.as_ref(),
        )?;
        let passed = reports.iter().filter(|r| r.passed()).count();
        let ok = passed as u64 == args.trials;
        all_ok &= ok;
        println!(
            "{variant}: {passed}/{} trials match the oracle{}",
            args.trials,
            if ok { "" } else { "  <-- FAILURES" }
        );
        for r in reports.iter().filter(|r| !r.passed()).take(5) {
            println!(
                "  failed: n={} m={} d={} delta={} seed={} oracle={} leakage={} {:?}",
                r.params.n,
                r.params.m,
                r.params.d,
                r.params.delta,
                r.params.seed,
                r.oracle_match,
                r.leakage_match,
                r.violations
            );
        }
    }
    Ok(all_ok)
}

fn parse_sweep(s: &str) -> Result<(String, u64, u64), Error> {
    let bad = || Error::InvalidParameter(format!("sweep {s:?} is not of the form key=lo..hi"));
    let (key, range) = s.split_once('=').ok_or_else(bad)?;
    let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
    let lo: u64 = lo.parse().map_err(|_| bad())?;
    let hi: u64 = hi.parse().map_err(|_| bad())?;
    if lo == 0 || hi < lo {
        return Err(bad());
    }
    Ok((key.to_string(), lo, hi))
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let variant = Variant::from_str(&args.variant)?;
    let (key, lo, hi) = parse_sweep(&args.sweep)?;
    let mut rows = Vec::new();
    let mut value = lo;
    while value <= hi {
        let mut common = args.common.clone();
        match key.as_str() {
            "n" => common.n = value as usize,
            "m" => common.m = value as usize,
            "d" => common.d = value as usize,
            "delta" => common.delta = value,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "cannot sweep {other:?} (expected n|m|d|delta)"
                )))
            }
        }
        let spec = DatasetSpec {
            class: StructureClass::for_variant(variant, 1),
            n: common.n,
            m: common.m,
            d: common.d,
            delta: common.delta,
            width_bits: common.w,
            inside_count: args.inside.min(common.m),
            seed: common.seed,
        };
        let (x, ys) = gen_dataset(&spec)?;
        let cfg = common.config(variant, 1)?;
        let outcome = run_protocol(&x, &ys, &cfg, common.seed)?;
        rows.push(MeterRow::from_outcome(
            variant,
            common.n,
            common.m,
            common.d,
            common.delta,
            &outcome,
        ));
        log::info!("bench {key}={value}: {}", rows.last().unwrap().to_csv());
        value *= 2;
    }
    let _ = CSV_HEADER;
    emit(&args.out, &meter_report(&rows))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FPSU_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args).map(|_| true),
        Command::Run(args) => cmd_run(args).map(|_| true),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
