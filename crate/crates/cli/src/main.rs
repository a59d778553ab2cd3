use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use mitigator_core::decomposer::DecomposeOptions;
use mitigator_core::fixtures::Fixture;
use mitigator_core::harness::{
    error_kind, plot_csv, plot_spec, run_certify, run_decompose, run_reproduce, run_tomography, AnyReport,
    CertifyOptions, Detector, ElementInput, Preparation, ReproduceOptions, ReproduceTarget,
};
use mitigator_core::mitigator::MitigationParameters;
use mitigator_core::qops::{BellState, LocalUnitary, OutcomeString};
use mitigator_core::tomography::{Povm, PovmElement, ProbeScheme};
use mitigator_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "mitigator", version, about = "Detector tomography, POVM decomposition and readout mitigation")]
struct Cli {
    /// Re-validate an existing report file and exit.
    #[arg(long, value_name = "FILE")]
    check: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate probe measurements of a POVM and reconstruct it.
    Tomography(TomographyArgs),
    /// Split a POVM element into a rotated projector plus residual.
    Decompose(DecomposeArgs),
    /// Witness-based entanglement certification of a noisy Bell state.
    Certify(CertifyArgs),
    /// Compare the pipeline against the published device numbers.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
struct TomographyArgs {
    #[arg(long)]
    povm: PathBuf,
    #[arg(long, default_value = "pauli6")]
    scheme: String,
    #[arg(long, default_value_t = 8192)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Fixture file or bare element JSON.
    #[arg(long)]
    element: PathBuf,
    #[arg(long)]
    outcome: Option<String>,
    /// Complete POVM to decompose under one shared V.
    #[arg(long)]
    full: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StateArg {
    #[value(name = "phi_plus")]
    PhiPlus,
    #[value(name = "psi_minus")]
    PsiMinus,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PrepArg {
    Direct,
    Circuit,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long, value_enum)]
    state: StateArg,
    /// Noise parameter r of the Werner-type state.
    #[arg(long)]
    p: f64,
    /// `ideal`, a fixture id, or a path to an outcome-00 element.
    #[arg(long, default_value = "ideal")]
    detector: String,
    #[arg(long)]
    mitigate: bool,
    /// Parameters fixture (id or path) used with `--mitigate`.
    #[arg(long, default_value = "sydney_params")]
    params: String,
    #[arg(long, value_enum, default_value = "direct")]
    preparation: PrepArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8192)]
    shots: u64,
    #[arg(long, default_value_t = 15)]
    reps: usize,
    /// Report path; the r-sweep is written next to it as `.csv` plus `.plot.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(long)]
    what: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8192)]
    shots: u64,
    #[arg(long, default_value_t = 15)]
    reps: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_report(path: &Path, report: &AnyReport) -> Result<()> {
    report.validate()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(report)?)?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Path that exists on disk, otherwise a fixture id.
fn load_fixture(arg: &str) -> Result<Fixture> {
    let path = Path::new(arg);
    if path.exists() {
        Fixture::from_path(path)
    } else if arg.ends_with(".json") {
        Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{arg}: no such file"))))
    } else {
        Fixture::load(arg)
    }
}

fn tomography(a: TomographyArgs) -> Result<()> {
    let truth: Povm = serde_json::from_str(&read(&a.povm)?)?;
    let scheme: ProbeScheme = a.scheme.parse()?;
    let report = run_tomography(&truth, scheme, a.shots, a.seed)?;
    println!("max element distance {:.6}", report.max_distance);
    write_report(&a.out, &AnyReport::Tomography(report))
}

fn decompose(a: DecomposeArgs) -> Result<()> {
    let mut input = ElementInput::from_json(&read(&a.element)?)?;
    if let Some(bits) = &a.outcome {
        let outcome: OutcomeString = bits.parse()?;
        if outcome != input.element.outcome {
            input = input.with_outcome(outcome)?;
        }
    }
    let full = match &a.full {
        Some(p) => Some(serde_json::from_str::<Povm>(&read(p)?)?),
        None => None,
    };
    let mut opts = DecomposeOptions::with_seed(a.seed);
    if let Some(s) = a.starts {
        opts.search.starts = s.max(1);
    }
    let report = run_decompose(&input, full.as_ref(), &opts)?;
    let d = &report.search.decomposition;
    println!("epsilon   {:.6}", d.epsilon);
    println!("delta     {:.6}", d.delta);
    println!("objective {:.6}", d.objective);
    println!("q_c       {:.6}", d.q_c);
    println!("bound     {:.6}", report.error_bound);
    if let Some(ct) = &report.crosstalk {
        println!("crosstalk {}", matches!(ct.verdict, mitigator_core::decomposer::CrosstalkVerdict::Crosstalk));
    }
    println!("error rate raw {:.6}  normalized {:.6}", report.error_rate_raw, report.error_rate_normalized);
    write_report(&a.out, &AnyReport::Decompose(report))
}

fn detector(arg: &str) -> Result<Detector> {
    if arg == "ideal" {
        return Ok(Detector::Ideal);
    }
    let path = Path::new(arg);
    if path.exists() {
        let text = read(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("kind").is_some() {
            return Detector::from_fixture(&serde_json::from_value(value)?);
        }
        let element: PovmElement = serde_json::from_value(value)?;
        return Ok(Detector::Element { id: None, element, completion_flip: Detector::DEFAULT_FLIP });
    }
    Detector::from_fixture(&load_fixture(arg)?)
}

fn certify(a: CertifyArgs) -> Result<()> {
    let detector = detector(&a.detector)?;
    let mitigation = if !a.mitigate {
        None
    } else if matches!(detector, Detector::Ideal) {
        Some(MitigationParameters::new(1.0, 0.0, 0.0, LocalUnitary::identity(2))?)
    } else {
        let f = load_fixture(&a.params)?;
        Some(MitigationParameters::new(
            f.parameter("trace_pi")?,
            f.parameter("epsilon")?,
            f.parameter("eta")?,
            LocalUnitary::identity(2),
        )?)
    };
    let opts = CertifyOptions {
        state: match a.state {
            StateArg::PhiPlus => BellState::PhiPlus,
            StateArg::PsiMinus => BellState::PsiMinus,
        },
        r: a.p,
        detector,
        mitigation,
        preparation: match a.preparation {
            PrepArg::Direct => Preparation::Direct,
            PrepArg::Circuit => Preparation::Circuit,
        },
        seed: a.seed,
        shots: a.shots,
        reps: a.reps,
    };
    let report = run_certify(&opts)?;
    let row = &report.rows[0];
    println!("{}: p0_formula {:.6}  p_e {:.6} ± {:.6}  raw {:?}", row.state_id, row.p0_formula, row.p_e, row.p_e_std, row.verdict_raw.verdict);
    if let (Some(p0), Some(v)) = (row.p0_eta, &row.verdict_mitigated) {
        println!("mitigated p0_eta {:.6}  {:?}", p0, v.verdict);
    }
    write_report(&a.out, &AnyReport::Certify(report))?;

    let csv_path = a.out.with_extension("csv");
    fs::write(&csv_path, plot_csv(&opts)?)?;
    let name = csv_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    fs::write(a.out.with_extension("plot.json"), serde_json::to_string_pretty(&plot_spec(&name, &opts))?)?;
    Ok(())
}

fn reproduce(a: ReproduceArgs) -> Result<()> {
    let what: ReproduceTarget = a.what.parse()?;
    let opts = ReproduceOptions { seed: a.seed, shots: a.shots, reps: a.reps.max(1), ..Default::default() };
    let report = run_reproduce(what, &opts)?;
    for row in &report.rows {
        println!("{row}");
    }
    let failed = report.failures().count();
    println!("{} rows, {} outside tolerance", report.rows.len(), failed);
    fs::create_dir_all(&a.out)?;
    write_report(&a.out.join(format!("{what}.json")), &AnyReport::Reproduce(report))
}

fn check(path: &Path) -> Result<()> {
    let report = AnyReport::check_json(&read(path)?)?;
    let kind = match report {
        AnyReport::Tomography(_) => "tomography",
        AnyReport::Decompose(_) => "decompose",
        AnyReport::Certify(_) => "certify",
        AnyReport::Reproduce(_) => "reproduce",
    };
    println!("{}: valid {kind} report", path.display());
    Ok(())
}

fn fail(kind: &str, code: u8, message: String) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("usage", 4, e.to_string());
        }
    };
    let result = match (cli.check, cli.command) {
        (Some(path), _) => check(&path),
        (None, Some(Command::Tomography(a))) => tomography(a),
        (None, Some(Command::Decompose(a))) => decompose(a),
        (None, Some(Command::Certify(a))) => certify(a),
        (None, Some(Command::Reproduce(a))) => reproduce(a),
        (None, None) => Err(Error::Unsupported("a subcommand or --check is required".into())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = error_kind(&e);
            fail(kind, code as u8, e.to_string())
        }
    }
}
