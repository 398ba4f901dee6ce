use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use zfvertex::config::{RunConfig, Suite};
use zfvertex::report::VerificationReport;
use zfvertex::rmatrix::{builtin_catalog, ModelRegistry};
use zfvertex::suite::{
    export_matrix, run_suite, run_suites, vertex_order_checks, ExportParams, ExportTarget,
};
use zfvertex::vertex::{CoefficientKind, InfinityCoupling, VertexEngine};
use zfvertex::Error;

#[derive(Parser)]
#[command(
    name = "zfvertex",
    version,
    about = "Vertex operators of exchange algebras and their identity checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suites and write a JSON report.
    Verify(RunArgs),
    /// Build or check vertex coefficients.
    #[command(subcommand)]
    Vertex(VertexCommand),
    /// Fock-space identity checks.
    #[command(subcommand)]
    Fock(VerifyOnly),
    /// Hierarchy charge checks.
    #[command(subcommand)]
    Hierarchy(VerifyOnly),
    /// Write an operator in the matrix dump format.
    Export(ExportArgs),
    /// List built-in models and their parameters.
    Models,
}

#[derive(Subcommand)]
enum VertexCommand {
    /// Emit one coefficient as a matrix dump.
    Build(BuildArgs),
    /// Covariance and characterization at one order, appended to a report.
    Verify {
        #[arg(long)]
        order: usize,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Subcommand)]
enum VerifyOnly {
    Verify(RunArgs),
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long = "N")]
    local_dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Two-site matrix dump for `--model constant`.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    kinf: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k_frt: Option<f64>,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    suites: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<u32>>,
    /// Run suites on separate threads.
    #[arg(long)]
    parallel: bool,
    /// Record wall-clock times (reports are then no longer reproducible).
    #[arg(long)]
    timings: bool,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    order: usize,
    #[arg(long, allow_hyphen_values = true)]
    kinf: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    ks: Vec<f64>,
    /// Coefficient of the inverse series instead.
    #[arg(long)]
    dual: bool,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    R,
    RSigma,
    TCoeff,
    SectorT,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    target: Target,
    #[arg(long, allow_hyphen_values = true)]
    k1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k2: Option<f64>,
    /// One-based one-line notation, e.g. 2,3,1.
    #[arg(long, value_delimiter = ',')]
    perm: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    ks: Vec<f64>,
    #[arg(long)]
    sector: Option<usize>,
    #[arg(long)]
    dual: bool,
}

fn apply_model(cfg: &mut RunConfig, m: &ModelArgs) {
    if let Some(v) = &m.model {
        cfg.model = v.clone();
    }
    if let Some(v) = m.local_dim {
        cfg.local_dim = v;
    }
    if let Some(v) = m.g {
        cfg.g = v;
    }
    if let Some(v) = m.q {
        cfg.q = v;
    }
    if let Some(v) = &m.file {
        cfg.file = Some(v.clone());
    }
}

fn build_config(args: &RunArgs) -> zfvertex::Result<RunConfig> {
    let mut cfg = RunConfig::load(args.model.config.as_deref())?;
    apply_model(&mut cfg, &args.model);
    if let Some(v) = &args.grid {
        cfg.grid = Some(v.clone());
    }
    if let Some(v) = args.kinf {
        cfg.k_inf = Some(v);
    }
    if let Some(v) = args.k_frt {
        cfg.k_frt = Some(v);
    }
    if let Some(v) = args.cap {
        cfg.sector_cap = v;
    }
    if let Some(v) = args.max_order {
        cfg.max_order = v;
    }
    if let Some(v) = args.tol {
        cfg.tolerance = v;
    }
    if let Some(v) = &args.suites {
        cfg.suites = v
            .iter()
            .map(|s| s.parse())
            .collect::<zfvertex::Result<_>>()?;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.samples {
        cfg.samples = v;
    }
    if let Some(v) = &args.degrees {
        cfg.degrees = v.clone();
    }
    cfg.parallel |= args.parallel;
    cfg.timings |= args.timings;
    if let Some(v) = &args.out {
        cfg.out = Some(v.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_or_print(path: Option<&Path>, text: &str) -> zfvertex::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit(report: &VerificationReport, out: Option<&Path>) -> zfvertex::Result<ExitCode> {
    write_or_print(out, &report.to_json()?)?;
    eprintln!(
        "{} checks, {} passed, {} failed",
        report.summary.total, report.summary.passed, report.summary.failed
    );
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn single_suite(args: &RunArgs, suite: Suite) -> zfvertex::Result<ExitCode> {
    let mut cfg = build_config(args)?;
    cfg.suites = vec![suite];
    let model = cfg.build_model(&ModelRegistry::new())?;
    let records = run_suite(&cfg, &model, suite);
    emit(
        &VerificationReport::new(cfg.clone(), records),
        cfg.out.as_deref(),
    )
}

fn run(cli: Cli) -> zfvertex::Result<ExitCode> {
    match cli.command {
        Command::Verify(args) => {
            let cfg = build_config(&args)?;
            emit(&run_suites(&cfg)?, cfg.out.as_deref())
        }
        Command::Vertex(VertexCommand::Build(b)) => {
            if b.ks.len() != b.order {
                return Err(Error::Config(format!(
                    "order {} needs {} rapidities, got {}",
                    b.order,
                    b.order,
                    b.ks.len()
                )));
            }
            let mut cfg = RunConfig::load(b.model.config.as_deref())?;
            apply_model(&mut cfg, &b.model);
            let model = cfg.build_model(&ModelRegistry::new())?;
            let max = b.max_order.unwrap_or(cfg.max_order);
            let engine = VertexEngine::with_options(model, max, InfinityCoupling::Model);
            let kind = if b.dual {
                CoefficientKind::Dual
            } else {
                CoefficientKind::Direct
            };
            let coeff = engine.coefficient(kind, b.kinf, &b.ks)?;
            write_or_print(b.out.as_deref(), &coeff.op.to_dump())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Vertex(VertexCommand::Verify { order, run }) => {
            let mut cfg = build_config(&run)?;
            cfg.suites = vec![Suite::Vertex];
            let model = cfg.build_model(&ModelRegistry::new())?;
            let records = vertex_order_checks(&cfg, &model, order);
            let report = match cfg.out.as_deref() {
                Some(p) if p.exists() => {
                    let mut existing = VerificationReport::from_json(&std::fs::read_to_string(p)?)?;
                    existing.append(records);
                    existing
                }
                _ => VerificationReport::new(cfg.clone(), records),
            };
            emit(&report, cfg.out.as_deref())
        }
        Command::Fock(VerifyOnly::Verify(args)) => single_suite(&args, Suite::Fock),
        Command::Hierarchy(VerifyOnly::Verify(args)) => single_suite(&args, Suite::Hierarchy),
        Command::Export(e) => {
            let cfg = build_config(&e.run)?;
            let target = match e.target {
                Target::R => ExportTarget::R,
                Target::RSigma => ExportTarget::RSigma,
                Target::TCoeff => ExportTarget::TCoeff,
                Target::SectorT => ExportTarget::SectorT,
            };
            let params = ExportParams {
                k1: e.k1,
                k2: e.k2,
                perm: e.perm.clone(),
                ks: e.ks.clone(),
                k_inf: cfg.k_inf,
                sector: e.sector,
                dual: e.dual,
            };
            let op = export_matrix(&cfg, target, &params)?;
            write_or_print(cfg.out.as_deref(), &op.to_dump())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Models => {
            for m in builtin_catalog() {
                let params: Vec<String> =
                    m.params.iter().map(|(k, d)| format!("{k}: {d}")).collect();
                println!(
                    "{:<12} {:<15} {}",
                    m.name,
                    m.convention.to_string(),
                    params.join("; ")
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
