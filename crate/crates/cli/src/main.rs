use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anosov_cli::commands::Context;
use anosov_cli::config::{ReportKind, RunConfig};
use anosov_cli::error::CliError;
use clap::{Parser, Subcommand};

/// Output directory override; the only setting read from the environment.
const OUT_ENV: &str = "ANOSOV_OUT";

#[derive(Parser)]
#[command(
    name = "anosov",
    version,
    about = "Equilibrium states and rigidity diagnostics for Anosov maps of the 2-torus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and the environment.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    #[arg(long, global = true)]
    period_override: Option<u32>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Cone-field certification.
    Verify,
    /// Conjugacy to the linear model.
    Conjugacy,
    /// Pressure, ensemble and entropy.
    Equilibrium,
    /// Lyapunov exponents, entropy and dimensions.
    Exponents,
    /// Pointwise dimension survey.
    Dimension,
    /// Leafwise measure and product-structure checks.
    Leaf,
    /// Centralizer, commutant and affine straightening.
    Rigidity,
    /// Entropy spectrum of the powers.
    Spectrum,
    /// All reports listed in the config, aggregated.
    Report,
}

impl Command {
    fn kind(self) -> Option<ReportKind> {
        Some(match self {
            Command::Verify => ReportKind::Verify,
            Command::Conjugacy => ReportKind::Conjugacy,
            Command::Equilibrium => ReportKind::Equilibrium,
            Command::Exponents => ReportKind::Exponents,
            Command::Dimension => ReportKind::Dimension,
            Command::Leaf => ReportKind::Leaf,
            Command::Rigidity => ReportKind::Rigidity,
            Command::Spectrum => ReportKind::Spectrum,
            Command::Report => return None,
        })
    }
}

fn setup(cli: &Cli) -> Result<Context, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Validation {
        pointer: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed_override {
        cfg.seed = s;
    }
    if let Some(p) = cli.period_override {
        cfg.numerics.period = p;
        cfg.validate()?;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Validation {
                pointer: "--workers".into(),
                message: "must be positive".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Validation {
                pointer: "--workers".into(),
                message: e.to_string(),
            })?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Context::new(cfg, out)
}

fn run(cli: &Cli, ctx: &Context) -> Result<(), CliError> {
    match cli.command.kind() {
        Some(kind) => {
            let (value, summary) = ctx.run(kind)?;
            ctx.write_json(&format!("{}.json", kind.name()), &value)?;
            println!("{summary}");
            Ok(())
        }
        None => {
            let mut aggregate: BTreeMap<&str, serde_json::Value> = BTreeMap::new();
            let mut first_error = None;
            for &kind in &ctx.cfg.reports {
                match ctx.run(kind) {
                    Ok((value, summary)) => {
                        ctx.write_json(&format!("{}.json", kind.name()), &value)?;
                        println!("{summary}");
                        aggregate.insert(kind.name(), value);
                    }
                    Err(e) => {
                        eprintln!("{e}");
                        aggregate.insert(kind.name(), serde_json::json!({ "error": e.record() }));
                        first_error.get_or_insert(e);
                    }
                }
            }
            ctx.write_json("report.json", &aggregate)?;
            println!(
                "report: {} sections written to {}",
                aggregate.len(),
                ctx.out.join("report.json").display()
            );
            first_error.map_or(Ok(()), Err)
        }
    }
}

fn fail(e: CliError, out: Option<&Context>) -> ExitCode {
    let record = e.record();
    let text =
        serde_json::to_string(&serde_json::json!({ "error": record })).expect("records serialize");
    eprintln!("{text}");
    if let Some(ctx) = out {
        let _ = ctx.write_json("error.json", &serde_json::json!({ "error": record }));
    }
    ExitCode::from(record.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match setup(&cli) {
        Ok(c) => c,
        Err(e) => return fail(e, None),
    };
    match run(&cli, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e, Some(&ctx)),
    }
}
