use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use infwillmore::distance::ReferenceSurface;
use infwillmore::el::{three_value_report, ThreeValueOptions};
use infwillmore::functionals::{EnergyParams, Exponent};
use infwillmore::mesh::{build_icosphere, rescale_to_area, validate, ValidationReport};
use infwillmore::obj::{load_obj, save_obj};
use infwillmore::weights::WeightSpec;

mod config;
mod run;

use config::RunConfig;

/// Environment variable fixing the size of the worker pool.
const THREADS_ENV: &str = "INFWILLMORE_THREADS";

#[derive(Parser)]
#[command(
    name = "infwillmore",
    version,
    about = "Weighted L^p to L^inf mean-curvature minimisation on sphere meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an icosphere mesh.
    Mesh(MeshArgs),
    /// Run the continuation ladder described by a TOML config.
    Run(RunArgs),
    /// Evaluate the Euler-Lagrange system on a mesh and print the report as JSON.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct MeshArgs {
    /// Subdivision level.
    #[arg(long, default_value_t = 3)]
    icosphere: u32,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Rescale to this total area after perturbation.
    #[arg(long)]
    area: Option<f64>,
    /// Radial noise amplitude.
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated exponents, overriding `[schedule] p_list`.
    #[arg(long, value_delimiter = ',')]
    p_list: Option<Vec<f64>>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    mesh: PathBuf,
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Target area; defaults to the area of the mesh.
    #[arg(long)]
    area: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    reference: Option<PathBuf>,
    /// `constant:C`, `radial:X,Y,Z:C` or `axis:X,Y,Z:C`.
    #[arg(long, default_value = "constant:1")]
    weight: String,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 0.10)]
    delta_c: f64,
}

fn parse_weight(text: &str) -> Result<WeightSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("bad number `{s}` in weight"))
    };
    let vec3 = |s: &str| -> Result<[f64; 3]> {
        let v = s.split(',').map(num).collect::<Result<Vec<_>>>()?;
        v.try_into()
            .map_err(|_| anyhow!("weight vector needs 3 components"))
    };
    let spec = match parts.as_slice() {
        ["constant", c] => WeightSpec::Constant { c: num(c)? },
        ["radial", center, c] => WeightSpec::RadialQuadratic {
            center: vec3(center)?,
            c: num(c)?,
        },
        ["axis", axis, c] => WeightSpec::AxisQuadratic {
            axis: vec3(axis)?,
            c: num(c)?,
        },
        _ => bail!("unrecognised weight `{text}`"),
    };
    spec.check()?;
    Ok(spec)
}

fn summarize(report: &ValidationReport) -> String {
    let shown: Vec<String> = report
        .issues
        .iter()
        .take(5)
        .map(|i| format!("{i:?}"))
        .collect();
    let more = report.issues.len().saturating_sub(shown.len());
    let tail = if more > 0 {
        format!(" and {more} more")
    } else {
        String::new()
    };
    format!("{}{tail}", shown.join(", "))
}

fn cmd_mesh(args: &MeshArgs) -> Result<ExitCode> {
    let mut mesh = build_icosphere(args.icosphere, args.radius)?;
    if args.perturb > 0.0 {
        mesh = mesh.perturb_radial(args.perturb, args.seed);
    }
    if let Some(area) = args.area {
        mesh = rescale_to_area(&mesh, area)?;
    }
    let report = validate(&mesh);
    if !report.passed {
        bail!("generated mesh is invalid: {}", summarize(&report));
    }
    save_obj(&mesh, &args.output)?;
    println!(
        "V={} E={} F={} chi={} area={}",
        report.vertices,
        report.edges,
        report.faces,
        report.euler_characteristic,
        mesh.total_area()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(sigma) = args.sigma {
        cfg.energy.sigma = Some(sigma);
    }
    if let Some(p_list) = &args.p_list {
        cfg.schedule.p_list = p_list.clone();
    }
    if let Some(n) = args.max_iters {
        cfg.schedule.max_iters_per_stage = n;
    }
    let stalled = run::execute(&cfg)?;
    if stalled {
        eprintln!("final stage stalled: line search exhausted");
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let mesh = load_obj(&args.mesh)?;
    let validation = validate(&mesh);
    if !validation.passed {
        bail!(
            "{} is not a valid closed genus-0 mesh: {}",
            args.mesh.display(),
            summarize(&validation)
        );
    }
    let area = args.area.unwrap_or_else(|| mesh.total_area());
    let mut params = EnergyParams::new(Exponent::Finite(args.p), area)
        .with_epsilon(args.epsilon)
        .with_sigma(args.sigma)
        .with_weight(parse_weight(&args.weight)?);
    if let Some(path) = &args.reference {
        params = params.with_reference(Arc::new(ReferenceSurface::new(load_obj(path)?)?));
    }
    let opts = ThreeValueOptions {
        tau: args.tau,
        delta_c: args.delta_c,
    };
    let mesh = rescale_to_area(&mesh, area)?;
    let report = three_value_report(&mesh, &params, opts)?;
    println!("{}", report.to_json());
    Ok(ExitCode::SUCCESS)
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Mesh(args) => cmd_mesh(args),
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
