use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use dualfem::experiments::{self, ExperimentConfig};

/// Runs one of the convergence experiments and writes its CSV history.
#[derive(Debug, Parser)]
#[command(name = "dualfem", version)]
struct Cli {
    /// plaplace, optdesign, pstokes or bingham.
    #[arg(long)]
    experiment: Option<String>,
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// primal-kacanov, dual-kacanov, gradient-descent or newton.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long)]
    grade_depth: Option<u32>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// fixed, adaptive or constant (Bingham only).
    #[arg(long)]
    eps_policy: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the mesh in text format.
    #[arg(long)]
    dump_mesh: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match (&cli.config, &cli.experiment) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut c = if text.lines().any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("experiment")) {
                ExperimentConfig::from_text(&text)?
            } else {
                let name = cli.experiment.as_deref().context("config file has no 'experiment' key and --experiment is missing")?;
                let mut c = ExperimentConfig::preset(name)?;
                c.apply(&text)?;
                c
            };
            if let Some(name) = &cli.experiment {
                c.set("experiment", name)?;
            }
            c
        }
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => anyhow::bail!("either --experiment or --config is required"),
    };
    let overrides: [(&str, Option<String>); 9] = [
        ("p", cli.p.map(|v| v.to_string())),
        ("kappa", cli.kappa.map(|v| v.to_string())),
        ("scheme", cli.scheme.clone()),
        ("levels", cli.levels.map(|v| v.to_string())),
        ("grade_depth", cli.grade_depth.map(|v| v.to_string())),
        ("max_iter", cli.max_iter.map(|v| v.to_string())),
        ("tol", cli.tol.map(|v| v.to_string())),
        ("eps_policy", cli.eps_policy.clone()),
        ("out", cli.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<()> {
    let config = build_config(cli)?;
    if let Some(path) = &cli.dump_mesh {
        let mesh = config.mesh()?;
        let file = std::io::BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
        mesh.write_text(file)?;
    }
    let start = Instant::now();
    let summary = experiments::run(&config, None)?;
    let last = summary.records.last().context("no iterations were run")?;
    eprintln!(
        "{}: {} triangles, {} dofs, {} iterations, final bound {:.3e}, jref = {:.16e}, {:.1} s",
        config.experiment,
        summary.n_triangles,
        summary.n_dofs,
        last.n,
        last.gub,
        summary.j_ref,
        start.elapsed().as_secs_f64()
    );
    if config.out.is_none() {
        experiments::write_csv(std::io::stdout().lock(), config.experiment, &summary)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
