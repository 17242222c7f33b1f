use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use kgscatter_cli::commands::{self, RunOptions};
use kgscatter_cli::config::SceneConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kgscatter",
    about = "High-momenta scattering phases, time-domain verification, and inversion",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scene configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (fallback: KGSCATTER_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// RNG seed override for sampled checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Quadrature tolerance override for X-ray tables.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run scene-level invariants; exit nonzero on any failure.
    Validate,
    /// Write phase, X-ray, and flux tables for the dataset block.
    Forward,
    /// Run the time-domain convergence study against the slope band.
    Verify,
    /// Reconstruct fields and fluxes from phase data.
    Invert {
        /// Products to compute: a0, b, flux, ainf_sum (default: all).
        #[arg(long, value_delimiter = ',')]
        products: Vec<String>,
    },
    /// Rewrite outputs as plot-ready long-format CSVs.
    ExportPlots,
}

fn thread_count(cli: &Cli) -> Option<usize> {
    cli.threads.or_else(|| {
        std::env::var("KGSCATTER_THREADS").ok().and_then(|s| s.parse().ok())
    })
}

fn load_config(cli: &Cli) -> Result<SceneConfig> {
    let path = cli
        .config
        .as_ref()
        .context("--config <scene.toml> is required for this command")?;
    SceneConfig::load(path)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = thread_count(&cli) {
        // A second invocation in-process would fail; the setting is best-effort.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let opts = RunOptions { out: cli.out.clone(), seed: cli.seed, tol: cli.tol };

    match &cli.command {
        Command::Validate => {
            let config = load_config(&cli)?;
            let report = commands::cmd_validate(&config, &opts)?;
            for check in &report.checks {
                println!(
                    "check {:<12} {}  {}",
                    check.name,
                    if check.passed { "PASS" } else { "FAIL" },
                    check.detail
                );
            }
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Forward => {
            let config = load_config(&cli)?;
            let report = commands::cmd_forward(&config, &opts)?;
            println!(
                "forward: {} lines ({} skipped at the obstacle)",
                report.n_lines, report.n_skipped
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let config = load_config(&cli)?;
            let report = commands::cmd_verify(&config, &opts)?;
            for rec in &report.run.records {
                println!(
                    "v = {:>7.3}: phase error {:.3e} on a {}² grid",
                    rec.v,
                    rec.abs_err(),
                    rec.n_grid
                );
            }
            match report.run.slope {
                Some((slope, stderr)) => println!(
                    "slope {slope:.3} ± {stderr:.3} (band [{}, {}])",
                    report.slope_band[0], report.slope_band[1]
                ),
                None => println!("slope: degenerate fit"),
            }
            for n in &report.notices {
                println!("notice: {n}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(if report.in_band == Some(false) { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        Command::Invert { products } => {
            let config = load_config(&cli)?;
            let products = commands::parse_products(products)?;
            let report = commands::cmd_invert(&config, &opts, &products)?;
            for (k, v) in &report.summary {
                println!("{k} = {v}");
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportPlots => {
            let dir = match (&cli.out, cli.config.as_ref()) {
                (Some(dir), _) => dir.clone(),
                (None, Some(_)) => PathBuf::from(load_config(&cli)?.output_dir),
                (None, None) => PathBuf::from("out"),
            };
            let report = commands::cmd_export_plots(&dir)?;
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
