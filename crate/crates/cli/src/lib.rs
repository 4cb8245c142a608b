//! Command-line orchestration for `mbeseg`: TOML run configs, image I/O,
//! artifact emission and the experiment suites.

pub mod config;
pub mod emit;
pub mod error;
pub mod imageio;
pub mod suites;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{parse_config, Emit, RunConfig};
pub use emit::{run_config, RunOptions, RunOutcome};
pub use error::{CliError, CliResult};
pub use suites::{run_suite, SuiteName, SuiteOptions, SuiteReport};

pub const FIXTURE_IMAGE: &str = "image.png";
pub const FIXTURE_TRUTH: &str = "truth.png";
pub const FIXTURE_SPEC: &str = "fixture.toml";

#[derive(Debug, Parser)]
#[command(name = "mbeseg", version, about = "Level-set segmentation with MBE regularization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Override the fixture noise seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated artifacts: mask, contour_overlay, gradmap, trace, final_phi.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_emit)]
    pub emit: Option<Vec<Emit>>,
    /// Stop when max|phi' - phi| / tau falls below this.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment the input named in a config file.
    Run { config: PathBuf },
    /// Write a synthetic fixture (16-bit image, truth mask, spec sidecar).
    Fixture {
        spec: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Run an experiment suite: init_independence, smoothness_sweep, noise_sweep, sav_stability.
    Suite {
        #[arg(value_parser = parse_suite)]
        name: SuiteName,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        /// Members run concurrently (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Cap every member's iteration count (smoke runs).
        #[arg(long, hide = true)]
        max_iter: Option<usize>,
    },
    /// Dice and IoU between two mask images (thresholded at 127.5).
    Metrics { mask_a: PathBuf, mask_b: PathBuf },
}

fn parse_emit(s: &str) -> Result<Emit, String> {
    Emit::parse(s).ok_or_else(|| format!("unknown artifact `{s}`"))
}

fn parse_suite(s: &str) -> Result<SuiteName, String> {
    s.parse()
}

fn load_mask(path: &Path) -> CliResult<mbeseg::ScalarField2D> {
    Ok(imageio::load_image(path)?.map(|x| if x > 127.5 { 1.0 } else { 0.0 }))
}

/// Executes a parsed command line, returning what it prints on stdout.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let opts = RunOptions {
        quiet: cli.quiet,
        max_iter: None,
    };
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = parse_config(config)?;
            if let (Some(seed), Some(fx)) = (cli.seed, cfg.input.fixture.as_mut()) {
                fx.seed = Some(seed);
            }
            if cli.tol.is_some() {
                cfg.model.tol = cli.tol;
            }
            if let Some(e) = &cli.emit {
                let mut e = e.clone();
                e.sort();
                e.dedup();
                cfg.output.emit = Some(e);
            }
            let out = run_config(&cfg, &opts)?;
            let mut s = format!(
                "iterations {}\nconverged {}\noutput {}\n",
                out.result.iterations,
                out.result.converged,
                cfg.output.dir.as_ref().unwrap().display()
            );
            if let Some(d) = out.dice {
                s.push_str(&format!("dice {d:.6}\n"));
            }
            Ok(s)
        }
        Command::Fixture { spec, out } => {
            let mut fx = config::parse_fixture(spec)?;
            if let Some(seed) = cli.seed {
                fx.seed = Some(seed);
            }
            std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
            let (image, truth) = mbeseg::generate(&config::fixture_config_spec(&fx))?;
            imageio::save_gray16(&out.join(FIXTURE_IMAGE), &image)?;
            imageio::save_gray8(&out.join(FIXTURE_TRUTH), &truth.scaled(255.0))?;
            let sidecar = out.join(FIXTURE_SPEC);
            std::fs::write(&sidecar, config::dump_fixture(&fx)).map_err(|e| CliError::io(&sidecar, e))?;
            Ok(format!("wrote {}\n", out.display()))
        }
        Command::Suite {
            name,
            out,
            jobs,
            max_iter,
        } => {
            let sopts = SuiteOptions {
                jobs: *jobs,
                seed: cli.seed,
                tol: cli.tol,
                emit: cli.emit.clone(),
                run: RunOptions {
                    quiet: true,
                    max_iter: *max_iter,
                },
            };
            let report = run_suite(*name, out, &sopts)?;
            let mut s = report.summary_csv();
            s.push_str(&report.report_text());
            Ok(s)
        }
        Command::Metrics { mask_a, mask_b } => {
            let (a, b) = (load_mask(mask_a)?, load_mask(mask_b)?);
            let dice = mbeseg::dice(&a, &b)?;
            let iou = mbeseg::iou(&a, &b)?;
            Ok(format!("dice {dice:.6}\niou {iou:.6}\n"))
        }
    }
}
