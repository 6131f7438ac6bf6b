//! Command-line driver for hybrid Kronecker product approximation.
//!
//! Subcommands: `fit` (greedy with configuration selection), `backfit`
//! (known configurations), `reconstruct`, `noise`, `simulate` (benchmark
//! cell), and `compare` (SVD baseline curves). Runs with a fixed seed and
//! fixed flags produce byte-identical outputs.
//!
//! Exit codes: 0 success, 2 usage, 3 unreadable or malformed files,
//! 4 numerical failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use hkopa::baseline;
use hkopa::bench::{self, SimulationSpec};
use hkopa::fit::{self, FitOptions, FitReport, ICSpec, StoppingRule};
use hkopa::io::{mat, model, pgm, report};
use hkopa::matrix::NoiseSpec;
use hkopa::{AmbientShape, Configuration, DenseMatrix, HKopaModel};

#[derive(Parser)]
#[command(name = "hkopa", version, about = "Hybrid Kronecker product approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    /// 128x128 with factor shapes 8x8 and 16x16.
    Desk,
    /// 512x512 with factor shapes 16x16 and 32x32.
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Greedy fit with per-term configuration selection.
    Fit {
        /// Input matrix (.pgm or .mat).
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_terms: usize,
        /// Criterion: mse, aic, bic, or q=<value>.
        #[arg(long, default_value = "bic")]
        ic: String,
        /// Stopping rule: none, rmt:<prob>, or cpv:<fraction>.
        #[arg(long, default_value = "none")]
        stop: String,
        /// Refine the fitted terms by backfitting afterwards.
        #[arg(long)]
        refine: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the fitted model as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-term report as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Backfit a known configuration multiset.
    Backfit {
        /// Input matrix (.pgm or .mat).
        input: PathBuf,
        /// Comma-separated factor shapes, e.g. "16x16,32x32".
        #[arg(long)]
        configs: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        rounds: usize,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a model file into a matrix or image.
    Reconstruct {
        model: PathBuf,
        /// Output path (.pgm or .mat).
        #[arg(long)]
        out: PathBuf,
    },
    /// Add seeded Gaussian noise to a matrix.
    Noise {
        input: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path (.pgm or .mat).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one simulation cell and write its error traces.
    Simulate {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma0: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Scale::Desk)]
        scale: Scale,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Error-versus-parameters curves for the hybrid fit and the SVD baseline.
    Compare {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_terms: usize,
        /// SVD ranks to include; defaults to covering the hybrid curve's
        /// parameter range.
        #[arg(long)]
        max_rank: Option<usize>,
        #[arg(long, default_value = "bic")]
        ic: String,
        #[arg(long, default_value = "rmt:0.01")]
        stop: String,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Lib(hkopa::Error),
}

impl From<hkopa::Error> for CliError {
    fn from(e: hkopa::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(hkopa::Error::Format(_)) | CliError::Lib(hkopa::Error::Io(_)) => 3,
            CliError::Lib(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_matrix(path: &Path) -> Result<DenseMatrix, CliError> {
    match extension(path) {
        Some("pgm") => Ok(pgm::read_pgm(path)?),
        Some("mat") => Ok(mat::read_matrix(path)?),
        _ => Err(CliError::Usage(format!(
            "unsupported input extension on {} (expected .pgm or .mat)",
            path.display()
        ))),
    }
}

fn save_matrix(m: &DenseMatrix, path: &Path) -> Result<(), CliError> {
    match extension(path) {
        Some("pgm") => Ok(pgm::write_pgm(m, path)?),
        Some("mat") => Ok(mat::write_matrix(m, path)?),
        _ => Err(CliError::Usage(format!(
            "unsupported output extension on {} (expected .pgm or .mat)",
            path.display()
        ))),
    }
}

fn extension(path: &Path) -> Option<&str> {
    path.extension().and_then(|e| e.to_str())
}

fn parse_ic(text: &str, shape: AmbientShape) -> Result<(ICSpec, String), CliError> {
    match text {
        "mse" => Ok((ICSpec::mse(), "mse".to_string())),
        "aic" => Ok((ICSpec::aic(), "aic".to_string())),
        "bic" => Ok((ICSpec::bic(shape), "bic".to_string())),
        other => {
            let value = other
                .strip_prefix("q=")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "invalid --ic '{other}' (expected mse, aic, bic, or q=<value>)"
                    ))
                })?;
            Ok((ICSpec::custom(value)?, other.to_string()))
        }
    }
}

fn parse_stop(text: &str) -> Result<StoppingRule, CliError> {
    if text == "none" {
        return Ok(StoppingRule::None);
    }
    if let Some(p) = text.strip_prefix("rmt:") {
        let prob_bound = p.parse::<f64>().map_err(|_| {
            CliError::Usage(format!("invalid probability bound in --stop '{text}'"))
        })?;
        return Ok(StoppingRule::RandomMatrix { prob_bound });
    }
    if let Some(f) = text.strip_prefix("cpv:") {
        let fraction = f
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("invalid fraction in --stop '{text}'")))?;
        return Ok(StoppingRule::TargetCpv { fraction });
    }
    Err(CliError::Usage(format!(
        "invalid --stop '{text}' (expected none, rmt:<prob>, or cpv:<fraction>)"
    )))
}

fn parse_configs(text: &str, shape: AmbientShape) -> Result<Vec<Configuration>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let (p, q) = part
            .trim()
            .split_once('x')
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
            .ok_or_else(|| {
                CliError::Usage(format!("invalid configuration '{part}' (expected <p>x<q>)"))
            })?;
        out.push(Configuration::new(p, q, shape)?);
    }
    Ok(out)
}

fn checksum(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Lib(e.into()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn print_summary(report: &FitReport, model: &HKopaModel) {
    for row in &report.rows {
        println!(
            "k={} config={}x{} lambda={} cpv={}",
            row.k,
            row.config.a_rows(),
            row.config.a_cols(),
            row.lambda,
            row.cpv
        );
    }
    println!(
        "terms={} stopped_by={} params={}",
        model.len(),
        report.stopped_by.label(),
        model.report_parameter_count()
    );
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit {
            input,
            max_terms,
            ic,
            stop,
            refine,
            seed,
            out,
            report: report_path,
        } => {
            let y = load_matrix(&input)?;
            let shape = y.shape();
            let (ic_spec, ic_name) = parse_ic(&ic, shape)?;
            let stopping = parse_stop(&stop)?;
            let mut opts = FitOptions::new(shape);
            opts.max_terms = max_terms;
            opts.ic = ic_spec;
            opts.stopping = stopping;
            opts.refine = refine;
            opts.seed = seed;
            let (model, fit_report) = fit::greedy_fit(&y, &opts)?;

            let mut options_digest = String::new();
            write!(
                options_digest,
                "ic={ic_name} q={} stop={stop} max_terms={max_terms} refine={refine}",
                opts.ic.q()
            )
            .expect("formatting into String cannot fail");
            if let Some(path) = &out {
                let provenance = model::Provenance {
                    seed: Some(seed),
                    options: Some(options_digest.clone()),
                    source_checksum: Some(checksum(&input)?),
                };
                model::save_model(&model, &provenance, path)?;
            }
            if let Some(path) = &report_path {
                let provenance = vec![
                    ("input".to_string(), input.display().to_string()),
                    ("seed".to_string(), seed.to_string()),
                    ("ic".to_string(), ic_name),
                    ("q".to_string(), opts.ic.q().to_string()),
                    ("stop".to_string(), stop.clone()),
                    ("max_terms".to_string(), max_terms.to_string()),
                ];
                report::write_fit_report(&fit_report, &provenance, path)?;
            }
            print_summary(&fit_report, &model);
            Ok(())
        }
        Command::Backfit {
            input,
            configs,
            tol,
            rounds,
            restarts,
            seed,
            out,
            report: report_path,
        } => {
            let y = load_matrix(&input)?;
            let shape = y.shape();
            let config_list = parse_configs(&configs, shape)?;
            let mut opts = FitOptions::new(shape);
            opts.backfit_tol = tol;
            opts.backfit_max_rounds = rounds;
            opts.restarts = restarts;
            opts.seed = seed;
            let (model, fit_report) = fit::backfit(&y, &config_list, &opts)?;
            if let Some(path) = &out {
                let provenance = model::Provenance {
                    seed: Some(seed),
                    options: Some(format!(
                        "configs={configs} tol={tol} rounds={rounds} restarts={restarts}"
                    )),
                    source_checksum: Some(checksum(&input)?),
                };
                model::save_model(&model, &provenance, path)?;
            }
            if let Some(path) = &report_path {
                let provenance = vec![
                    ("input".to_string(), input.display().to_string()),
                    ("seed".to_string(), seed.to_string()),
                    ("configs".to_string(), configs.clone()),
                    ("tol".to_string(), tol.to_string()),
                    ("rounds".to_string(), rounds.to_string()),
                    ("restarts".to_string(), restarts.to_string()),
                ];
                report::write_fit_report(&fit_report, &provenance, path)?;
            }
            print_summary(&fit_report, &model);
            Ok(())
        }
        Command::Reconstruct {
            model: model_path,
            out,
        } => {
            let (loaded, _) = model::load_model(&model_path)?;
            save_matrix(&loaded.evaluate(), &out)?;
            println!(
                "reconstructed {} terms into {}",
                loaded.len(),
                out.display()
            );
            Ok(())
        }
        Command::Noise {
            input,
            sigma,
            seed,
            out,
        } => {
            let y = load_matrix(&input)?;
            let spec = NoiseSpec::new(sigma, seed)?;
            save_matrix(&y.add_noise(&spec), &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Simulate {
            alpha,
            sigma0,
            seed,
            scale,
            out,
        } => {
            let spec = match scale {
                Scale::Desk => SimulationSpec::desk(alpha, sigma0, seed),
                Scale::Paper => SimulationSpec::paper(alpha, sigma0, seed),
            };
            let opts = FitOptions::new(spec.shape);
            let cell = bench::run_cell(&spec, &opts)?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::Lib(e.into()))?;
            let cell_path = out.join(format!("cell_alpha{alpha}_sigma{sigma0}_seed{seed}.csv"));
            report::write_cell(&cell, &cell_path)?;
            let combined_path = out.join("combined.csv");
            report::write_long(std::slice::from_ref(&cell), &combined_path)?;
            println!(
                "wrote {} and {} ({} rounds)",
                cell_path.display(),
                combined_path.display(),
                cell.rounds.len()
            );
            Ok(())
        }
        Command::Compare {
            clean,
            noisy,
            max_terms,
            max_rank,
            ic,
            stop,
            out,
        } => {
            let y_clean = load_matrix(&clean)?;
            let y_noisy = load_matrix(&noisy)?;
            let shape = y_noisy.shape();
            let (ic_spec, ic_name) = parse_ic(&ic, shape)?;
            let mut opts = FitOptions::new(shape);
            opts.max_terms = max_terms;
            opts.ic = ic_spec;
            opts.stopping = parse_stop(&stop)?;
            let curve = baseline::compare(&y_clean, &y_noisy, &opts, max_rank)?;
            let provenance = vec![
                ("clean".to_string(), clean.display().to_string()),
                ("noisy".to_string(), noisy.display().to_string()),
                ("max_terms".to_string(), max_terms.to_string()),
                ("ic".to_string(), ic_name),
                ("stop".to_string(), stop.clone()),
            ];
            report::write_comparison(&curve, &provenance, &out)?;
            println!("wrote {} ({} points)", out.display(), curve.points.len());
            Ok(())
        }
    }
}
