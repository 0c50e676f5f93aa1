//! `mcde`: sampling, fitting, diagnostics, cross-validation and simulation runs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mcde_core::copula::{Copula, CopulaFamily, FamilyKind};
use mcde_core::diagnostics::{power_bounded_sup, surface_grid, write_surface_csv};
use mcde_core::divergence::{DivergenceKind, DivergenceSpec};
use mcde_core::empirical::pseudo_observations;
use mcde_core::error::Error;
use mcde_core::estimation::{asymptotic_covariance_with, fit_mcde, fit_mle, CovarianceKernel, FitOptions, OptimizerChoice};
use mcde_core::experiments::{run_experiment, standard_estimators, Preset, ScenarioConfig};
use mcde_core::io::{default_headers, read_csv_path, write_csv};
use mcde_core::selection::{cv_select_exponent, CvConfig};

/// Seed used whenever `--seed` is not given.
const DEFAULT_SEED: u64 = 20240601;

#[derive(Parser, Debug)]
#[command(name = "mcde", version, about = "Minimum copula divergence estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw from a copula and write the sample as CSV.
    Sample {
        #[arg(long)]
        family: String,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Output path; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank-transform a CSV sample and fit a copula family.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        family: String,
        #[arg(long, value_enum, default_value_t = Method::Beta)]
        method: Method,
        #[arg(long, default_value_t = 0.1)]
        exponent: f64,
        #[arg(long, value_enum, default_value_t = Optimizer::Auto)]
        optimizer: Optimizer,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Sandwich covariance of the estimator at a given parameter.
    Cov {
        #[arg(long)]
        family: String,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Power `x` of the weight `C^x`.
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long, default_value_t = 100_000)]
        mc: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Kernel::KnownMargins)]
        kernel: Kernel,
    },
    /// Power-weighted gradient bound scan; writes the surface as CSV.
    Bounds {
        #[arg(long)]
        family: String,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Surface CSV path; the surface is skipped when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated choice of the β exponent.
    Cv {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        family: String,
        #[arg(long, default_value = "0.1,0.25,0.5,1")]
        grid: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        anchor: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Reuse full-sample ranks inside each fold.
        #[arg(long)]
        global_ranks: bool,
        #[arg(long, value_enum, default_value_t = CvFormat::Json)]
        format: CvFormat,
    },
    /// Run a named simulation study or a scenario file and write a metrics CSV.
    Experiment {
        #[arg(long, required_unless_present = "config", conflicts_with = "config")]
        scenario: Option<String>,
        /// Scenario file (key=value lines or JSON), run with MLE and the α, β, γ estimators at 0.1.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Method {
    Mle,
    Alpha,
    Beta,
    Gamma,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Optimizer {
    Auto,
    Bracketed,
    Gd,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CvFormat {
    Json,
    Table,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Kernel {
    KnownMargins,
    RankCorrected,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Usage(_) | Error::ParameterDomain { .. } | Error::Config(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        kind: "usage",
        message: message.into(),
    }
}

fn family(name: &str, d: usize) -> Result<CopulaFamily, Failure> {
    let kind: FamilyKind = name.parse().map_err(|e: Error| usage(e.to_string()))?;
    CopulaFamily::new(kind, d).map_err(|e| usage(e.to_string()))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sample {
            family: name,
            theta,
            d,
            n,
            seed,
            out,
        } => {
            let fam = family(&name, d)?;
            let params = match (fam.param_count(), theta) {
                (0, _) => vec![],
                (_, Some(t)) => vec![t],
                (_, None) => return Err(usage(format!("--theta is required for the {} copula", fam.kind))),
            };
            let c = Copula::new(fam, params)?;
            let data = c.sample(n, seed)?;
            let mut w = output(&out)?;
            write_csv(&mut w, &default_headers("u", d), &data)?;
            w.flush()?;
        }
        Command::Fit {
            data,
            family: name,
            method,
            exponent,
            optimizer,
            format,
        } => {
            let table = read_csv_path(&data)?;
            let fam = family(&name, table.data.ncols())?;
            let u = pseudo_observations(&table.data)?;
            let opts = FitOptions {
                optimizer: match optimizer {
                    Optimizer::Auto => OptimizerChoice::Auto,
                    Optimizer::Bracketed => OptimizerChoice::Bracketed,
                    Optimizer::Gd => OptimizerChoice::GradientDescent,
                },
                ..FitOptions::default()
            };
            let kind = match method {
                Method::Mle => None,
                Method::Alpha => Some(DivergenceKind::Alpha),
                Method::Beta => Some(DivergenceKind::Beta),
                Method::Gamma => Some(DivergenceKind::Gamma),
            };
            let fit = match kind {
                None => fit_mle(&u, &fam, &opts)?,
                Some(k) => {
                    let spec = DivergenceSpec::new(k, exponent).map_err(|e| usage(e.to_string()))?;
                    fit_mcde(&u, &fam, &spec, &opts)?
                }
            };
            match format {
                Format::Json => print_json(&fit)?,
                Format::Csv => {
                    println!("method,param,value,converged,iterations,loss");
                    for (j, t) in fit.theta_hat.iter().enumerate() {
                        println!(
                            "{},theta{},{t},{},{},{}",
                            fit.method.label(),
                            j + 1,
                            fit.converged,
                            fit.iterations,
                            fit.loss_at_opt
                        );
                    }
                }
            }
        }
        Command::Cov {
            family: name,
            theta,
            d,
            x,
            mc,
            seed,
            kernel,
        } => {
            let c = Copula::new(family(&name, d)?, vec![theta])?;
            let kernel = match kernel {
                Kernel::KnownMargins => CovarianceKernel::KnownMargins,
                Kernel::RankCorrected => CovarianceKernel::RankCorrected,
            };
            print_json(&asymptotic_covariance_with(&c, x, mc, seed, kernel)?)?;
        }
        Command::Bounds {
            family: name,
            theta,
            alpha,
            grid,
            out,
        } => {
            let c = Copula::new(family(&name, 2)?, vec![theta])?;
            let report = power_bounded_sup(&c, alpha, grid)?;
            if out.is_some() {
                let points = surface_grid(&c, alpha, grid)?;
                let mut w = output(&out)?;
                write_surface_csv(&points, &mut w)?;
                w.flush()?;
            }
            print_json(&report)?;
        }
        Command::Cv {
            data,
            family: name,
            grid,
            k,
            anchor,
            seed,
            global_ranks,
            format,
        } => {
            let grid: Vec<f64> = grid
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| usage(format!("--grid must be comma-separated numbers, got {grid:?}")))?;
            let table = read_csv_path(&data)?;
            let fam = family(&name, table.data.ncols())?;
            let u = pseudo_observations(&table.data)?;
            let cfg = CvConfig {
                k,
                grid,
                anchor_beta: anchor,
                seed,
                global_ranks,
                fit: FitOptions::default(),
            };
            let result = cv_select_exponent(&u, &fam, &cfg)?;
            match format {
                CvFormat::Json => print_json(&result)?,
                CvFormat::Table => {
                    println!("{:>8}  {:>14}  {:>8}", "beta", "cv_score", "failures");
                    for s in &result.cv_scores {
                        let mark = if s.exponent == result.beta_opt { "  *" } else { "" };
                        println!("{:>8}  {:>14.8}  {:>8}{mark}", s.exponent, s.score, s.failures);
                    }
                }
            }
        }
        Command::Experiment {
            scenario,
            config,
            reps,
            seed,
            out,
        } => {
            let table = if let Some(path) = config {
                let text = std::fs::read_to_string(path)?;
                let cfg = ScenarioConfig::parse(&text)?;
                run_experiment(&cfg, &standard_estimators(), reps.unwrap_or(50), seed)?
            } else {
                let preset: Preset = scenario.as_deref().unwrap_or_default().parse()?;
                preset.run(reps.unwrap_or_else(|| preset.default_reps()), seed)?
            };
            for note in &table.notes {
                eprintln!("note: {note}");
            }
            let mut w = output(&out)?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn report(f: &Failure) {
    let line = serde_json::json!({ "error": f.kind, "message": f.message });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            report(&usage(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f);
            ExitCode::from(f.code)
        }
    }
}
