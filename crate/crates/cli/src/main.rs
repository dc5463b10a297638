use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use kgamma::bounds::{compare, BoundConstants};
use kgamma::experiments::{AdversarialDemo, Experiment, ExperimentConfig, ExperimentOutput, SampleComplexity};
use kgamma::io::{parse_matrix, read_distribution, read_sample_matrix, read_spectrum};
use kgamma::mem::{mem_fit, MGrid};
use kgamma::shattering::{shatter_certificate, DEFAULT_ENUMERATION_CAP};
use kgamma::spectra::summarize;
use kgamma::{Algorithm, Error, LabeledSample, MemConfig, SampleMatrix};

#[derive(Parser)]
#[command(
    name = "kgamma",
    version,
    about = "Margin-adapted dimension and large-margin sample-complexity experiments"
)]
struct Cli {
    /// Seed for every random draw; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute k_γ of a spectrum file or distribution spec.
    Kgamma(KgammaArgs),
    /// Exact γ-shattering test of a matrix file. Exit 0 if shattered, 1 if not.
    Shatter(ShatterArgs),
    /// Margin-error minimization.
    #[command(subcommand)]
    Mem(MemCommand),
    /// Closed-form sample-complexity bounds.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Run an experiment config and write `<name>.csv` and `<name>.json`.
    Experiment { config: PathBuf },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    /// Eigenvalues, one per line or a JSON array.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Distribution spec JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct KgammaArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    gamma: f64,
}

#[derive(Args)]
struct ShatterArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Learner {
    Exact,
    Heuristic,
    Auto,
    Adversarial,
}

impl Learner {
    fn algorithm(self, restarts: usize) -> Algorithm {
        match self {
            Learner::Exact => Algorithm::Exact,
            Learner::Heuristic => Algorithm::Heuristic { restarts },
            Learner::Auto => Algorithm::Auto { restarts },
            Learner::Adversarial => Algorithm::Adversarial { restarts },
        }
    }
}

#[derive(Args)]
struct LearnerArgs {
    #[arg(long, value_enum, default_value = "auto")]
    algorithm: Learner,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Relative margin slack τ; constraints are imposed at γ(1 + τ).
    #[arg(long, default_value_t = kgamma::mem::DEFAULT_SLACK, allow_hyphen_values = true)]
    slack: f64,
}

#[derive(Subcommand)]
enum MemCommand {
    /// Fit a labeled data file whose last column holds ±1 labels.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        learner: LearnerArgs,
    },
    /// Lower-bound construction on a distribution spec.
    AdversarialDemo {
        #[arg(long)]
        spec: PathBuf,
        /// Size of the shattered set; training uses m/2 points.
        #[arg(long)]
        m: usize,
        /// Margin; calibrated from the 5% quantile of γ* when omitted.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 2000)]
        test_size: usize,
    },
    /// Empirical sample complexity on a distribution spec.
    SampleComplexity {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        /// Comma-separated sizes; doubles from 1 up to 1024 when omitted.
        #[arg(long, value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 2000)]
        test_size: usize,
        #[command(flatten)]
        learner: LearnerArgs,
    },
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Upper bounds and the lower-bound template for one spectrum.
    Compare {
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 1.0)]
        c_norm: f64,
        #[arg(long, default_value_t = 1.0)]
        c_dim: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        c_lower: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("invalid_argument", &e.to_string());
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(2)
}

fn print(v: &Value) -> kgamma::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: &Cli) -> kgamma::Result<ExitCode> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Kgamma(args) => {
            let spectrum = match (&args.source.spectrum, &args.source.spec) {
                (Some(path), _) => read_spectrum(path)?,
                (_, Some(path)) => read_distribution(path)?.spectrum()?,
                _ => unreachable!("clap enforces exactly one source"),
            };
            print(&serde_json::to_value(summarize(&spectrum, args.gamma)?)?)?;
        }
        Command::Shatter(args) => {
            let x = read_sample_matrix(&args.matrix)?;
            let cert = shatter_certificate(&x, args.gamma, args.cap)?;
            print(&json!({
                "shattered": cert.shattered,
                "gamma_star": cert.gamma_star,
                "lambda_min": cert.lambda_min,
                "certificate_y": cert.certificate_y,
            }))?;
            if !cert.shattered {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Mem(MemCommand::Fit { data, gamma, learner }) => {
            let s = read_labeled(data)?;
            let cfg = MemConfig {
                slack: learner.slack,
                ..MemConfig::default()
            };
            let algorithm = learner.algorithm.algorithm(learner.restarts);
            if matches!(algorithm, Algorithm::Adversarial { .. }) {
                return Err(Error::InvalidArgument(
                    "the adversarial learner needs a distribution; use `mem adversarial-demo`".into(),
                ));
            }
            let report = mem_fit(&s, *gamma, &algorithm, &cfg, seed)?;
            let mut v = serde_json::to_value(&report)?;
            v["algorithm"] = json!(algorithm.label());
            v["margin_error"] = json!(report.empirical_margin_error.rate());
            print(&v)?;
        }
        Command::Mem(MemCommand::AdversarialDemo {
            spec,
            m,
            gamma,
            trials,
            test_size,
        }) => {
            let cfg = ExperimentConfig {
                seed,
                experiment: Experiment::AdversarialDemo(AdversarialDemo {
                    distribution: spec_value(spec)?,
                    m: *m,
                    gamma: *gamma,
                    calibration_quantile: 0.05,
                    calibration_trials: 200,
                    trials: *trials,
                    test_size: *test_size,
                    threshold: 0.45,
                    mem: MemConfig::default(),
                    restarts: 8,
                }),
            };
            emit(cli, &cfg.run(spec.parent())?)?;
        }
        Command::Mem(MemCommand::SampleComplexity {
            spec,
            gamma,
            epsilon,
            delta,
            m_grid,
            trials,
            test_size,
            learner,
        }) => {
            let cfg = ExperimentConfig {
                seed,
                experiment: Experiment::SampleComplexity(SampleComplexity {
                    distribution: spec_value(spec)?,
                    epsilon: *epsilon,
                    gamma: *gamma,
                    delta: *delta,
                    algorithm: learner.algorithm.algorithm(learner.restarts),
                    m_grid: match m_grid {
                        Some(ms) => MGrid::List(ms.clone()),
                        None => MGrid::Doubling { start: 1, max: 1024 },
                    },
                    trials: *trials,
                    test_size: *test_size,
                    mem: MemConfig {
                        slack: learner.slack,
                        ..MemConfig::default()
                    },
                    l_star: None,
                }),
            };
            emit(cli, &cfg.run(spec.parent())?)?;
        }
        Command::Bounds(BoundsCommand::Compare {
            spectrum,
            gamma,
            epsilon,
            delta,
            c1,
            c2,
            c_norm,
            c_dim,
            beta,
            c_lower,
        }) => {
            let constants = BoundConstants {
                c_norm: *c_norm,
                c_dim: *c_dim,
                c1: *c1,
                c2: *c2,
                beta: *beta,
                c_lower: *c_lower,
            };
            let table = compare(&read_spectrum(spectrum)?, *gamma, *epsilon, *delta, constants)?;
            let mut v = serde_json::to_value(table)?;
            v["schema"] = json!(kgamma::experiments::SCHEMA);
            print(&v)?;
        }
        Command::Experiment { config } => {
            let mut cfg = ExperimentConfig::from_json(&fs::read_to_string(config)?)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = cfg.run(config.parent())?;
            let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let (csv, json) = write_outputs(&dir, &out)?;
            print(&json!({
                "schema": kgamma::experiments::SCHEMA,
                "experiment": out.name,
                "csv": csv,
                "summary": json,
            }))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Print the summary and, with `--out-dir`, also write both files.
fn emit(cli: &Cli, out: &ExperimentOutput) -> kgamma::Result<()> {
    if let Some(dir) = &cli.out_dir {
        write_outputs(dir, out)?;
    }
    print(&out.summary)
}

fn write_outputs(dir: &Path, out: &ExperimentOutput) -> kgamma::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{}.csv", out.name));
    let json = dir.join(format!("{}.json", out.name));
    fs::write(&csv, &out.csv)?;
    fs::write(&json, serde_json::to_string_pretty(&out.summary)? + "\n")?;
    Ok((csv, json))
}

fn spec_value(path: &Path) -> kgamma::Result<Value> {
    // parse once here so spec errors surface before any sampling
    read_distribution(path)?;
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn read_labeled(path: &Path) -> kgamma::Result<LabeledSample> {
    let m = parse_matrix(&fs::read_to_string(path)?)?;
    if m.ncols() < 2 {
        return Err(Error::InvalidArgument(
            "data needs at least one feature column and a label column".into(),
        ));
    }
    let d = m.ncols() - 1;
    let y: Vec<f64> = m.column(d).iter().copied().collect();
    LabeledSample::new(SampleMatrix::new(m.columns(0, d).into_owned())?, y)
}
