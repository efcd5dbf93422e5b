use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use mixfrac::estimate::{full_report, EstimateOptions, RegimeChoice};
use mixfrac::fracgauss::SERIES_CUTOFF_DEFAULT;
use mixfrac::harness::{self, ExperimentConfig, ExperimentKind};
use mixfrac::simulate::{read_series, sample_mfbm, write_series, SampleMethod};
use mixfrac::{Hurst, KernelTable, ModelTheta};

#[derive(Parser)]
#[command(name = "mixfrac", version, about = "Mixed fractional models: simulate, estimate, experiment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one path of increments from the parametric model.
    Simulate {
        /// H,sigma_sq,Lambda,Pi
        #[arg(long, value_parser = parse_theta)]
        theta: ModelTheta,
        #[arg(long)]
        n: usize,
        /// Sampling step; defaults to 1/n.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SampleMethod::Circulant)]
        method: SampleMethod,
        /// `.bin` for the binary format, CSV otherwise.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate H and the integrated quantities from an increment file.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = RegimeChoice::Auto)]
        regime: RegimeChoice,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Step for CSV files without a `# delta=` header.
        #[arg(long)]
        delta: Option<f64>,
        /// JSON report; the table goes to stdout either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// RMSE against n and fitted log-log slopes.
    Rates(ExperimentArgs),
    /// Interval coverage and normality of standardised errors.
    Coverage(ExperimentArgs),
    /// Bias of the pilot against the extrapolated estimate.
    Bias(ExperimentArgs),
    /// KL divergence along local perturbations.
    Kl(ExperimentArgs),
    /// Print the fGn autocovariance and cross-kernel rows.
    Kernels {
        #[arg(long)]
        h: f64,
        #[arg(long)]
        lags: usize,
        /// Print the full table as JSON instead.
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = SERIES_CUTOFF_DEFAULT)]
        series_cutoff: usize,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the output path of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_theta(s: &str) -> Result<ModelTheta, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    let [h, s2, l, p] = v[..] else {
        return Err(format!("expected 4 comma-separated values, got {}", v.len()));
    };
    ModelTheta::boundary(h, s2, l, p).map_err(|e| e.to_string())
}

fn simulate(
    theta: ModelTheta,
    n: usize,
    delta: Option<f64>,
    seed: u64,
    method: SampleMethod,
    out: &Path,
) -> mixfrac::Result<()> {
    let delta = delta.unwrap_or(1.0 / n as f64);
    let series = sample_mfbm(theta, n, delta, seed, method)?;
    write_series(&series, out)?;
    info!("wrote {} increments to {}", series.len(), out.display());
    Ok(())
}

fn estimate(
    input: &Path,
    regime: RegimeChoice,
    level: f64,
    delta: Option<f64>,
    out: Option<&Path>,
) -> mixfrac::Result<()> {
    let series = read_series(input, delta)?;
    let opts = EstimateOptions {
        level,
        ..EstimateOptions::with_regime(regime)
    };
    let report = full_report(&series, &opts)?;
    print!("{report}");
    if let Some(p) = out {
        std::fs::write(p, report.to_json()?)?;
    }
    Ok(())
}

fn experiment(kind: ExperimentKind, args: &ExperimentArgs) -> mixfrac::Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.experiment != kind {
        return Err(mixfrac::Error::Invalid(format!(
            "config describes a '{}' experiment, not '{kind}'",
            cfg.experiment
        )));
    }
    if let Some(p) = &args.out {
        cfg.output = Some(p.clone());
    }
    let out = harness::run(&cfg)?;
    if !out.passes() {
        warn!("the experiment's own check did not hold");
    }
    match &cfg.output {
        Some(p) => println!("wrote {}", p.display()),
        None => println!("{}", out.to_json()?),
    }
    Ok(())
}

fn kernels(h: f64, lags: usize, json: bool, cutoff: usize) -> mixfrac::Result<()> {
    let t = KernelTable::new(Hurst::new(h)?, lags, cutoff)?;
    if json {
        println!("{}", t.to_json()?);
    } else {
        let row = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        println!("{}", row(&t.gamma));
        println!("{}", row(&t.phi));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate {
            theta,
            n,
            delta,
            seed,
            method,
            out,
        } => simulate(*theta, *n, *delta, *seed, *method, out),
        Command::Estimate {
            input,
            regime,
            level,
            delta,
            out,
        } => estimate(input, *regime, *level, *delta, out.as_deref()),
        Command::Rates(a) => experiment(ExperimentKind::Rates, a),
        Command::Coverage(a) => experiment(ExperimentKind::Coverage, a),
        Command::Bias(a) => experiment(ExperimentKind::Bias, a),
        Command::Kl(a) => experiment(ExperimentKind::Kl, a),
        Command::Kernels {
            h,
            lags,
            json,
            series_cutoff,
        } => kernels(*h, *lags, *json, *series_cutoff),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
