use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use holobeam::harness::{self, gradcheck, OutputFormat, Scenario, Scheme, Sweep, SystemConfig};
use holobeam::scheduler::Rejection;
use holobeam::Result;

#[derive(Parser)]
#[command(name = "holobeam", version, about = "RHS hybrid beamforming and user scheduling simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Scheme(s) to run; defaults to the configured scheme.
    #[arg(long, global = true, value_enum)]
    scheme: Option<SchemeArg>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Proposed,
    Benchmark,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    PlotScript,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one realization and print the joint solution as JSON.
    Single {
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Defaults to the first configured SNR point.
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Average sum rate against SNR.
    SweepSnr,
    /// Average sum rate against the number of surface elements.
    SweepSize,
    /// Empirical CDFs of the sum rate.
    Cdf,
    /// Compare the analytic gradient with finite differences.
    GradCheck {
        #[arg(long, default_value_t = 10)]
        realizations: u64,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
}

#[derive(Serialize)]
struct Candidate {
    user: usize,
    rejection: Option<Rejection>,
    kept_sum_rate: f64,
}

#[derive(Serialize)]
struct SingleOutput {
    realization: u64,
    scheme: Scheme,
    snr_db: f64,
    #[serde(flatten)]
    solution: holobeam::scheduler::SolutionRecord,
    history: Vec<Candidate>,
}

fn schemes(arg: Option<SchemeArg>, config: &SystemConfig) -> Vec<Scheme> {
    match arg {
        None => vec![config.scheme],
        Some(SchemeArg::Proposed) => vec![Scheme::Proposed],
        Some(SchemeArg::Benchmark) => vec![Scheme::Benchmark],
        Some(SchemeArg::Both) => vec![Scheme::Proposed, Scheme::Benchmark],
    }
}

fn emit(sweep: &Sweep, global: &Global, stem: &str) -> Result<()> {
    let format = match global.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::PlotScript => OutputFormat::PlotScript,
    };
    for path in harness::emit_outputs(&sweep.stats, &global.out, stem, format)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let global = &cli.global;
    let mut config = match &global.config {
        Some(path) => SystemConfig::load(path)?,
        None => SystemConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    let schemes = schemes(global.scheme, &config);

    match cli.command {
        Command::Single { realization, snr_db } => {
            let snr_db = snr_db.or(config.snr_db.first().copied()).unwrap_or(20.0);
            let scenario = Scenario::<f64>::new(&config)?;
            for scheme in schemes {
                let solution = scenario.solve(snr_db, realization, scheme)?;
                let out = SingleOutput {
                    realization,
                    scheme,
                    snr_db,
                    solution: solution.to_record(),
                    history: solution
                        .history
                        .iter()
                        .map(|c| Candidate {
                            user: c.user,
                            rejection: c.rejection,
                            kept_sum_rate: c.kept_sum_rate,
                        })
                        .collect(),
                };
                println!("{}", serde_json::to_string_pretty(&out).expect("solution serializes"));
            }
        }
        Command::SweepSnr => emit(&harness::sweep_snr(&config, &schemes)?, global, "sweep_snr")?,
        Command::SweepSize => emit(&harness::sweep_size(&config, &schemes)?, global, "sweep_size")?,
        Command::Cdf => emit(&harness::sweep_cdf(&config, &schemes)?, global, "cdf")?,
        Command::GradCheck {
            realizations,
            snr_db,
            tolerance,
        } => {
            let mut ok = true;
            println!("realization,M,relative_error,gradient_norm");
            for r in 0..realizations {
                let check = gradcheck::grad_check(&config, snr_db, r)?;
                println!(
                    "{},{},{:e},{:e}",
                    check.realization, check.elements, check.relative_error, check.gradient_norm
                );
                ok &= check.relative_error < tolerance;
            }
            if !ok {
                eprintln!("holobeam: gradient check exceeded tolerance {tolerance:e}");
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build_global()
    {
        eprintln!("holobeam: {e}");
        return ExitCode::FAILURE;
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("holobeam: {e}");
            ExitCode::FAILURE
        }
    }
}
