use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use folo_cli::config::{BetaStrategyConfig, ExperimentConfig, ModelConfig};
use folo_cli::record_io::{fmt_f64, read_record, write_intervals, write_record};
use folo_cli::runner::run_monte_carlo;
use folo_core::{
    localize_report, make_fo_input, penalty_profile, simulate_ambient, simulate_armax,
    ForcedOscillation, LocalizerConfig,
};

/// Forced-oscillation time localization toolkit.
#[derive(Parser)]
#[command(name = "folo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one record and write it as CSV.
    Simulate(SimulateArgs),
    /// Localize oscillation on/off spans in a record CSV.
    Localize(LocalizeArgs),
    /// Run the Monte Carlo benchmark described by a config JSON.
    Bench(BenchArgs),
    /// Write the single-changepoint penalty profile of a record.
    ProfileBeta(ProfileArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Resonant mode frequency of the ambient model, Hz.
    #[arg(long, default_value_t = 0.372)]
    mode_freq_hz: f64,
    /// Relative damping of the mode, in (0, 1).
    #[arg(long, default_value_t = 0.0467)]
    damping_ratio: f64,
    /// Driving white-noise variance.
    #[arg(long, default_value_t = 0.16)]
    noise_variance: f64,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = 3.0)]
    sample_rate_hz: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<folo_core::ArmaModel> {
        ModelConfig {
            mode_freq_hz: self.mode_freq_hz,
            damping_ratio: self.damping_ratio,
            noise_variance: self.noise_variance,
            sample_rate_hz: self.sample_rate_hz,
        }
        .build()
        .context("invalid model parameters")
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Record length in samples.
    #[arg(long, default_value_t = 4500)]
    n_samples: usize,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oscillation amplitude in mHz; omit for an ambient-only record.
    #[arg(long)]
    fo_amp_mhz: Option<f64>,
    /// Oscillation frequency, Hz.
    #[arg(long, default_value_t = 0.370)]
    fo_freq_hz: f64,
    /// Oscillation phase, rad.
    #[arg(long, default_value_t = 0.0)]
    fo_phase_rad: f64,
    /// First sample of the oscillation.
    #[arg(long, default_value_t = 1535)]
    fo_start: usize,
    /// Last sample of the oscillation.
    #[arg(long, default_value_t = 3334)]
    fo_end: usize,
    /// Pass the oscillation through the model's input dynamics (with
    /// on/off transients) instead of adding the tone directly.
    #[arg(long, default_value_t = false)]
    filtered: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BetaStrategyArg {
    MeanProfile,
    HalfMax,
}

#[derive(Args)]
struct LocalizeArgs {
    /// Input record CSV (needs a `# sample_rate_hz = ...` header).
    #[arg(long)]
    record: PathBuf,
    /// Output intervals CSV.
    #[arg(long)]
    out: PathBuf,
    /// Penalty selection rule.
    #[arg(long, value_enum, default_value_t = BetaStrategyArg::MeanProfile)]
    beta_strategy: BetaStrategyArg,
    /// Smallest local SNR (dB) worth reporting.
    #[arg(long, default_value_t = -15.0)]
    snr_min_db: f64,
    /// Largest expected oscillation amplitude, mHz.
    #[arg(long, default_value_t = 10.0)]
    a_max_mhz: f64,
    /// Monitored band, Hz.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.1, 1.0])]
    band_hz: Vec<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment configuration JSON.
    #[arg(long, required_unless_present = "write_default_config")]
    config: Option<PathBuf>,
    /// Output directory for trials.csv, summary.csv and figures.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Override the worker count from the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Write the default configuration to this path and exit.
    #[arg(long)]
    write_default_config: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Input record CSV.
    #[arg(long)]
    record: PathBuf,
    /// Output profile CSV (tau1, beta columns).
    #[arg(long)]
    out: PathBuf,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let model = args.model.build()?;
    let record = match args.fo_amp_mhz {
        None => simulate_ambient(&model, args.n_samples, args.seed)?,
        Some(amp) => {
            let fo = ForcedOscillation {
                amplitude: amp,
                frequency_hz: args.fo_freq_hz,
                phase_rad: args.fo_phase_rad,
                start_sample: args.fo_start,
                end_sample: args.fo_end,
            };
            if args.filtered {
                simulate_armax(&model, &fo, args.n_samples, args.seed)?
            } else {
                let mut rec = simulate_ambient(&model, args.n_samples, args.seed)?;
                let tone = make_fo_input(&fo, args.n_samples, model.sample_rate_hz)?;
                for (y, u) in rec.samples.iter_mut().zip(&tone.samples) {
                    *y += u;
                }
                rec.label = "ambient + tone".into();
                rec
            }
        }
    };
    write_record(&args.out, &record, Some(args.seed), Some(&model))?;
    eprintln!(
        "wrote {} samples at {} Hz to {}",
        record.len(),
        record.sample_rate_hz,
        args.out.display()
    );
    Ok(())
}

fn cmd_localize(args: LocalizeArgs) -> Result<()> {
    if args.band_hz.len() != 2 || args.band_hz[0] >= args.band_hz[1] {
        bail!("--band-hz needs LO < HI");
    }
    let record = read_record(&args.record)?;
    let cfg = LocalizerConfig {
        beta_strategy: match args.beta_strategy {
            BetaStrategyArg::MeanProfile => BetaStrategyConfig::MeanProfile.into(),
            BetaStrategyArg::HalfMax => BetaStrategyConfig::HalfMax.into(),
        },
        snr_min_db: args.snr_min_db,
        a_max_mhz: args.a_max_mhz,
        monitored_band_hz: (args.band_hz[0], args.band_hz[1]),
        reference_model: None,
    };
    let report = localize_report(&record, &cfg)?;
    let comments = vec![
        format!("source = {}", args.record.display()),
        format!(
            "estimate: amplitude_mhz = {}, frequency_hz = {}, phase_rad = {}",
            fmt_f64(report.estimate.amplitude),
            fmt_f64(report.estimate.frequency_hz),
            fmt_f64(report.estimate.phase_rad)
        ),
        format!(
            "beta = {}, n_min_sl = {}, used_fallback = {}",
            report.beta.map(fmt_f64).unwrap_or_else(|| "none".into()),
            report.n_min_sl,
            report.used_fallback
        ),
    ];
    write_intervals(&args.out, &[(0, &report.intervals)], &comments)?;
    eprintln!(
        "{} interval(s) -> {}",
        report.intervals.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    if let Some(path) = args.write_default_config {
        let cfg = ExperimentConfig::default();
        std::fs::write(&path, cfg.to_json() + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote default config to {}", path.display());
        return Ok(());
    }
    let path = args.config.expect("clap enforces --config");
    let mut cfg = ExperimentConfig::from_path(&path)?;
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    let started = std::time::Instant::now();
    let out = run_monte_carlo(&cfg, &args.out)?;
    let secs = started.elapsed().as_secs_f64();
    eprintln!(
        "{} trials in {:.1} s -> {}",
        out.trials.len(),
        secs,
        args.out.display()
    );
    for row in &out.summary {
        eprintln!(
            "  snr {:>6.1} dB {:<9} mean {:>9.2} ms (std {:>8.2}), pelt calls {:>5.1}",
            row.snr_db, row.method, row.mean_wall_ms, row.std_wall_ms, row.mean_pelt_calls
        );
    }
    Ok(())
}

fn cmd_profile(args: ProfileArgs) -> Result<()> {
    let record = read_record(&args.record)?;
    let profile = penalty_profile(&record)?;
    let mut out = String::new();
    out.push_str("# folo penalty profile v1\n");
    out.push_str(&format!("# source = {}\n", args.record.display()));
    out.push_str(&format!("# beta_max = {}\n", fmt_f64(profile.beta_max)));
    out.push_str(&format!("# beta_mean = {}\n", fmt_f64(profile.beta_mean)));
    out.push_str("tau1,beta\n");
    for (i, b) in profile.beta_of_tau1.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, fmt_f64(*b)));
    }
    std::fs::write(&args.out, out).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "beta_max = {:.6}, beta_mean = {:.6} -> {}",
        profile.beta_max,
        profile.beta_mean,
        args.out.display()
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Localize(args) => cmd_localize(args),
        Command::Bench(args) => cmd_bench(args),
        Command::ProfileBeta(args) => cmd_profile(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
