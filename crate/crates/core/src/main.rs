use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gmi_lfit::channel::ChannelModel;
use gmi_lfit::error::{Error, Result};
use gmi_lfit::estimator::MmseEstimator;
use gmi_lfit::gmi::{gmi_mmse_with, nats_to_bits};
use gmi_lfit::harness::{
    format_g6, gmi_sweep, lfit_eval, loss_csv, median, over_estimation_probability, rate_cdf_csv, run_clt_trials,
    run_trials, sweep_csv, ExperimentConfig,
};
use gmi_lfit::lfit::LfitConfig;
use gmi_lfit::regress::RegressorSpec;

#[derive(Parser)]
#[command(name = "gmi-lfit", version, about = "GMI analysis and learned-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// LMMSE and MMSE GMIs over the SNR grid of the `[sweep]` table.
    GmiSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Over-estimation probability and receding level for each λ.
    LfitEval {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated λ values; defaults to `regressor.lambda`.
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rate CDFs for an AWGN channel at P = 100 with a least-squares fit.
    AwgnDemo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        eval_samples: usize,
    },
    /// Split-validation rate with a target over-estimation probability.
    CltRate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn reference_rate(cfg: &ExperimentConfig) -> Result<f64> {
    Ok(gmi_mmse_with(&MmseEstimator::with_order(&cfg.channel, cfg.quad_order)?)?.gmi_nats)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GmiSweep { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("missing [sweep] table".into()))?;
            let rows = gmi_sweep(&cfg.channel, &sweep.snr_db, &sweep.kinds, cfg.quad_order)?;
            write(&out, &sweep_csv(&rows))
        }
        Command::LfitEval { config, lambda_grid, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let grid = lambda_grid.unwrap_or_else(|| vec![cfg.lfit.regressor.lambda()]);
            let rows = lfit_eval(&cfg, &grid, reference_rate(&cfg)?)?;
            write(&out, &loss_csv(&rows))
        }
        Command::AwgnDemo { out, trials, seed, eval_samples } => {
            let channel = ChannelModel::awgn(100.0, 1.0)?;
            let lfit = LfitConfig::new(5, 1.002, 0.998, RegressorSpec::Ridge { lambda: 0.0 });
            let mut cfg = ExperimentConfig::new(channel, 800, lfit);
            cfg.trials = trials;
            cfg.seed = seed;
            cfg.eval_samples = eval_samples;
            let records = run_trials(&cfg)?;
            write(&out, &rate_cdf_csv(&records))?;
            let r_t: Vec<f64> = records.iter().map(|r| nats_to_bits(r.r_t)).collect();
            println!("trials: {}", records.len());
            println!("p_oe_pct: {}", format_g6(100.0 * over_estimation_probability(&records)?));
            println!("median_r_t_bits: {}", format_g6(median(&r_t).unwrap_or(f64::NAN)));
            Ok(())
        }
        Command::CltRate { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let records = run_clt_trials(&cfg)?;
            let p_oe = over_estimation_probability(&records)?;
            let mean_r = records.iter().map(|r| r.r_t).sum::<f64>() / records.len() as f64;
            let summary = format!(
                "trials,nu,target_poe_pct,p_oe_pct,mean_r_t_nats,mean_r_t_bits\n{},{},{},{},{},{}\n",
                records.len(),
                format_g6(cfg.clt.nu),
                format_g6(100.0 * cfg.clt.target_poe),
                format_g6(100.0 * p_oe),
                format_g6(mean_r),
                format_g6(nats_to_bits(mean_r))
            );
            print!("{summary}");
            match out {
                Some(path) => write(&path, &summary),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gmi-lfit: error: {e}");
            ExitCode::FAILURE
        }
    }
}
