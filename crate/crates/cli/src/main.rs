#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod checks;
mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{KeyValues, Layers, RunConfig};
use report::Run;

/// Posterior sampling for regularization-by-denoising models.
#[derive(Debug, Parser)]
#[command(name = "red-lwsgs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Degrade a ground truth image and write the observation.
    Simulate(RunFlags),
    /// Degrade, sample the posterior and report metrics.
    Sample(RunFlags),
    /// Score a denoiser against the RED conditions on random patches.
    VerifyDenoiser(checks::VerifyArgs),
    /// Step-size and coupling sweeps against exact Gaussian laws.
    OracleCheck(checks::OracleArgs),
    /// PSNR, SSIM and IAT of existing images and traces.
    Metrics(checks::MetricsArgs),
}

/// Flags mirror the config keys; they override the `--config` file.
#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
struct RunFlags {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ffhq-{deblur,inpaint,superres} or imagenet-{deblur,inpaint,superres}.
    #[arg(long)]
    preset: Option<String>,
    /// deblur, inpaint or superres.
    #[arg(long)]
    task: Option<String>,
    /// Ground truth (PNG or RFI1); a synthetic phantom otherwise.
    #[arg(long)]
    input: Option<String>,
    /// Side of the synthetic phantom.
    #[arg(long)]
    size: Option<String>,
    #[arg(long)]
    channels: Option<String>,
    /// Seed of the phantom, mask and observation noise.
    #[arg(long)]
    data_seed: Option<String>,
    #[arg(long)]
    kernel_size: Option<String>,
    #[arg(long)]
    kernel_std: Option<String>,
    #[arg(long)]
    mask_fraction: Option<String>,
    #[arg(long)]
    sr_factor: Option<String>,
    #[arg(long)]
    snr_db: Option<String>,
    /// lwsgs, red-ula, pnp-ula or sr-split.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    rho2: Option<String>,
    #[arg(long)]
    rho1_2: Option<String>,
    #[arg(long)]
    rho2_2: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Fraction of the inverse drift Lipschitz constant used when `gamma` is unset.
    #[arg(long)]
    gamma_scale: Option<String>,
    #[arg(long)]
    n_mc: Option<String>,
    #[arg(long)]
    n_bi: Option<String>,
    #[arg(long)]
    thin: Option<String>,
    /// Sampler seed; RED_LWSGS_SEED overrides the config file but not this flag.
    #[arg(long)]
    seed: Option<String>,
    /// Independent chains run concurrently and pooled.
    #[arg(long)]
    chains: Option<String>,
    /// parallel or sequential.
    #[arg(long)]
    execution: Option<String>,
    #[arg(long)]
    denoiser: Option<String>,
    #[arg(long)]
    nu_start: Option<String>,
    #[arg(long)]
    nu_end: Option<String>,
    /// auto, all, subset:<k> or a comma-separated pixel list.
    #[arg(long)]
    probes: Option<String>,
    #[arg(long)]
    box_lo: Option<String>,
    #[arg(long)]
    box_hi: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

impl RunFlags {
    fn key_values(&self) -> KeyValues {
        let pairs = [
            ("preset", &self.preset),
            ("task", &self.task),
            ("input", &self.input),
            ("size", &self.size),
            ("channels", &self.channels),
            ("data_seed", &self.data_seed),
            ("kernel_size", &self.kernel_size),
            ("kernel_std", &self.kernel_std),
            ("mask_fraction", &self.mask_fraction),
            ("sr_factor", &self.sr_factor),
            ("snr_db", &self.snr_db),
            ("sampler", &self.sampler),
            ("beta", &self.beta),
            ("rho2", &self.rho2),
            ("rho1_2", &self.rho1_2),
            ("rho2_2", &self.rho2_2),
            ("gamma", &self.gamma),
            ("gamma_scale", &self.gamma_scale),
            ("n_mc", &self.n_mc),
            ("n_bi", &self.n_bi),
            ("thin", &self.thin),
            ("seed", &self.seed),
            ("chains", &self.chains),
            ("execution", &self.execution),
            ("denoiser", &self.denoiser),
            ("nu_start", &self.nu_start),
            ("nu_end", &self.nu_end),
            ("probes", &self.probes),
            ("box_lo", &self.box_lo),
            ("box_hi", &self.box_hi),
            ("lambda", &self.lambda),
            ("out", &self.out),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn fail(e: &anyhow::Error, code: u8) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::from(code)
}

/// Resolves the configuration, then runs `body`; any failure after the
/// output directory exists is recorded in its manifest.
fn run_with_config(
    name: &str,
    flags: &RunFlags,
    body: fn(&RunConfig, &mut Run) -> Result<()>,
) -> ExitCode {
    let kv = Layers::gather(flags.config.as_deref(), flags.key_values()).and_then(|l| l.merge());
    let out_dir = kv
        .as_ref()
        .ok()
        .and_then(|m| m.get("out").cloned())
        .unwrap_or_else(|| "run".into());
    let mut run = match Run::start(out_dir.as_ref(), name) {
        Ok(r) => r,
        Err(e) => return fail(&e, EXIT_RUNTIME),
    };
    let cfg = kv.and_then(RunConfig::from_key_values);
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            let outcome = Err(anyhow::Error::new(report::ConfigError(format!("{e:#}"))));
            let _ = run.finish(&outcome);
            return fail(outcome.as_ref().unwrap_err(), EXIT_CONFIG);
        }
    };
    run.set_config(cfg.resolved.clone());
    let outcome = body(&cfg, &mut run);
    let code = if outcome.is_ok() { 0 } else { EXIT_RUNTIME };
    if let Err(e) = run.finish(&outcome) {
        return fail(&e, EXIT_RUNTIME);
    }
    match outcome {
        Ok(()) => ExitCode::from(code),
        Err(e) => fail(&e, code),
    }
}

fn run_plain(
    name: &str,
    out: &std::path::Path,
    body: impl FnOnce(&mut Run) -> Result<()>,
) -> ExitCode {
    let mut run = match Run::start(out, name) {
        Ok(r) => r,
        Err(e) => return fail(&e, EXIT_RUNTIME),
    };
    let outcome = body(&mut run);
    if let Err(e) = run.finish(&outcome) {
        return fail(&e, EXIT_RUNTIME);
    }
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, EXIT_RUNTIME),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(f) => run_with_config("simulate", f, run::run_simulate),
        Command::Sample(f) => run_with_config("sample", f, run::run_sample),
        Command::VerifyDenoiser(a) => {
            run_plain("verify-denoiser", &a.out, |r| checks::verify_denoiser(a, r))
        }
        Command::OracleCheck(a) => {
            run_plain("oracle-check", &a.out, |r| checks::oracle_check(a, r))
        }
        Command::Metrics(a) => match checks::metrics(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e, EXIT_RUNTIME),
        },
    }
}
