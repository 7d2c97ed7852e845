//! `simulate` and `sample`.

use anyhow::{Context, Result};
use red_lwsgs::denoise::{AnnealedDenoiser, DenoiserSchedule, NuSchedule};
use red_lwsgs::diagnostics::{
    acf, default_probe_set, iat_estimate, median_variance_probe, psnr, ssim, Psnr, IAT_MIN_LEN,
    SSIM_WINDOW,
};
use red_lwsgs::kernel::Kernel;
use red_lwsgs::operator::{degrade, sigma_from_snr, DegradationOp, Mask, NoiseModel};
use red_lwsgs::rng::RngStream;
use red_lwsgs::samplers::{
    run_chains, ChainSummary, Method, Problem, Projection, RunOptions, SamplerConfig, StepCheck,
};
use red_lwsgs::synthetic::phantom;
use red_lwsgs::{ImageField, Shape};

use crate::config::{ProbeSpec, RunConfig, SamplerKind, Task};
use crate::report::{csv_writer, num, write_metric_rows, Run};

const MASK_STREAM: u64 = u64::MAX - 1;
const NOISE_STREAM: u64 = u64::MAX - 2;
const PROBE_STREAM: u64 = u64::MAX - 3;
const MAX_ACF_LAG: usize = 200;

/// Ground truth, operator and the noisy observation.
pub struct Simulation {
    pub truth: ImageField,
    pub problem: Problem,
    /// `A^T y`, i.e. `y` for blur and the zero-filled data otherwise.
    pub backprojection: ImageField,
}

fn ground_truth(cfg: &RunConfig) -> Result<ImageField> {
    match &cfg.input {
        Some(p) => Ok(ImageField::load(p)?),
        None => Ok(phantom(
            Shape::new(cfg.size, cfg.size, cfg.channels),
            cfg.data_seed,
        )?),
    }
}

fn operator(cfg: &RunConfig, shape: Shape) -> Result<DegradationOp> {
    let blur = || Kernel::gaussian(cfg.kernel_size, cfg.kernel_std);
    Ok(match cfg.task {
        Task::Deblur => DegradationOp::Circulant(blur()?),
        Task::Inpaint => {
            let mut rng = RngStream::for_chain(cfg.data_seed, MASK_STREAM);
            DegradationOp::Mask(Mask::random(shape, cfg.mask_fraction, &mut rng)?)
        }
        Task::Superres => DegradationOp::BlurThenDownsample {
            kernel: blur()?,
            factor: cfg.sr_factor,
        },
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    let truth = ground_truth(cfg)?;
    let op = operator(cfg, truth.shape())?;
    let sigma = sigma_from_snr(&truth, &op, cfg.snr_db)?;
    let noise = NoiseModel::new(sigma)?;
    let mut rng = RngStream::for_chain(cfg.data_seed, NOISE_STREAM);
    let y = degrade(&truth, &op, noise, &mut rng)?;
    let backprojection = op.adjoint(&y, truth.shape())?;
    let problem = Problem::new(y, op, noise, truth.shape())?;
    Ok(Simulation {
        truth,
        problem,
        backprojection,
    })
}

fn psnr_text(p: Psnr) -> String {
    match p {
        Psnr::Finite(v) => num(v),
        Psnr::Infinite => "inf".into(),
    }
}

fn ssim_text(reference: &ImageField, test: &ImageField) -> Result<String> {
    if reference.height() < SSIM_WINDOW || reference.width() < SSIM_WINDOW {
        return Ok("NA".into());
    }
    Ok(num(ssim(reference, test)?))
}

fn write_images(run: &mut Run, name: &str, img: &ImageField, lo: f64, hi: f64) -> Result<()> {
    img.save_rfi(run.artifact(&format!("{name}.rfi")))?;
    img.save_png(run.artifact(&format!("{name}.png")), lo, hi)?;
    Ok(())
}

fn write_simulation(run: &mut Run, sim: &Simulation) -> Result<Vec<(String, String)>> {
    write_images(run, "truth", &sim.truth, 0.0, 1.0)?;
    write_images(run, "observation", &sim.backprojection, 0.0, 1.0)?;
    sim.problem.y.save_rfi(run.artifact("y.rfi"))?;
    run.detail("sigma", sim.problem.sigma());
    run.detail("operator", sim.problem.op.variant_name());
    Ok(vec![
        ("sigma".into(), num(sim.problem.sigma())),
        (
            "psnr_observation_vs_truth".into(),
            psnr_text(psnr(&sim.truth, &sim.backprojection, 1.0)?),
        ),
        (
            "ssim_observation_vs_truth".into(),
            ssim_text(&sim.truth, &sim.backprojection)?,
        ),
    ])
}

pub fn run_simulate(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let sim = simulate(cfg)?;
    let rows = write_simulation(run, &sim)?;
    write_metric_rows(&run.artifact("metrics.csv"), &rows)
}

/// Step size: the configured one, else `gamma_scale` over the Lipschitz
/// constant of the drift (`2 beta + 1/rho2` for split samplers,
/// `1/sigma^2 + 2 beta` for ULA, whose operators have norm at most one).
pub fn step_size(cfg: &RunConfig, sigma: f64) -> f64 {
    if let Some(g) = cfg.gamma {
        return g;
    }
    let lip = match (cfg.sampler, cfg.step_coupling()) {
        (SamplerKind::Lwsgs | SamplerKind::SrSplit, Some(r)) => 2.0 * cfg.beta + 1.0 / r,
        _ => 1.0 / (sigma * sigma) + 2.0 * cfg.beta,
    };
    cfg.gamma_scale / lip
}

fn probes(cfg: &RunConfig, n: usize) -> Vec<usize> {
    match &cfg.probes {
        ProbeSpec::Auto => default_probe_set(n, cfg.seed),
        ProbeSpec::All => (0..n).collect(),
        ProbeSpec::Subset(k) => {
            let mut idx: Vec<usize> = (0..n).collect();
            RngStream::for_chain(cfg.seed, PROBE_STREAM).shuffle(&mut idx);
            idx.truncate(*k);
            idx.sort_unstable();
            idx
        }
        ProbeSpec::List(v) => v.clone(),
    }
}

fn sample_chains(cfg: &RunConfig, sim: &Simulation, run: &mut Run) -> Result<(ChainSummary, f64)> {
    let shape = sim.problem.domain;
    let gamma = step_size(cfg, sim.problem.sigma());
    let scfg = SamplerConfig {
        beta: cfg.beta,
        rho2: cfg.step_coupling().unwrap_or(1.0),
        rho1_2: cfg.rho1_2,
        rho2_2: cfg.rho2_2,
        gamma,
        n_mc: cfg.n_mc,
        n_bi: cfg.n_bi,
        thin: cfg.thin,
        seed: cfg.seed,
    };
    let method = match cfg.sampler {
        SamplerKind::Lwsgs => Method::Lwsgs,
        SamplerKind::RedUla => Method::RedUla,
        SamplerKind::PnpUla => Method::PnpUla(Projection {
            lo: cfg.box_lo,
            hi: cfg.box_hi,
            lambda: Some(cfg.lambda.unwrap_or(2.0 * gamma)),
        }),
        SamplerKind::SrSplit => Method::SrSplit,
    };
    let denoiser: Box<dyn DenoiserSchedule> = match cfg.nu {
        Some((start, end)) => Box::new(AnnealedDenoiser::new(
            cfg.denoiser.clone(),
            shape,
            NuSchedule::new(start, end, cfg.n_bi)?,
        )?),
        None => Box::new(cfg.denoiser.build(shape)?),
    };
    let opts = RunOptions {
        probes: probes(cfg, shape.len()),
        ..RunOptions::default()
    };
    run.detail("gamma", gamma);
    let summary = run_chains(
        method,
        &scfg,
        &sim.problem,
        denoiser.as_ref(),
        &opts,
        cfg.chains,
        cfg.execution,
    )
    .context("sampling")?;
    Ok((summary, gamma))
}

fn write_traces(run: &mut Run, s: &ChainSummary, per_chain: usize) -> Result<()> {
    let mut w = csv_writer(&run.artifact("traces.csv"))?;
    let mut header = vec!["chain".to_string(), "sample".to_string()];
    header.extend(s.probes.iter().map(|p| format!("p{p}")));
    w.write_record(&header)?;
    let len = s.traces.first().map_or(0, Vec::len);
    for j in 0..len {
        let mut row = vec![(j / per_chain).to_string(), (j % per_chain).to_string()];
        row.extend(s.traces.iter().map(|t| num(t[j])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_sample(cfg: &RunConfig, run: &mut Run) -> Result<()> {
    let sim = simulate(cfg)?;
    let mut rows = write_simulation(run, &sim)?;
    let (s, gamma) = sample_chains(cfg, &sim, run)?;

    let std = s.std_x();
    write_images(run, "mean", &s.mean_x, 0.0, 1.0)?;
    write_images(run, "std", &std, 0.0, std.max_abs().max(f64::MIN_POSITIVE))?;
    let per_chain = cfg.n_mc - cfg.n_bi;
    write_traces(run, &s, per_chain)?;

    let p_mean = psnr(&sim.truth, &s.mean_x, 1.0)?;
    let p_obs = psnr(&sim.truth, &sim.backprojection, 1.0)?;
    rows.push(("gamma".into(), num(gamma)));
    rows.push(("psnr_mean_vs_truth".into(), psnr_text(p_mean)));
    rows.push((
        "ssim_mean_vs_truth".into(),
        ssim_text(&sim.truth, &s.mean_x)?,
    ));
    rows.push(("psnr_gain_db".into(), num(p_mean.db() - p_obs.db())));
    rows.push((
        "mean_posterior_std".into(),
        num(std.data().iter().sum::<f64>() / std.len() as f64),
    ));
    rows.push(("samples".into(), s.count.to_string()));
    rows.push(("chains".into(), s.chains.to_string()));
    rows.push(("projection_fraction".into(), num(s.projection_fraction())));
    rows.push((
        "step_check".into(),
        match s.step_check {
            StepCheck::Verified { .. } => "verified".into(),
            StepCheck::Unverified => "unverified".into(),
        },
    ));

    if !s.traces.is_empty() {
        let k = median_variance_probe(&s.traces)?;
        let trace = &s.traces[k];
        rows.push(("median_probe_pixel".into(), s.probes[k].to_string()));
        let (iat, window, reliable) = if trace.len() >= IAT_MIN_LEN {
            match iat_estimate(trace) {
                Ok(e) => (num(e.value), e.window.to_string(), e.reliable.to_string()),
                Err(_) => ("NA".into(), "NA".into(), "false".into()),
            }
        } else {
            ("NA".into(), "NA".into(), "false".into())
        };
        rows.push(("iat_median_probe".into(), iat));
        rows.push(("iat_window".into(), window));
        rows.push(("iat_reliable".into(), reliable));
        if let Ok(r) = acf(trace, MAX_ACF_LAG.min(trace.len().saturating_sub(1))) {
            let mut w = csv_writer(&run.artifact("acf.csv"))?;
            w.write_record(["lag", "acf"])?;
            for (lag, v) in r.iter().enumerate() {
                w.write_record([lag.to_string(), num(*v)])?;
            }
            w.flush()?;
        }
    }
    run.detail("samples", s.count);
    run.detail("chains", s.chains);
    run.detail("sampling_seconds", s.wall_seconds);
    write_metric_rows(&run.artifact("metrics.csv"), &rows)
}
