//! `verify-denoiser`, `oracle-check` and `metrics`.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use red_lwsgs::denoise::{
    extract_patches, verify_red_conditions_with, DenoiserSpec, RedCheckOptions,
};
use red_lwsgs::diagnostics::{iat_estimate, mse, psnr, ssim, IAT_MIN_LEN, SSIM_WINDOW};
use red_lwsgs::kernel::Kernel;
use red_lwsgs::operator::{degrade, DegradationOp, NoiseModel};
use red_lwsgs::oracle::{
    axda_marginal, dense_denoiser, evaluate_bounds, linear_posterior, lwsgs_stationary,
    w2_gaussians, w2_squared, BoundInputs, DenseProblem,
};
use red_lwsgs::par::Execution;
use red_lwsgs::rng::RngStream;
use red_lwsgs::samplers::ConditionalGaussianSolver;
use red_lwsgs::synthetic::phantom;
use red_lwsgs::{ImageField, Shape};

use crate::report::{csv_writer, num, write_metric_rows, Run};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Denoiser spec, e.g. `gauss:5:1.0:0.05`, `dct:0.3:0.05`, `plugin:<path>:<nu>`.
    #[arg(long, default_value = "dct:0.3:0.05")]
    pub denoiser: String,
    /// Image to cut patches from (PNG or RFI1); a synthetic phantom otherwise.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 16)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub patches: usize,
    /// Homogeneity perturbation and finite-difference step.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 0, env = "RED_LWSGS_SEED")]
    pub seed: u64,
    #[arg(long, default_value = "parallel", value_parser = ["parallel", "sequential"])]
    pub execution: String,
    #[arg(long, default_value = "verify")]
    pub out: PathBuf,
}

fn execution(s: &str) -> Execution {
    if s == "sequential" {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

pub fn verify_denoiser(a: &VerifyArgs, run: &mut Run) -> Result<()> {
    let spec = DenoiserSpec::parse(&a.denoiser)?;
    let image = match &a.input {
        Some(p) => ImageField::load(p)?,
        None => phantom(Shape::gray(a.size, a.size), a.seed)?,
    };
    let mut rng = RngStream::new(a.seed);
    let patches = extract_patches(&image, a.patch_size, a.patches, &mut rng)?;
    let shape = patches[0].shape();
    let d = spec.build(shape)?;
    let opts = RedCheckOptions {
        exec: execution(&a.execution),
        ..RedCheckOptions::new(a.eps)
    };
    let r = verify_red_conditions_with(&d, &patches, &opts)?;
    let mut rows = vec![
        ("nmse_lh1".to_string(), num(r.nmse_lh1)),
        ("nmse_lh2".into(), num(r.nmse_lh2)),
        ("nmse_js".into(), num(r.nmse_js)),
        ("msr".into(), num(r.msr)),
        ("patch_count".into(), r.patch_count.to_string()),
        ("skipped".into(), r.skipped.to_string()),
        ("probe_epsilon".into(), num(r.probe_epsilon)),
    ];
    if let Some(c) = d.curvature(shape) {
        let c = c?;
        rows.push(("m_g".into(), num(c.m_g)));
        rows.push(("big_m_g".into(), num(c.big_m_g)));
    }
    for (k, v) in &rows {
        println!("{k:>14} {v}");
    }
    write_metric_rows(&run.artifact("red_conditions.csv"), &rows)
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Side of the square test image; the dense oracle needs side^2 <= 64^2.
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    #[arg(long, default_value_t = 3)]
    pub kernel_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub kernel_std: f64,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    /// A linear built-in denoiser.
    #[arg(long, default_value = "gauss:3:1.0:0.05")]
    pub denoiser: String,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho2: f64,
    #[arg(long, default_value_t = 1, env = "RED_LWSGS_SEED")]
    pub seed: u64,
    #[arg(long, default_value = "oracle")]
    pub out: PathBuf,
}

/// Step-size sweep of the discretization bias and coupling sweep of the
/// split-model error, both from the exact Gaussian laws.
pub fn oracle_check(a: &OracleArgs, run: &mut Run) -> Result<()> {
    let shape = Shape::gray(a.size, a.size);
    let op = DegradationOp::Circulant(Kernel::gaussian(a.kernel_size, a.kernel_std)?);
    let truth = phantom(shape, a.seed)?;
    let noise = NoiseModel::new(a.sigma)?;
    let y = degrade(&truth, &op, noise, &mut RngStream::new(a.seed))?;
    let dense = DenseProblem::from_operator(&op, shape, &y, a.sigma)?;
    let d = DenoiserSpec::parse(&a.denoiser)?.build(shape)?;
    let w = dense_denoiser(&d, shape)?;
    let Some(curv) = d.curvature(shape) else {
        bail!("oracle-check needs a linear built-in denoiser");
    };
    let curv = curv?;
    let q_inv_norm = ConditionalGaussianSolver::for_operator(
        &op,
        shape,
        1.0 / (a.sigma * a.sigma),
        1.0 / a.rho2,
    )?
    .inverse_norm();

    let mut w_csv = csv_writer(&run.artifact("oracle.csv"))?;
    w_csv.write_record(["check", "parameter", "value", "bound", "holds"])?;
    let target = axda_marginal(&w, a.beta, a.rho2, &dense)?;
    let gmax = 1.0 / (a.beta * curv.big_m_g + 1.0 / a.rho2);
    let mut biases = Vec::new();
    let mut all_hold = true;
    for k in 0..4 {
        let gamma = gmax / f64::powi(2.0, k);
        let law = lwsgs_stationary(&w, a.beta, a.rho2, gamma, &dense)?;
        let bias = w2_squared(&target.joint, &law.joint)?;
        let inputs = BoundInputs {
            n: shape.len(),
            beta: a.beta,
            rho2: a.rho2,
            gamma,
            m_g: curv.m_g,
            big_m_g: curv.big_m_g,
            q_inv_norm,
        };
        let bound = evaluate_bounds(&inputs, 1, 0.0)?.bias_rhs;
        let holds = bias <= bound && biases.last().is_none_or(|&p| bias < p);
        all_hold &= holds;
        w_csv.write_record([
            "bias_w2_squared",
            &num(gamma),
            &num(bias),
            &num(bound),
            &holds.to_string(),
        ])?;
        biases.push(bias);
    }
    for k in 1..biases.len() {
        w_csv.write_record([
            "bias_halving_ratio",
            &num(gmax / f64::powi(2.0, k as i32)),
            &num(biases[k - 1] / biases[k]),
            "",
            "",
        ])?;
    }
    let post = linear_posterior(&w, a.beta, &dense)?;
    let mut prev = f64::INFINITY;
    for rho2 in [1.0, 1e-1, 1e-2, 1e-3] {
        let d2 = w2_gaussians(&post, &axda_marginal(&w, a.beta, rho2, &dense)?.x)?;
        let holds = d2 < prev;
        all_hold &= holds;
        w_csv.write_record(["split_w2", &num(rho2), &num(d2), "", &holds.to_string()])?;
        prev = d2;
    }
    w_csv.flush()?;
    run.detail("all_hold", all_hold);
    println!("oracle checks {}", if all_hold { "hold" } else { "FAILED" });
    Ok(())
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// CSV whose numeric columns are chains (`chain` and `sample` columns are skipped).
    #[arg(long)]
    pub trace: Vec<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
    #[arg(long, default_value = "metrics.csv")]
    pub out: PathBuf,
}

fn trace_columns(path: &PathBuf) -> Result<Vec<(String, Vec<f64>)>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for rec in r.records() {
        let rec = rec?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .with_context(|| format!("{}: {field:?} is not a number", path.display()))?;
            cols[c].push(v);
        }
    }
    Ok(headers
        .into_iter()
        .zip(cols)
        .filter(|(h, _)| h != "chain" && h != "sample")
        .collect())
}

pub fn metrics(a: &MetricsArgs) -> Result<()> {
    let reference = ImageField::load(&a.reference)?;
    let test = ImageField::load(&a.test)?;
    let p = psnr(&reference, &test, a.peak)?;
    let mut rows = vec![
        ("mse".to_string(), num(mse(&reference, &test)?)),
        (
            "psnr".into(),
            if p.is_infinite() {
                "inf".into()
            } else {
                num(p.db())
            },
        ),
    ];
    let ssim_v = if reference.height() < SSIM_WINDOW || reference.width() < SSIM_WINDOW {
        "NA".into()
    } else {
        num(ssim(&reference, &test)?)
    };
    rows.push(("ssim".into(), ssim_v));
    for path in &a.trace {
        for (name, series) in trace_columns(path)? {
            let (v, ok) = if series.len() >= IAT_MIN_LEN {
                let e = iat_estimate(&series)?;
                (num(e.value), e.reliable)
            } else {
                ("NA".into(), false)
            };
            rows.push((format!("iat_{name}"), v));
            rows.push((format!("iat_reliable_{name}"), ok.to_string()));
        }
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_metric_rows(&a.out, &rows)
}
